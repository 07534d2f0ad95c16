// Command-line front end. Every subcommand parses flags, makes one library
// call (or one short loop of them) and prints a JSON summary on stdout.

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "normscaler/calib.hpp"
#include "normscaler/dln.hpp"
#include "normscaler/harness.hpp"
#include "normscaler/model.hpp"
#include "normscaler/rng.hpp"
#include "normscaler/solver.hpp"
#include "normscaler/theory.hpp"

using nlohmann::json;
namespace ns = normscaler;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitNumeric = 2;

json num(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

int exit_code_for(ns::ErrorKind kind) {
  switch (kind) {
    case ns::ErrorKind::NonFinite:
    case ns::ErrorKind::DegenerateInstance:
    case ns::ErrorKind::SingularGram:
    case ns::ErrorKind::NotConverged:
    case ns::ErrorKind::DegenerateFit:
      return kExitNumeric;
    default:
      return kExitConfig;
  }
}

struct InstanceFlags {
  int n = 20;
  int d = 0;
  double kappa = 0.0;
  std::string target = "e1";
  int s = 1;
  double a = std::nan("");
  double sigma = 0.0;
  std::uint64_t seed = 1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--n", n, "Sample size (rows of X)")->check(CLI::PositiveNumber);
    cmd->add_option("--d", d, "Fixed dimension d (columns of X); exclusive with --kappa");
    cmd->add_option("--kappa", kappa, "Proportional design, d = ceil(kappa n); kappa > 1");
    cmd->add_option("--target", target, "Target kind: e1 | flat");
    cmd->add_option("--s", s, "Support size for flat targets");
    cmd->add_option("--a", a, "Per-coordinate magnitude on the support (default 1 for e1, 1/sqrt(s) for flat)");
    cmd->add_option("--sigma", sigma, "Noise standard deviation (label units)");
    cmd->add_option("--seed", seed, "Instance seed (64-bit)");
  }

  ns::TargetSpec target_spec() const {
    std::optional<double> mag;
    if (!std::isnan(a)) mag = a;
    switch (ns::target_kind_from_string(target)) {
      case ns::TargetKind::SingleSpike:
        return ns::TargetSpec::single_spike(mag.value_or(1.0));
      case ns::TargetKind::FlatSupport:
        return ns::TargetSpec::flat(s, mag);
      default:
        throw ns::Error(ns::ErrorKind::ConfigError, "custom targets need a sweep config");
    }
  }

  ns::DesignSpec design_spec() const {
    if (d > 0 && kappa > 0.0) throw ns::Error(ns::ErrorKind::ConfigError, "--d and --kappa are exclusive");
    if (kappa > 0.0) return ns::DesignSpec::proportional(kappa);
    return ns::DesignSpec::fixed(d > 0 ? d : 5 * n);
  }

  ns::ProblemInstance make() const {
    return ns::gen_instance(target_spec(), design_spec(), sigma, n, seed);
  }
};

// JSON key for an r value: "1", "1.5", "1.1".
std::string format_r(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", r);
  return buf;
}

json norm_table(const ns::Vector& w, const std::vector<double>& rs) {
  json table = json::object();
  for (double r : rs) table[format_r(r)] = ns::lr_norm(w, r);
  return table;
}

// Splices keys of a flat JSON object into argv as "--key value" pairs unless
// the flag already appears on the command line. Flags therefore win.
std::vector<std::string> splice_config(const std::vector<std::string>& args, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ns::Error(ns::ErrorKind::IoError, "cannot open config '" + path + "'");
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::exception& e) {
    throw ns::Error(ns::ErrorKind::ConfigError, std::string("invalid JSON: ") + e.what());
  }
  if (!cfg.is_object()) throw ns::Error(ns::ErrorKind::ConfigError, "config must be a JSON object");

  std::set<std::string> given;
  for (const auto& a : args) {
    if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') - 2));
  }
  std::vector<std::string> out = args;
  for (const auto& item : cfg.items()) {
    if (given.count(item.key())) continue;
    out.push_back("--" + item.key());
    auto push_value = [&out](const json& v) {
      out.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    };
    if (item.value().is_array()) {
      for (const auto& v : item.value()) push_value(v);
    } else if (item.value().is_boolean()) {
      out.back() += item.value().get<bool>() ? "=true" : "=false";
    } else {
      push_value(item.value());
    }
  }
  return out;
}

void log_line(const std::string& msg) { std::cerr << msg << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);

  // --config is handled before CLI11 so that its keys become ordinary flags;
  // sweep configs are structured documents and are parsed by the harness instead.
  const bool is_sweep = !args.empty() && args.front() == "sweep";
  if (!is_sweep) {
    for (std::size_t i = 0; i + 1 < args.size(); ++i) {
      if (args[i] == "--config") {
        const std::string path = args[i + 1];
        args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
        try {
          args = splice_config(args, path);
        } catch (const ns::Error& e) {
          std::cerr << "error: " << e.what() << '\n';
          return kExitConfig;
        }
        break;
      }
    }
  }

  CLI::App app{"Minimum-lp interpolation: solver, theory, sweeps, DLN training and calibration"};
  app.require_subcommand(1);
  app.allow_extras(false);

  // gen
  InstanceFlags gen_flags;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "Generate an instance and summarise it");
  gen_flags.attach(gen);
  gen->add_option("--out", gen_out, "Optional JSON file receiving X (row-major), Y and w_star");

  // solve
  InstanceFlags solve_flags;
  double solve_p = 1.5;
  std::vector<double> solve_r;
  ns::SolverOptions solve_opts;
  std::string solve_ls = "BarzilaiBorwein";
  auto* solve = app.add_subcommand("solve", "Minimum-lp interpolator on a generated instance");
  solve_flags.attach(solve);
  solve->add_option("--p", solve_p, "Norm exponent p in (1, 2]");
  solve->add_option("--r", solve_r, "Norm indices r to report (default: 1 and p)");
  solve->add_option("--tol-feas", solve_opts.tol_feas, "Relative feasibility tolerance ||Xw-Y||/||Y||");
  solve->add_option("--tol-cert", solve_opts.tol_cert, "Relative tolerance on the primal-dual identities");
  solve->add_option("--max-iters", solve_opts.max_iters, "Iteration cap for the dual ascent");
  solve->add_option("--line-search", solve_ls, "BarzilaiBorwein | Backtracking");

  // theory
  double th_p = 1.5;
  double th_r = 1.0;
  double th_kappa = 9.0;
  double th_n = 1000.0;
  double th_sigma = 0.0;
  std::string th_target = "e1";
  int th_s = 1;
  double th_a = std::nan("");
  auto* theory = app.add_subcommand("theory", "Closed-form scaling predictions for one cell");
  theory->add_option("--p", th_p, "Norm exponent p in (1, 2]");
  theory->add_option("--r", th_r, "Norm index r of the predicted ||w_hat||_r");
  theory->add_option("--kappa", th_kappa, "Bulk aspect ratio kappa_bulk = (d - s) / n");
  theory->add_option("--n", th_n, "Sample size");
  theory->add_option("--sigma", th_sigma, "Noise standard deviation");
  theory->add_option("--target", th_target, "e1 | flat");
  theory->add_option("--s", th_s, "Support size for flat targets");
  theory->add_option("--a", th_a, "Support magnitude (default 1 for e1, 1/sqrt(s) for flat)");

  // sweep
  std::string sw_config;
  std::string sw_output;
  std::string sw_experiment;
  std::uint64_t sw_base_seed = 0;
  int sw_seeds = 0;
  int sw_threads = 0;
  auto* sweep = app.add_subcommand("sweep", "Run a JSON sweep recipe and write its CSV");
  sweep->add_option("--config", sw_config, "Sweep recipe (JSON, SweepConfig field names)")->required();
  auto* sw_output_opt = sweep->add_option("--output", sw_output, "CSV output path (overrides output_path)");
  auto* sw_exp_opt = sweep->add_option("--experiment-id", sw_experiment, "Experiment id (overrides the recipe)");
  auto* sw_seed_opt = sweep->add_option("--base-seed", sw_base_seed, "Base seed (overrides the recipe)");
  auto* sw_seeds_opt = sweep->add_option("--seeds", sw_seeds, "Seeds per cell (overrides the recipe)");
  sweep->add_option("--threads", sw_threads, "Worker threads (0 = hardware; capped by NORMSCALER_THREADS)");

  // calibrate
  std::vector<double> cal_alpha;
  double cal_p_target = std::nan("");
  std::vector<double> cal_bracket{1e-6, 1e3};
  double cal_tol = 1e-3;
  double cal_kmax = 1e4;
  int cal_kcount = 32;
  auto* calibrate = app.add_subcommand("calibrate", "Slope-matching map alpha -> p_eff and its inverse");
  calibrate->add_option("--alpha", cal_alpha, "Initialization scale(s) alpha > 0 (dimensionless)");
  calibrate->add_option("--p-target", cal_p_target, "Invert: find alpha with p_eff(alpha) = p_target");
  calibrate->add_option("--bracket", cal_bracket, "alpha bracket for --p-target (two values)")->expected(2);
  calibrate->add_option("--tol", cal_tol, "Tolerance for --p-target (on p and on log alpha)");
  calibrate->add_option("--k-max", cal_kmax, "Largest probe sparsity k");
  calibrate->add_option("--k-count", cal_kcount, "Number of log-spaced probe sparsities before deduplication");

  // dln-train
  InstanceFlags dln_flags;
  ns::DlnConfig dln_cfg;
  std::vector<double> dln_r;
  auto* dln = app.add_subcommand("dln-train", "Train a diagonal linear network by full-batch GD");
  dln_flags.attach(dln);
  dln->add_option("--alpha", dln_cfg.alpha, "Initialization scale alpha > 0");
  dln->add_option("--lr", dln_cfg.lr, "Learning rate (step size per epoch)");
  dln->add_option("--max-epochs", dln_cfg.max_epochs, "Epoch cap");
  dln->add_option("--loss-tol", dln_cfg.loss_tol, "Stop once the mean squared training loss is below this");
  dln->add_option("--divergence-factor", dln_cfg.divergence_factor, "Diverged once loss exceeds this multiple of the initial loss");
  dln->add_option("--grad-noise", dln_cfg.grad_noise_std, "Std of Gaussian noise added to each gradient coordinate");
  dln->add_option("--r", dln_r, "Norm indices r to report (default 1 and 1.1)");

  // diagnose
  InstanceFlags diag_flags;
  double diag_q = 3.0;
  int diag_seeds = 1;
  auto* diagnose = app.add_subcommand("diagnose", "Concentration diagnostics of X^T Y, averaged over seeds");
  diag_flags.attach(diagnose);
  diagnose->add_option("--q", diag_q, "Dual exponent q >= 2");
  diagnose->add_option("--seeds", diag_seeds, "Number of consecutive seeds to average over");

  // CLI11 consumes argv back to front.
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  json out;
  int code = 0;
  try {
    if (*gen) {
      const auto inst = gen_flags.make();
      out = {{"n", inst.n},
             {"d", inst.d},
             {"s", inst.s},
             {"sigma", inst.sigma},
             {"seed", inst.seed},
             {"y_norm_sq", inst.Y.squaredNorm()},
             {"w_star_l2", inst.w_star.norm()}};
      if (!gen_out.empty()) {
        json dump = {{"n", inst.n}, {"d", inst.d}};
        dump["X"] = std::vector<double>();
        for (int i = 0; i < inst.n; ++i) {
          for (int j = 0; j < inst.d; ++j) dump["X"].push_back(inst.X(i, j));
        }
        dump["Y"] = std::vector<double>(inst.Y.data(), inst.Y.data() + inst.Y.size());
        dump["w_star"] = std::vector<double>(inst.w_star.data(), inst.w_star.data() + inst.w_star.size());
        std::ofstream f(gen_out);
        if (!(f << dump.dump() << '\n')) throw ns::Error(ns::ErrorKind::IoError, "cannot write '" + gen_out + "'");
        out["written"] = gen_out;
      }
    } else if (*solve) {
      if (solve_ls == "Backtracking") {
        solve_opts.line_search = ns::LineSearch::Backtracking;
      } else if (solve_ls != "BarzilaiBorwein") {
        throw ns::Error(ns::ErrorKind::ConfigError, "--line-search must be BarzilaiBorwein or Backtracking");
      }
      if (solve_r.empty()) solve_r = {1.0, solve_p};
      const auto inst = solve_flags.make();
      const auto sol = ns::solve_min_lp(inst.X, inst.Y, solve_p, solve_opts);
      out = {{"p", solve_p},
             {"n", inst.n},
             {"d", inst.d},
             {"feas_residual", sol.feas_residual},
             {"cert_residual", sol.cert_residual},
             {"iters", sol.iters},
             {"converged", sol.converged},
             {"t_star_empirical", num(sol.t_star_empirical)},
             {"norms", norm_table(sol.w_hat, solve_r)},
             {"population_risk", ns::population_risk(sol.w_hat, inst.w_star, inst.sigma)}};
      if (!sol.converged) {
        log_line("solver did not reach the requested tolerances");
        code = kExitNumeric;
      }
    } else if (*theory) {
      InstanceFlags shape;
      shape.target = th_target;
      shape.s = th_s;
      shape.a = th_a;
      const ns::TargetSpec spec = shape.target_spec();
      const int s = spec.support_size();
      const ns::Vector w = ns::gen_target(spec, s);
      // The target only enters through its support, so d = s + kappa n reproduces kappa_bulk exactly.
      const auto in = ns::make_theory_inputs(w, th_sigma, th_p, th_r, th_n, s + th_kappa * th_n);
      const auto pred = ns::unified_norm_prediction(in, th_n);
      out = {{"p", th_p},
             {"q", in.q},
             {"r", th_r},
             {"n", th_n},
             {"kappa_bulk", in.kappa_bulk},
             {"n_star", num(pred.n_star)},
             {"boundary_p", pred.boundary_p},
             {"r_star", pred.r_star},
             {"regime", ns::to_string(pred.regime)},
             {"norm_pred", num(pred.value)},
             {"slope_pred", num(pred.slope)},
             {"t_star_pred", num(ns::ray_scale_prediction(in, th_n))},
             {"terms",
              {{"spike_main", num(pred.terms.spike_main)},
               {"bulk", num(pred.terms.bulk)},
               {"spike_remainder", num(pred.terms.spike_remainder)}}}};
    } else if (*sweep) {
      ns::SweepConfig cfg = ns::load_sweep_config(sw_config);
      if (sw_output_opt->count()) cfg.output_path = sw_output;
      if (sw_exp_opt->count()) cfg.experiment_id = sw_experiment;
      if (sw_seed_opt->count()) cfg.base_seed = sw_base_seed;
      if (sw_seeds_opt->count()) cfg.seeds_per_cell = sw_seeds;
      ns::SweepOptions opts;
      opts.threads = sw_threads;
      opts.log = log_line;
      const auto records = ns::run_sweep(cfg, opts);
      long failed = 0;
      long unconverged = 0;
      for (const auto& r : records) {
        if (r.status.rfind("failed", 0) == 0) ++failed;
        if (r.status == "not_converged" || r.status == "max_epochs" || r.status == "diverged") ++unconverged;
      }
      out = {{"experiment_id", cfg.experiment_id},
             {"records", records.size()},
             {"failed", failed},
             {"unconverged", unconverged},
             {"output_path", cfg.output_path}};
      if (failed > 0 || unconverged > 0) code = kExitNumeric;
    } else if (*calibrate) {
      ns::CalibrationConfig cfg;
      cfg.k_grid = ns::CalibrationConfig::default_k_grid(cal_kcount, cal_kmax);
      if (!std::isnan(cal_p_target)) {
        const double alpha = ns::alpha_for_p(cal_p_target, {cal_bracket[0], cal_bracket[1]}, cal_tol, cfg);
        const auto fit = ns::p_eff(alpha, cfg);
        out = {{"p_target", cal_p_target}, {"alpha", alpha}, {"p_eff", fit.p}, {"stderr", fit.fit_stderr}};
      } else {
        if (cal_alpha.empty()) throw ns::Error(ns::ErrorKind::ConfigError, "give --alpha or --p-target");
        json table = json::array();
        for (double alpha : cal_alpha) {
          const auto fit = ns::p_eff(alpha, cfg);
          table.push_back({{"alpha", alpha}, {"p_eff", fit.p}, {"stderr", fit.fit_stderr}});
        }
        out = cal_alpha.size() == 1 ? table.front() : json{{"table", table}};
      }
    } else if (*dln) {
      if (dln_r.empty()) dln_r = {1.0, 1.1};
      dln_cfg.noise_seed = ns::mix64(dln_flags.seed);
      const auto inst = dln_flags.make();
      const auto rep = ns::dln_train(inst.X, inst.Y, dln_cfg);
      out = {{"alpha", dln_cfg.alpha},
             {"lr", dln_cfg.lr},
             {"p_eff", ns::p_eff(dln_cfg.alpha).p},
             {"status", ns::to_string(rep.status)},
             {"epochs", rep.epochs_run},
             {"final_loss", num(rep.final_loss)},
             {"norms", norm_table(rep.beta, dln_r)},
             {"population_risk", ns::population_risk(rep.beta, inst.w_star, inst.sigma)}};
      if (rep.status != ns::TrainStatus::Interpolated) code = kExitNumeric;
    } else if (*diagnose) {
      if (diag_seeds < 1) throw ns::Error(ns::ErrorKind::ConfigError, "--seeds must be >= 1");
      std::map<std::string, double> sums;
      json last;
      for (int k = 0; k < diag_seeds; ++k) {
        InstanceFlags f = diag_flags;
        f.seed = diag_flags.seed + static_cast<std::uint64_t>(k);
        last = ns::to_json(ns::diagnose_concentration(f.make(), diag_q));
        for (const auto& item : last.items()) {
          if (item.value().is_number()) sums[item.key()] += item.value().get<double>() / diag_seeds;
        }
      }
      out = {{"seeds", diag_seeds}, {"q", diag_q}, {"bulk_defined", last["bulk_defined"]}};
      for (const auto& [k, v] : sums) out[k] = v;
    }
  } catch (const ns::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  std::cout << out.dump(2) << '\n';
  return code;
}
