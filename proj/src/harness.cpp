#include "normscaler/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include "normscaler/calib.hpp"
#include "normscaler/rng.hpp"

namespace normscaler {

namespace {

bool same_double(double a, double b) {
  return (std::isnan(a) && std::isnan(b)) || a == b;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_double(const std::string& field) {
  errno = 0;
  char* end = nullptr;
  const double value = std::strtod(field.c_str(), &end);
  if (end == field.c_str() || *end != '\0') {
    throw Error(ErrorKind::SchemaMismatch, "not a number: '" + field + "'");
  }
  return value;
}

template <typename Int>
Int parse_integer(const std::string& field) {
  std::istringstream in(field);
  Int value{};
  in >> value;
  if (in.fail() || !in.eof()) throw Error(ErrorKind::SchemaMismatch, "not an integer: '" + field + "'");
  return value;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string csv_row(const SweepRecord& r) {
  std::string row;
  auto put = [&row](const std::string& s) {
    if (!row.empty()) row += ',';
    row += s;
  };
  put(r.experiment_id);
  put(std::to_string(r.seed));
  put(std::to_string(r.n));
  put(std::to_string(r.d));
  put(std::to_string(r.s));
  put(r.target_kind);
  put(format_double(r.a));
  put(format_double(r.sigma));
  put(r.selector_kind);
  put(format_double(r.p));
  put(format_double(r.alpha));
  put(format_double(r.lr));
  put(format_double(r.r));
  put(format_double(r.norm_emp));
  put(format_double(r.norm_pred));
  put(format_double(r.slope_pred));
  put(r.regime_pred);
  put(format_double(r.t_star_pred));
  put(format_double(r.n_star_pred));
  put(format_double(r.r_star));
  put(format_double(r.test_mse));
  put(format_double(r.feas_residual));
  put(std::to_string(r.solver_iters));
  put(r.status);
  return row;
}

std::string csv_header() {
  std::string header;
  for (const auto& c : csv_columns()) {
    if (!header.empty()) header += ',';
    header += c;
  }
  return header;
}

// Commas and newlines would break the unquoted CSV.
std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

bool record_less(const SweepRecord& a, const SweepRecord& b) {
  return std::tie(a.experiment_id, a.n, a.seed, a.r, a.sigma, a.selector_kind, a.p, a.alpha, a.lr) <
         std::tie(b.experiment_id, b.n, b.seed, b.r, b.sigma, b.selector_kind, b.p, b.alpha, b.lr);
}

// p_eff can land a hair outside (1, 2] numerically; theory needs it strictly inside.
double theory_p(double p) { return std::clamp(p, 1.0 + 1e-6, 2.0); }

}  // namespace

bool operator==(const SweepRecord& l, const SweepRecord& r) {
  return l.experiment_id == r.experiment_id && l.seed == r.seed && l.n == r.n && l.d == r.d &&
         l.s == r.s && l.target_kind == r.target_kind && same_double(l.a, r.a) &&
         same_double(l.sigma, r.sigma) && l.selector_kind == r.selector_kind &&
         same_double(l.p, r.p) && same_double(l.alpha, r.alpha) && same_double(l.lr, r.lr) &&
         same_double(l.r, r.r) && same_double(l.norm_emp, r.norm_emp) &&
         same_double(l.norm_pred, r.norm_pred) && same_double(l.slope_pred, r.slope_pred) &&
         l.regime_pred == r.regime_pred && same_double(l.t_star_pred, r.t_star_pred) &&
         same_double(l.n_star_pred, r.n_star_pred) && same_double(l.r_star, r.r_star) &&
         same_double(l.test_mse, r.test_mse) && same_double(l.feas_residual, r.feas_residual) &&
         l.solver_iters == r.solver_iters && l.status == r.status;
}

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols = {
      "experiment_id", "seed",        "n",           "d",           "s",
      "target_kind",   "a",           "sigma",       "selector_kind", "p",
      "alpha",         "lr",          "r",           "norm_emp",    "norm_pred",
      "slope_pred",    "regime_pred", "t_star_pred", "n_star_pred", "r_star",
      "test_mse",      "feas_residual", "solver_iters", "status"};
  return cols;
}

void write_csv(std::span<const SweepRecord> records, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot open '" + path + "' for writing");
  out << csv_header() << '\n';
  for (const auto& r : records) out << csv_row(r) << '\n';
  if (!out) throw Error(ErrorKind::IoError, "write to '" + path + "' failed");
}

std::vector<SweepRecord> read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::SchemaMismatch, "missing header");
  if (line != csv_header()) throw Error(ErrorKind::SchemaMismatch, "header differs from schema");

  std::vector<SweepRecord> records;
  const std::size_t ncols = csv_columns().size();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_line(line);
    if (f.size() != ncols) {
      throw Error(ErrorKind::SchemaMismatch, "row has " + std::to_string(f.size()) + " fields");
    }
    SweepRecord r;
    r.experiment_id = f[0];
    r.seed = parse_integer<std::uint64_t>(f[1]);
    r.n = parse_integer<int>(f[2]);
    r.d = parse_integer<int>(f[3]);
    r.s = parse_integer<int>(f[4]);
    r.target_kind = f[5];
    r.a = parse_double(f[6]);
    r.sigma = parse_double(f[7]);
    r.selector_kind = f[8];
    r.p = parse_double(f[9]);
    r.alpha = parse_double(f[10]);
    r.lr = parse_double(f[11]);
    r.r = parse_double(f[12]);
    r.norm_emp = parse_double(f[13]);
    r.norm_pred = parse_double(f[14]);
    r.slope_pred = parse_double(f[15]);
    r.regime_pred = f[16];
    r.t_star_pred = parse_double(f[17]);
    r.n_star_pred = parse_double(f[18]);
    r.r_star = parse_double(f[19]);
    r.test_mse = parse_double(f[20]);
    r.feas_residual = parse_double(f[21]);
    r.solver_iters = parse_integer<long>(f[22]);
    r.status = f[23];
    records.push_back(std::move(r));
  }
  return records;
}

TheoryColumns theory_columns(const Vector& w_star, double sigma, double p, double r, int n, int d) {
  const TheoryInputs in = make_theory_inputs(w_star, sigma, theory_p(p), r, n, d);
  const Prediction pred = unified_norm_prediction(in, n);
  TheoryColumns cols;
  cols.norm_pred = pred.value;
  cols.slope_pred = pred.slope;
  cols.regime_pred = to_string(pred.regime);
  cols.t_star_pred = ray_scale_prediction(in, n);
  cols.n_star_pred = pred.n_star;
  cols.r_star = pred.r_star;
  return cols;
}

void SweepConfig::validate() const {
  if (experiment_id.empty() || experiment_id.find_first_of(",\n\r") != std::string::npos) {
    throw Error(ErrorKind::ConfigError, "experiment_id must be nonempty and free of commas");
  }
  if (sigma_list.empty() || n_grid.empty() || r_list.empty() || selector.size() == 0) {
    throw Error(ErrorKind::ConfigError, "sigma_list, n_grid, r_list and selector must be nonempty");
  }
  if (seeds_per_cell < 1) throw Error(ErrorKind::ConfigError, "seeds_per_cell must be >= 1");
  for (double s : sigma_list) {
    if (!(s >= 0.0)) throw Error(ErrorKind::ConfigError, "sigma must be nonnegative");
  }
  for (int n : n_grid) {
    if (n < 1) throw Error(ErrorKind::ConfigError, "n_grid entries must be >= 1");
  }
  for (double r : r_list) {
    if (!(r > 0.0)) throw Error(ErrorKind::ConfigError, "r_list entries must be positive");
  }
  for (double p : selector.p_values) {
    if (!(p > 1.0 && p <= 2.0)) throw Error(ErrorKind::ConfigError, "p must lie in (1, 2]");
  }
  for (const auto& s : selector.dln_settings) {
    if (!(s.alpha > 0.0 && s.lr > 0.0)) {
      throw Error(ErrorKind::ConfigError, "DLN alpha and lr must be positive");
    }
  }
  if (test_set_size < 0) throw Error(ErrorKind::ConfigError, "test_set_size must be >= 0");
  solver_opts.validate();
}

int worker_count(int requested) {
  int workers = requested > 0 ? requested
                              : static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
  if (const char* cap = std::getenv("NORMSCALER_THREADS")) {
    const int limit = std::atoi(cap);
    if (limit > 0) workers = std::min(workers, limit);
  }
  return std::max(1, workers);
}

namespace {

struct Job {
  std::size_t sigma_index = 0;
  int n = 0;
  int seed_index = 0;
};

std::uint64_t job_trial(const Job& job) {
  return (static_cast<std::uint64_t>(job.sigma_index) << 48) ^
         (static_cast<std::uint64_t>(job.n) << 16) ^ static_cast<std::uint64_t>(job.seed_index);
}

std::vector<SweepRecord> run_job(const SweepConfig& cfg, const Job& job,
                                 const std::vector<double>& dln_p_eff) {
  const double sigma = cfg.sigma_list[job.sigma_index];
  const std::uint64_t seed = trial_seed(cfg.base_seed, cfg.experiment_id, job_trial(job));

  SweepRecord base;
  base.experiment_id = cfg.experiment_id;
  base.seed = seed;
  base.n = job.n;
  base.target_kind = to_string(cfg.target.kind);
  base.a = cfg.target.magnitude();
  base.sigma = sigma;
  base.s = cfg.target.support_size();
  base.selector_kind = cfg.selector.kind == Selector::Kind::ExplicitP ? "explicit_p" : "dln_alpha";

  std::vector<SweepRecord> out;
  auto fail_all = [&](SweepRecord rec, const std::string& why) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rec.norm_emp = rec.norm_pred = rec.slope_pred = rec.t_star_pred = rec.n_star_pred = nan;
    rec.r_star = rec.test_mse = rec.feas_residual = nan;
    rec.regime_pred = "crossover";
    rec.status = sanitize("failed:" + why);
    for (double r : cfg.r_list) {
      rec.r = r;
      out.push_back(rec);
    }
  };

  ProblemInstance inst;
  try {
    inst = gen_instance(cfg.target, cfg.design, sigma, job.n, seed);
  } catch (const Error& e) {
    base.d = cfg.design.mode == DesignSpec::Mode::FixedD ? cfg.design.d : 0;
    for (std::size_t k = 0; k < cfg.selector.size(); ++k) {
      SweepRecord rec = base;
      if (cfg.selector.kind == Selector::Kind::ExplicitP) {
        rec.p = cfg.selector.p_values[k];
      } else {
        rec.alpha = cfg.selector.dln_settings[k].alpha;
        rec.lr = cfg.selector.dln_settings[k].lr;
        rec.p = dln_p_eff[k];
      }
      fail_all(rec, e.what());
    }
    return out;
  }
  base.d = inst.d;
  const double y_norm = inst.Y.norm();

  for (std::size_t k = 0; k < cfg.selector.size(); ++k) {
    SweepRecord rec = base;
    Vector w_hat;
    try {
      if (cfg.selector.kind == Selector::Kind::ExplicitP) {
        rec.p = cfg.selector.p_values[k];
        const InterpolatorSolution sol = solve_min_lp(inst.X, inst.Y, rec.p, cfg.solver_opts);
        w_hat = sol.w_hat;
        rec.feas_residual = sol.feas_residual;
        rec.solver_iters = sol.iters;
        rec.status = sol.converged ? "converged" : "not_converged";
      } else {
        const DlnSetting& setting = cfg.selector.dln_settings[k];
        rec.alpha = setting.alpha;
        rec.lr = setting.lr;
        rec.p = dln_p_eff[k];
        DlnConfig dcfg = cfg.dln_cfg;
        dcfg.alpha = setting.alpha;
        dcfg.lr = setting.lr;
        dcfg.noise_seed = mix64(seed ^ k);
        const TrainReport rep = dln_train(inst.X, inst.Y, dcfg);
        w_hat = rep.beta;
        rec.feas_residual = y_norm > 0.0 ? (inst.X * w_hat - inst.Y).norm() / y_norm : 0.0;
        rec.solver_iters = rep.epochs_run;
        rec.status = to_string(rep.status);
      }
      rec.test_mse = cfg.test_set_size > 0
                         ? empirical_test_mse(w_hat, inst.w_star, sigma, cfg.test_set_size, seed)
                         : population_risk(w_hat, inst.w_star, sigma);
      for (double r : cfg.r_list) {
        SweepRecord row = rec;
        row.r = r;
        row.norm_emp = lr_norm(w_hat, r);
        const TheoryColumns th = theory_columns(inst.w_star, sigma, rec.p, r, inst.n, inst.d);
        row.norm_pred = th.norm_pred;
        row.slope_pred = th.slope_pred;
        row.regime_pred = th.regime_pred;
        row.t_star_pred = th.t_star_pred;
        row.n_star_pred = th.n_star_pred;
        row.r_star = th.r_star;
        out.push_back(std::move(row));
      }
    } catch (const std::exception& e) {
      fail_all(rec, e.what());
    }
  }
  return out;
}

}  // namespace

std::vector<SweepRecord> run_sweep(const SweepConfig& cfg, const SweepOptions& opts) {
  cfg.validate();

  std::vector<double> dln_p_eff;
  if (cfg.selector.kind == Selector::Kind::DlnAlpha) {
    for (const auto& s : cfg.selector.dln_settings) dln_p_eff.push_back(p_eff(s.alpha).p);
  }

  std::vector<Job> jobs;
  for (std::size_t si = 0; si < cfg.sigma_list.size(); ++si) {
    for (int n : cfg.n_grid) {
      for (int j = 0; j < cfg.seeds_per_cell; ++j) jobs.push_back({si, n, j});
    }
  }

  std::ofstream partial;
  const std::string partial_path = cfg.output_path.empty() ? "" : cfg.output_path + ".partial";
  if (!partial_path.empty()) {
    partial.open(partial_path, std::ios::binary | std::ios::trunc);
    if (!partial) throw Error(ErrorKind::IoError, "cannot open '" + partial_path + "'");
    partial << csv_header() << '\n' << std::flush;
  }

  std::vector<SweepRecord> records;
  std::mutex sink;
  std::atomic<std::size_t> next{0};
  std::size_t done = 0;

  auto worker = [&]() {
    while (true) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= jobs.size()) return;
      auto rows = run_job(cfg, jobs[idx], dln_p_eff);
      std::lock_guard<std::mutex> lock(sink);
      if (partial.is_open()) {
        for (const auto& r : rows) partial << csv_row(r) << '\n';
        partial << std::flush;
      }
      records.insert(records.end(), std::make_move_iterator(rows.begin()),
                     std::make_move_iterator(rows.end()));
      ++done;
      if (opts.log) {
        opts.log("[" + cfg.experiment_id + "] cell " + std::to_string(done) + "/" +
                 std::to_string(jobs.size()) + " (n=" + std::to_string(jobs[idx].n) + ")");
      }
    }
  };

  const int workers = std::min<int>(worker_count(opts.threads), static_cast<int>(jobs.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
  }

  std::stable_sort(records.begin(), records.end(), record_less);
  if (!partial_path.empty()) {
    partial.close();
    write_csv(records, cfg.output_path);
    std::error_code ec;
    std::filesystem::remove(partial_path, ec);
  }
  return records;
}

SlopeFit fit_loglog_slope(std::span<const LogLogPoint> points, std::pair<double, double> window) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& pt : points) {
    if (pt.n < window.first || pt.n > window.second) continue;
    if (!(pt.value > 0.0) || !(pt.n > 0.0)) {
      throw Error(ErrorKind::NonPositiveValue, "log-log fit needs positive n and values");
    }
    xs.push_back(std::log(pt.n));
    ys.push_back(std::log(pt.value));
  }
  if (xs.size() < 3) {
    throw Error(ErrorKind::InsufficientPoints, "need at least 3 points in the fit window");
  }
  const double m = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw Error(ErrorKind::InsufficientPoints, "all n in the window coincide");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - fit.intercept - fit.slope * xs[i];
    sse += e * e;
  }
  fit.stderr_slope = std::sqrt(sse / (m - 2.0) / sxx);
  return fit;
}

ElbowFit detect_elbow(std::span<const LogLogPoint> points) {
  if (points.size() < 6) throw Error(ErrorKind::InsufficientPoints, "elbow detection needs >= 6 points");
  std::vector<LogLogPoint> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const LogLogPoint& a, const LogLogPoint& b) { return a.n < b.n; });
  const Eigen::Index m = static_cast<Eigen::Index>(sorted.size());
  Vector x(m);
  Vector y(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& pt = sorted[static_cast<std::size_t>(i)];
    if (!(pt.value > 0.0) || !(pt.n > 0.0)) {
      throw Error(ErrorKind::NonPositiveValue, "elbow detection needs positive n and values");
    }
    x[i] = std::log(pt.n);
    y[i] = std::log(pt.value);
  }

  Matrix line(m, 2);
  line.col(0).setOnes();
  line.col(1) = x;
  const Vector line_coef = line.colPivHouseholderQr().solve(y);

  ElbowFit best;
  best.sse_single_line = (line * line_coef - y).squaredNorm();
  best.sse = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 1; k + 1 < m; ++k) {
    // y = c + m1 x + delta max(0, x - x_k): continuous at the breakpoint.
    Matrix design(m, 3);
    design.col(0).setOnes();
    design.col(1) = x;
    design.col(2) = (x.array() - x[k]).max(0.0).matrix();
    const Vector coef = design.colPivHouseholderQr().solve(y);
    const double sse = (design * coef - y).squaredNorm();
    if (sse < best.sse) {
      best.sse = sse;
      best.n_elbow = sorted[static_cast<std::size_t>(k)].n;
      best.left_slope = coef[1];
      best.right_slope = coef[1] + coef[2];
    }
  }
  const double scale = std::max(best.sse_single_line, 1e-300);
  best.has_elbow = best.sse_single_line > 1e-20 &&
                   (best.sse_single_line - best.sse) / scale >= 0.01;
  return best;
}

ConcentrationReport diagnose_concentration(const ProblemInstance& inst, double q) {
  ConcentrationReport rep;
  const double n = inst.n;
  const Vector xty = inst.X.transpose() * inst.Y;
  const double tau_sq = inst.w_star.squaredNorm() + inst.sigma * inst.sigma;
  const double tau_q = std::pow(tau_sq, 0.5 * q);
  const double m_q = gaussian_abs_moment(q);

  double W_q = 0.0;
  double bulk_sum = 0.0;
  long bulk_count = 0;
  int s = 0;
  for (Eigen::Index j = 0; j < xty.size(); ++j) {
    const double term = std::pow(std::abs(xty[j]), q);
    if (inst.w_star[j] != 0.0) {
      ++s;
      W_q += std::pow(std::abs(inst.w_star[j]), q);
      rep.spike_sum += term;
    } else {
      bulk_sum += term;
      ++bulk_count;
    }
  }
  rep.total = rep.spike_sum + bulk_sum;
  rep.y_norm_ratio = tau_sq > 0.0 ? inst.Y.squaredNorm() / (tau_sq * n)
                                  : std::numeric_limits<double>::quiet_NaN();
  if (bulk_count == 0) {
    rep.bulk_defined = false;
    rep.bulk_moment_ratio = std::numeric_limits<double>::quiet_NaN();
  } else {
    rep.bulk_moment_ratio =
        (bulk_sum / static_cast<double>(bulk_count)) / (m_q * std::pow(inst.Y.norm(), q));
  }
  rep.spike_pred = std::pow(n, q) * W_q;
  rep.spike_ratio = rep.spike_pred > 0.0 ? rep.spike_sum / rep.spike_pred
                                         : std::numeric_limits<double>::quiet_NaN();
  rep.pred_spike = rep.spike_pred;
  rep.pred_bulk = static_cast<double>(bulk_count) * m_q * tau_q * std::pow(n, 0.5 * q);
  rep.pred_remainder = tau_q * (s * std::pow(n, 0.5 * q) + std::pow(static_cast<double>(s), 1.0 + 0.5 * q));
  const double pred_total = rep.pred_spike + rep.pred_bulk + rep.pred_remainder;
  rep.total_ratio = pred_total > 0.0 ? rep.total / pred_total
                                     : std::numeric_limits<double>::quiet_NaN();
  return rep;
}

nlohmann::json to_json(const ConcentrationReport& r) {
  auto num = [](double x) -> nlohmann::json {
    if (std::isfinite(x)) return x;
    return nullptr;
  };
  return {{"y_norm_ratio", num(r.y_norm_ratio)},
          {"bulk_moment_ratio", num(r.bulk_moment_ratio)},
          {"bulk_defined", r.bulk_defined},
          {"spike_sum", num(r.spike_sum)},
          {"spike_pred", num(r.spike_pred)},
          {"spike_ratio", num(r.spike_ratio)},
          {"total", num(r.total)},
          {"pred_spike", num(r.pred_spike)},
          {"pred_bulk", num(r.pred_bulk)},
          {"pred_remainder", num(r.pred_remainder)},
          {"total_ratio", num(r.total_ratio)}};
}

std::vector<int> log_spaced_grid(double lo, double hi, int count) {
  if (!(lo > 0.0 && hi >= lo) || count < 1) {
    throw Error(ErrorKind::ConfigError, "log grid needs 0 < lo <= hi and count >= 1");
  }
  std::vector<int> grid;
  for (int i = 0; i < count; ++i) {
    const double frac = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    grid.push_back(static_cast<int>(std::lround(std::exp(std::log(lo) + frac * (std::log(hi) - std::log(lo))))));
  }
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

}  // namespace normscaler
