#include <fstream>
#include <set>

#include "normscaler/harness.hpp"

namespace normscaler {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::ConfigError, where + " must be a JSON object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw Error(ErrorKind::ConfigError, "unknown key '" + item.key() + "' in " + where);
    }
  }
}

template <typename T>
T get_as(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, where + "." + key + ": " + e.what());
  }
}

template <typename T>
void read_if(const json& j, const std::string& key, T& out, const std::string& where) {
  if (j.contains(key)) out = get_as<T>(j, key, where);
}

std::vector<int> n_grid_from_json(const json& j) {
  if (j.is_array()) return get_as<std::vector<int>>(json{{"n_grid", j}}, "n_grid", "config");
  check_keys(j, {"lo", "hi", "count"}, "n_grid");
  return log_spaced_grid(get_as<double>(j, "lo", "n_grid"), get_as<double>(j, "hi", "n_grid"),
                         get_as<int>(j, "count", "n_grid"));
}

Selector selector_from_json(const json& j) {
  check_keys(j, {"ExplicitP", "DlnAlpha"}, "selector");
  if (j.size() != 1) throw Error(ErrorKind::ConfigError, "selector needs exactly one of ExplicitP, DlnAlpha");
  Selector sel;
  if (j.contains("ExplicitP")) {
    sel.kind = Selector::Kind::ExplicitP;
    sel.p_values = get_as<std::vector<double>>(j, "ExplicitP", "selector");
  } else {
    sel.kind = Selector::Kind::DlnAlpha;
    const json& list = j.at("DlnAlpha");
    if (!list.is_array()) throw Error(ErrorKind::ConfigError, "selector.DlnAlpha must be a list");
    for (const auto& item : list) {
      check_keys(item, {"alpha", "lr"}, "selector.DlnAlpha[]");
      sel.dln_settings.push_back(
          {get_as<double>(item, "alpha", "DlnAlpha"), get_as<double>(item, "lr", "DlnAlpha")});
    }
  }
  return sel;
}

json to_json(const Selector& sel) {
  if (sel.kind == Selector::Kind::ExplicitP) return {{"ExplicitP", sel.p_values}};
  json list = json::array();
  for (const auto& s : sel.dln_settings) list.push_back({{"alpha", s.alpha}, {"lr", s.lr}});
  return {{"DlnAlpha", list}};
}

}  // namespace

TargetSpec target_from_json(const json& j) {
  check_keys(j, {"kind", "s", "a", "custom_values", "signs"}, "target");
  TargetSpec t;
  try {
    t.kind = target_kind_from_string(get_as<std::string>(j, "kind", "target"));
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigError, e.what());
  }
  read_if(j, "s", t.s, "target");
  if (j.contains("a")) t.a = get_as<double>(j, "a", "target");
  read_if(j, "custom_values", t.custom_values, "target");
  if (t.kind == TargetKind::SingleSpike) t.s = 1;
  if (t.kind == TargetKind::Custom && !j.contains("s")) t.s = static_cast<int>(t.custom_values.size());
  if (t.s < 1) throw Error(ErrorKind::ConfigError, "target.s must be >= 1");
  if (j.contains("signs")) {
    const json& signs = j.at("signs");
    if (signs.is_string() && signs.get<std::string>() == "AllPositive") {
      t.signs = {};
    } else if (signs.is_object()) {
      check_keys(signs, {"Rademacher"}, "target.signs");
      t.signs = {true, get_as<std::uint64_t>(signs, "Rademacher", "target.signs")};
    } else {
      throw Error(ErrorKind::ConfigError, "target.signs must be \"AllPositive\" or {\"Rademacher\": seed}");
    }
  }
  return t;
}

json to_json(const TargetSpec& t) {
  json j = {{"kind", to_string(t.kind)}, {"s", t.s}};
  if (t.a) j["a"] = *t.a;
  if (t.kind == TargetKind::Custom) j["custom_values"] = t.custom_values;
  j["signs"] = t.signs.rademacher ? json{{"Rademacher", t.signs.seed}} : json("AllPositive");
  return j;
}

DesignSpec design_from_json(const json& j) {
  check_keys(j, {"mode", "d", "kappa"}, "design");
  const auto mode = get_as<std::string>(j, "mode", "design");
  if (mode == "FixedD") return DesignSpec::fixed(get_as<int>(j, "d", "design"));
  if (mode == "Proportional") {
    const double kappa = get_as<double>(j, "kappa", "design");
    if (!(kappa > 1.0)) throw Error(ErrorKind::ConfigError, "design.kappa must exceed 1");
    return DesignSpec::proportional(kappa);
  }
  throw Error(ErrorKind::ConfigError, "design.mode must be FixedD or Proportional");
}

json to_json(const DesignSpec& d) {
  if (d.mode == DesignSpec::Mode::FixedD) return {{"mode", "FixedD"}, {"d", d.d}};
  return {{"mode", "Proportional"}, {"kappa", d.kappa}};
}

SolverOptions solver_options_from_json(const json& j, SolverOptions o) {
  check_keys(j, {"tol_feas", "tol_cert", "max_iters", "p_floor", "line_search", "record_trace"},
             "solver_opts");
  read_if(j, "tol_feas", o.tol_feas, "solver_opts");
  read_if(j, "tol_cert", o.tol_cert, "solver_opts");
  read_if(j, "max_iters", o.max_iters, "solver_opts");
  read_if(j, "p_floor", o.p_floor, "solver_opts");
  read_if(j, "record_trace", o.record_trace, "solver_opts");
  if (j.contains("line_search")) {
    const auto ls = get_as<std::string>(j, "line_search", "solver_opts");
    if (ls == "BarzilaiBorwein") {
      o.line_search = LineSearch::BarzilaiBorwein;
    } else if (ls == "Backtracking") {
      o.line_search = LineSearch::Backtracking;
    } else {
      throw Error(ErrorKind::ConfigError, "solver_opts.line_search must be BarzilaiBorwein or Backtracking");
    }
  }
  try {
    o.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigError, e.what());
  }
  return o;
}

json to_json(const SolverOptions& o) {
  return {{"tol_feas", o.tol_feas},
          {"tol_cert", o.tol_cert},
          {"max_iters", o.max_iters},
          {"p_floor", o.p_floor},
          {"line_search", o.line_search == LineSearch::BarzilaiBorwein ? "BarzilaiBorwein" : "Backtracking"},
          {"record_trace", o.record_trace}};
}

DlnConfig dln_config_from_json(const json& j, DlnConfig c) {
  check_keys(j,
             {"alpha", "lr", "max_epochs", "loss_tol", "divergence_factor", "grad_noise_std",
              "noise_seed"},
             "dln_cfg");
  read_if(j, "alpha", c.alpha, "dln_cfg");
  read_if(j, "lr", c.lr, "dln_cfg");
  read_if(j, "max_epochs", c.max_epochs, "dln_cfg");
  read_if(j, "loss_tol", c.loss_tol, "dln_cfg");
  read_if(j, "divergence_factor", c.divergence_factor, "dln_cfg");
  read_if(j, "grad_noise_std", c.grad_noise_std, "dln_cfg");
  read_if(j, "noise_seed", c.noise_seed, "dln_cfg");
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigError, e.what());
  }
  return c;
}

json to_json(const DlnConfig& c) {
  return {{"alpha", c.alpha},
          {"lr", c.lr},
          {"max_epochs", c.max_epochs},
          {"loss_tol", c.loss_tol},
          {"divergence_factor", c.divergence_factor},
          {"grad_noise_std", c.grad_noise_std},
          {"noise_seed", c.noise_seed}};
}

SweepConfig sweep_config_from_json(const json& j) {
  check_keys(j,
             {"experiment_id", "base_seed", "target", "design", "sigma_list", "selector", "n_grid",
              "r_list", "seeds_per_cell", "solver_opts", "dln_cfg", "output_path", "test_set_size"},
             "config");
  SweepConfig cfg;
  read_if(j, "experiment_id", cfg.experiment_id, "config");
  read_if(j, "base_seed", cfg.base_seed, "config");
  if (!j.contains("target") || !j.contains("design") || !j.contains("selector") ||
      !j.contains("n_grid") || !j.contains("r_list")) {
    throw Error(ErrorKind::ConfigError, "config needs target, design, selector, n_grid and r_list");
  }
  cfg.target = target_from_json(j.at("target"));
  cfg.design = design_from_json(j.at("design"));
  cfg.selector = selector_from_json(j.at("selector"));
  cfg.n_grid = n_grid_from_json(j.at("n_grid"));
  read_if(j, "sigma_list", cfg.sigma_list, "config");
  read_if(j, "r_list", cfg.r_list, "config");
  read_if(j, "seeds_per_cell", cfg.seeds_per_cell, "config");
  if (j.contains("solver_opts")) cfg.solver_opts = solver_options_from_json(j.at("solver_opts"));
  if (j.contains("dln_cfg")) cfg.dln_cfg = dln_config_from_json(j.at("dln_cfg"));
  read_if(j, "output_path", cfg.output_path, "config");
  read_if(j, "test_set_size", cfg.test_set_size, "config");
  cfg.validate();
  return cfg;
}

json to_json(const SweepConfig& cfg) {
  return {{"experiment_id", cfg.experiment_id},
          {"base_seed", cfg.base_seed},
          {"target", to_json(cfg.target)},
          {"design", to_json(cfg.design)},
          {"sigma_list", cfg.sigma_list},
          {"selector", to_json(cfg.selector)},
          {"n_grid", cfg.n_grid},
          {"r_list", cfg.r_list},
          {"seeds_per_cell", cfg.seeds_per_cell},
          {"solver_opts", to_json(cfg.solver_opts)},
          {"dln_cfg", to_json(cfg.dln_cfg)},
          {"output_path", cfg.output_path},
          {"test_set_size", cfg.test_set_size}};
}

SweepConfig load_sweep_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("invalid JSON in '") + path + "': " + e.what());
  }
  return sweep_config_from_json(j);
}

}  // namespace normscaler
