#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "normscaler/dln.hpp"
#include "normscaler/model.hpp"
#include "normscaler/solver.hpp"
#include "normscaler/theory.hpp"

namespace normscaler {

struct DlnSetting {
  double alpha = 1.0;
  double lr = 1e-3;
};

/// Either a list of explicit p values or a list of (alpha, lr) DLN settings.
struct Selector {
  enum class Kind { ExplicitP, DlnAlpha };
  Kind kind = Kind::ExplicitP;
  std::vector<double> p_values;
  std::vector<DlnSetting> dln_settings;

  std::size_t size() const {
    return kind == Kind::ExplicitP ? p_values.size() : dln_settings.size();
  }
};

struct SweepConfig {
  std::string experiment_id = "sweep";
  std::uint64_t base_seed = 0;
  TargetSpec target;
  DesignSpec design = DesignSpec::fixed(100);
  std::vector<double> sigma_list{0.0};
  Selector selector;
  std::vector<int> n_grid;
  std::vector<double> r_list;
  int seeds_per_cell = 1;
  SolverOptions solver_opts;
  DlnConfig dln_cfg;  // alpha and lr are taken from the selector
  std::string output_path;
  /// 0 reports the exact population risk; otherwise an empirical test set of this size.
  int test_set_size = 0;

  void validate() const;
};

struct SweepRecord {
  std::string experiment_id;
  std::uint64_t seed = 0;
  int n = 0;
  int d = 0;
  int s = 0;
  std::string target_kind;
  double a = 0.0;
  double sigma = 0.0;
  std::string selector_kind;  // explicit_p | dln_alpha
  double p = 0.0;             // explicit p, or p_eff(alpha) for DLN rows
  double alpha = 0.0;
  double lr = 0.0;
  double r = 0.0;
  double norm_emp = 0.0;
  double norm_pred = 0.0;
  double slope_pred = 0.0;
  std::string regime_pred;
  double t_star_pred = 0.0;
  double n_star_pred = 0.0;
  double r_star = 0.0;
  double test_mse = 0.0;
  double feas_residual = 0.0;
  long solver_iters = 0;
  std::string status;

  /// Field-wise equality; NaN compares equal to NaN.
  friend bool operator==(const SweepRecord& lhs, const SweepRecord& rhs);
};

/// The fixed CSV header, in schema order.
const std::vector<std::string>& csv_columns();

void write_csv(std::span<const SweepRecord> records, const std::string& path);
std::vector<SweepRecord> read_csv(const std::string& path);

/// Theory columns of a record as a pure function of its cell.
struct TheoryColumns {
  double norm_pred = 0.0;
  double slope_pred = 0.0;
  std::string regime_pred;
  double t_star_pred = 0.0;
  double n_star_pred = 0.0;
  double r_star = 0.0;
};
TheoryColumns theory_columns(const Vector& w_star, double sigma, double p, double r, int n, int d);

struct SweepOptions {
  /// Worker count; 0 means hardware concurrency, further capped by NORMSCALER_THREADS.
  int threads = 0;
  std::function<void(const std::string&)> log;
};

/// Runs every (sigma, n, seed) cell, each against all selector values, and
/// returns the records sorted by (experiment_id, n, seed, r, ...). When
/// cfg.output_path is set, rows are appended to "<output_path>.partial" as
/// cells finish and the sorted file replaces it at the end.
std::vector<SweepRecord> run_sweep(const SweepConfig& cfg, const SweepOptions& opts = {});

int worker_count(int requested);

struct LogLogPoint {
  double n = 0.0;
  double value = 0.0;
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
};

/// OLS of log(value) on log(n) over the points whose n lies in [lo, hi].
SlopeFit fit_loglog_slope(std::span<const LogLogPoint> points,
                          std::pair<double, double> window = {
                              0.0, std::numeric_limits<double>::infinity()});

struct ElbowFit {
  double n_elbow = 0.0;
  double sse = 0.0;
  double left_slope = 0.0;
  double right_slope = 0.0;
  double sse_single_line = 0.0;
  /// False when the two-segment fit improves the single-line SSE by less than 1%.
  bool has_elbow = false;
};

/// Best continuous two-segment fit in log-log coordinates with the breakpoint on
/// an interior grid point.
ElbowFit detect_elbow(std::span<const LogLogPoint> points);

struct ConcentrationReport {
  double y_norm_ratio = 0.0;      // ||Y||^2 / (tau_s^2 n)
  double bulk_moment_ratio = 0.0; // mean_{j not in S} |<X_j, Y>|^q / (m_q ||Y||^q)
  bool bulk_defined = true;       // false when d - s = 0
  double spike_sum = 0.0;         // sum_{j in S} |<X_j, Y>|^q
  double spike_pred = 0.0;        // n^q W_q
  double spike_ratio = 0.0;
  double total = 0.0;             // ||X^T Y||_q^q
  double pred_spike = 0.0;
  double pred_bulk = 0.0;
  double pred_remainder = 0.0;
  double total_ratio = 0.0;       // total / (sum of the three predicted terms)
};

ConcentrationReport diagnose_concentration(const ProblemInstance& inst, double q);

nlohmann::json to_json(const ConcentrationReport& report);

/// `count` log-spaced integers in [lo, hi], deduplicated.
std::vector<int> log_spaced_grid(double lo, double hi, int count);

/// Strict parsing: unknown keys are ConfigErrors.
SweepConfig sweep_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SweepConfig& cfg);
SweepConfig load_sweep_config(const std::string& path);

TargetSpec target_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TargetSpec& t);
DesignSpec design_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DesignSpec& d);
SolverOptions solver_options_from_json(const nlohmann::json& j, SolverOptions base = {});
nlohmann::json to_json(const SolverOptions& o);
DlnConfig dln_config_from_json(const nlohmann::json& j, DlnConfig base = {});
nlohmann::json to_json(const DlnConfig& c);

}  // namespace normscaler
