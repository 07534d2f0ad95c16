#pragma once

#include <utility>
#include <vector>

#include "normscaler/error.hpp"

namespace normscaler {

struct CalibrationConfig {
  std::vector<long> k_grid = default_k_grid();
  std::vector<double> alpha_grid;
  double series_switch = 1e-4;

  /// `count` log-spaced integers in [1, k_max], rounded and deduplicated.
  static std::vector<long> default_k_grid(int count = 32, double k_max = 1e4);
};

struct CalibrationPoint {
  double alpha = 0.0;
  double p_eff = 0.0;
  double fit_stderr = 0.0;
};

struct CalibrationCurve {
  std::vector<CalibrationPoint> points;
  int monotone_violations = 0;
};

struct EffectiveP {
  double p = 0.0;
  double fit_stderr = 0.0;
};

/// q(z) = 2 - sqrt(4 + z^2) + z asinh(z / 2); the series z^2/4 - z^4/192 + z^6/2560
/// is used for |z| < series_switch.
double hyp_potential_q(double z, double series_switch = 1e-4);

/// Q_alpha on the k-sparse unit-l2 probe: alpha^2 k q(1 / (alpha^2 sqrt(k))).
double potential_on_probe(double alpha, long k, double series_switch = 1e-4);

/// 2 (1 - slope) of the OLS fit of log Q_alpha(probe_k) against log k.
EffectiveP p_eff(double alpha, const CalibrationConfig& cfg = {});

/// p_eff over cfg.alpha_grid; counts decreasing steps larger than the fit stderr.
CalibrationCurve calibration_curve(const CalibrationConfig& cfg);

/// Bisection in log(alpha) for p_eff(alpha) = p_target. Stops once the log-bracket
/// width is below `tol` and |p_eff - p_target| <= tol.
double alpha_for_p(double p_target, std::pair<double, double> bracket, double tol,
                   const CalibrationConfig& cfg = {});

}  // namespace normscaler
