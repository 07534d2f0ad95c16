#include "normscaler/calib.hpp"

#include <algorithm>
#include <cmath>

namespace normscaler {

std::vector<long> CalibrationConfig::default_k_grid(int count, double k_max) {
  std::vector<long> grid;
  const double top = std::log(k_max);
  for (int i = 0; i < count; ++i) {
    const double frac = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    grid.push_back(std::lround(std::exp(frac * top)));
  }
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

double hyp_potential_q(double z, double series_switch) {
  if (!std::isfinite(z)) throw Error(ErrorKind::NonFinite, "hyp_potential_q input is not finite");
  const double az = std::abs(z);
  if (az < series_switch) {
    const double z2 = z * z;
    return z2 * (0.25 + z2 * (-1.0 / 192.0 + z2 / 2560.0));
  }
  // 2 - sqrt(4 + z^2) rewritten as -z^2 / (2 + sqrt(4 + z^2)) to avoid cancellation.
  return az * std::asinh(0.5 * az) - z * z / (2.0 + std::sqrt(4.0 + z * z));
}

double potential_on_probe(double alpha, long k, double series_switch) {
  if (!(alpha > 0.0) || k < 1) {
    throw Error(ErrorKind::DomainError, "potential_on_probe needs alpha > 0 and k >= 1");
  }
  const double a2 = alpha * alpha;
  const double kd = static_cast<double>(k);
  return a2 * kd * hyp_potential_q(1.0 / (a2 * std::sqrt(kd)), series_switch);
}

EffectiveP p_eff(double alpha, const CalibrationConfig& cfg) {
  if (!(alpha > 0.0)) throw Error(ErrorKind::DomainError, "alpha must be positive");
  const auto& ks = cfg.k_grid;
  if (ks.size() < 3) throw Error(ErrorKind::DegenerateFit, "k_grid needs at least 3 points");
  const double m = static_cast<double>(ks.size());
  double sx = 0.0;
  double sy = 0.0;
  std::vector<double> xs;
  std::vector<double> ys;
  xs.reserve(ks.size());
  ys.reserve(ks.size());
  for (long k : ks) {
    if (k < 1) throw Error(ErrorKind::DomainError, "k_grid entries must be >= 1");
    xs.push_back(std::log(static_cast<double>(k)));
    ys.push_back(std::log(potential_on_probe(alpha, k, cfg.series_switch)));
    sx += xs.back();
    sy += ys.back();
  }
  const double mx = sx / m;
  const double my = sy / m;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw Error(ErrorKind::DegenerateFit, "k_grid has no spread");
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - intercept - slope * xs[i];
    sse += e * e;
  }
  const double slope_se = std::sqrt(sse / (m - 2.0) / sxx);
  // p = 2 (1 - slope), so the stderr doubles.
  return {2.0 * (1.0 - slope), 2.0 * slope_se};
}

CalibrationCurve calibration_curve(const CalibrationConfig& cfg) {
  CalibrationCurve curve;
  for (double alpha : cfg.alpha_grid) {
    const EffectiveP pe = p_eff(alpha, cfg);
    if (!curve.points.empty()) {
      const auto& prev = curve.points.back();
      if (pe.p < prev.p_eff - std::max(pe.fit_stderr, prev.fit_stderr)) ++curve.monotone_violations;
    }
    curve.points.push_back({alpha, pe.p, pe.fit_stderr});
  }
  return curve;
}

double alpha_for_p(double p_target, std::pair<double, double> bracket, double tol,
                   const CalibrationConfig& cfg) {
  auto [alpha_min, alpha_max] = bracket;
  if (!(alpha_min > 0.0 && alpha_max > alpha_min) || !(tol > 0.0)) {
    throw Error(ErrorKind::BracketInvalid, "bracket must satisfy 0 < alpha_min < alpha_max");
  }
  const double p_lo = p_eff(alpha_min, cfg).p;
  const double p_hi = p_eff(alpha_max, cfg).p;
  if (!(p_lo <= p_target && p_target <= p_hi)) {
    throw Error(ErrorKind::BracketInvalid, "p_eff(bracket) = [" + std::to_string(p_lo) + ", " +
                                               std::to_string(p_hi) + "] does not contain " +
                                               std::to_string(p_target));
  }
  double u_lo = std::log(alpha_min);
  double u_hi = std::log(alpha_max);
  for (int it = 0; it < 200; ++it) {
    const double u_mid = 0.5 * (u_lo + u_hi);
    const double p_mid = p_eff(std::exp(u_mid), cfg).p;
    if (u_hi - u_lo <= tol && std::abs(p_mid - p_target) <= tol) return std::exp(u_mid);
    if (p_mid < p_target) {
      u_lo = u_mid;
    } else {
      u_hi = u_mid;
    }
  }
  return std::exp(0.5 * (u_lo + u_hi));
}

}  // namespace normscaler
