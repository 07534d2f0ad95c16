#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "normscaler/error.hpp"
#include "normscaler/model.hpp"

namespace normscaler {

enum class LineSearch { Backtracking, BarzilaiBorwein };

struct SolverOptions {
  double tol_feas = 1e-8;   // ||X w - Y|| / ||Y||
  double tol_cert = 1e-6;   // relative error in the primal-dual identities
  int max_iters = 50000;
  double p_floor = 1.05;
  LineSearch line_search = LineSearch::BarzilaiBorwein;
  /// Keep D(lambda_k) for every accepted iterate in InterpolatorSolution::objective_trace.
  bool record_trace = false;

  void validate() const;
};

struct InterpolatorSolution {
  Vector w_hat;
  Vector lambda_star;
  double t_star_empirical = 0.0;
  double feas_residual = 0.0;
  double cert_residual = 0.0;
  int iters = 0;
  bool converged = false;
  /// Y == 0: the zero vector is returned without iterating.
  bool degenerate = false;
  std::vector<double> objective_trace;
};

/// q = p / (p - 1) for p in (1, 2].
double conjugate_exponent(double p);

/// sum_j |z_j|^q with max|z_j| factored out first.
template <typename Derived>
double power_sum(const Eigen::MatrixBase<Derived>& z, double q) {
  if (z.size() == 0) return 0.0;
  const double peak = z.cwiseAbs().maxCoeff();
  if (!(peak > 0.0)) return 0.0;
  return std::pow(peak, q) * (z.cwiseAbs() / peak).array().pow(q).sum();
}

/// Coordinatewise w_i = sgn(v_i) |v_i|^(q-1), the gradient of (1/q)||.||_q^q.
template <typename Derived>
Vector kkt_map(const Eigen::MatrixBase<Derived>& v, double q) {
  if (!(q >= 2.0)) throw Error(ErrorKind::DomainError, "kkt_map requires q >= 2");
  Vector w(v.size());
  const double power = q - 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double vi = v[i];
    if (!std::isfinite(vi)) throw Error(ErrorKind::NonFinite, "kkt_map input is not finite");
    if (vi == 0.0) {
      w[i] = 0.0;
      continue;
    }
    const double mag = std::exp(power * std::log(std::abs(vi)));
    w[i] = vi > 0.0 ? mag : -mag;
  }
  return w;
}

/// D(lambda) = <Y, lambda> - (1/q) ||X^T lambda||_q^q.
double dual_objective(const Vector& lambda, const Matrix& X, const Vector& Y, double q);

/// Maximizer of t -> D(tY): t^(q-1) = ||Y||^2 / ||X^T Y||_q^q.
double ray_scale(const Matrix& X, const Vector& Y, double q);

/// Minimum-l2 interpolator X^T (X X^T)^{-1} Y via a Cholesky factorization of the Gram matrix.
Vector min_l2_closed_form(const Matrix& X, const Vector& Y);

/// Minimum-lp interpolator. p == 2 takes the closed-form path; otherwise the
/// concave dual is maximized from the ray warm start lambda_0 = t_star * Y and
/// the primal is recovered through kkt_map. NotConverged is reported through
/// `converged == false`, never thrown.
InterpolatorSolution solve_min_lp(const Matrix& X, const Vector& Y, double p,
                                  const SolverOptions& opts = {});

/// Relative violation of ||X^T lambda||_q^q = ||w||_p^p = <Y, lambda>.
double certificate_residual(const Matrix& X, const Vector& Y, const Vector& w,
                            const Vector& lambda, double p);

}  // namespace normscaler
