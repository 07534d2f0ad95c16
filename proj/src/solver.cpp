#include "normscaler/solver.hpp"

#include <algorithm>
#include <limits>

namespace normscaler {

namespace {

void check_shapes(const Matrix& X, const Vector& Y) {
  if (X.rows() != Y.size()) {
    throw Error(ErrorKind::DimensionMismatch, "X has " + std::to_string(X.rows()) +
                                                  " rows but Y has length " +
                                                  std::to_string(Y.size()));
  }
}

struct DualPoint {
  Vector lambda;
  Vector z;      // X^T lambda
  Vector w;      // kkt_map(z)
  Vector grad;   // Y - X w
  double value = 0.0;
};

DualPoint evaluate(const Matrix& X, const Vector& Y, double q, Vector lambda) {
  DualPoint pt;
  pt.lambda = std::move(lambda);
  pt.z.noalias() = X.transpose() * pt.lambda;
  pt.w = kkt_map(pt.z, q);
  pt.grad = Y;
  pt.grad.noalias() -= X * pt.w;
  pt.value = Y.dot(pt.lambda) - power_sum(pt.z, q) / q;
  return pt;
}

InterpolatorSolution closed_form_solution(const Matrix& X, const Vector& Y) {
  InterpolatorSolution sol;
  const Matrix gram = X * X.transpose();
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::SingularGram, "Cholesky factorization of X X^T failed");
  }
  sol.lambda_star = llt.solve(Y);
  sol.w_hat.noalias() = X.transpose() * sol.lambda_star;
  return sol;
}

}  // namespace

void SolverOptions::validate() const {
  if (!(tol_feas > 0.0 && tol_feas < 1.0)) {
    throw Error(ErrorKind::ConfigError, "tol_feas must lie in (0, 1)");
  }
  if (!(tol_cert > 0.0)) throw Error(ErrorKind::ConfigError, "tol_cert must be positive");
  if (max_iters < 1) throw Error(ErrorKind::ConfigError, "max_iters must be >= 1");
  if (!(p_floor > 1.0)) throw Error(ErrorKind::ConfigError, "p_floor must exceed 1");
}

double conjugate_exponent(double p) {
  if (!(p > 1.0 && p <= 2.0)) {
    throw Error(ErrorKind::DomainError, "p must lie in (1, 2], got " + std::to_string(p));
  }
  return p / (p - 1.0);
}

double dual_objective(const Vector& lambda, const Matrix& X, const Vector& Y, double q) {
  check_shapes(X, Y);
  if (lambda.size() != Y.size()) {
    throw Error(ErrorKind::DimensionMismatch, "lambda and Y differ in length");
  }
  const Vector z = X.transpose() * lambda;
  return Y.dot(lambda) - power_sum(z, q) / q;
}

double ray_scale(const Matrix& X, const Vector& Y, double q) {
  check_shapes(X, Y);
  const Vector xty = X.transpose() * Y;
  const double peak = xty.cwiseAbs().maxCoeff();
  if (!(peak > 0.0)) throw Error(ErrorKind::DegenerateInstance, "X^T Y is zero");
  // t^(q-1) = ||Y||^2 / (peak^q * S); take logs so large q cannot overflow.
  const double scaled_sum = (xty.cwiseAbs() / peak).array().pow(q).sum();
  const double log_t =
      (std::log(Y.squaredNorm()) - q * std::log(peak) - std::log(scaled_sum)) / (q - 1.0);
  return std::exp(log_t);
}

Vector min_l2_closed_form(const Matrix& X, const Vector& Y) {
  check_shapes(X, Y);
  return closed_form_solution(X, Y).w_hat;
}

double certificate_residual(const Matrix& X, const Vector& Y, const Vector& w,
                            const Vector& lambda, double p) {
  const double q = conjugate_exponent(p);
  const Vector z = X.transpose() * lambda;
  const double primal = power_sum(w, p);
  if (!(primal > 0.0)) return 0.0;
  const double dual_norm = power_sum(z, q);
  const double linear = Y.dot(lambda);
  return std::max(std::abs(dual_norm - primal), std::abs(linear - primal)) / primal;
}

InterpolatorSolution solve_min_lp(const Matrix& X, const Vector& Y, double p,
                                  const SolverOptions& opts) {
  check_shapes(X, Y);
  opts.validate();
  if (!(p >= opts.p_floor && p <= 2.0)) {
    throw Error(ErrorKind::DomainError, "p=" + std::to_string(p) + " outside [" +
                                            std::to_string(opts.p_floor) + ", 2]");
  }
  const double q = conjugate_exponent(p);
  const double y_norm = Y.norm();

  if (!(y_norm > 0.0)) {
    InterpolatorSolution sol;
    sol.w_hat = Vector::Zero(X.cols());
    sol.lambda_star = Vector::Zero(X.rows());
    sol.converged = true;
    sol.degenerate = true;
    return sol;
  }

  const double t_star = ray_scale(X, Y, q);

  if (p == 2.0) {
    InterpolatorSolution sol = closed_form_solution(X, Y);
    sol.t_star_empirical = t_star;
    sol.feas_residual = (X * sol.w_hat - Y).norm() / y_norm;
    sol.cert_residual = certificate_residual(X, Y, sol.w_hat, sol.lambda_star, p);
    sol.converged = true;
    if (opts.record_trace) sol.objective_trace.push_back(dual_objective(sol.lambda_star, X, Y, q));
    return sol;
  }

  InterpolatorSolution sol;
  sol.t_star_empirical = t_star;

  DualPoint cur = evaluate(X, Y, q, t_star * Y);
  if (opts.record_trace) sol.objective_trace.push_back(cur.value);

  // Initial trial step moves lambda by 1% of its length.
  double step = 1e-2 * cur.lambda.norm() / std::max(cur.grad.norm(), 1e-300);
  constexpr double kArmijo = 1e-4;
  // Dual values are only resolvable to a few ulps; below that the ascent test
  // compares rounding noise.
  constexpr double kRoundoff = 64.0 * std::numeric_limits<double>::epsilon();

  int iter = 0;
  bool stalled = false;
  for (; iter < opts.max_iters; ++iter) {
    const double feas = cur.grad.norm() / y_norm;
    if (feas <= opts.tol_feas &&
        certificate_residual(X, Y, cur.w, cur.lambda, p) <= opts.tol_cert) {
      break;
    }

    const double grad_sq = cur.grad.squaredNorm();
    double a = step;
    DualPoint next;
    bool accepted = false;
    for (int bt = 0; bt < 200; ++bt) {
      next = evaluate(X, Y, q, cur.lambda + a * cur.grad);
      const double slack = kRoundoff * (std::abs(cur.value) + std::abs(next.value));
      if (std::isfinite(next.value) && next.value >= cur.value + kArmijo * a * grad_sq - slack &&
          next.value >= cur.value - slack) {
        accepted = true;
        break;
      }
      a *= 0.5;
    }
    if (!accepted) {
      stalled = true;
      break;
    }

    if (opts.line_search == LineSearch::BarzilaiBorwein) {
      // Concave objective: s.y < 0 along an ascent step; BB1 length is s.s / (-s.y).
      const Vector s = next.lambda - cur.lambda;
      const Vector y = next.grad - cur.grad;
      const double sy = s.dot(y);
      step = sy < 0.0 ? s.squaredNorm() / -sy : 2.0 * a;
    } else {
      step = 2.0 * a;
    }
    step = std::clamp(step, 1e-300, 1e300);

    cur = std::move(next);
    if (opts.record_trace) sol.objective_trace.push_back(cur.value);
  }

  sol.iters = iter;
  sol.lambda_star = std::move(cur.lambda);
  sol.w_hat = std::move(cur.w);
  sol.feas_residual = cur.grad.norm() / y_norm;
  sol.cert_residual = certificate_residual(X, Y, sol.w_hat, sol.lambda_star, p);
  sol.converged = !stalled && sol.feas_residual <= opts.tol_feas &&
                  sol.cert_residual <= opts.tol_cert;
  return sol;
}

}  // namespace normscaler
