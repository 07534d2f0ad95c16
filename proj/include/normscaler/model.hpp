#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "normscaler/error.hpp"

namespace normscaler {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class TargetKind { SingleSpike, FlatSupport, Custom };

struct SignPolicy {
  bool rademacher = false;
  std::uint64_t seed = 0;
};

/// Ground-truth description. The support is always the first `s` coordinates.
struct TargetSpec {
  TargetKind kind = TargetKind::SingleSpike;
  int s = 1;
  /// Per-coordinate magnitude; FlatSupport defaults to 1/sqrt(s), SingleSpike to 1.
  std::optional<double> a;
  std::vector<double> custom_values;
  SignPolicy signs;

  static TargetSpec single_spike(double magnitude = 1.0);
  static TargetSpec flat(int s, std::optional<double> a = std::nullopt);
  static TargetSpec custom(std::vector<double> values);

  int support_size() const { return kind == TargetKind::SingleSpike ? 1 : s; }
  /// Magnitude used on the support (first custom value for Custom targets).
  double magnitude() const;
};

std::string to_string(TargetKind kind);
TargetKind target_kind_from_string(const std::string& name);

struct DesignSpec {
  enum class Mode { FixedD, Proportional };
  Mode mode = Mode::FixedD;
  int d = 0;
  double kappa = 0.0;

  static DesignSpec fixed(int d) { return {Mode::FixedD, d, 0.0}; }
  static DesignSpec proportional(double kappa) { return {Mode::Proportional, 0, kappa}; }

  /// d for a given n: d itself, or ceil(kappa * n).
  int resolve_d(int n) const;
};

struct ProblemInstance {
  Matrix X;        // n x d, i.i.d. N(0, 1)
  Vector Y;        // X w_star + noise
  Vector w_star;
  Vector noise;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  int n = 0;
  int d = 0;
  int s = 0;
};

Vector gen_target(const TargetSpec& spec, int d);

/// X is filled column by column from one counter stream keyed by `seed`;
/// the noise uses an independent child stream of the same key.
ProblemInstance gen_instance(const TargetSpec& target, const DesignSpec& design, double sigma,
                             int n, std::uint64_t seed);

/// (sum |w_i|^r)^(1/r), evaluated after factoring out max |w_i| so that large r
/// cannot overflow. r < 1 gives the quasi-norm.
template <typename Derived>
typename Derived::Scalar lr_norm(const Eigen::MatrixBase<Derived>& w,
                                 typename Derived::Scalar r) {
  using Scalar = typename Derived::Scalar;
  if (w.size() == 0) return Scalar(0);
  const Scalar peak = w.cwiseAbs().maxCoeff();
  if (!(peak > Scalar(0))) return Scalar(0);
  const Scalar sum = (w.cwiseAbs() / peak).array().pow(r).sum();
  return peak * std::pow(sum, Scalar(1) / r);
}

/// Exact test MSE under the isotropic Gaussian design: ||w_hat - w_star||^2 + sigma^2.
double population_risk(const Vector& w_hat, const Vector& w_star, double sigma);

/// Finite-sample alternative to population_risk, drawn from its own stream.
double empirical_test_mse(const Vector& w_hat, const Vector& w_star, double sigma,
                          int test_size, std::uint64_t seed);

}  // namespace normscaler
