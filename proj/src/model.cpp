#include "normscaler/model.hpp"

#include "normscaler/rng.hpp"

namespace normscaler {

TargetSpec TargetSpec::single_spike(double magnitude) {
  TargetSpec spec;
  spec.kind = TargetKind::SingleSpike;
  spec.s = 1;
  spec.a = magnitude;
  return spec;
}

TargetSpec TargetSpec::flat(int s, std::optional<double> a) {
  TargetSpec spec;
  spec.kind = TargetKind::FlatSupport;
  spec.s = s;
  spec.a = a;
  return spec;
}

TargetSpec TargetSpec::custom(std::vector<double> values) {
  TargetSpec spec;
  spec.kind = TargetKind::Custom;
  spec.s = static_cast<int>(values.size());
  spec.custom_values = std::move(values);
  return spec;
}

double TargetSpec::magnitude() const {
  switch (kind) {
    case TargetKind::SingleSpike: return a.value_or(1.0);
    case TargetKind::FlatSupport: return a.value_or(1.0 / std::sqrt(static_cast<double>(s)));
    case TargetKind::Custom: return custom_values.empty() ? 0.0 : std::abs(custom_values.front());
  }
  return 0.0;
}

std::string to_string(TargetKind kind) {
  switch (kind) {
    case TargetKind::SingleSpike: return "SingleSpike";
    case TargetKind::FlatSupport: return "FlatSupport";
    case TargetKind::Custom: return "Custom";
  }
  return "Unknown";
}

TargetKind target_kind_from_string(const std::string& name) {
  if (name == "SingleSpike" || name == "e1") return TargetKind::SingleSpike;
  if (name == "FlatSupport" || name == "flat") return TargetKind::FlatSupport;
  if (name == "Custom" || name == "custom") return TargetKind::Custom;
  throw Error(ErrorKind::SpecInvalid, "unknown target kind '" + name + "'");
}

int DesignSpec::resolve_d(int n) const {
  if (mode == Mode::FixedD) return d;
  if (!(kappa > 1.0)) throw Error(ErrorKind::SpecInvalid, "proportional design needs kappa > 1");
  return static_cast<int>(std::ceil(kappa * static_cast<double>(n)));
}

Vector gen_target(const TargetSpec& spec, int d) {
  const int s = spec.support_size();
  if (s < 1) throw Error(ErrorKind::SpecInvalid, "support size must be >= 1");
  if (s > d) {
    throw Error(ErrorKind::SpecInvalid,
                "support size " + std::to_string(s) + " exceeds d=" + std::to_string(d));
  }
  if (spec.kind == TargetKind::Custom && static_cast<int>(spec.custom_values.size()) != spec.s) {
    throw Error(ErrorKind::SpecInvalid, "custom_values length must equal s");
  }

  Vector w = Vector::Zero(d);
  if (spec.kind == TargetKind::Custom) {
    for (int i = 0; i < s; ++i) w[i] = spec.custom_values[static_cast<std::size_t>(i)];
  } else {
    w.head(s).setConstant(spec.magnitude());
  }
  if (spec.signs.rademacher) {
    CounterRng rng(mix64(spec.signs.seed));
    for (int i = 0; i < s; ++i) {
      if (rng.next_u64() >> 63) w[i] = -w[i];
    }
  }
  return w;
}

ProblemInstance gen_instance(const TargetSpec& target, const DesignSpec& design, double sigma,
                             int n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorKind::SpecInvalid, "n must be >= 1");
  if (!(sigma >= 0.0)) throw Error(ErrorKind::SpecInvalid, "sigma must be nonnegative");
  const int d = design.resolve_d(n);
  if (d <= n) {
    throw Error(ErrorKind::SpecInvalid, "design is not overparameterized: d=" +
                                            std::to_string(d) + " <= n=" + std::to_string(n));
  }

  ProblemInstance inst;
  inst.n = n;
  inst.d = d;
  inst.sigma = sigma;
  inst.seed = seed;
  inst.w_star = gen_target(target, d);
  inst.s = target.support_size();

  CounterRng design_rng(mix64(seed));
  inst.X.resize(n, d);
  double* data = inst.X.data();
  const Eigen::Index total = inst.X.size();
  for (Eigen::Index k = 0; k < total; ++k) data[k] = design_rng.next_gaussian();

  CounterRng noise_rng = design_rng.split(1);
  inst.noise.resize(n);
  for (int i = 0; i < n; ++i) inst.noise[i] = sigma * noise_rng.next_gaussian();

  inst.Y.noalias() = inst.X * inst.w_star;
  inst.Y += inst.noise;
  return inst;
}

double population_risk(const Vector& w_hat, const Vector& w_star, double sigma) {
  if (w_hat.size() != w_star.size()) {
    throw Error(ErrorKind::DimensionMismatch, "population_risk: length mismatch");
  }
  return (w_hat - w_star).squaredNorm() + sigma * sigma;
}

double empirical_test_mse(const Vector& w_hat, const Vector& w_star, double sigma,
                          int test_size, std::uint64_t seed) {
  if (w_hat.size() != w_star.size()) {
    throw Error(ErrorKind::DimensionMismatch, "empirical_test_mse: length mismatch");
  }
  if (test_size < 1) throw Error(ErrorKind::SpecInvalid, "test_size must be >= 1");
  CounterRng rng(mix64(seed ^ 0x7E57'5E7ULL));
  const Vector delta = w_hat - w_star;
  double total = 0.0;
  for (int i = 0; i < test_size; ++i) {
    double pred_err = 0.0;
    for (Eigen::Index j = 0; j < delta.size(); ++j) pred_err += rng.next_gaussian() * delta[j];
    const double e = pred_err - sigma * rng.next_gaussian();
    total += e * e;
  }
  return total / test_size;
}

}  // namespace normscaler
