#include "normscaler/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "normscaler/solver.hpp"

namespace normscaler {

namespace {

constexpr double kCrossoverBand = 3.0;
constexpr double kInf = std::numeric_limits<double>::infinity();

double spike_exponent(double p, double r) { return 1.0 / r - 1.0 / (2.0 * (p - 1.0)); }

// Plateau branch applies from r_star upward.
bool on_plateau_side(double p, double r) { return r >= r_threshold(p) - 1e-12; }

double bulk_size(const TheoryInputs& in, double n) { return in.kappa_bulk * n; }

}  // namespace

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::BulkDominated: return "bulk";
    case Regime::SpikeDominated: return "spike";
    case Regime::Crossover: return "crossover";
  }
  return "crossover";
}

Regime regime_from_string(const std::string& name) {
  if (name == "bulk") return Regime::BulkDominated;
  if (name == "spike") return Regime::SpikeDominated;
  if (name == "crossover") return Regime::Crossover;
  throw Error(ErrorKind::SchemaMismatch, "unknown regime '" + name + "'");
}

TheoryInputs make_theory_inputs(const Vector& w_star, double sigma, double p, double r, double n,
                                double d) {
  TheoryInputs in;
  in.p = p;
  in.q = conjugate_exponent(p);
  in.r = r;
  in.n = n;
  in.d = d;
  in.sigma = sigma;
  int s = 0;
  double W_q = 0.0;
  double a = 0.0;
  for (Eigen::Index j = 0; j < w_star.size(); ++j) {
    if (w_star[j] != 0.0) {
      ++s;
      W_q += std::pow(std::abs(w_star[j]), in.q);
      if (a == 0.0) a = std::abs(w_star[j]);
    }
  }
  in.s = s;
  in.kappa_bulk = (d - s) / n;
  auto& sum = in.w_star_summary;
  sum.W_q = W_q;
  sum.l2 = w_star.norm();
  sum.tau_s_sq = w_star.squaredNorm() + sigma * sigma;
  sum.norm_qm1r = lr_norm(w_star, (in.q - 1.0) * r);
  sum.s = s;
  sum.a = a;
  return in;
}

TheoryInputs make_theory_inputs(const TargetSpec& target, const DesignSpec& design, double sigma,
                                double p, double r, int n) {
  const int d = design.resolve_d(n);
  return make_theory_inputs(gen_target(target, d), sigma, p, r, n, d);
}

double gaussian_abs_moment(double t) {
  if (!(t > 0.0)) throw Error(ErrorKind::DomainError, "moment order must be positive");
  return std::exp(0.5 * t * std::numbers::ln2 + std::lgamma(0.5 * (t + 1.0)) -
                  0.5 * std::log(std::numbers::pi));
}

double r_threshold(double p) {
  if (!(p > 1.0 && p <= 2.0)) throw Error(ErrorKind::DomainError, "p must lie in (1, 2]");
  return 2.0 * (p - 1.0);
}

TransitionScale transition_n_star(const TheoryInputs& in) {
  const double W_q = in.w_star_summary.W_q;
  if (in.q <= 2.0 + 1e-12 || !(W_q > 0.0)) return {kInf, true};
  const double tau_q = std::pow(in.w_star_summary.tau_s_sq, 0.5 * in.q);
  return {std::pow(in.kappa_bulk * tau_q / W_q, 2.0 / (in.q - 2.0)), false};
}

double ray_scale_prediction(const TheoryInputs& in, double n) {
  const double q = in.q;
  const double tau_sq = in.w_star_summary.tau_s_sq;
  const double tau_q = std::pow(tau_sq, 0.5 * q);
  const double s = in.s;
  const double spike = std::pow(n, q) * in.w_star_summary.W_q;
  const double bulk = bulk_size(in, n) * gaussian_abs_moment(q) * tau_q * std::pow(n, 0.5 * q);
  const double remainder =
      in.remainder_weight * tau_q * (s * std::pow(n, 0.5 * q) + std::pow(s, 1.0 + 0.5 * q));
  const double ratio = tau_sq * n / (spike + bulk + remainder);
  return std::pow(ratio, 1.0 / (q - 1.0));
}

Regime regime_prediction(const TheoryInputs& in, double n) {
  const double n_star = transition_n_star(in).value;
  if (n < n_star / kCrossoverBand) return Regime::BulkDominated;
  if (n > kCrossoverBand * n_star) return Regime::SpikeDominated;
  return Regime::Crossover;
}

namespace {

PredictionTerms unified_terms(const TheoryInputs& in, double n) {
  const double q = in.q;
  const double t = ray_scale_prediction(in, n);
  const double ray = std::pow(t * in.tau_s() * std::sqrt(n), q - 1.0);
  PredictionTerms terms;
  terms.spike_main = std::pow(t * n * in.w_star_summary.norm_qm1r, q - 1.0);
  terms.bulk = std::pow(bulk_size(in, n), 1.0 / in.r) * ray;
  terms.spike_remainder =
      std::pow(static_cast<double>(in.s), std::max(1.0 / in.r, 0.5 * (q - 1.0))) * ray;
  return terms;
}

double max_term(const PredictionTerms& t) {
  return std::max({t.spike_main, t.bulk, t.spike_remainder});
}

Prediction base_prediction(const TheoryInputs& in) {
  Prediction pred;
  const TransitionScale ns = transition_n_star(in);
  pred.n_star = ns.value;
  pred.boundary_p = ns.boundary_p;
  pred.r_star = r_threshold(in.p);
  return pred;
}

}  // namespace

Prediction unified_norm_prediction(const TheoryInputs& in, double n) {
  Prediction pred = base_prediction(in);
  pred.regime = regime_prediction(in, n);
  pred.terms = unified_terms(in, n);
  pred.value = max_term(pred.terms);
  constexpr double h = 1e-4;
  const double up = max_term(unified_terms(in, n * std::exp(h)));
  const double down = max_term(unified_terms(in, n * std::exp(-h)));
  pred.slope = (std::log(up) - std::log(down)) / (2.0 * h);
  return pred;
}

Prediction spike_dominated_prediction(const TheoryInputs& in, double n) {
  Prediction pred = base_prediction(in);
  pred.regime = Regime::SpikeDominated;
  const auto& w = in.w_star_summary;
  if (!(w.W_q > 0.0)) throw Error(ErrorKind::DomainError, "spike regime needs W_q > 0");
  const double q = in.q;
  if (in.r <= r_threshold(in.p) + 1e-12) {
    pred.value = std::pow(w.tau_s_sq, 0.5 * (q + 1.0)) / w.W_q * std::pow(n, spike_exponent(in.p, in.r));
  } else {
    pred.value = w.tau_s_sq / w.W_q * std::pow(w.norm_qm1r, q - 1.0);
  }
  pred.slope = on_plateau_side(in.p, in.r) ? 0.0 : spike_exponent(in.p, in.r);
  return pred;
}

Prediction bulk_dominated_prediction(const TheoryInputs& in, double n) {
  Prediction pred = base_prediction(in);
  pred.regime = Regime::BulkDominated;
  const auto& w = in.w_star_summary;
  const double q = in.q;
  const double r = in.r;
  const double k = in.kappa_bulk;
  const double tau = in.tau_s();
  const double e1 = 1.0 / r - 0.5;
  const double e2 = 0.5 * q - 1.0;
  const double e3 = -0.5;
  pred.terms.bulk = std::pow(k, 1.0 / r - 1.0) * tau * std::pow(n, e1);
  pred.terms.spike_main =
      std::pow(tau, 2.0 - q) * std::pow(w.norm_qm1r, q - 1.0) * std::pow(n, e2) / k;
  pred.terms.spike_remainder = tau *
                               std::pow(static_cast<double>(in.s), std::max(1.0 / r, 0.5 * (q - 1.0))) *
                               std::pow(n, e3) / k;
  pred.value = pred.terms.bulk;
  pred.slope = e1;
  if (pred.terms.spike_main > pred.value) {
    pred.value = pred.terms.spike_main;
    pred.slope = e2;
  }
  if (pred.terms.spike_remainder > pred.value) {
    pred.value = pred.terms.spike_remainder;
    pred.slope = e3;
  }
  return pred;
}

CorollaryForms single_spike_corollary(double p, double r, double a, double sigma,
                                      double kappa_bulk, double n) {
  const double q = conjugate_exponent(p);
  const double tau_sq = a * a + sigma * sigma;
  CorollaryForms out;
  if (r <= r_threshold(p) + 1e-12) {
    out.spike = std::pow(tau_sq, 0.5 * (q + 1.0)) / std::pow(std::abs(a), q) * std::pow(n, spike_exponent(p, r));
  } else {
    out.spike = tau_sq / std::abs(a);
  }
  out.bulk = std::max({std::pow(kappa_bulk, 1.0 / r - 1.0) * std::sqrt(tau_sq) * std::pow(n, 1.0 / r - 0.5),
                       std::pow(tau_sq, 0.5 * (2.0 - q)) * std::pow(std::abs(a), q - 1.0) *
                           std::pow(n, 0.5 * q - 1.0) / kappa_bulk,
                       std::sqrt(tau_sq) / std::sqrt(n) / kappa_bulk});
  return out;
}

CorollaryForms flat_support_corollary(double p, double r, int s, double a, double sigma,
                                      double kappa_bulk, double n) {
  const double q = conjugate_exponent(p);
  const double sd = s;
  const double abs_a = std::abs(a);
  const double tau_sq = sd * a * a + sigma * sigma;
  CorollaryForms out;
  if (r <= r_threshold(p) + 1e-12) {
    out.spike = std::pow(tau_sq, 0.5 * (q + 1.0)) / (sd * std::pow(abs_a, q)) *
                std::pow(n, spike_exponent(p, r));
  } else {
    out.spike = std::pow(sd, 1.0 / r - 1.0) * tau_sq / abs_a;
  }
  out.bulk = std::max(
      {std::pow(kappa_bulk, 1.0 / r - 1.0) * std::sqrt(tau_sq) * std::pow(n, 1.0 / r - 0.5),
       std::pow(tau_sq, 0.5 * (2.0 - q)) * std::pow(sd, 1.0 / r) * std::pow(abs_a, q - 1.0) *
           std::pow(n, 0.5 * q - 1.0) / kappa_bulk,
       std::sqrt(tau_sq) * std::pow(sd, std::max(1.0 / r, 0.5 * (q - 1.0))) / std::sqrt(n) /
           kappa_bulk});
  return out;
}

double overlay_log_shift(std::span<const double> empirical, std::span<const double> predicted) {
  if (empirical.size() != predicted.size() || empirical.empty()) {
    throw Error(ErrorKind::DimensionMismatch, "overlay_log_shift: mismatched or empty inputs");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < empirical.size(); ++i) {
    if (!(empirical[i] > 0.0 && predicted[i] > 0.0)) {
      throw Error(ErrorKind::NonPositiveValue, "overlay_log_shift needs positive values");
    }
    total += std::log(empirical[i]) - std::log(predicted[i]);
  }
  return total / static_cast<double>(empirical.size());
}

}  // namespace normscaler
