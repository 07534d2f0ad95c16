#pragma once

#include <span>
#include <string>

#include "normscaler/model.hpp"

namespace normscaler {

/// Scalar summaries of the target that enter every scaling formula.
struct TargetSummary {
  double W_q = 0.0;        // sum over the support of |w_j|^q
  double tau_s_sq = 0.0;   // ||w||_2^2 + sigma^2
  double norm_qm1r = 0.0;  // ||w||_{(q-1) r}
  double l2 = 0.0;
  int s = 0;
  double a = 0.0;          // support magnitude (flat targets)
};

struct TheoryInputs {
  double p = 2.0;
  double q = 2.0;
  double r = 2.0;
  double n = 1.0;
  double d = 2.0;
  int s = 1;
  double kappa_bulk = 1.0;  // (d - s) / n
  double sigma = 0.0;
  TargetSummary w_star_summary;
  /// Weight of the O(.) remainder in the ray-scale denominator.
  double remainder_weight = 1.0;

  double tau_s() const { return std::sqrt(w_star_summary.tau_s_sq); }
};

enum class Regime { BulkDominated, SpikeDominated, Crossover };

std::string to_string(Regime regime);  // "bulk" / "spike" / "crossover"
Regime regime_from_string(const std::string& name);

struct PredictionTerms {
  double spike_main = 0.0;
  double bulk = 0.0;
  double spike_remainder = 0.0;
};

struct Prediction {
  double value = 0.0;
  Regime regime = Regime::Crossover;
  double n_star = 0.0;
  double r_star = 0.0;
  double slope = 0.0;
  PredictionTerms terms;
  /// p == 2 (or W_q == 0): there is no n-driven transition and n_star is +inf.
  bool boundary_p = false;
};

struct TransitionScale {
  double value = 0.0;
  bool boundary_p = false;
};

/// Inputs for a given target vector. kappa_bulk is (d - s) / n at this n.
TheoryInputs make_theory_inputs(const Vector& w_star, double sigma, double p, double r, double n,
                                double d);
TheoryInputs make_theory_inputs(const TargetSpec& target, const DesignSpec& design, double sigma,
                                double p, double r, int n);

/// E|Z|^t for standard normal Z: 2^(t/2) Gamma((t+1)/2) / sqrt(pi).
double gaussian_abs_moment(double t);

/// r_star = 2 (p - 1).
double r_threshold(double p);

/// (kappa_bulk tau_s^q / W_q)^(2/(q-2)), flagged +inf at p = 2.
TransitionScale transition_n_star(const TheoryInputs& in);

/// t_star from tau^2 n / (n^q W_q + (d-s) m_q tau^q n^(q/2) + c tau^q (s n^(q/2) + s^(1+q/2))),
/// with d - s = kappa_bulk * n.
double ray_scale_prediction(const TheoryInputs& in, double n);

Regime regime_prediction(const TheoryInputs& in, double n);

/// Three-term maximum (spike main, bulk, spike remainder). The slope is the
/// log-log derivative of the value in n at fixed kappa_bulk.
Prediction unified_norm_prediction(const TheoryInputs& in, double n);

Prediction spike_dominated_prediction(const TheoryInputs& in, double n);
Prediction bulk_dominated_prediction(const TheoryInputs& in, double n);

/// Closed forms specialised to w = e1 scaled by `a` (tau^2 = a^2 + sigma^2).
struct CorollaryForms {
  double spike = 0.0;
  double bulk = 0.0;  // maximum of the three bulk-dominated terms
};
CorollaryForms single_spike_corollary(double p, double r, double a, double sigma,
                                      double kappa_bulk, double n);
/// Flat target with s coordinates of magnitude |a|.
CorollaryForms flat_support_corollary(double p, double r, int s, double a, double sigma,
                                      double kappa_bulk, double n);

/// Least-squares vertical offset c minimising sum (log emp - (log pred + c))^2,
/// used to anchor shape-only overlays.
double overlay_log_shift(std::span<const double> empirical, std::span<const double> predicted);

}  // namespace normscaler
