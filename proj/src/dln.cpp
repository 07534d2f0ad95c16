#include "normscaler/dln.hpp"

#include <cmath>
#include <limits>

#include "normscaler/rng.hpp"

namespace normscaler {

namespace {

void require_finite(const DlnState& s) {
  if (!s.u.allFinite() || !s.v.allFinite()) {
    throw Error(ErrorKind::NonFinite, "DLN parameters left the finite range at epoch " +
                                          std::to_string(s.epoch));
  }
}

// In-place update shared by dln_step and dln_train; `residual` is X beta - Y.
void apply_gradient(DlnState& s, const Matrix& X, const Vector& residual, double lr,
                    CounterRng* noise, double noise_std) {
  const double n = static_cast<double>(X.rows());
  Vector g = X.transpose() * residual;
  g /= n;
  if (noise != nullptr) {
    for (Eigen::Index i = 0; i < g.size(); ++i) g[i] += noise_std * noise->next_gaussian();
  }
  s.u.array() *= 1.0 - 2.0 * lr * g.array();
  s.v.array() *= 1.0 + 2.0 * lr * g.array();
  ++s.epoch;
}

}  // namespace

void DlnConfig::validate() const {
  if (!(alpha > 0.0) || !(lr > 0.0) || max_epochs < 1 || !(loss_tol > 0.0) ||
      !(divergence_factor > 0.0) || !(grad_noise_std >= 0.0)) {
    throw Error(ErrorKind::ConfigError, "DlnConfig fields must be positive");
  }
}

std::string to_string(TrainStatus status) {
  switch (status) {
    case TrainStatus::Interpolated: return "interpolated";
    case TrainStatus::MaxEpochs: return "max_epochs";
    case TrainStatus::Diverged: return "diverged";
  }
  return "unknown";
}

DlnState dln_init(int d, double alpha) {
  if (!(alpha > 0.0)) throw Error(ErrorKind::DomainError, "alpha must be positive");
  return {Vector::Constant(d, alpha), Vector::Constant(d, alpha), 0};
}

double dln_loss(const Matrix& X, const Vector& beta, const Vector& Y) {
  return (X * beta - Y).squaredNorm() / static_cast<double>(X.rows());
}

DlnState dln_step(const DlnState& state, const Matrix& X, const Vector& Y, double lr) {
  if (X.rows() != Y.size() || X.cols() != state.u.size() || state.u.size() != state.v.size()) {
    throw Error(ErrorKind::DimensionMismatch, "dln_step: inconsistent shapes");
  }
  DlnState next = state;
  Vector residual = X * state.beta();
  residual -= Y;
  apply_gradient(next, X, residual, lr, nullptr, 0.0);
  require_finite(next);
  return next;
}

TrainReport dln_train(const Matrix& X, const Vector& Y, const DlnConfig& cfg,
                      const DlnObserver& observer) {
  cfg.validate();
  if (X.rows() != Y.size()) throw Error(ErrorKind::DimensionMismatch, "dln_train: X/Y mismatch");
  const double n = static_cast<double>(X.rows());

  DlnState state = dln_init(static_cast<int>(X.cols()), cfg.alpha);
  CounterRng noise_rng(mix64(cfg.noise_seed ^ 0xD1A6'0000ULL));
  CounterRng* noise = cfg.grad_noise_std > 0.0 ? &noise_rng : nullptr;

  TrainReport report;
  Vector beta = state.beta();
  Vector residual = X * beta - Y;
  double loss = residual.squaredNorm() / n;
  const double initial_loss = loss;

  while (true) {
    if (observer) observer(state.epoch, loss, state);
    if (loss <= cfg.loss_tol) {
      report.status = TrainStatus::Interpolated;
      break;
    }
    if (!std::isfinite(loss) || loss > cfg.divergence_factor * initial_loss) {
      report.status = TrainStatus::Diverged;
      break;
    }
    if (state.epoch >= cfg.max_epochs) {
      report.status = TrainStatus::MaxEpochs;
      break;
    }
    apply_gradient(state, X, residual, cfg.lr, noise, cfg.grad_noise_std);
    if (!state.u.allFinite() || !state.v.allFinite()) {
      report.status = TrainStatus::Diverged;
      loss = std::numeric_limits<double>::infinity();
      break;
    }
    beta = state.beta();
    residual.noalias() = X * beta;
    residual -= Y;
    loss = residual.squaredNorm() / n;
  }

  report.beta = state.beta();
  report.epochs_run = state.epoch;
  report.final_loss = loss;
  return report;
}

}  // namespace normscaler
