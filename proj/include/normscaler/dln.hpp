#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "normscaler/model.hpp"

namespace normscaler {

struct DlnConfig {
  double alpha = 1.0;
  double lr = 1e-3;
  long max_epochs = 2'000'000;
  double loss_tol = 1e-10;        // on the mean squared training loss ||X beta - Y||^2 / n
  double divergence_factor = 1e6;
  /// Std of a Gaussian perturbation added to every gradient coordinate (0 = exact GD).
  double grad_noise_std = 0.0;
  std::uint64_t noise_seed = 0;

  void validate() const;
};

/// beta = u*u - v*v.
struct DlnState {
  Vector u;
  Vector v;
  long epoch = 0;

  Vector beta() const { return u.cwiseProduct(u) - v.cwiseProduct(v); }
};

enum class TrainStatus { Interpolated, MaxEpochs, Diverged };
std::string to_string(TrainStatus status);

struct TrainReport {
  Vector beta;
  long epochs_run = 0;
  double final_loss = 0.0;
  TrainStatus status = TrainStatus::MaxEpochs;
};

DlnState dln_init(int d, double alpha);

/// One full-batch gradient step on L(u, v) = ||X (u*u - v*v) - Y||^2 / (2n).
DlnState dln_step(const DlnState& state, const Matrix& X, const Vector& Y, double lr);

/// Mean squared training loss ||X beta - Y||^2 / n.
double dln_loss(const Matrix& X, const Vector& beta, const Vector& Y);

/// Optional per-epoch observer: (epoch, loss, state).
using DlnObserver = std::function<void(long, double, const DlnState&)>;

TrainReport dln_train(const Matrix& X, const Vector& Y, const DlnConfig& cfg,
                      const DlnObserver& observer = {});

}  // namespace normscaler
