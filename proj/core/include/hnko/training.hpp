#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "hnko/error.hpp"
#include "hnko/model.hpp"

namespace hnko::training {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long step = 0;
};

/// One Adam update with bias correction, in place:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2,
///   x <- x - lr * m_hat / (sqrt(v_hat) + eps).
/// The state is lazily shaped on first use. Throws DimensionError when
/// shapes disagree.
void adam_step(std::vector<Matrix>& params, const std::vector<Matrix>& grads, AdamState& state,
               const AdamConfig& cfg);

/// Which parameter groups the optimiser may move.
struct Trainable {
  bool encoder = true;
  bool decoder = true;
  bool koopman = true;
  bool radius = true;
  bool hyperplanes = true;
};

struct TrainConfig {
  int epochs = 5000;
  AdamConfig adam;
  model::LossWeights weights;
  std::uint64_t seed = 0;  ///< recorded for provenance; full-batch training draws no randomness
  int log_every = 100;
  Trainable trainable;
};

struct TrainResult {
  model::HnkoModel model;
  std::vector<model::LossBreakdown> history;  ///< one entry per epoch, before the update
};

/// Raised when the loss or a gradient becomes non-finite. Carries the last
/// model whose loss was finite.
class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(const std::string& what, model::HnkoModel last_good, int epoch)
      : NumericalError(what), last_good_(std::move(last_good)), epoch_(epoch) {}
  const model::HnkoModel& last_good() const { return last_good_; }
  int epoch() const { return epoch_; }

 private:
  model::HnkoModel last_good_;
  int epoch_;
};

using ProgressCallback = std::function<void(int epoch, const model::LossBreakdown&)>;

/// Full-batch Adam on the comprehensive loss. data columns are
/// time-ordered raw states. The Koopman update acts on the skew parameters
/// and r on log r, so K stays in SO(p) and r > 0 throughout.
TrainResult train(model::HnkoModel model, const Matrix& data, const TrainConfig& cfg,
                  const ProgressCallback& progress = {});

/// Validates config invariants (learning_rate > 0, epochs >= 0, ...).
void validate(const TrainConfig& cfg);

}  // namespace hnko::training
