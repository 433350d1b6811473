#include "hnko/training.hpp"

#include <cmath>
#include <string>

namespace hnko::training {

void adam_step(std::vector<Matrix>& params, const std::vector<Matrix>& grads, AdamState& state,
               const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw DimensionError("adam_step: params/grads count differ");
  if (state.m.empty()) {
    for (const Matrix& p : params) {
      state.m.push_back(Matrix::Zero(p.rows(), p.cols()));
      state.v.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }
  if (state.m.size() != params.size()) throw DimensionError("adam_step: state count mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].rows() != params[i].rows() || grads[i].cols() != params[i].cols() ||
        state.m[i].rows() != params[i].rows() || state.m[i].cols() != params[i].cols()) {
      throw DimensionError("adam_step: shape mismatch at tensor " + std::to_string(i));
    }
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i].cwiseAbs2();
    params[i].array() -= cfg.learning_rate * (state.m[i].array() / bc1) /
                         ((state.v[i].array() / bc2).sqrt() + cfg.epsilon);
  }
}

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 0) throw ValidationError("train: epochs must be >= 0");
  if (!(cfg.adam.learning_rate > 0.0)) throw ValidationError("train: learning_rate must be > 0");
  if (!(cfg.adam.beta1 >= 0.0 && cfg.adam.beta1 < 1.0) ||
      !(cfg.adam.beta2 >= 0.0 && cfg.adam.beta2 < 1.0)) {
    throw ValidationError("train: Adam betas must lie in [0, 1)");
  }
  if (!(cfg.adam.epsilon > 0.0)) throw ValidationError("train: Adam epsilon must be > 0");
  const model::LossWeights& w = cfg.weights;
  for (double x : {w.dict, w.koop, w.sphere, w.deg, w.ind}) {
    if (!(x >= 0.0)) throw ValidationError("train: loss weights must be non-negative");
  }
}

namespace {

// Mask of which flattened tensors may move, aligned with model::parameters().
std::vector<bool> trainable_mask(const model::HnkoModel& m, const Trainable& t) {
  std::vector<bool> mask;
  mask.insert(mask.end(), 2 * m.encoder.layers.size(), t.encoder);
  mask.insert(mask.end(), 2 * m.decoder.layers.size(), t.decoder);
  mask.insert(mask.end(), m.koopman.factors().size(), t.koopman);
  mask.push_back(t.radius);
  mask.push_back(t.hyperplanes);
  return mask;
}

}  // namespace

TrainResult train(model::HnkoModel model, const Matrix& data, const TrainConfig& cfg,
                  const ProgressCallback& progress) {
  validate(cfg);
  model.validate();
  if (data.rows() != model.state_dim()) {
    throw DimensionError("train: data dimension " + std::to_string(data.rows()) +
                         " != model state dimension " + std::to_string(model.state_dim()));
  }
  if (data.cols() < 2) throw ValidationError("train: need at least two samples");

  TrainResult result;
  result.history.reserve(static_cast<std::size_t>(cfg.epochs));
  const std::vector<bool> mask = trainable_mask(model, cfg.trainable);
  std::vector<Matrix> params = model::parameters(model);
  AdamState adam;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    ad::Tape tape;
    const model::ModelVars vars = model::make_vars(tape, model);
    const model::LossGraph g = model::build_loss(tape, vars, model, data, cfg.weights);

    model::LossBreakdown lb;
    lb.weights = cfg.weights;
    lb.dict = g.dict.scalar();
    lb.koop = g.koop.scalar();
    lb.sphere = g.sphere.scalar();
    lb.deg = g.deg.scalar();
    lb.ind = g.ind.scalar();
    lb.total = g.total.scalar();
    if (!std::isfinite(lb.total)) {
      throw TrainingDiverged("train: non-finite loss at epoch " + std::to_string(epoch), model,
                             epoch);
    }

    tape.backward(g.total);
    const std::vector<ad::Var> leaves = vars.all();
    std::vector<Matrix> grads;
    grads.reserve(leaves.size());
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      if (!mask[i]) {
        grads.push_back(Matrix::Zero(params[i].rows(), params[i].cols()));
        continue;
      }
      grads.push_back(leaves[i].grad());
      if (!grads.back().allFinite()) {
        throw TrainingDiverged("train: non-finite gradient at epoch " + std::to_string(epoch),
                               model, epoch);
      }
    }

    result.history.push_back(lb);
    if (progress && cfg.log_every > 0 && epoch % cfg.log_every == 0) progress(epoch, lb);

    std::vector<Matrix> updated = params;
    adam_step(updated, grads, adam, cfg.adam);
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (mask[i]) params[i] = std::move(updated[i]);
    }
    model::set_parameters(model, params);
  }
  result.model = std::move(model);
  return result;
}

}  // namespace hnko::training
