#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "hnko/autodiff.hpp"
#include "hnko/numerics.hpp"
#include "hnko/orthogonal.hpp"

namespace hnko {
class Rng;
}

namespace hnko::model {

/// One affine layer, out = weight * in + bias. bias is a column (rows x 1).
struct DenseLayer {
  Matrix weight;
  Matrix bias;
};

/// Multilayer perceptron: tanh on hidden layers, identity on the output.
struct Mlp {
  std::vector<DenseLayer> layers;

  Index input_dim() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
  Index output_dim() const { return layers.empty() ? 0 : layers.back().weight.rows(); }

  /// Columns of x are samples.
  Matrix forward(const Matrix& x) const;
  /// Throws DimensionError when consecutive layers do not chain.
  void validate() const;

  /// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
  /// dims = {input, hidden..., output}.
  static Mlp glorot(const std::vector<Index>& dims, Rng& rng);
};

/// Weights on the five loss terms; the default reproduces the plain sum.
struct LossWeights {
  double dict = 1.0;
  double koop = 1.0;
  double sphere = 1.0;
  double deg = 1.0;
  double ind = 1.0;
};

struct LossBreakdown {
  double dict = 0.0;
  double koop = 0.0;
  double sphere = 0.0;
  double deg = 0.0;
  double ind = 0.0;
  double total = 0.0;
  LossWeights weights;
};

/// Fixed per-coordinate affine map applied before the encoder and undone
/// after the decoder: x_norm = (x - shift) / scale.
struct Normalizer {
  Vector shift;
  Vector scale;

  static Normalizer identity(Index n);
  /// Mean and population standard deviation of each row of data; zero
  /// deviations fall back to 1.
  static Normalizer fit(const Matrix& data);
  Matrix apply(const Matrix& x) const;
  Matrix invert(const Matrix& x) const;
};

class HnkoModel {
 public:
  Mlp encoder;
  Mlp decoder;
  orthogonal::OrthogonalKoopman koopman;
  double log_radius = 0.0;  ///< r = exp(log_radius) > 0
  Matrix hyperplanes;       ///< p x q, columns v_k
  Normalizer normalizer;

  Index state_dim() const { return encoder.input_dim(); }
  Index latent_dim() const { return encoder.output_dim(); }
  Index q() const { return hyperplanes.cols(); }
  double radius() const;

  /// Checks network chaining, latent dimension agreement with K and V,
  /// p - floor(p/2) - 1 <= q <= p - 2, and normalizer shape.
  void validate() const;
};

/// Inclusive admissible range of q for latent dimension p.
std::pair<Index, Index> q_range(Index p);

struct ModelConfig {
  Index state_dim = 0;
  Index latent_dim = 0;
  Index q = 0;
  /// Hidden widths shared by encoder and decoder; nullopt selects two
  /// layers of max(64, 4p). An empty list gives affine networks.
  std::optional<std::vector<Index>> hidden;
  orthogonal::Variant variant = orthogonal::Variant::Full;
  std::uint64_t seed = 0;
  bool normalize = true;
};

std::vector<Index> default_hidden(Index latent_dim);

/// Builds a model for training data (columns are samples). Encoder/decoder
/// Glorot-initialised, K near identity, V orthonormal (QR of a Gaussian
/// matrix), r = 1.1 * max ||x_i|| over the normalized data.
HnkoModel init_model(const ModelConfig& cfg, const Matrix& data);

/// Encoder and decoder on raw (unnormalised) states, batched by column.
Matrix encode(const HnkoModel& model, const Matrix& x);
Matrix decode(const HnkoModel& model, const Matrix& y);
Vector encode(const HnkoModel& model, const Vector& x);
Vector decode(const HnkoModel& model, const Vector& y);

// Individual loss terms. `data` columns are time-ordered raw states.
double loss_dict(const HnkoModel& model, const Matrix& data);
double loss_koop(const HnkoModel& model, const Matrix& data);
double loss_sphere(const HnkoModel& model, const Matrix& data);
/// Throws ValidationError if some ||v_k|| <= 1e-12.
double loss_deg(const HnkoModel& model, const Matrix& data);
/// Sum over ordered pairs k != j, so each unordered pair counts twice.
double loss_ind(const HnkoModel& model);

LossBreakdown total_loss(const HnkoModel& model, const Matrix& data, const LossWeights& weights);

/// Leaves on a tape for every trainable tensor of a model, in the order of
/// parameters(): encoder (W, b)..., decoder (W, b)..., Koopman factors,
/// log r, V.
struct ModelVars {
  std::vector<ad::Var> encoder;
  std::vector<ad::Var> decoder;
  std::vector<ad::Var> koopman;
  ad::Var log_radius;
  ad::Var hyperplanes;

  std::vector<ad::Var> all() const;
};

ModelVars make_vars(ad::Tape& tape, const HnkoModel& model);

struct LossGraph {
  ad::Var dict, koop, sphere, deg, ind, total;
};

/// Records the comprehensive loss on `tape`. The data are normalised with
/// the model's normalizer before entering the graph.
LossGraph build_loss(ad::Tape& tape, const ModelVars& vars, const HnkoModel& model,
                     const Matrix& data, const LossWeights& weights);

/// Flattened list of parameter tensors (same order as ModelVars::all()).
std::vector<Matrix> parameters(const HnkoModel& model);
/// Writes tensors back; shapes must match parameters(model).
void set_parameters(HnkoModel& model, const std::vector<Matrix>& params);

/// Rollout x_k = decode(K^k encode(x0)), k = 0..steps. Columns are states.
/// K^k y is formed by repeated application, never by matrix powers.
Matrix predict(const HnkoModel& model, const Vector& x0, Index steps);

/// Latent rollout K^k encode(x0), k = 0..steps.
Matrix latent_rollout(const HnkoModel& model, const Vector& x0, Index steps);

}  // namespace hnko::model
