#include "hnko/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/QR>

#include "hnko/error.hpp"
#include "hnko/rng.hpp"

namespace hnko::model {

namespace {

constexpr double kHyperplaneGuard = 1e-12;

void check_dim(const HnkoModel& m, const Matrix& data, const char* who) {
  if (data.rows() != m.state_dim()) {
    throw DimensionError(std::string(who) + ": data dimension " + std::to_string(data.rows()) +
                         " != model state dimension " + std::to_string(m.state_dim()));
  }
}

Matrix encode_normalized(const HnkoModel& m, const Matrix& xn) { return m.encoder.forward(xn); }

void check_hyperplanes(const Matrix& v) {
  for (Index k = 0; k < v.cols(); ++k) {
    const double n = v.col(k).norm();
    if (!(n > kHyperplaneGuard)) {
      throw ValidationError("loss_deg: hyperplane direction v_" + std::to_string(k) +
                            " has norm " + std::to_string(n) + " <= 1e-12");
    }
  }
}

ad::Var mlp_graph(const std::vector<ad::Var>& params, ad::Var input) {
  ad::Var h = input;
  const std::size_t layers = params.size() / 2;
  for (std::size_t l = 0; l < layers; ++l) {
    h = ad::add_column(ad::matmul(params[2 * l], h), params[2 * l + 1]);
    if (l + 1 < layers) h = ad::tanh(h);
  }
  return h;
}

}  // namespace

Matrix Mlp::forward(const Matrix& x) const {
  Matrix h = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix z = layers[l].weight * h;
    z.colwise() += layers[l].bias.col(0);
    if (l + 1 < layers.size()) z = z.array().tanh().matrix();
    h = std::move(z);
  }
  return h;
}

void Mlp::validate() const {
  if (layers.empty()) throw DimensionError("Mlp: no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const DenseLayer& d = layers[l];
    if (d.bias.rows() != d.weight.rows() || d.bias.cols() != 1) {
      throw DimensionError("Mlp: layer " + std::to_string(l) + " bias shape mismatch");
    }
    if (l > 0 && d.weight.cols() != layers[l - 1].weight.rows()) {
      throw DimensionError("Mlp: layer " + std::to_string(l) + " does not chain with layer " +
                           std::to_string(l - 1));
    }
  }
}

Mlp Mlp::glorot(const std::vector<Index>& dims, Rng& rng) {
  if (dims.size() < 2) throw DimensionError("Mlp::glorot: need at least input and output dims");
  Mlp mlp;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const Index in = dims[l];
    const Index out = dims[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    DenseLayer layer{Matrix(out, in), Matrix::Zero(out, 1)};
    for (Index i = 0; i < out; ++i) {
      for (Index j = 0; j < in; ++j) layer.weight(i, j) = rng.uniform(-bound, bound);
    }
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

Normalizer Normalizer::identity(Index n) { return {Vector::Zero(n), Vector::Ones(n)}; }

Normalizer Normalizer::fit(const Matrix& data) {
  Normalizer out;
  out.shift = data.rowwise().mean();
  out.scale.resize(data.rows());
  for (Index i = 0; i < data.rows(); ++i) {
    const double var = (data.row(i).array() - out.shift(i)).square().mean();
    const double sd = std::sqrt(var);
    out.scale(i) = sd > 0.0 ? sd : 1.0;
  }
  return out;
}

Matrix Normalizer::apply(const Matrix& x) const {
  return ((x.colwise() - shift).array().colwise() / scale.array()).matrix();
}

Matrix Normalizer::invert(const Matrix& x) const {
  return ((x.array().colwise() * scale.array()).matrix().colwise() + shift);
}

double HnkoModel::radius() const { return std::exp(log_radius); }

std::pair<Index, Index> q_range(Index p) { return {p - p / 2 - 1, p - 2}; }

void HnkoModel::validate() const {
  encoder.validate();
  decoder.validate();
  const Index n = state_dim();
  const Index p = latent_dim();
  if (decoder.input_dim() != p || decoder.output_dim() != n) {
    throw DimensionError("HnkoModel: decoder must map " + std::to_string(p) + " -> " +
                         std::to_string(n));
  }
  if (koopman.dim() != p) {
    throw DimensionError("HnkoModel: Koopman dimension " + std::to_string(koopman.dim()) +
                         " != latent dimension " + std::to_string(p));
  }
  if (hyperplanes.rows() != p) {
    throw DimensionError("HnkoModel: hyperplanes must have p=" + std::to_string(p) + " rows");
  }
  const auto [lo, hi] = q_range(p);
  const Index q = hyperplanes.cols();
  if (q < 1 || q < lo || q > hi) {
    throw ValidationError("q-constraint violated: need p - floor(p/2) - 1 <= q <= p - 2, i.e. " +
                          std::to_string(lo) + " <= q <= " + std::to_string(hi) +
                          " for p=" + std::to_string(p) + ", got q=" + std::to_string(q));
  }
  if (normalizer.shift.size() != n || normalizer.scale.size() != n) {
    throw DimensionError("HnkoModel: normalizer dimension mismatch");
  }
  if ((normalizer.scale.array() <= 0.0).any()) {
    throw ValidationError("HnkoModel: normalizer scales must be positive");
  }
  if (!std::isfinite(log_radius)) throw ValidationError("HnkoModel: radius must be finite");
}

std::vector<Index> default_hidden(Index latent_dim) {
  const Index w = std::max<Index>(64, 4 * latent_dim);
  return {w, w};
}

HnkoModel init_model(const ModelConfig& cfg, const Matrix& data) {
  const Index n = cfg.state_dim;
  const Index p = cfg.latent_dim;
  if (n < 1 || p < 1) throw ValidationError("init_model: dimensions must be positive");
  if (data.rows() != n) throw DimensionError("init_model: data dimension does not match state_dim");
  const auto [lo, hi] = q_range(p);
  if (cfg.q < 1 || cfg.q < lo || cfg.q > hi) {
    throw ValidationError("q-constraint violated: need " + std::to_string(lo) + " <= q <= " +
                          std::to_string(hi) + " for p=" + std::to_string(p) +
                          ", got q=" + std::to_string(cfg.q));
  }
  if (cfg.variant == orthogonal::Variant::Kronecker) orthogonal::kronecker_factor(p);

  Rng rng(cfg.seed);
  const std::vector<Index> hidden = cfg.hidden.value_or(default_hidden(p));
  std::vector<Index> enc_dims{n};
  enc_dims.insert(enc_dims.end(), hidden.begin(), hidden.end());
  enc_dims.push_back(p);
  std::vector<Index> dec_dims{p};
  dec_dims.insert(dec_dims.end(), hidden.rbegin(), hidden.rend());
  dec_dims.push_back(n);

  HnkoModel m;
  m.encoder = Mlp::glorot(enc_dims, rng);
  m.decoder = Mlp::glorot(dec_dims, rng);
  m.koopman = orthogonal::OrthogonalKoopman::random_near_identity(cfg.variant, p, rng);

  Matrix gauss(p, cfg.q);
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < cfg.q; ++j) gauss(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Matrix> qr(gauss);
  m.hyperplanes = qr.householderQ() * Matrix::Identity(p, cfg.q);

  m.normalizer = (cfg.normalize && data.cols() > 0) ? Normalizer::fit(data) : Normalizer::identity(n);
  const Matrix xn = m.normalizer.apply(data);
  const double max_norm = xn.cols() > 0 ? xn.colwise().norm().maxCoeff() : 0.0;
  m.log_radius = std::log(max_norm > 0.0 ? 1.1 * max_norm : 1.0);
  m.validate();
  return m;
}

Matrix encode(const HnkoModel& model, const Matrix& x) {
  check_dim(model, x, "encode");
  return encode_normalized(model, model.normalizer.apply(x));
}

Matrix decode(const HnkoModel& model, const Matrix& y) {
  if (y.rows() != model.latent_dim()) throw DimensionError("decode: latent dimension mismatch");
  return model.normalizer.invert(model.decoder.forward(y));
}

Vector encode(const HnkoModel& model, const Vector& x) {
  return encode(model, Matrix(x)).col(0);
}

Vector decode(const HnkoModel& model, const Vector& y) {
  return decode(model, Matrix(y)).col(0);
}

double loss_dict(const HnkoModel& model, const Matrix& data) {
  check_dim(model, data, "loss_dict");
  const Matrix xn = model.normalizer.apply(data);
  const Matrix rec = model.decoder.forward(model.encoder.forward(xn));
  return (rec - xn).squaredNorm();
}

double loss_koop(const HnkoModel& model, const Matrix& data) {
  check_dim(model, data, "loss_koop");
  if (data.cols() < 2) throw ValidationError("loss_koop: need at least two samples");
  const Matrix y = encode(model, data);
  const Matrix k = orthogonal::materialize(model.koopman);
  const Index m = y.cols() - 1;
  return (k * y.leftCols(m) - y.rightCols(m)).squaredNorm();
}

double loss_sphere(const HnkoModel& model, const Matrix& data) {
  check_dim(model, data, "loss_sphere");
  const Matrix y = encode(model, data);
  const double r2 = std::exp(2.0 * model.log_radius);
  return (y.colwise().squaredNorm().array() - r2).square().sum();
}

double loss_deg(const HnkoModel& model, const Matrix& data) {
  check_dim(model, data, "loss_deg");
  check_hyperplanes(model.hyperplanes);
  const Matrix y = encode(model, data);
  const Matrix vn = model.hyperplanes.colwise().normalized();
  return (vn.transpose() * y).squaredNorm();
}

double loss_ind(const HnkoModel& model) {
  Matrix g = model.hyperplanes.transpose() * model.hyperplanes;
  g.diagonal().setZero();
  return g.squaredNorm();
}

LossBreakdown total_loss(const HnkoModel& model, const Matrix& data, const LossWeights& w) {
  LossBreakdown out;
  out.weights = w;
  out.dict = loss_dict(model, data);
  out.koop = loss_koop(model, data);
  out.sphere = loss_sphere(model, data);
  out.deg = loss_deg(model, data);
  out.ind = loss_ind(model);
  out.total = w.dict * out.dict + w.koop * out.koop + w.sphere * out.sphere + w.deg * out.deg +
              w.ind * out.ind;
  return out;
}

std::vector<ad::Var> ModelVars::all() const {
  std::vector<ad::Var> out = encoder;
  out.insert(out.end(), decoder.begin(), decoder.end());
  out.insert(out.end(), koopman.begin(), koopman.end());
  out.push_back(log_radius);
  out.push_back(hyperplanes);
  return out;
}

std::vector<Matrix> parameters(const HnkoModel& model) {
  std::vector<Matrix> out;
  for (const DenseLayer& l : model.encoder.layers) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  for (const DenseLayer& l : model.decoder.layers) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  for (const orthogonal::SkewParams& f : model.koopman.factors()) out.push_back(f.values());
  out.push_back(Matrix::Constant(1, 1, model.log_radius));
  out.push_back(model.hyperplanes);
  return out;
}

void set_parameters(HnkoModel& model, const std::vector<Matrix>& params) {
  const std::size_t expected =
      2 * (model.encoder.layers.size() + model.decoder.layers.size()) +
      model.koopman.factors().size() + 2;
  if (params.size() != expected) throw DimensionError("set_parameters: wrong tensor count");
  std::size_t i = 0;
  auto take = [&](Matrix& dst) {
    if (params[i].rows() != dst.rows() || params[i].cols() != dst.cols()) {
      throw DimensionError("set_parameters: shape mismatch at tensor " + std::to_string(i));
    }
    dst = params[i++];
  };
  for (DenseLayer& l : model.encoder.layers) {
    take(l.weight);
    take(l.bias);
  }
  for (DenseLayer& l : model.decoder.layers) {
    take(l.weight);
    take(l.bias);
  }
  for (orthogonal::SkewParams& f : model.koopman.factors()) {
    if (params[i].size() != f.values().size()) {
      throw DimensionError("set_parameters: Koopman parameter count mismatch");
    }
    f.values() = params[i++].reshaped();
  }
  model.log_radius = params[i++](0, 0);
  take(model.hyperplanes);
}

ModelVars make_vars(ad::Tape& tape, const HnkoModel& model) {
  ModelVars v;
  for (const DenseLayer& l : model.encoder.layers) {
    v.encoder.push_back(tape.leaf(l.weight));
    v.encoder.push_back(tape.leaf(l.bias));
  }
  for (const DenseLayer& l : model.decoder.layers) {
    v.decoder.push_back(tape.leaf(l.weight));
    v.decoder.push_back(tape.leaf(l.bias));
  }
  for (const orthogonal::SkewParams& f : model.koopman.factors()) {
    v.koopman.push_back(tape.leaf(f.values()));
  }
  v.log_radius = tape.leaf(Matrix::Constant(1, 1, model.log_radius));
  v.hyperplanes = tape.leaf(model.hyperplanes);
  return v;
}

LossGraph build_loss(ad::Tape& tape, const ModelVars& vars, const HnkoModel& model,
                     const Matrix& data, const LossWeights& w) {
  check_dim(model, data, "build_loss");
  if (data.cols() < 2) throw ValidationError("build_loss: need at least two samples");
  check_hyperplanes(vars.hyperplanes.value());

  const ad::Var xn = tape.constant(model.normalizer.apply(data));
  const ad::Var y = mlp_graph(vars.encoder, xn);
  const ad::Var rec = mlp_graph(vars.decoder, y);

  LossGraph g;
  g.dict = ad::sum_squares(ad::sub(rec, xn));

  ad::Var k = ad::expm_skew(vars.koopman[0], model.koopman.factors()[0].dim());
  for (std::size_t f = 1; f < vars.koopman.size(); ++f) {
    k = ad::kron(k, ad::expm_skew(vars.koopman[f], model.koopman.factors()[f].dim()));
  }
  const Index m = data.cols() - 1;
  g.koop = ad::sum_squares(
      ad::sub(ad::matmul(k, ad::slice_cols(y, 0, m)), ad::slice_cols(y, 1, m)));

  const ad::Var r2 = ad::exp(ad::scale(vars.log_radius, 2.0));
  g.sphere = ad::sum_squares(ad::sub_scalar(ad::col_sum_squares(y), r2));

  const ad::Var inv_norms = ad::pow(ad::col_sum_squares(vars.hyperplanes), -0.5);
  const ad::Var vn = ad::scale_cols(vars.hyperplanes, inv_norms);
  g.deg = ad::sum_squares(ad::matmul(ad::transpose(vn), y));

  g.ind = ad::sum_squares(
      ad::off_diagonal(ad::matmul(ad::transpose(vars.hyperplanes), vars.hyperplanes)));

  // Same left-to-right order as total_loss so both report identical totals.
  ad::Var total = ad::add(ad::scale(g.dict, w.dict), ad::scale(g.koop, w.koop));
  total = ad::add(total, ad::scale(g.sphere, w.sphere));
  total = ad::add(total, ad::scale(g.deg, w.deg));
  g.total = ad::add(total, ad::scale(g.ind, w.ind));
  return g;
}

Matrix latent_rollout(const HnkoModel& model, const Vector& x0, Index steps) {
  if (steps < 0) throw ValidationError("predict: steps must be non-negative");
  const std::vector<Matrix> mats = orthogonal::factor_matrices(model.koopman);
  Matrix lat(model.latent_dim(), steps + 1);
  lat.col(0) = encode(model, x0);
  for (Index k = 1; k <= steps; ++k) {
    lat.col(k) = orthogonal::apply(model.koopman, mats, lat.col(k - 1));
  }
  return lat;
}

Matrix predict(const HnkoModel& model, const Vector& x0, Index steps) {
  return decode(model, latent_rollout(model, x0, steps));
}

}  // namespace hnko::model
