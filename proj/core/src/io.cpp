#include "hnko/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hnko/error.hpp"

namespace hnko::io {

namespace {

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw ParseError(std::string("missing field '") + key + "'", 0, 0);
  }
  return j.at(key);
}

template <typename T>
T get(const Json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("field '") + key + "': " + e.what(), 0, 0);
  }
}

Json vector_json(const Vector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector vector_from(const Json& j, const char* what) {
  if (!j.is_array()) throw ParseError(std::string(what) + ": expected an array", 0, 0);
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ParseError(std::string(what) + ": expected numbers", 0, 0);
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

// Row-major flattening.
Json matrix_json(const Matrix& m) {
  Json a = Json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", a}};
}

Matrix matrix_from(const Json& j, const char* what) {
  const auto rows = get<Index>(j, "rows");
  const auto cols = get<Index>(j, "cols");
  const Vector flat = vector_from(field(j, "data"), what);
  if (rows < 0 || cols < 0 || flat.size() != rows * cols) {
    throw ParseError(std::string(what) + ": data length does not match rows x cols", 0, 0);
  }
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = flat(r * cols + c);
  }
  return m;
}

Json mlp_json(const model::Mlp& net) {
  Json layers = Json::array();
  for (const auto& layer : net.layers) {
    layers.push_back({{"weight", matrix_json(layer.weight)}, {"bias", matrix_json(layer.bias)}});
  }
  return layers;
}

model::Mlp mlp_from(const Json& j, const char* what) {
  if (!j.is_array()) throw ParseError(std::string(what) + ": expected a layer array", 0, 0);
  model::Mlp net;
  for (const auto& layer : j) {
    net.layers.push_back({matrix_from(field(layer, "weight"), what),
                          matrix_from(field(layer, "bias"), what)});
  }
  net.validate();
  return net;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

Json breakdown_json(const model::LossWeights& w) {
  return {{"dict", w.dict}, {"koop", w.koop}, {"sphere", w.sphere}, {"deg", w.deg}, {"ind", w.ind}};
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                 std::chars_format::general, 17);
  return std::string(buf.data(), res.ptr);
}

double parse_double(std::string_view text, std::size_t line, std::size_t column) {
  std::string_view t = text;
  while (!t.empty() && (t.front() == ' ' || t.front() == '\t')) t.remove_prefix(1);
  while (!t.empty() && (t.back() == ' ' || t.back() == '\t' || t.back() == '\r')) t.remove_suffix(1);
  if (!t.empty() && t.front() == '+') t.remove_prefix(1);
  double value = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ParseError("not a number: '" + std::string(text) + "'", line, column);
  }
  return value;
}

fs::path sidecar_path(const fs::path& csv) {
  fs::path p = csv;
  p += ".json";
  return p;
}

void write_trajectory(const fs::path& path, const systems::Trajectory& traj, Json metadata) {
  std::vector<std::string> header{"t"};
  for (Index i = 0; i < traj.dim(); ++i) header.push_back("x" + std::to_string(i));
  std::vector<std::vector<double>> rows;
  rows.reserve(static_cast<std::size_t>(traj.samples()));
  for (Index k = 0; k < traj.samples(); ++k) {
    std::vector<double> row{traj.time(k)};
    for (Index i = 0; i < traj.dim(); ++i) row.push_back(traj.states(i, k));
    rows.push_back(std::move(row));
  }
  write_table(path, header, rows);
  if (metadata.is_null()) metadata = Json::object();
  metadata["dt"] = traj.dt;
  metadata["t0"] = traj.t0;
  metadata["samples"] = traj.samples();
  metadata["dim"] = traj.dim();
  write_json(sidecar_path(path), metadata);
}

TrajectoryFile read_trajectory(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string(), 0, 0);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file", 1, 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  if (header.empty() || header[0] != "t") {
    throw ParseError(path.string() + ": header must start with 't'", 1, 1);
  }
  std::size_t col = header[0].size() + 2;
  for (std::size_t i = 1; i < header.size(); ++i) {
    if (header[i] != "x" + std::to_string(i - 1)) {
      throw ParseError(path.string() + ": expected column 'x" + std::to_string(i - 1) + "'", 1, col);
    }
    col += header[i].size() + 1;
  }
  const auto n = static_cast<Index>(header.size() - 1);
  if (n == 0) throw ParseError(path.string() + ": no state columns", 1, 2);

  std::vector<double> times;
  std::vector<double> values;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != header.size()) {
      throw ParseError(path.string() + ": expected " + std::to_string(header.size()) +
                           " fields, found " + std::to_string(fields.size()),
                       lineno, 1);
    }
    std::size_t column = 1;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const double v = parse_double(fields[i], lineno, column);
      if (i == 0) {
        times.push_back(v);
      } else {
        values.push_back(v);
      }
      column += fields[i].size() + 1;
    }
  }
  const auto samples = static_cast<Index>(times.size());
  if (samples == 0) throw ParseError(path.string() + ": no data rows", 2, 1);

  TrajectoryFile out;
  out.trajectory.t0 = times.front();
  out.trajectory.states.resize(n, samples);
  for (Index k = 0; k < samples; ++k) {
    for (Index i = 0; i < n; ++i) {
      out.trajectory.states(i, k) = values[static_cast<std::size_t>(k * n + i)];
    }
  }
  const fs::path side = sidecar_path(path);
  if (fs::exists(side)) {
    out.metadata = read_json(side);
    out.trajectory.dt = get<double>(out.metadata, "dt");
  } else if (samples >= 2) {
    const double dt = times[1] - times[0];
    for (std::size_t k = 1; k < times.size(); ++k) {
      const double expect = times[0] + static_cast<double>(k) * dt;
      if (std::abs(times[k] - expect) > 1e-9 * std::max(1.0, std::abs(expect))) {
        throw ParseError(path.string() + ": time column is not evenly spaced", k + 2, 1);
      }
    }
    out.trajectory.dt = dt;
  }
  if (!(out.trajectory.dt > 0.0)) throw ParseError(path.string() + ": dt must be positive", 0, 0);
  return out;
}

void write_table(const fs::path& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows) {
  std::string text;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) text += ',';
    text += header[i];
  }
  text += '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size()) throw DimensionError("write_table: row width mismatch");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) text += ',';
      text += format_double(row[i]);
    }
    text += '\n';
  }
  write_text(path, text);
}

Json read_json(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // Byte offset -> 1-based line and column.
    const std::size_t pos = std::min(e.byte == 0 ? 0 : e.byte - 1, text.size());
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i < pos; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ParseError(path.string() + ": invalid JSON", line, column);
  }
}

void write_json(const fs::path& path, const Json& value) { write_text(path, value.dump(2) + "\n"); }

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string(), 0, 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha256_file(const fs::path& path) {
  const std::string bytes = read_text(path);
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed for " + path.string());
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return out;
}

Json system_to_json(const systems::SystemSpec& spec) {
  return std::visit(
      [](const auto& s) -> Json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, systems::NBody>) {
          return {{"type", "nbody"}, {"bodies", s.bodies}, {"masses", s.masses},
                  {"g", s.g},        {"spatial_dim", s.spatial_dim}};
        } else if constexpr (std::is_same_v<T, systems::Kepler>) {
          return {{"type", "kepler"}, {"m", s.m}, {"g", s.g}};
        } else if constexpr (std::is_same_v<T, systems::MassSpring>) {
          return {{"type", "mass_spring"}, {"m", s.m}, {"k", s.k}};
        } else {
          return {{"type", "kdv"}, {"grid_points", s.grid_points}, {"domain_length", s.domain_length}};
        }
      },
      spec);
}

systems::SystemSpec system_from_json(const Json& j) {
  const auto type = get<std::string>(j, "type");
  systems::SystemSpec spec;
  if (type == "nbody") {
    systems::NBody s;
    s.bodies = get<int>(j, "bodies");
    s.masses = get<std::vector<double>>(j, "masses");
    s.g = get<double>(j, "g");
    s.spatial_dim = get<int>(j, "spatial_dim");
    spec = s;
  } else if (type == "kepler") {
    spec = systems::Kepler{get<double>(j, "m"), get<double>(j, "g")};
  } else if (type == "mass_spring") {
    spec = systems::MassSpring{get<double>(j, "m"), get<double>(j, "k")};
  } else if (type == "kdv") {
    spec = systems::Kdv{get<int>(j, "grid_points"), get<double>(j, "domain_length")};
  } else {
    throw ValidationError("unknown system type '" + type + "'");
  }
  systems::validate(spec);
  return spec;
}

Json model_to_json(const model::HnkoModel& m) {
  Json factors = Json::array();
  for (const auto& f : m.koopman.factors()) {
    factors.push_back({{"dim", f.dim()}, {"params", vector_json(f.values())}});
  }
  Json columns = Json::array();
  for (Index c = 0; c < m.hyperplanes.cols(); ++c) columns.push_back(vector_json(m.hyperplanes.col(c)));
  return {
      {"state_dim", m.state_dim()},
      {"latent_dim", m.latent_dim()},
      {"q", m.q()},
      {"encoder", mlp_json(m.encoder)},
      {"decoder", mlp_json(m.decoder)},
      {"koopman",
       {{"variant", m.koopman.variant() == orthogonal::Variant::Full ? "full" : "kronecker"},
        {"factors", factors}}},
      {"log_radius", m.log_radius},
      {"hyperplanes", columns},
      {"normalizer",
       {{"shift", vector_json(m.normalizer.shift)}, {"scale", vector_json(m.normalizer.scale)}}},
  };
}

model::HnkoModel model_from_json(const Json& j) {
  model::HnkoModel m;
  m.encoder = mlp_from(field(j, "encoder"), "encoder");
  m.decoder = mlp_from(field(j, "decoder"), "decoder");
  const Json& kj = field(j, "koopman");
  const auto variant = get<std::string>(kj, "variant");
  std::vector<orthogonal::SkewParams> factors;
  for (const auto& f : field(kj, "factors")) {
    factors.emplace_back(get<Index>(f, "dim"), vector_from(field(f, "params"), "koopman params"));
  }
  if (variant == "full") {
    if (factors.size() != 1) throw ParseError("full Koopman needs exactly one factor", 0, 0);
    m.koopman = orthogonal::OrthogonalKoopman::full(std::move(factors.front()));
  } else if (variant == "kronecker") {
    m.koopman = orthogonal::OrthogonalKoopman::kronecker(std::move(factors));
  } else {
    throw ParseError("unknown Koopman variant '" + variant + "'", 0, 0);
  }
  m.log_radius = get<double>(j, "log_radius");
  const Json& cols = field(j, "hyperplanes");
  if (!cols.is_array()) throw ParseError("hyperplanes: expected an array of columns", 0, 0);
  m.hyperplanes.resize(m.koopman.dim(), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const Vector v = vector_from(cols[c], "hyperplanes");
    if (v.size() != m.koopman.dim()) throw DimensionError("hyperplane column length != p");
    m.hyperplanes.col(static_cast<Index>(c)) = v;
  }
  const Json& nj = field(j, "normalizer");
  m.normalizer.shift = vector_from(field(nj, "shift"), "normalizer shift");
  m.normalizer.scale = vector_from(field(nj, "scale"), "normalizer scale");
  m.validate();
  if (get<Index>(j, "state_dim") != m.state_dim() || get<Index>(j, "latent_dim") != m.latent_dim() ||
      get<Index>(j, "q") != m.q()) {
    throw DimensionError("checkpoint header dimensions disagree with its tensors");
  }
  return m;
}

Json checkpoint_to_json(const model::HnkoModel& model, const Json& config) {
  return {{"format", "hnko-checkpoint"}, {"version", 1}, {"model", model_to_json(model)},
          {"config", config}};
}

model::HnkoModel checkpoint_model(const Json& checkpoint) {
  if (get<std::string>(checkpoint, "format") != "hnko-checkpoint") {
    throw ParseError("not an hnko checkpoint", 0, 0);
  }
  return model_from_json(field(checkpoint, "model"));
}

Json linear_model_to_json(const baselines::LinearModel& m) {
  Json j = {{"format", "hnko-linear-model"}, {"k", matrix_json(m.k)}};
  if (m.dictionary) {
    j["method"] = "edmd";
    j["dictionary"] = {{"kind", "hermite"},
                       {"input_dim", m.dictionary->input_dim()},
                       {"max_order", m.dictionary->max_order()}};
  } else {
    j["method"] = "dmd";
  }
  return j;
}

baselines::LinearModel linear_model_from_json(const Json& j) {
  baselines::LinearModel m;
  m.k = matrix_from(field(j, "k"), "k");
  const auto method = get<std::string>(j, "method");
  if (method == "edmd") {
    const Json& d = field(j, "dictionary");
    m.dictionary.emplace(get<Index>(d, "input_dim"), get<int>(d, "max_order"));
    if (m.dictionary->size() != m.k.rows()) throw DimensionError("EDMD matrix size != dictionary size");
  } else if (method != "dmd") {
    throw ParseError("unknown method '" + method + "'", 0, 0);
  }
  if (m.k.rows() != m.k.cols()) throw DimensionError("linear model matrix must be square");
  return m;
}

Json metrics_to_json(const eval::MetricsReport& r) {
  Json inv = Json::object();
  for (const auto& [name, s] : r.invariant_drift) {
    inv[name] = {{"max_predicted_drift", s.max_predicted_drift},
                 {"max_truth_drift", s.max_truth_drift},
                 {"predicted_initial", s.predicted.empty() ? 0.0 : s.predicted.front()},
                 {"truth_initial", s.truth.empty() ? 0.0 : s.truth.front()}};
  }
  return {{"horizon", r.horizon},
          {"mean_mse", r.mean_mse},
          {"normalized_mean_mse", r.normalized_mean_mse},
          {"final_mse", r.mse_per_step.empty() ? 0.0 : r.mse_per_step.back()},
          {"wasserstein2", r.wasserstein2},
          {"finite", r.finite},
          {"invariants", inv}};
}

void write_metrics_csv(const fs::path& path, const eval::MetricsReport& r, double t0, double dt) {
  std::vector<std::string> header{"step", "t", "mse", "normalized_mse"};
  for (const auto& [name, s] : r.invariant_drift) {
    header.push_back(name + "_predicted");
    header.push_back(name + "_truth");
    header.push_back(name + "_predicted_drift");
    header.push_back(name + "_truth_drift");
  }
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < r.mse_per_step.size(); ++k) {
    std::vector<double> row{static_cast<double>(k), t0 + static_cast<double>(k) * dt,
                            r.mse_per_step[k], r.normalized_mse_per_step[k]};
    for (const auto& [name, s] : r.invariant_drift) {
      row.push_back(s.predicted[k]);
      row.push_back(s.truth[k]);
      row.push_back(s.predicted_drift[k]);
      row.push_back(s.truth_drift[k]);
    }
    rows.push_back(std::move(row));
  }
  write_table(path, header, rows);
}

Json discovery_to_json(const eval::Discovery& d, const Vector& feature_variance) {
  Json inv = Json::array();
  for (const auto& i : d.invariants) {
    inv.push_back({{"eigenvalue", {i.eigenvalue.real(), i.eigenvalue.imag()}},
                   {"coefficients", vector_json(i.coefficients)},
                   {"temporal_variance", i.temporal_variance}});
  }
  Json slow = Json::array();
  for (const auto& s : d.slow_modes) {
    Json basis = Json::array();
    for (Index c = 0; c < s.basis.cols(); ++c) basis.push_back(vector_json(s.basis.col(c)));
    slow.push_back({{"eigenvalue", {s.eigenvalue.real(), s.eigenvalue.imag()}},
                    {"angle", s.angle},
                    {"basis", basis}});
  }
  Vector sorted = feature_variance;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  double median = 0.0;
  if (sorted.size() > 0) {
    const Index h = sorted.size() / 2;
    median = sorted.size() % 2 ? sorted(h) : 0.5 * (sorted(h - 1) + sorted(h));
  }
  return {{"tolerance", d.tolerance},
          {"invariants", inv},
          {"slow_modes", slow},
          {"feature_variance", vector_json(feature_variance)},
          {"median_feature_variance", median}};
}

void write_loss_history(const fs::path& path, const std::vector<model::LossBreakdown>& history) {
  std::vector<std::vector<double>> rows;
  rows.reserve(history.size());
  for (std::size_t e = 0; e < history.size(); ++e) {
    const auto& b = history[e];
    rows.push_back({static_cast<double>(e), b.total, b.dict, b.koop, b.sphere, b.deg, b.ind});
  }
  write_table(path, {"epoch", "total", "dict", "koop", "sphere", "deg", "ind"}, rows);
}

Json train_config_to_json(const training::TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"learning_rate", c.adam.learning_rate},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"epsilon", c.adam.epsilon},
          {"weights", breakdown_json(c.weights)},
          {"seed", c.seed},
          {"log_every", c.log_every},
          {"trainable",
           {{"encoder", c.trainable.encoder},
            {"decoder", c.trainable.decoder},
            {"koopman", c.trainable.koopman},
            {"radius", c.trainable.radius},
            {"hyperplanes", c.trainable.hyperplanes}}}};
}

training::TrainConfig train_config_from_json(const Json& j) {
  training::TrainConfig c;
  c.epochs = get<int>(j, "epochs");
  c.adam.learning_rate = get<double>(j, "learning_rate");
  c.adam.beta1 = get<double>(j, "beta1");
  c.adam.beta2 = get<double>(j, "beta2");
  c.adam.epsilon = get<double>(j, "epsilon");
  const Json& w = field(j, "weights");
  c.weights = {get<double>(w, "dict"), get<double>(w, "koop"), get<double>(w, "sphere"),
               get<double>(w, "deg"), get<double>(w, "ind")};
  c.seed = get<std::uint64_t>(j, "seed");
  c.log_every = get<int>(j, "log_every");
  const Json& t = field(j, "trainable");
  c.trainable = {get<bool>(t, "encoder"), get<bool>(t, "decoder"), get<bool>(t, "koopman"),
                 get<bool>(t, "radius"), get<bool>(t, "hyperplanes")};
  training::validate(c);
  return c;
}

}  // namespace hnko::io
