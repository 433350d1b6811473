#include "hnko/experiment.hpp"

#include <cmath>
#include <set>

#include "hnko/error.hpp"
#include "hnko/io.hpp"
#include "hnko/orthogonal.hpp"

#ifndef HNKO_VERSION
#define HNKO_VERSION "unknown"
#endif

namespace hnko::experiment {

namespace {

template <typename T>
T opt(const Json& j, const char* key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError("config: '" + where + "/" + key + "' has the wrong type", 0, 0);
  }
}

const Json& section(const Json& j, const char* key) {
  static const Json empty = Json::object();
  if (!j.contains(key)) return empty;
  const Json& s = j.at(key);
  if (!s.is_object()) throw ParseError(std::string("config: '/") + key + "' must be an object", 0, 0);
  return s;
}

// Every key of `given` must also occur in `canonical`.
void reject_unknown(const Json& given, const Json& canonical, const std::string& path) {
  if (!given.is_object() || !canonical.is_object()) return;
  for (const auto& [key, value] : given.items()) {
    if (!canonical.contains(key)) {
      throw ValidationError("config: unknown key '" + path + "/" + key + "'");
    }
    reject_unknown(value, canonical.at(key), path + "/" + key);
  }
}

bool is_multiple(double span, double dt) {
  const double n = std::round(span / dt);
  return n >= 1.0 && std::abs(n * dt - span) <= 1e-9 * std::max(1.0, span);
}

std::string variant_name(orthogonal::Variant v) {
  return v == orthogonal::Variant::Full ? "full" : "kronecker";
}

fs::path absolute_path(const fs::path& p) { return fs::absolute(p).lexically_normal(); }

Json manifest(const std::string& command, Json arguments, const std::vector<fs::path>& inputs,
              const fs::path& out_dir, const std::vector<std::string>& outputs, Json seeds) {
  Json in = Json::object();
  for (const auto& p : inputs) in[absolute_path(p).string()] = io::sha256_file(p);
  Json out = Json::object();
  for (const auto& name : outputs) out[name] = io::sha256_file(out_dir / name);
  Json m = {{"tool", {{"name", "hnko"}, {"version", HNKO_VERSION}}},
            {"command", command},
            {"arguments", std::move(arguments)},
            {"seeds", std::move(seeds)},
            {"inputs", in},
            {"outputs", out}};
  io::write_json(out_dir / "manifest.json", m);
  return m;
}

Json seeds_of(const ExperimentConfig& cfg) {
  return {{"noise", cfg.noise.seed}, {"model", cfg.model.seed}, {"training", cfg.training.seed}};
}

// Trajectory CSV plus its sidecar; returns both names for the manifest.
void put_trajectory(const fs::path& dir, const std::string& name, const systems::Trajectory& t,
                    Json metadata, std::vector<std::string>& written) {
  io::write_trajectory(dir / name, t, std::move(metadata));
  written.push_back(name);
  written.push_back(name + ".json");
}

void put_invariants(const fs::path& dir, const std::string& name, const systems::SystemSpec& spec,
                    const systems::Trajectory& t, std::vector<std::string>& written) {
  const auto* kdv = std::get_if<systems::Kdv>(&spec);
  std::vector<std::string> header{"t", "energy"};
  if (kdv) header.push_back("mass");
  std::vector<std::vector<double>> rows;
  for (Index k = 0; k < t.samples(); ++k) {
    std::vector<double> row{t.time(k), systems::hamiltonian(spec, t.states.col(k))};
    if (kdv) row.push_back(systems::invariant_values(*kdv, t.states.col(k)).mass);
    rows.push_back(std::move(row));
  }
  io::write_table(dir / name, header, rows);
  written.push_back(name);
}

Json trajectory_meta(const std::string& kind, const systems::SystemSpec& spec) {
  return {{"kind", kind}, {"system", io::system_to_json(spec)}};
}

std::optional<systems::SystemSpec> sidecar_system(const io::TrajectoryFile& f) {
  if (f.metadata.is_object() && f.metadata.contains("system")) {
    return io::system_from_json(f.metadata.at("system"));
  }
  return std::nullopt;
}

training::ProgressCallback train_progress(const Progress& progress) {
  if (!progress) return {};
  return [progress](int epoch, const model::LossBreakdown& b) { progress("train", epoch, b.total); };
}

Json checkpoint_config(const ExperimentConfig& cfg, const systems::Trajectory& data) {
  return {{"experiment", to_json(cfg)},
          {"data", {{"t0", data.t0}, {"dt", data.dt}, {"samples", data.samples()}}}};
}

MethodResult linear_method(const baselines::LinearModel& m, const Simulation& sim,
                           const ExperimentConfig& cfg, const eval::EvaluateOptions& eo) {
  MethodResult r;
  r.prediction.t0 = sim.truth.t0;
  r.prediction.dt = sim.truth.dt;
  r.prediction.states = baselines::linear_predict(m, sim.observed.states.col(0), predict_steps(cfg));
  r.metrics = eval::evaluate(r.prediction, sim.truth, cfg.system, eo);
  r.spectral_radius = baselines::spectral_radius(m.k);
  return r;
}

Json method_json(const MethodResult& r) {
  Json j = io::metrics_to_json(r.metrics);
  j["spectral_radius"] = r.spectral_radius;
  return j;
}

}  // namespace

Json to_json(const ExperimentConfig& cfg) {
  Json state = Json::array();
  for (double v : cfg.initial.state) state.push_back(v);
  Json solitons = Json::array();
  for (const auto& s : cfg.initial.kdv_solitons) {
    solitons.push_back({{"speed", s.speed}, {"center", s.center}});
  }
  Json hidden = nullptr;
  if (cfg.model.hidden) hidden = *cfg.model.hidden;
  return {
      {"preset", cfg.preset},
      {"system", io::system_to_json(cfg.system)},
      {"initial", {{"state", state}, {"kdv_solitons", solitons}}},
      {"time",
       {{"dt", cfg.time.dt},
        {"train_span", cfg.time.train_span},
        {"predict_span", cfg.time.predict_span},
        {"integrator_dt", cfg.time.integrator_dt}}},
      {"noise", {{"sigma2", cfg.noise.sigma2}, {"seed", cfg.noise.seed}}},
      {"model",
       {{"latent_dim", cfg.model.latent_dim},
        {"q", cfg.model.q},
        {"variant", variant_name(cfg.model.variant)},
        {"hidden", hidden},
        {"seed", cfg.model.seed},
        {"normalize", cfg.model.normalize}}},
      {"training", io::train_config_to_json(cfg.training)},
      {"baselines",
       {{"dmd", cfg.baselines.dmd},
        {"edmd", cfg.baselines.edmd},
        {"edmd_order", cfg.baselines.edmd_order},
        {"dictionary_cap", cfg.baselines.dictionary_cap}}},
      {"evaluation",
       {{"invariant_tol", cfg.evaluation.invariant_tol},
        {"wasserstein", cfg.evaluation.wasserstein},
        {"wasserstein_cap", cfg.evaluation.wasserstein_cap}}},
  };
}

ExperimentConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("config: top level must be an object", 0, 0);
  ExperimentConfig c;
  c.preset = opt<std::string>(j, "preset", "", "");
  if (!j.contains("system")) throw ValidationError("config: '/system' is required");
  c.system = io::system_from_json(j.at("system"));

  const Json& ini = section(j, "initial");
  c.initial.state = opt<std::vector<double>>(ini, "state", "/initial", {});
  if (ini.contains("kdv_solitons")) {
    const Json& arr = ini.at("kdv_solitons");
    if (!arr.is_array()) throw ParseError("config: '/initial/kdv_solitons' must be an array", 0, 0);
    for (const auto& s : arr) {
      c.initial.kdv_solitons.push_back({opt<double>(s, "speed", "/initial/kdv_solitons", 1.0),
                                        opt<double>(s, "center", "/initial/kdv_solitons", 0.0)});
    }
  }

  const Json& t = section(j, "time");
  c.time.dt = opt<double>(t, "dt", "/time", c.time.dt);
  c.time.train_span = opt<double>(t, "train_span", "/time", c.time.train_span);
  c.time.predict_span = opt<double>(t, "predict_span", "/time", c.time.predict_span);
  c.time.integrator_dt = opt<double>(t, "integrator_dt", "/time", c.time.integrator_dt);

  const Json& n = section(j, "noise");
  c.noise.sigma2 = opt<double>(n, "sigma2", "/noise", c.noise.sigma2);
  c.noise.seed = opt<std::uint64_t>(n, "seed", "/noise", c.noise.seed);

  const Json& m = section(j, "model");
  c.model.latent_dim = opt<Index>(m, "latent_dim", "/model", c.model.latent_dim);
  c.model.q = opt<Index>(m, "q", "/model", c.model.q);
  const auto variant = opt<std::string>(m, "variant", "/model", "full");
  if (variant == "full") {
    c.model.variant = orthogonal::Variant::Full;
  } else if (variant == "kronecker") {
    c.model.variant = orthogonal::Variant::Kronecker;
  } else {
    throw ValidationError("config: '/model/variant' must be 'full' or 'kronecker'");
  }
  if (m.contains("hidden") && !m.at("hidden").is_null()) {
    c.model.hidden = opt<std::vector<Index>>(m, "hidden", "/model", {});
  }
  c.model.seed = opt<std::uint64_t>(m, "seed", "/model", c.model.seed);
  c.model.normalize = opt<bool>(m, "normalize", "/model", c.model.normalize);

  // Partial training sections fill in from the defaults.
  Json tj = io::train_config_to_json(c.training);
  if (j.contains("training")) tj.merge_patch(section(j, "training"));
  reject_unknown(tj, io::train_config_to_json(c.training), "/training");
  c.training = io::train_config_from_json(tj);

  const Json& b = section(j, "baselines");
  c.baselines.dmd = opt<bool>(b, "dmd", "/baselines", c.baselines.dmd);
  c.baselines.edmd = opt<bool>(b, "edmd", "/baselines", c.baselines.edmd);
  c.baselines.edmd_order = opt<int>(b, "edmd_order", "/baselines", c.baselines.edmd_order);
  c.baselines.dictionary_cap = opt<Index>(b, "dictionary_cap", "/baselines", c.baselines.dictionary_cap);

  const Json& e = section(j, "evaluation");
  c.evaluation.invariant_tol = opt<double>(e, "invariant_tol", "/evaluation", c.evaluation.invariant_tol);
  c.evaluation.wasserstein = opt<bool>(e, "wasserstein", "/evaluation", c.evaluation.wasserstein);
  c.evaluation.wasserstein_cap =
      opt<Index>(e, "wasserstein_cap", "/evaluation", c.evaluation.wasserstein_cap);

  reject_unknown(j, to_json(c), "");
  validate(c);
  return c;
}

void validate(const ExperimentConfig& c) {
  systems::validate(c.system);
  const Index n = systems::state_dim(c.system);
  const bool is_kdv = std::holds_alternative<systems::Kdv>(c.system);
  if (!c.initial.kdv_solitons.empty()) {
    if (!is_kdv) throw ValidationError("config: kdv_solitons given for a non-KdV system");
    if (!c.initial.state.empty()) {
      throw ValidationError("config: give either initial state or kdv_solitons, not both");
    }
    for (const auto& s : c.initial.kdv_solitons) {
      if (!(s.speed > 0.0)) throw ValidationError("config: soliton speed must be > 0");
    }
  } else if (static_cast<Index>(c.initial.state.size()) != n) {
    throw ValidationError("config: initial state has " + std::to_string(c.initial.state.size()) +
                          " entries, system state dimension is " + std::to_string(n));
  }
  if (!(c.time.dt > 0.0)) throw ValidationError("config: time.dt must be > 0");
  if (!is_multiple(c.time.train_span, c.time.dt)) {
    throw ValidationError("config: time.train_span must be a positive multiple of time.dt");
  }
  if (!is_multiple(c.time.predict_span, c.time.dt) || c.time.predict_span < c.time.train_span) {
    throw ValidationError(
        "config: time.predict_span must be a multiple of time.dt and >= time.train_span");
  }
  if (!(c.noise.sigma2 >= 0.0)) throw ValidationError("config: noise.sigma2 must be >= 0");

  const Index p = c.model.latent_dim;
  if (p < 3) throw ValidationError("config: model.latent_dim must be >= 3");
  const auto [qlo, qhi] = model::q_range(p);
  if (c.model.q < qlo || c.model.q > qhi) {
    throw ValidationError("config: model.q = " + std::to_string(c.model.q) + " outside [" +
                          std::to_string(qlo) + ", " + std::to_string(qhi) + "] for p = " +
                          std::to_string(p));
  }
  if (c.model.variant == orthogonal::Variant::Kronecker) orthogonal::kronecker_factor(p);
  if (c.model.hidden) {
    for (Index w : *c.model.hidden) {
      if (w < 1) throw ValidationError("config: model.hidden widths must be >= 1");
    }
  }
  training::validate(c.training);
  if (c.training.log_every < 0) throw ValidationError("config: training.log_every must be >= 0");
  if (c.baselines.edmd) {
    if (c.baselines.edmd_order < 1) throw ValidationError("config: baselines.edmd_order must be >= 1");
    const Index size = baselines::HermiteDictionary::size_for(n, c.baselines.edmd_order);
    if (size > c.baselines.dictionary_cap) {
      throw ValidationError("config: EDMD dictionary of " + std::to_string(size) +
                            " functions exceeds baselines.dictionary_cap = " +
                            std::to_string(c.baselines.dictionary_cap));
    }
  }
  if (!(c.evaluation.invariant_tol > 0.0)) {
    throw ValidationError("config: evaluation.invariant_tol must be > 0");
  }
  if (c.evaluation.wasserstein && predict_steps(c) + 1 > c.evaluation.wasserstein_cap) {
    throw ValidationError("config: prediction has more samples than evaluation.wasserstein_cap");
  }
}

std::vector<std::string> preset_names() {
  return {"kepler", "spring-stiff1", "spring-stiff10", "spring-stiff100", "three-body", "kdv64"};
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.preset = name;
  if (name == "kepler") {
    // Eccentric bound orbit (e ~ 0.19), period ~ 4.84.
    c.system = systems::Kepler{};
    c.initial.state = {1.0, 0.0, 0.0, 0.9};
    c.time = {0.1, 5.0, 50.0, 0.0};
    c.noise = {0.01, 1};
    c.model.latent_dim = 7;
    c.model.q = 5;
    c.training.epochs = 5000;
    c.baselines.edmd_order = 3;
  } else if (name == "spring-stiff1" || name == "spring-stiff10" || name == "spring-stiff100") {
    // m = k = SC keeps omega = 1 while p ranges over SC times the q range.
    const double sc = std::stod(name.substr(std::string("spring-stiff").size()));
    c.system = systems::MassSpring{sc, sc};
    c.initial.state = {1.0, 0.0};
    c.time = {0.1, 7.0, 70.0, 0.0};
    c.noise = {0.01, 1};
    c.model.latent_dim = 7;
    c.model.q = 5;
    c.training.epochs = 5000;
    c.baselines.edmd_order = 3;
  } else if (name == "three-body") {
    // Figure-eight choreography, period ~ 6.3259.
    c.system = systems::NBody{};
    const double x = 0.97000436, y = -0.24308753, vx = -0.93240737, vy = -0.86473146;
    c.initial.state = {x, y, -x, -y, 0.0, 0.0, -vx / 2, -vy / 2, -vx / 2, -vy / 2, vx, vy};
    c.time = {0.1, 5.0, 50.0, 0.0};
    c.noise = {0.01, 1};
    c.model.latent_dim = 16;
    c.model.q = 7;
    c.training.epochs = 10000;
    c.baselines.edmd_order = 3;
  } else if (name == "kdv64") {
    // One soliton crossing the 50-wide box once per 50 time units.
    c.system = systems::Kdv{64, 50.0};
    c.initial.kdv_solitons = {{1.0, 25.0}};
    c.time = {0.5, 50.0, 400.0, 0.0};
    c.noise = {0.03, 1};
    c.model.latent_dim = 80;
    c.model.q = 39;
    c.training.epochs = 10000;
    c.baselines.edmd_order = 2;
  } else {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw ValidationError("unknown preset '" + name + "' (known: " + known + ")");
  }
  validate(c);
  return c;
}

ExperimentConfig resolve_config(const std::optional<std::string>& preset_name,
                                const std::optional<Json>& file,
                                const std::vector<std::pair<std::string, Json>>& overrides) {
  Json j = to_json(preset(preset_name.value_or("kepler")));
  if (file) {
    if (!file->is_object()) throw ParseError("config file must hold a JSON object", 1, 1);
    if (file->contains("preset") && (*file)["preset"].is_string() && !preset_name) {
      j = to_json(preset((*file)["preset"].get<std::string>()));
    }
    // A config written by --print-config names its system explicitly; replace
    // rather than merge so switching system type does not leave stale keys.
    Json patch = *file;
    if (patch.contains("system")) {
      j["system"] = patch["system"];
      patch.erase("system");
    }
    if (patch.contains("initial")) {
      j["initial"] = {{"state", Json::array()}, {"kdv_solitons", Json::array()}};
    }
    j.merge_patch(patch);
  }
  for (const auto& [pointer, value] : overrides) {
    try {
      j[Json::json_pointer(pointer)] = value;
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("bad override path '" + pointer + "': " + e.what());
    }
  }
  return config_from_json(j);
}

Vector initial_state(const ExperimentConfig& cfg) {
  if (!cfg.initial.kdv_solitons.empty()) {
    const auto& kdv = std::get<systems::Kdv>(cfg.system);
    Vector u = Vector::Zero(kdv.grid_points);
    for (const auto& s : cfg.initial.kdv_solitons) u += systems::kdv_soliton(kdv, s.speed, s.center);
    return u;
  }
  return Eigen::Map<const Vector>(cfg.initial.state.data(),
                                  static_cast<Index>(cfg.initial.state.size()));
}

Index train_steps(const ExperimentConfig& cfg) {
  return static_cast<Index>(std::llround(cfg.time.train_span / cfg.time.dt));
}

Index predict_steps(const ExperimentConfig& cfg) {
  return static_cast<Index>(std::llround(cfg.time.predict_span / cfg.time.dt));
}

model::ModelConfig model_config(const ExperimentConfig& cfg) {
  model::ModelConfig m;
  m.state_dim = systems::state_dim(cfg.system);
  m.latent_dim = cfg.model.latent_dim;
  m.q = cfg.model.q;
  m.hidden = cfg.model.hidden;
  m.variant = cfg.model.variant;
  m.seed = cfg.model.seed;
  m.normalize = cfg.model.normalize;
  return m;
}

Simulation simulate(const ExperimentConfig& cfg) {
  validate(cfg);
  Simulation s;
  systems::SimulateOptions opts;
  opts.integrator_dt = cfg.time.integrator_dt;
  s.truth = systems::simulate(cfg.system, initial_state(cfg), cfg.time.dt, predict_steps(cfg), opts);
  systems::Trajectory prefix = s.truth;
  prefix.states = s.truth.states.leftCols(train_steps(cfg) + 1);
  s.observed = systems::add_noise(prefix, cfg.noise.sigma2, cfg.noise.seed);
  return s;
}

Json simulate_command(const ExperimentConfig& cfg, const fs::path& out_dir) {
  const Simulation sim = simulate(cfg);
  std::vector<std::string> written;
  put_trajectory(out_dir, "trajectory.csv", sim.truth, trajectory_meta("truth", cfg.system), written);
  Json obs = trajectory_meta("observed", cfg.system);
  obs["noise"] = {{"sigma2", cfg.noise.sigma2}, {"seed", cfg.noise.seed}};
  put_trajectory(out_dir, "observed.csv", sim.observed, obs, written);
  put_invariants(out_dir, "invariants.csv", cfg.system, sim.truth, written);
  return manifest("simulate", {{"config", to_json(cfg)}}, {}, out_dir, written, seeds_of(cfg));
}

Json train_command(const ExperimentConfig& cfg, const fs::path& data, const fs::path& out_dir,
                   const Progress& progress) {
  validate(cfg);
  const io::TrajectoryFile f = io::read_trajectory(data);
  if (f.trajectory.dim() != systems::state_dim(cfg.system)) {
    throw DimensionError("train: data has dimension " + std::to_string(f.trajectory.dim()) +
                         ", configured system has " +
                         std::to_string(systems::state_dim(cfg.system)));
  }
  model::HnkoModel init = model::init_model(model_config(cfg), f.trajectory.states);
  training::TrainResult res = training::train(std::move(init), f.trajectory.states, cfg.training,
                                              train_progress(progress));
  std::vector<std::string> written{"checkpoint.json", "loss_history.csv"};
  io::write_json(out_dir / "checkpoint.json",
                 io::checkpoint_to_json(res.model, checkpoint_config(cfg, f.trajectory)));
  io::write_loss_history(out_dir / "loss_history.csv", res.history);
  return manifest("train", {{"config", to_json(cfg)}, {"data", absolute_path(data).string()}},
                  {data}, out_dir, written, seeds_of(cfg));
}

Json predict_command(const fs::path& checkpoint, const fs::path& data, long row, Index steps,
                     const fs::path& out_dir) {
  if (steps < 0) throw ValidationError("predict: steps must be >= 0");
  const Json ck = io::read_json(checkpoint);
  const model::HnkoModel m = io::checkpoint_model(ck);
  const io::TrajectoryFile f = io::read_trajectory(data);
  if (f.trajectory.dim() != m.state_dim()) {
    throw DimensionError("predict: data dimension does not match the checkpoint");
  }
  const Index samples = f.trajectory.samples();
  const Index col = row < 0 ? samples + row : row;
  if (col < 0 || col >= samples) {
    throw ValidationError("predict: row " + std::to_string(row) + " outside the " +
                          std::to_string(samples) + " samples of the data");
  }
  systems::Trajectory pred;
  pred.t0 = f.trajectory.time(col);
  pred.dt = ck.at("config").at("data").at("dt").get<double>();
  pred.states = model::predict(m, f.trajectory.states.col(col), steps);
  Json meta = {{"kind", "prediction"}, {"method", "hnko"}};
  const Json& exp = ck.at("config").at("experiment");
  if (exp.contains("system")) meta["system"] = exp.at("system");
  std::vector<std::string> written;
  put_trajectory(out_dir, "prediction.csv", pred, meta, written);
  return manifest("predict",
                  {{"checkpoint", absolute_path(checkpoint).string()},
                   {"data", absolute_path(data).string()},
                   {"row", row},
                   {"steps", steps}},
                  {checkpoint, data}, out_dir, written, Json::object());
}

Json baseline_command(const std::string& method, const fs::path& data, Index steps, int order,
                      Index dictionary_cap, const fs::path& out_dir) {
  if (steps < 0) throw ValidationError("baseline: steps must be >= 0");
  const io::TrajectoryFile f = io::read_trajectory(data);
  baselines::LinearModel m;
  if (method == "dmd") {
    m = baselines::dmd_fit(f.trajectory);
  } else if (method == "edmd") {
    baselines::EdmdOptions o;
    o.dictionary_cap = dictionary_cap;
    m = baselines::edmd_fit(f.trajectory, order, o);
  } else {
    throw ValidationError("baseline: method must be 'dmd' or 'edmd', got '" + method + "'");
  }
  systems::Trajectory pred;
  pred.t0 = f.trajectory.t0;
  pred.dt = f.trajectory.dt;
  pred.states = baselines::linear_predict(m, f.trajectory.states.col(0), steps);
  std::vector<std::string> written{method + "_model.json"};
  Json model_json = io::linear_model_to_json(m);
  model_json["spectral_radius"] = baselines::spectral_radius(m.k);
  io::write_json(out_dir / written.front(), model_json);
  Json meta = {{"kind", "prediction"}, {"method", method}};
  if (f.metadata.is_object() && f.metadata.contains("system")) meta["system"] = f.metadata["system"];
  put_trajectory(out_dir, method + "_prediction.csv", pred, meta, written);
  return manifest("baseline",
                  {{"method", method},
                   {"data", absolute_path(data).string()},
                   {"steps", steps},
                   {"order", order},
                   {"dictionary_cap", dictionary_cap}},
                  {data}, out_dir, written, Json::object());
}

Json evaluate_command(const fs::path& predicted, const fs::path& truth,
                      const std::optional<systems::SystemSpec>& system, const fs::path& out_dir) {
  const io::TrajectoryFile p = io::read_trajectory(predicted);
  const io::TrajectoryFile t = io::read_trajectory(truth);
  std::optional<systems::SystemSpec> spec = system;
  if (!spec) spec = sidecar_system(t);
  if (!spec) spec = sidecar_system(p);
  if (!spec) {
    throw ValidationError("evaluate: no system given and none recorded in the sidecar files");
  }
  const double tol = 1e-9 * std::max(1.0, std::abs(t.trajectory.dt));
  if (std::abs(p.trajectory.dt - t.trajectory.dt) > tol ||
      std::abs(p.trajectory.t0 - t.trajectory.t0) > 1e-9 * std::max(1.0, std::abs(t.trajectory.t0))) {
    throw ValidationError("evaluate: trajectories are not time-aligned (t0/dt differ)");
  }
  const eval::MetricsReport r = eval::evaluate(p.trajectory, t.trajectory, *spec);
  io::write_json(out_dir / "metrics.json", io::metrics_to_json(r));
  io::write_metrics_csv(out_dir / "metrics_per_step.csv", r, t.trajectory.t0, t.trajectory.dt);
  return manifest("evaluate",
                  {{"predicted", absolute_path(predicted).string()},
                   {"truth", absolute_path(truth).string()},
                   {"system", system ? io::system_to_json(*system) : Json(nullptr)}},
                  {predicted, truth}, out_dir, {"metrics.json", "metrics_per_step.csv"},
                  Json::object());
}

Json discover_command(const fs::path& checkpoint, const fs::path& data, double tol,
                      const fs::path& out_dir) {
  const model::HnkoModel m = io::checkpoint_model(io::read_json(checkpoint));
  const io::TrajectoryFile f = io::read_trajectory(data);
  if (f.trajectory.dim() != m.state_dim()) {
    throw DimensionError("discover: data dimension does not match the checkpoint");
  }
  const eval::Discovery d = eval::discover_invariants(m, f.trajectory.states, tol);
  io::write_json(out_dir / "invariants.json",
                 io::discovery_to_json(d, eval::feature_variance(m, f.trajectory.states)));
  return manifest("discover",
                  {{"checkpoint", absolute_path(checkpoint).string()},
                   {"data", absolute_path(data).string()},
                   {"tol", tol}},
                  {checkpoint, data}, out_dir, {"invariants.json"}, Json::object());
}

RunSummary run_pipeline(const ExperimentConfig& cfg, const fs::path& out_dir,
                        const Progress& progress) {
  validate(cfg);
  RunSummary s;
  s.simulation = simulate(cfg);
  const Simulation& sim = s.simulation;
  std::vector<std::string> written;
  put_trajectory(out_dir, "trajectory.csv", sim.truth, trajectory_meta("truth", cfg.system), written);
  Json obs = trajectory_meta("observed", cfg.system);
  obs["noise"] = {{"sigma2", cfg.noise.sigma2}, {"seed", cfg.noise.seed}};
  put_trajectory(out_dir, "observed.csv", sim.observed, obs, written);
  put_invariants(out_dir, "invariants.csv", cfg.system, sim.truth, written);

  s.initial_model = model::init_model(model_config(cfg), sim.observed.states);
  s.trained = training::train(s.initial_model, sim.observed.states, cfg.training,
                              train_progress(progress));
  io::write_json(out_dir / "checkpoint.json",
                 io::checkpoint_to_json(s.trained.model, checkpoint_config(cfg, sim.observed)));
  io::write_loss_history(out_dir / "loss_history.csv", s.trained.history);
  written.insert(written.end(), {"checkpoint.json", "loss_history.csv"});

  eval::EvaluateOptions eo;
  eo.compute_wasserstein = cfg.evaluation.wasserstein;
  eo.wasserstein_cap = cfg.evaluation.wasserstein_cap;
  if (progress) progress("evaluate", 0, 0.0);

  s.hnko.prediction.t0 = sim.truth.t0;
  s.hnko.prediction.dt = sim.truth.dt;
  s.hnko.prediction.states = model::predict(s.trained.model, sim.observed.states.col(0),
                                            predict_steps(cfg));
  s.hnko.metrics = eval::evaluate(s.hnko.prediction, sim.truth, cfg.system, eo);
  s.hnko.spectral_radius = 1.0;
  Json metrics = {{"hnko", method_json(s.hnko)}};
  put_trajectory(out_dir, "prediction.csv", s.hnko.prediction,
                 {{"kind", "prediction"}, {"method", "hnko"}, {"system", io::system_to_json(cfg.system)}},
                 written);
  io::write_metrics_csv(out_dir / "metrics_per_step.csv", s.hnko.metrics, sim.truth.t0, sim.truth.dt);
  written.push_back("metrics_per_step.csv");

  auto baseline = [&](const std::string& name, const baselines::LinearModel& m) {
    MethodResult r = linear_method(m, sim, cfg, eo);
    Json mj = io::linear_model_to_json(m);
    mj["spectral_radius"] = r.spectral_radius;
    io::write_json(out_dir / (name + "_model.json"), mj);
    written.push_back(name + "_model.json");
    put_trajectory(out_dir, name + "_prediction.csv", r.prediction,
                   {{"kind", "prediction"}, {"method", name}, {"system", io::system_to_json(cfg.system)}},
                   written);
    io::write_metrics_csv(out_dir / (name + "_metrics_per_step.csv"), r.metrics, sim.truth.t0,
                          sim.truth.dt);
    written.push_back(name + "_metrics_per_step.csv");
    metrics[name] = method_json(r);
    return r;
  };
  if (cfg.baselines.dmd) s.dmd = baseline("dmd", baselines::dmd_fit(sim.observed));
  if (cfg.baselines.edmd) {
    baselines::EdmdOptions o;
    o.dictionary_cap = cfg.baselines.dictionary_cap;
    s.edmd = baseline("edmd", baselines::edmd_fit(sim.observed, cfg.baselines.edmd_order, o));
  }

  // Held-out data: the noise-free continuation after the training window.
  const Index start = train_steps(cfg);
  const Matrix held_out = sim.truth.states.rightCols(sim.truth.samples() - start);
  s.discovery = eval::discover_invariants(s.trained.model, held_out, cfg.evaluation.invariant_tol);
  s.held_out_feature_variance = eval::feature_variance(s.trained.model, held_out);
  io::write_json(out_dir / "invariants.json",
                 io::discovery_to_json(s.discovery, s.held_out_feature_variance));
  written.push_back("invariants.json");

  io::write_json(out_dir / "metrics.json", metrics);
  written.push_back("metrics.json");
  s.manifest = manifest("run", {{"config", to_json(cfg)}}, {}, out_dir, written, seeds_of(cfg));
  return s;
}

Json dispatch(const std::string& command, const Json& a, const fs::path& out_dir,
              const Progress& progress) {
  try {
    if (command == "simulate") return simulate_command(config_from_json(a.at("config")), out_dir);
    if (command == "train") {
      return train_command(config_from_json(a.at("config")), a.at("data").get<std::string>(),
                           out_dir, progress);
    }
    if (command == "predict") {
      return predict_command(a.at("checkpoint").get<std::string>(), a.at("data").get<std::string>(),
                             a.at("row").get<long>(), a.at("steps").get<Index>(), out_dir);
    }
    if (command == "baseline") {
      return baseline_command(a.at("method").get<std::string>(), a.at("data").get<std::string>(),
                              a.at("steps").get<Index>(), a.at("order").get<int>(),
                              a.at("dictionary_cap").get<Index>(), out_dir);
    }
    if (command == "evaluate") {
      std::optional<systems::SystemSpec> spec;
      if (!a.at("system").is_null()) spec = io::system_from_json(a.at("system"));
      return evaluate_command(a.at("predicted").get<std::string>(), a.at("truth").get<std::string>(),
                              spec, out_dir);
    }
    if (command == "discover") {
      return discover_command(a.at("checkpoint").get<std::string>(), a.at("data").get<std::string>(),
                              a.at("tol").get<double>(), out_dir);
    }
    if (command == "run") return run_pipeline(config_from_json(a.at("config")), out_dir, progress).manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest arguments for '" + command + "': " + e.what(), 0, 0);
  }
  throw ValidationError("manifest names unknown command '" + command + "'");
}

ReplayReport replay(const fs::path& manifest_path, const fs::path& out_dir,
                    const Progress& progress) {
  const Json old = io::read_json(manifest_path);
  if (!old.is_object() || !old.contains("command") || !old.contains("arguments")) {
    throw ParseError(manifest_path.string() + ": not an hnko manifest", 0, 0);
  }
  ReplayReport r;
  if (old.contains("inputs")) {
    for (const auto& [path, hash] : old.at("inputs").items()) {
      if (!fs::exists(path) || io::sha256_file(path) != hash.get<std::string>()) {
        r.changed_inputs.push_back(path);
      }
    }
  }
  if (fs::exists(out_dir) && fs::equivalent(out_dir, manifest_path.parent_path().empty()
                                                          ? fs::path(".")
                                                          : manifest_path.parent_path())) {
    throw ValidationError("replay: output directory must differ from the manifest's directory");
  }
  r.manifest = dispatch(old.at("command").get<std::string>(), old.at("arguments"), out_dir, progress);
  const Json& before = old.at("outputs");
  const Json& after = r.manifest.at("outputs");
  std::set<std::string> names;
  for (const auto& [k, v] : before.items()) names.insert(k);
  for (const auto& [k, v] : after.items()) names.insert(k);
  for (const auto& n : names) {
    if (!before.contains(n) || !after.contains(n) || before.at(n) != after.at(n)) {
      r.mismatched.push_back(n);
    }
  }
  return r;
}

}  // namespace hnko::experiment
