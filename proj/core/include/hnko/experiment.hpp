#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hnko/baselines.hpp"
#include "hnko/eval.hpp"
#include "hnko/model.hpp"
#include "hnko/systems.hpp"
#include "hnko/training.hpp"

namespace hnko::experiment {

namespace fs = std::filesystem;
using Json = nlohmann::json;

struct Soliton {
  double speed = 1.0;
  double center = 0.0;
};

/// Explicit state, or (KdV only) a superposition of one-soliton profiles.
struct InitialCondition {
  std::vector<double> state;
  std::vector<Soliton> kdv_solitons;
};

struct TimeConfig {
  double dt = 0.1;             ///< spacing of stored samples
  double train_span = 5.0;     ///< observed segment [0, train_span]
  double predict_span = 50.0;  ///< prediction and truth cover [0, predict_span]
  double integrator_dt = 0.0;  ///< <= 0: system default
};

struct NoiseConfig {
  double sigma2 = 0.0;  ///< variance of the i.i.d. Gaussian observation noise
  std::uint64_t seed = 0;
};

struct ModelSection {
  Index latent_dim = 7;
  Index q = 5;
  orthogonal::Variant variant = orthogonal::Variant::Full;
  std::optional<std::vector<Index>> hidden;
  std::uint64_t seed = 0;
  bool normalize = true;
};

struct BaselineConfig {
  bool dmd = true;
  bool edmd = true;
  int edmd_order = 3;
  Index dictionary_cap = 5000;
};

struct EvalConfig {
  double invariant_tol = 1e-3;
  bool wasserstein = true;
  Index wasserstein_cap = 5000;
};

/// Everything that determines a pipeline run. The output directory is not
/// part of it, so the same config written to two places hashes the same.
struct ExperimentConfig {
  std::string preset;
  systems::SystemSpec system;
  InitialCondition initial;
  TimeConfig time;
  NoiseConfig noise;
  ModelSection model;
  training::TrainConfig training;
  BaselineConfig baselines;
  EvalConfig evaluation;
};

Json to_json(const ExperimentConfig& cfg);
/// Strict: unknown keys and wrong types are rejected. Validates the result.
ExperimentConfig config_from_json(const Json& j);
/// Cross-module constraints: system spec, initial-state length, spans that
/// are positive multiples of dt, q range, Kronecker squareness, training
/// config. Throws ValidationError naming the violated constraint.
void validate(const ExperimentConfig& cfg);

std::vector<std::string> preset_names();
/// Throws ValidationError for unknown names.
ExperimentConfig preset(const std::string& name);

/// Layers, lowest priority first: preset (or the kepler preset when none is
/// given), an RFC 7386 merge patch from a config file, then JSON-pointer
/// overrides from command-line flags.
ExperimentConfig resolve_config(const std::optional<std::string>& preset_name,
                                const std::optional<Json>& file,
                                const std::vector<std::pair<std::string, Json>>& overrides);

Vector initial_state(const ExperimentConfig& cfg);
Index train_steps(const ExperimentConfig& cfg);
Index predict_steps(const ExperimentConfig& cfg);
model::ModelConfig model_config(const ExperimentConfig& cfg);

struct Simulation {
  systems::Trajectory truth;     ///< noise-free, [0, predict_span]
  systems::Trajectory observed;  ///< noisy copy of the [0, train_span] prefix
};
Simulation simulate(const ExperimentConfig& cfg);

using Progress = std::function<void(const std::string& stage, int epoch, double loss)>;

struct MethodResult {
  systems::Trajectory prediction;
  eval::MetricsReport metrics;
  double spectral_radius = 1.0;
};

struct RunSummary {
  Simulation simulation;
  model::HnkoModel initial_model;
  training::TrainResult trained;
  MethodResult hnko;
  std::optional<MethodResult> dmd;
  std::optional<MethodResult> edmd;
  /// Discovery scored on the noise-free continuation after train_span.
  eval::Discovery discovery;
  Vector held_out_feature_variance;
  Json manifest;
};

// Subcommands. Each writes its artifacts plus manifest.json into out_dir
// and returns the manifest.
Json simulate_command(const ExperimentConfig& cfg, const fs::path& out_dir);
Json train_command(const ExperimentConfig& cfg, const fs::path& data, const fs::path& out_dir,
                   const Progress& progress = {});
/// x0 is column `row` of the data file (negative counts from the end).
/// The time step comes from the checkpoint's config echo.
Json predict_command(const fs::path& checkpoint, const fs::path& data, long row, Index steps,
                     const fs::path& out_dir);
Json baseline_command(const std::string& method, const fs::path& data, Index steps, int order,
                      Index dictionary_cap, const fs::path& out_dir);
/// system == nullopt: read the system from the truth file's sidecar.
Json evaluate_command(const fs::path& predicted, const fs::path& truth,
                      const std::optional<systems::SystemSpec>& system, const fs::path& out_dir);
Json discover_command(const fs::path& checkpoint, const fs::path& data, double tol,
                      const fs::path& out_dir);
RunSummary run_pipeline(const ExperimentConfig& cfg, const fs::path& out_dir,
                        const Progress& progress = {});

/// Re-executes the command a manifest records, with the same arguments and
/// config, into out_dir.
Json dispatch(const std::string& command, const Json& arguments, const fs::path& out_dir,
              const Progress& progress = {});

struct ReplayReport {
  Json manifest;                        ///< of the new run
  std::vector<std::string> mismatched;  ///< outputs whose hash differs
  std::vector<std::string> changed_inputs;
};
ReplayReport replay(const fs::path& manifest, const fs::path& out_dir,
                    const Progress& progress = {});

}  // namespace hnko::experiment
