#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hnko/baselines.hpp"
#include "hnko/eval.hpp"
#include "hnko/model.hpp"
#include "hnko/systems.hpp"
#include "hnko/training.hpp"

namespace hnko::io {

namespace fs = std::filesystem;
using Json = nlohmann::json;

/// 17 significant digits (lossless for doubles); nan/inf spelled as such.
std::string format_double(double value);
/// Full-match decimal parse; ParseError at (line, column) otherwise.
double parse_double(std::string_view text, std::size_t line = 0, std::size_t column = 0);

/// Sidecar of a CSV file: "<file>.json".
fs::path sidecar_path(const fs::path& csv);

struct TrajectoryFile {
  systems::Trajectory trajectory;
  Json metadata;  ///< sidecar content, null when absent
};

/// CSV with header t,x0,...,x{n-1}; the sidecar gets metadata plus dt, t0,
/// samples and dim.
void write_trajectory(const fs::path& path, const systems::Trajectory& traj, Json metadata);
/// dt comes from the sidecar when present, otherwise from the time column
/// (which must then be evenly spaced).
TrajectoryFile read_trajectory(const fs::path& path);

/// Generic numeric table: header row then one row per entry of `rows`.
void write_table(const fs::path& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows);

Json read_json(const fs::path& path);
/// Pretty-printed (indent 2) with a trailing newline.
void write_json(const fs::path& path, const Json& value);
void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const fs::path& path);

Json system_to_json(const systems::SystemSpec& spec);
systems::SystemSpec system_from_json(const Json& j);

Json model_to_json(const model::HnkoModel& model);
model::HnkoModel model_from_json(const Json& j);

/// Checkpoint document: the model plus an echo of the configuration that
/// produced it.
Json checkpoint_to_json(const model::HnkoModel& model, const Json& config);
model::HnkoModel checkpoint_model(const Json& checkpoint);

Json linear_model_to_json(const baselines::LinearModel& m);
baselines::LinearModel linear_model_from_json(const Json& j);

Json metrics_to_json(const eval::MetricsReport& report);
/// Columns: step, t, mse, normalized_mse, then predicted/truth value and
/// drift of every invariant.
void write_metrics_csv(const fs::path& path, const eval::MetricsReport& report, double t0,
                       double dt);

Json discovery_to_json(const eval::Discovery& d, const Vector& feature_variance);

void write_loss_history(const fs::path& path, const std::vector<model::LossBreakdown>& history);

Json train_config_to_json(const training::TrainConfig& cfg);
training::TrainConfig train_config_from_json(const Json& j);

}  // namespace hnko::io
