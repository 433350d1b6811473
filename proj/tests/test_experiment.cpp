#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "hnko/error.hpp"
#include "hnko/experiment.hpp"
#include "hnko/io.hpp"
#include "hnko/model.hpp"
#include "hnko/systems.hpp"

using hnko::Index;
using hnko::Matrix;
using hnko::Vector;
namespace ex = hnko::experiment;
namespace io = hnko::io;
namespace fs = std::filesystem;
namespace sys = hnko::systems;
using Json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "hnko_test_experiment" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Small and fast: spring, short spans, few epochs.
ex::ExperimentConfig tiny_config() {
  auto c = ex::resolve_config("spring-stiff1", std::nullopt,
                              {{"/time/train_span", Json(2.0)},
                               {"/time/predict_span", Json(4.0)},
                               {"/training/epochs", Json(30)},
                               {"/model/latent_dim", Json(5)},
                               {"/model/q", Json(2)},
                               {"/baselines/edmd_order", Json(2)}});
  return c;
}

}  // namespace

TEST(Presets, AllValidateAndRoundTrip) {
  for (const auto& name : ex::preset_names()) {
    const auto c = ex::preset(name);
    EXPECT_NO_THROW(ex::validate(c)) << name;
    const auto back = ex::config_from_json(ex::to_json(c));
    EXPECT_EQ(ex::to_json(back), ex::to_json(c)) << name;
    EXPECT_EQ(ex::initial_state(c).size(), sys::state_dim(c.system)) << name;
  }
  EXPECT_THROW(ex::preset("nope"), hnko::ValidationError);
}

TEST(Presets, ThreeBodyInitialStateReturnsAfterOnePeriod) {
  const auto c = ex::preset("three-body");
  const Vector x0 = ex::initial_state(c);
  const double period = 6.32591398;
  const auto t = sys::simulate(c.system, x0, period / 1000.0, 1000);
  EXPECT_LT((t.states.col(1000) - x0).norm(), 1e-3);
}

TEST(Config, OverridesAndStrictness) {
  const auto c = ex::resolve_config("kepler", Json{{"training", {{"epochs", 12}}}},
                                    {{"/noise/sigma2", Json(0.5)}});
  EXPECT_EQ(c.training.epochs, 12);
  EXPECT_EQ(c.noise.sigma2, 0.5);
  EXPECT_TRUE(std::holds_alternative<sys::Kepler>(c.system));

  EXPECT_THROW(ex::resolve_config("kepler", Json{{"trainig", {{"epochs", 1}}}}, {}), hnko::Error);
  EXPECT_THROW(ex::resolve_config("kepler", Json{{"training", {{"weights", {{"dgree", 1}}}}}}, {}),
               hnko::Error);
  EXPECT_THROW(ex::resolve_config("kepler", std::nullopt, {{"/model/latent_dim", Json("seven")}}),
               hnko::Error);
  EXPECT_THROW(ex::resolve_config("kepler", std::nullopt, {{"/model/q", Json(0)}}),
               hnko::ValidationError);
  EXPECT_THROW(ex::resolve_config("kepler", std::nullopt, {{"/time/train_span", Json(0.25)}}),
               hnko::ValidationError);
  EXPECT_THROW(ex::resolve_config("kepler", std::nullopt, {{"/model/variant", Json("kronecker")}}),
               hnko::ValidationError);

  // A file naming a preset picks it up when no preset flag is given.
  const auto d = ex::resolve_config(std::nullopt, Json{{"preset", "spring-stiff10"}}, {});
  EXPECT_EQ(std::get<sys::MassSpring>(d.system).k, 10.0);
}

TEST(Simulate, NoiseFreeSpringKeepsEnergy) {
  const fs::path out = scratch("sim");
  auto c = tiny_config();
  c.noise.sigma2 = 0.0;
  ex::simulate_command(c, out);
  for (const char* f : {"trajectory.csv", "observed.csv", "invariants.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  std::istringstream lines(io::read_text(out / "invariants.csv"));
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "t,energy");
  std::vector<double> energy;
  while (std::getline(lines, line)) energy.push_back(io::parse_double(line.substr(line.find(',') + 1)));
  ASSERT_EQ(energy.size(), static_cast<std::size_t>(ex::predict_steps(c) + 1));
  for (double e : energy) EXPECT_NEAR(e, energy.front(), 1e-6);
  const auto obs = io::read_trajectory(out / "observed.csv").trajectory;
  EXPECT_EQ(obs.samples(), ex::train_steps(c) + 1);
}

TEST(Train, ZeroEpochsWritesInitialModel) {
  const fs::path out = scratch("train0");
  auto c = tiny_config();
  c.training.epochs = 0;
  ex::simulate_command(c, out);
  ex::train_command(c, out / "observed.csv", out);
  const auto saved = io::checkpoint_model(io::read_json(out / "checkpoint.json"));
  const auto data = io::read_trajectory(out / "observed.csv").trajectory.states;
  const auto init = hnko::model::init_model(ex::model_config(c), data);
  const auto a = hnko::model::parameters(saved), b = hnko::model::parameters(init);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Pipeline, WritesArtifactsAndReplaysByteIdentically) {
  const fs::path out = scratch("run");
  const auto c = tiny_config();
  const auto summary = ex::run_pipeline(c, out);
  for (const char* f : {"trajectory.csv", "observed.csv", "checkpoint.json",
                        "prediction.csv", "metrics.json", "invariants.json", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  EXPECT_EQ(summary.hnko.prediction.samples(), ex::predict_steps(c) + 1);
  EXPECT_TRUE(summary.dmd.has_value());

  const fs::path again = scratch("replay");
  const auto rep = ex::replay(out / "manifest.json", again);
  EXPECT_TRUE(rep.mismatched.empty());
  EXPECT_TRUE(rep.changed_inputs.empty());
  for (const char* f : {"trajectory.csv", "checkpoint.json", "metrics.json"}) {
    EXPECT_EQ(io::read_text(out / f), io::read_text(again / f)) << f;
  }
  EXPECT_THROW(ex::replay(out / "manifest.json", out), hnko::ValidationError);
}

TEST(Commands, PredictEvaluateDiscoverBaseline) {
  const fs::path out = scratch("cmds");
  const auto c = tiny_config();
  ex::simulate_command(c, out);
  ex::train_command(c, out / "observed.csv", out);
  ex::predict_command(out / "checkpoint.json", out / "observed.csv", 0, ex::predict_steps(c), out);
  const auto pred = io::read_trajectory(out / "prediction.csv").trajectory;
  EXPECT_EQ(pred.samples(), ex::predict_steps(c) + 1);
  EXPECT_DOUBLE_EQ(pred.dt, c.time.dt);

  ex::evaluate_command(out / "prediction.csv", out / "trajectory.csv", std::nullopt, out);
  const Json m = io::read_json(out / "metrics.json");
  EXPECT_TRUE(m.contains("mean_mse"));

  ex::discover_command(out / "checkpoint.json", out / "trajectory.csv", 1e-3, out);
  EXPECT_TRUE(fs::exists(out / "invariants.json"));

  ex::baseline_command("dmd", out / "observed.csv", 10, 0, 5000, out);
  EXPECT_TRUE(fs::exists(out / "dmd_prediction.csv"));
  EXPECT_THROW(ex::baseline_command("sindy", out / "observed.csv", 10, 0, 5000, out), hnko::Error);
  EXPECT_THROW(ex::baseline_command("edmd", out / "observed.csv", 10, 9, 10, out),
               hnko::ValidationError);
}
