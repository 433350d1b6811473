// hnko command-line front end. Exit codes: 0 success, 1 usage error,
// 2 runtime error; failures print one JSON object on stderr.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hnko/error.hpp"
#include "hnko/experiment.hpp"
#include "hnko/io.hpp"

namespace {

using hnko::experiment::Json;
namespace fs = std::filesystem;

void report(const char* kind, const std::string& message, std::size_t line = 0,
            std::size_t column = 0) {
  Json e = {{"kind", kind}, {"message", message}};
  e["line"] = line ? Json(line) : Json(nullptr);
  e["column"] = column ? Json(column) : Json(nullptr);
  std::cerr << Json{{"error", e}}.dump() << '\n';
}

// Flags shared by every command that takes an experiment config.
struct ConfigFlags {
  std::optional<std::string> preset;
  std::optional<std::string> config_file;
  std::vector<std::string> sets;
  std::optional<int> epochs;
  std::optional<long> latent_dim;
  std::optional<long> q;
  std::optional<std::string> variant;
  std::optional<unsigned long long> model_seed;
  std::optional<double> noise;
  std::optional<unsigned long long> noise_seed;
  std::optional<double> learning_rate;
  std::optional<double> dt;
  std::optional<double> train_span;
  std::optional<double> predict_span;
  bool print_config = false;

  void attach(CLI::App* app) {
    app->add_option("--preset", preset, "Starting preset (see `hnko presets`)");
    app->add_option("--config", config_file, "JSON config file merged over the preset")
        ->check(CLI::ExistingFile);
    app->add_option("--set", sets, "Override as /json/pointer=value (value parsed as JSON)");
    app->add_option("--epochs", epochs);
    app->add_option("--latent-dim", latent_dim, "p");
    app->add_option("--q", q, "Number of hyperplanes");
    app->add_option("--variant", variant)->check(CLI::IsMember({"full", "kronecker"}));
    app->add_option("--seed", model_seed, "Model initialisation seed");
    app->add_option("--noise", noise, "Observation noise variance sigma2");
    app->add_option("--noise-seed", noise_seed);
    app->add_option("--learning-rate", learning_rate);
    app->add_option("--dt", dt, "Sample spacing");
    app->add_option("--train-span", train_span);
    app->add_option("--predict-span", predict_span);
    app->add_flag("--print-config", print_config, "Print the resolved config and exit");
  }

  hnko::experiment::ExperimentConfig resolve() const {
    std::optional<Json> file;
    if (config_file) file = hnko::io::read_json(*config_file);
    std::vector<std::pair<std::string, Json>> ov;
    auto put = [&](const char* ptr, const auto& v) {
      if (v) ov.emplace_back(ptr, Json(*v));
    };
    put("/training/epochs", epochs);
    put("/model/latent_dim", latent_dim);
    put("/model/q", q);
    put("/model/variant", variant);
    put("/model/seed", model_seed);
    put("/noise/sigma2", noise);
    put("/noise/seed", noise_seed);
    put("/training/learning_rate", learning_rate);
    put("/time/dt", dt);
    put("/time/train_span", train_span);
    put("/time/predict_span", predict_span);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || s.empty() || s[0] != '/') {
        throw CLI::ValidationError("--set", "expected /json/pointer=value, got '" + s + "'");
      }
      const std::string text = s.substr(eq + 1);
      Json value = Json::parse(text, nullptr, false);
      if (value.is_discarded()) value = text;
      ov.emplace_back(s.substr(0, eq), value);
    }
    return hnko::experiment::resolve_config(preset, file, ov);
  }
};

hnko::experiment::Progress progress_printer(bool quiet) {
  if (quiet) return {};
  return [](const std::string& stage, int epoch, double loss) {
    if (stage == "train") {
      std::fprintf(stderr, "epoch %d loss %.6e\n", epoch, loss);
    } else {
      std::fprintf(stderr, "%s\n", stage.c_str());
    }
  };
}

void print_outputs(const Json& manifest, const fs::path& dir) {
  for (const auto& [name, hash] : manifest.at("outputs").items()) {
    std::cout << (dir / name).string() << '\n';
  }
  std::cout << (dir / "manifest.json").string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hamiltonian neural Koopman operator pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", HNKO_CLI_VERSION);

  std::string out;
  bool quiet = false;
  auto out_option = [&](CLI::App* sub) {
    sub->add_option("-o,--output-dir", out, "Directory for artifacts and manifest.json");
  };

  ConfigFlags sim_flags;
  auto* sim = app.add_subcommand("simulate", "Simulate a system: truth, noisy observations, invariants");
  sim_flags.attach(sim);
  out_option(sim);

  ConfigFlags train_flags;
  std::string train_data;
  auto* train = app.add_subcommand("train", "Train an HNKO model on a trajectory file");
  train_flags.attach(train);
  train->add_option("--data", train_data, "Trajectory CSV")->required()->check(CLI::ExistingFile);
  train->add_flag("--quiet", quiet);
  out_option(train);

  std::string pred_ckpt, pred_data;
  long pred_row = 0;
  long pred_steps = 0;
  auto* pred = app.add_subcommand("predict", "Roll a trained model forward");
  pred->add_option("--checkpoint", pred_ckpt)->required()->check(CLI::ExistingFile);
  pred->add_option("--data", pred_data, "Trajectory CSV holding x0")->required()->check(CLI::ExistingFile);
  pred->add_option("--row", pred_row, "Sample used as x0 (negative counts from the end)");
  pred->add_option("--steps", pred_steps)->required()->check(CLI::NonNegativeNumber);
  out_option(pred);

  std::string base_method, base_data;
  long base_steps = 0;
  int base_order = 3;
  long base_cap = 5000;
  auto* base = app.add_subcommand("baseline", "Fit and roll out DMD or Hermite EDMD");
  base->add_option("--method", base_method)->required()->check(CLI::IsMember({"dmd", "edmd"}));
  base->add_option("--data", base_data)->required()->check(CLI::ExistingFile);
  base->add_option("--steps", base_steps)->required()->check(CLI::NonNegativeNumber);
  base->add_option("--order", base_order, "EDMD polynomial order")->check(CLI::PositiveNumber);
  base->add_option("--dictionary-cap", base_cap)->check(CLI::PositiveNumber);
  out_option(base);

  std::string ev_pred, ev_truth;
  std::optional<std::string> ev_preset;
  auto* ev = app.add_subcommand("evaluate", "Compare a prediction with the truth");
  ev->add_option("--predicted", ev_pred)->required()->check(CLI::ExistingFile);
  ev->add_option("--truth", ev_truth)->required()->check(CLI::ExistingFile);
  ev->add_option("--system-preset", ev_preset, "System of this preset (default: from the sidecar)");
  out_option(ev);

  std::string disc_ckpt, disc_data;
  double disc_tol = 1e-3;
  auto* disc = app.add_subcommand("discover", "Extract conserved quantities from a checkpoint");
  disc->add_option("--checkpoint", disc_ckpt)->required()->check(CLI::ExistingFile);
  disc->add_option("--data", disc_data)->required()->check(CLI::ExistingFile);
  disc->add_option("--tol", disc_tol, "Eigenvalue tolerance |lambda - 1|")->check(CLI::PositiveNumber);
  out_option(disc);

  ConfigFlags run_flags;
  auto* run = app.add_subcommand("run", "Full pipeline: simulate, train, baselines, evaluate, discover");
  run_flags.attach(run);
  run->add_flag("--quiet", quiet);
  out_option(run);

  std::string manifest_path;
  auto* rep = app.add_subcommand("replay", "Re-run a manifest and compare artifact hashes");
  rep->add_option("--manifest", manifest_path)->required()->check(CLI::ExistingFile);
  rep->add_flag("--quiet", quiet);
  out_option(rep);

  auto* presets = app.add_subcommand("presets", "List shipped presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report("usage", e.what());
    return 1;
  }

  try {
    if (*presets) {
      for (const auto& n : hnko::experiment::preset_names()) std::cout << n << '\n';
      return 0;
    }
    for (auto [sub, flags] : {std::pair{sim, &sim_flags}, {train, &train_flags}, {run, &run_flags}}) {
      if (*sub && flags->print_config) {
        std::cout << hnko::experiment::to_json(flags->resolve()).dump(2) << '\n';
        return 0;
      }
    }
    if (out.empty()) {
      report("usage", "--output-dir is required");
      return 1;
    }
    const fs::path dir = out;
    Json manifest;
    if (*sim) {
      manifest = hnko::experiment::simulate_command(sim_flags.resolve(), dir);
    } else if (*train) {
      manifest = hnko::experiment::train_command(train_flags.resolve(), train_data, dir,
                                                 progress_printer(quiet));
    } else if (*pred) {
      manifest = hnko::experiment::predict_command(pred_ckpt, pred_data, pred_row, pred_steps, dir);
    } else if (*base) {
      manifest = hnko::experiment::baseline_command(base_method, base_data, base_steps, base_order,
                                                    base_cap, dir);
    } else if (*ev) {
      std::optional<hnko::systems::SystemSpec> spec;
      if (ev_preset) spec = hnko::experiment::preset(*ev_preset).system;
      manifest = hnko::experiment::evaluate_command(ev_pred, ev_truth, spec, dir);
    } else if (*disc) {
      manifest = hnko::experiment::discover_command(disc_ckpt, disc_data, disc_tol, dir);
    } else if (*run) {
      manifest = hnko::experiment::run_pipeline(run_flags.resolve(), dir, progress_printer(quiet)).manifest;
    } else if (*rep) {
      const auto r = hnko::experiment::replay(manifest_path, dir, progress_printer(quiet));
      print_outputs(r.manifest, dir);
      for (const auto& p : r.changed_inputs) std::cerr << "input changed since recording: " << p << '\n';
      if (!r.mismatched.empty()) {
        std::string names;
        for (const auto& n : r.mismatched) names += (names.empty() ? "" : ", ") + n;
        report("replay", "outputs differ from the manifest: " + names);
        return 2;
      }
      return 0;
    }
    print_outputs(manifest, dir);
    return 0;
  } catch (const CLI::ValidationError& e) {
    report("usage", e.what());
    return 1;
  } catch (const hnko::ParseError& e) {
    report(e.kind(), e.what(), e.line(), e.column());
    return 2;
  } catch (const hnko::Error& e) {
    report(e.kind(), e.what());
    return 2;
  } catch (const std::exception& e) {
    report("runtime", e.what());
    return 2;
  }
}
