// Runs the ten acceptance criteria and prints one PASS/FAIL line for each.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hnko/baselines.hpp"
#include "hnko/eval.hpp"
#include "hnko/experiment.hpp"
#include "hnko/io.hpp"
#include "hnko/model.hpp"
#include "hnko/numerics.hpp"
#include "hnko/orthogonal.hpp"
#include "hnko/rng.hpp"
#include "hnko/systems.hpp"
#include "model_check.hpp"

namespace fs = std::filesystem;
namespace ex = hnko::experiment;
namespace ev = hnko::eval;
namespace mdl = hnko::model;
namespace orth = hnko::orthogonal;
namespace sys = hnko::systems;
using hnko::Index;
using hnko::Matrix;
using hnko::Vector;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

class Runs {
 public:
  explicit Runs(fs::path dir) : dir_(std::move(dir)) {}

  const ex::RunSummary& get(const std::string& preset) {
    auto it = cache_.find(preset);
    if (it != cache_.end()) return it->second;
    const auto start = std::chrono::steady_clock::now();
    std::fprintf(stderr, "running preset %s ...\n", preset.c_str());
    const auto cfg = ex::preset(preset);
    auto s = ex::run_pipeline(cfg, dir_ / preset);
    std::fprintf(stderr, "  done in %.1f s\n", seconds_since(start));
    return cache_.emplace(preset, std::move(s)).first->second;
  }
  fs::path dir(const std::string& preset) const { return dir_ / preset; }

 private:
  fs::path dir_;
  std::map<std::string, ex::RunSummary> cache_;
};

const std::vector<std::string> kSprings{"spring-stiff1", "spring-stiff10", "spring-stiff100"};

double latent_norm_spread(const mdl::HnkoModel& m, const Vector& x0, Index steps) {
  const Matrix y = mdl::latent_rollout(m, x0, steps);
  const Eigen::RowVectorXd n = y.colwise().norm();
  return n.maxCoeff() - n.minCoeff();
}

Verdict orthogonality(Runs& runs) {
  double worst_defect = 0.0, worst_spread = 0.0;
  std::string names;
  for (const std::string p : {"kepler", "spring-stiff10", "kdv64"}) {
    const auto& s = runs.get(p);
    worst_defect = std::max(worst_defect,
                            hnko::numerics::orthogonality_defect(orth::materialize(s.trained.model.koopman)));
    worst_spread = std::max(worst_spread, latent_norm_spread(s.trained.model,
                                                             s.simulation.observed.states.col(0), 10000));
    names += (names.empty() ? "" : ",") + p;
  }
  return {worst_defect < 1e-8 && worst_spread < 1e-6,
          "presets " + names + ": max ||KK^T-I||_F " + fmt(worst_defect) + ", max latent-norm spread over 1e4 steps " +
              fmt(worst_spread)};
}

// Central differences of all five terms from one sweep over the parameters.
std::vector<std::vector<Matrix>> fd_term_gradients(const mdl::HnkoModel& m, const Matrix& data, double h) {
  std::vector<Matrix> params = mdl::parameters(m);
  std::vector<std::vector<Matrix>> out(5);
  mdl::HnkoModel probe = m;
  auto terms = [&] {
    const auto b = mdl::total_loss(probe, data, {});
    return std::array<double, 5>{b.dict, b.koop, b.sphere, b.deg, b.ind};
  };
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (auto& g : out) g.emplace_back(params[t].rows(), params[t].cols());
    for (Index i = 0; i < params[t].size(); ++i) {
      const double x = params[t](i);
      params[t](i) = x + h;
      mdl::set_parameters(probe, params);
      const auto fp = terms();
      params[t](i) = x - h;
      mdl::set_parameters(probe, params);
      const auto fm = terms();
      params[t](i) = x;
      for (std::size_t k = 0; k < 5; ++k) out[k][t](i) = (fp[k] - fm[k]) / (2.0 * h);
    }
  }
  return out;
}

Verdict gradients() {
  const Vector x0 = (Vector(4) << 1.0, 0.0, 0.0, 0.9).finished();
  const Matrix data = sys::simulate(sys::Kepler{}, x0, 0.1, 20).states;
  const std::vector<mdl::LossWeights> terms{
      {1, 0, 0, 0, 0}, {0, 1, 0, 0, 0}, {0, 0, 1, 0, 0}, {0, 0, 0, 1, 0}, {0, 0, 0, 0, 1}};
  double worst = 0.0;
  for (auto variant : {orth::Variant::Full, orth::Variant::Kronecker}) {
    for (Index p : {Index{9}, Index{16}}) {
      mdl::ModelConfig cfg;
      cfg.state_dim = 4;
      cfg.latent_dim = p;
      cfg.q = p - 2;
      cfg.variant = variant;
      cfg.seed = 11;
      mdl::HnkoModel m = mdl::init_model(cfg, data);
      // move K away from the identity so the expm backward is exercised
      hnko::Rng rng(5);
      m.koopman = orth::OrthogonalKoopman::random_near_identity(variant, p, rng);
      for (auto& f : m.koopman.factors()) f.values() *= 50.0;
      const auto fd = fd_term_gradients(m, data, 1e-5);
      for (std::size_t k = 0; k < terms.size(); ++k) {
        const auto tape = testing_util::tape_gradients(m, data, terms[k]);
        for (std::size_t t = 0; t < tape.size(); ++t) {
          const double scale = fd[k][t].norm();
          worst = std::max(worst, (tape[t] - fd[k][t]).norm() / (scale > 1e-6 ? scale : 1.0));
        }
      }
    }
  }
  return {worst < 1e-4, "Full and Kronecker, p in {9,16}, 5 terms x all tensors: max relative error " + fmt(worst)};
}

Verdict dmd_oracle() {
  Matrix w = Matrix::Zero(4, 4);
  w(0, 1) = 0.3;
  w(2, 3) = 0.7;
  w(0, 3) = 0.2;
  const Matrix r = hnko::numerics::expm(w - w.transpose());
  sys::Trajectory t;
  t.states.resize(4, 50);
  t.states.col(0) << 1.0, -0.5, 0.25, 2.0;
  for (Index k = 1; k < 50; ++k) t.states.col(k) = r * t.states.col(k - 1);
  const auto m = hnko::baselines::dmd_fit(t);
  const double kerr = (m.k - r).norm();
  const Matrix pred = hnko::baselines::linear_predict(m, t.states.col(0), 100);
  double roll = 0.0;
  Vector x = t.states.col(0);
  for (Index k = 0; k <= 100; ++k) {
    roll = std::max(roll, (pred.col(k) - x).norm());
    x = r * x;
  }
  return {kerr < 1e-8 && roll < 1e-6, "||K-R||_F " + fmt(kerr) + ", 100-step rollout error " + fmt(roll)};
}

double drift(const ex::MethodResult& r, const std::string& name) {
  return r.metrics.invariant_drift.at(name).max_predicted_drift;
}

Verdict kepler_contrast(Runs& runs) {
  const auto& s = runs.get("kepler");
  const double h = drift(s.hnko, "energy");
  const double d = drift(*s.dmd, "energy");
  const double rho = s.dmd->spectral_radius;
  const bool dmd_bad = d > 0.2 || std::abs(rho - 1.0) > 1e-3;
  return {h < 0.05 && dmd_bad, "HNKO max energy drift " + fmt(h) + " (need < 0.05); DMD drift " + fmt(d) +
                                   ", spectral radius " + fmt(rho)};
}

Verdict stiffness(Runs& runs) {
  double lo = INFINITY, hi = 0.0, worst_drift = 0.0;
  std::string per;
  for (const auto& p : kSprings) {
    const auto& s = runs.get(p);
    const double nm = s.hnko.metrics.normalized_mean_mse;
    const double d = drift(s.hnko, "energy");
    lo = std::min(lo, nm);
    hi = std::max(hi, nm);
    worst_drift = std::max(worst_drift, d);
    per += " " + p + ": nMSE " + fmt(nm) + " drift " + fmt(d) + ";";
  }
  const double ratio = hi / lo;
  return {std::isfinite(ratio) && ratio < 10.0 && worst_drift < 0.05,
          "nMSE max/min " + fmt(ratio) + " (need < 10), max energy drift " + fmt(worst_drift) + " (need < 0.05);" + per};
}

Verdict kdv(Runs& runs) {
  const auto& s = runs.get("kdv64");
  const double hm = drift(s.hnko, "mass"), he = drift(s.hnko, "energy");
  const double dm = drift(*s.dmd, "mass");
  return {hm < 0.02 && he < 0.05 && dm > 0.1,
          "HNKO mass drift " + fmt(hm) + ", energy drift " + fmt(he) + "; DMD mass drift " + fmt(dm)};
}

double median(Vector v) {
  std::sort(v.data(), v.data() + v.size());
  const Index n = v.size();
  return n % 2 ? v(n / 2) : 0.5 * (v(n / 2 - 1) + v(n / 2));
}

Verdict discovery(Runs& runs) {
  bool all = true;
  std::string per;
  std::vector<std::string> names{"kepler"};
  names.insert(names.end(), kSprings.begin(), kSprings.end());
  for (const auto& p : names) {
    const auto& s = runs.get(p);
    const double med = median(s.held_out_feature_variance);
    double best = INFINITY;
    for (const auto& inv : s.discovery.invariants) {
      if (std::abs(inv.eigenvalue - 1.0) < 1e-3) best = std::min(best, inv.temporal_variance / med);
    }
    all = all && best <= 1e-3;
    per += " " + p + ": " + std::to_string(s.discovery.invariants.size()) + " found, var ratio " + fmt(best) + ";";
  }
  return {all, "held-out variance / median feature variance (need <= 1e-3);" + per};
}

Verdict scaling() {
  bool counts = true;
  for (Index p : {Index{16}, Index{64}, Index{256}, Index{1024}}) {
    const Index s = static_cast<Index>(std::lround(std::sqrt(static_cast<double>(p))));
    counts = counts && orth::param_count(orth::Variant::Full, p) == p * (p - 1) / 2;
    counts = counts && orth::param_count(orth::Variant::Kronecker, p) == s * (s - 1);
  }
  hnko::Rng rng(3);
  const auto full = orth::OrthogonalKoopman::random_near_identity(orth::Variant::Full, 1024, rng);
  const auto kron = orth::OrthogonalKoopman::random_near_identity(orth::Variant::Kronecker, 1024, rng);
  auto time_it = [](const orth::OrthogonalKoopman& k, int reps) {
    double best = INFINITY;
    for (int i = 0; i < reps; ++i) {
      const auto t = std::chrono::steady_clock::now();
      const Matrix m = orth::materialize(k);
      best = std::min(best, seconds_since(t));
      if (m.rows() != 1024) best = NAN;
    }
    return best;
  };
  const double tk = time_it(kron, 5);
  const double tf = time_it(full, 1);
  const double speedup = tf / tk;
  return {counts && speedup >= 10.0, std::string("param_count closed forms ") + (counts ? "match" : "DIFFER") +
                                         "; materialize p=1024 full " + fmt(tf) + " s, Kronecker " + fmt(tk) +
                                         " s, speedup " + fmt(speedup)};
}

Verdict solvers() {
  sys::Kdv k{256, 50.0};
  const double c = 1.0, x0 = 25.0;
  const auto t = sys::simulate(k, sys::kdv_soliton(k, c, x0), 0.1, 50);
  double linf = 0.0;
  for (Index i = 0; i <= 50; ++i) {
    const double time = t.time(i);
    const Vector exact = sys::kdv_soliton(k, c, std::fmod(x0 + c * time, k.domain_length));
    linf = std::max(linf, (t.states.col(i) - exact).cwiseAbs().maxCoeff());
  }
  const auto cfg = ex::preset("three-body");
  const Vector s0 = ex::initial_state(cfg);
  const auto nb = sys::simulate(cfg.system, s0, 0.1, 500);
  const double h0 = sys::hamiltonian(cfg.system, s0);
  double edrift = 0.0;
  for (Index i = 0; i < nb.samples(); ++i) {
    edrift = std::max(edrift, std::abs(sys::hamiltonian(cfg.system, nb.states.col(i)) - h0) / std::abs(h0));
  }
  // 2WD vs permutations at N = 6
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double werr = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a(3, 6), b(3, 6);
    for (Index i = 0; i < a.size(); ++i) a(i) = u(gen);
    for (Index i = 0; i < b.size(); ++i) b(i) = u(gen);
    std::vector<int> perm{0, 1, 2, 3, 4, 5};
    double best = INFINITY;
    do {
      double s = 0.0;
      for (int i = 0; i < 6; ++i) s += (a.col(i) - b.col(perm[static_cast<std::size_t>(i)])).squaredNorm();
      best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    werr = std::max(werr, std::abs(ev::wasserstein2(a, b) - std::sqrt(best / 6.0)));
  }
  return {linf < 1e-3 && edrift < 1e-6 && werr < 1e-12,
          "KdV soliton L_inf " + fmt(linf) + " (t<=5, s=256); three-body energy drift " + fmt(edrift) +
              " (t<=50); 2WD vs brute force " + fmt(werr)};
}

Verdict determinism(Runs& runs, const fs::path& work) {
  runs.get("kepler");
  const fs::path manifest = runs.dir("kepler") / "manifest.json";
  const fs::path a = work / "replay-a", b = work / "replay-b";
  fs::remove_all(a);
  fs::remove_all(b);
  const auto ra = ex::replay(manifest, a);
  const auto rb = ex::replay(manifest, b);
  std::vector<std::string> differ;
  for (const char* f : {"trajectory.csv", "observed.csv", "checkpoint.json", "prediction.csv", "metrics.json",
                        "metrics_per_step.csv", "invariants.json"}) {
    const auto x = hnko::io::read_text(a / f), y = hnko::io::read_text(b / f);
    const auto z = hnko::io::read_text(runs.dir("kepler") / f);
    if (x != y || x != z) differ.push_back(f);
  }
  const bool ok = differ.empty() && ra.mismatched.empty() && rb.mismatched.empty();
  std::string detail = "two replays of the kepler manifest vs original: ";
  if (ok) {
    detail += "byte-identical";
  } else {
    for (const auto& d : differ) detail += d + " ";
    detail += "differ";
  }
  return {ok, detail};
}

std::set<int> parse_list(const std::string& s) {
  std::set<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.insert(std::stoi(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string work = "acceptance-work";
  std::string only, known;
  app.add_option("--work-dir", work, "Directory for pipeline runs");
  app.add_option("--only", only, "Comma-separated criteria to run (default: all)");
  app.add_option("--known-failures", known,
                 "Comma-separated criteria whose failure does not affect the exit status");
  CLI11_PARSE(app, argc, argv);

  const std::set<int> selected = parse_list(only);
  const std::set<int> expected = parse_list(known);
  fs::create_directories(work);
  Runs runs(work);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"orthogonality under training", [&] { return orthogonality(runs); }},
      {"gradient correctness", gradients},
      {"DMD oracle equivalence", dmd_oracle},
      {"conservation contrast, Kepler", [&] { return kepler_contrast(runs); }},
      {"stiffness robustness", [&] { return stiffness(runs); }},
      {"KdV conservation", [&] { return kdv(runs); }},
      {"invariant discovery", [&] { return discovery(runs); }},
      {"Kronecker scaling", scaling},
      {"solver validation", solvers},
      {"determinism", [&] { return determinism(runs, work); }},
  };

  int unexpected = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const bool known_fail = !v.pass && expected.count(id);
    if (!v.pass && !known_fail) ++unexpected;
    std::printf("[%s] %2d %s: %s (%.1f s)%s\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                v.detail.c_str(), seconds_since(start), known_fail ? " [known failure]" : "");
    std::fflush(stdout);
  }
  return unexpected == 0 ? 0 : 1;
}
