#include <benchmark/benchmark.h>

#include <random>

#include "hnko/autodiff.hpp"
#include "hnko/eval.hpp"
#include "hnko/model.hpp"
#include "hnko/orthogonal.hpp"
#include "hnko/rng.hpp"
#include "hnko/systems.hpp"
#include "hnko/training.hpp"

namespace orth = hnko::orthogonal;
using hnko::Index;
using hnko::Matrix;

static void BM_MaterializeFull(benchmark::State& state) {
  hnko::Rng rng(1);
  const auto k = orth::OrthogonalKoopman::random_near_identity(orth::Variant::Full, state.range(0), rng);
  for (auto _ : state) benchmark::DoNotOptimize(orth::materialize(k));
}
BENCHMARK(BM_MaterializeFull)->Arg(64)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

static void BM_MaterializeKronecker(benchmark::State& state) {
  hnko::Rng rng(1);
  const auto k = orth::OrthogonalKoopman::random_near_identity(orth::Variant::Kronecker, state.range(0), rng);
  for (auto _ : state) benchmark::DoNotOptimize(orth::materialize(k));
}
BENCHMARK(BM_MaterializeKronecker)->Arg(64)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

// Matrix-free K v with the factors, no p x p matrix formed.
static void BM_ApplyKronecker(benchmark::State& state) {
  hnko::Rng rng(1);
  const Index p = state.range(0);
  const auto k = orth::OrthogonalKoopman::random_near_identity(orth::Variant::Kronecker, p, rng);
  const auto f = orth::factor_matrices(k);
  const hnko::Vector v = hnko::Vector::Ones(p);
  for (auto _ : state) benchmark::DoNotOptimize(orth::apply(k, f, v));
}
BENCHMARK(BM_ApplyKronecker)->Arg(64)->Arg(256)->Arg(1024);

// One forward + backward + Adam update of the comprehensive loss.
static void BM_TrainingStep(benchmark::State& state) {
  const Index p = state.range(0);
  const hnko::Vector x0 = (hnko::Vector(4) << 1.0, 0.0, 0.0, 0.9).finished();
  const Matrix data = hnko::systems::simulate(hnko::systems::Kepler{}, x0, 0.1, 50).states;
  hnko::model::ModelConfig cfg;
  cfg.state_dim = 4;
  cfg.latent_dim = p;
  cfg.q = p - 2;
  auto m = hnko::model::init_model(cfg, data);
  hnko::training::TrainConfig tc;
  tc.epochs = 1;
  for (auto _ : state) m = hnko::training::train(std::move(m), data, tc).model;
}
BENCHMARK(BM_TrainingStep)->Arg(7)->Arg(16)->Arg(80)->Unit(benchmark::kMillisecond);

static void BM_Wasserstein(benchmark::State& state) {
  const Index n = state.range(0);
  std::mt19937_64 gen(2);
  std::normal_distribution<double> g;
  Matrix a(4, n), b(4, n);
  for (Index i = 0; i < a.size(); ++i) a(i) = g(gen);
  for (Index i = 0; i < b.size(); ++i) b(i) = g(gen);
  for (auto _ : state) benchmark::DoNotOptimize(hnko::eval::wasserstein2(a, b));
}
BENCHMARK(BM_Wasserstein)->Arg(100)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
