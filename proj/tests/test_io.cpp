#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "grad_check.hpp"
#include "hnko/baselines.hpp"
#include "hnko/error.hpp"
#include "hnko/io.hpp"
#include "hnko/model.hpp"
#include "hnko/systems.hpp"

using hnko::Index;
using hnko::Matrix;
using hnko::Vector;
namespace io = hnko::io;
namespace fs = std::filesystem;
namespace sys = hnko::systems;
namespace mdl = hnko::model;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "hnko_test_io";
  fs::create_directories(dir);
  return dir / name;
}

void write_raw(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

template <class F>
std::pair<std::size_t, std::size_t> parse_error_at(F&& f) {
  try {
    f();
  } catch (const hnko::ParseError& e) {
    return {e.line(), e.column()};
  }
  ADD_FAILURE() << "no ParseError";
  return {0, 0};
}

}  // namespace

TEST(Format, RoundTripsRandomDoubles) {
  std::mt19937_64 gen(7);
  for (int i = 0; i < 10000; ++i) {
    const std::uint64_t bits = gen();
    double d;
    std::memcpy(&d, &bits, sizeof d);
    if (!std::isfinite(d)) continue;
    EXPECT_EQ(io::parse_double(io::format_double(d)), d);
  }
  EXPECT_EQ(io::format_double(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_TRUE(std::isnan(io::parse_double("nan")));
}

TEST(Format, RejectsTrailingGarbage) {
  EXPECT_THROW(io::parse_double("1.5x", 3, 4), hnko::ParseError);
  EXPECT_THROW(io::parse_double(""), hnko::ParseError);
}

TEST(Trajectory, CsvRoundTripIsExact) {
  sys::Trajectory t;
  t.t0 = 0.5;
  t.dt = 0.1;
  t.states = testing_util::random_matrix(3, 20, 11);
  const fs::path p = scratch("traj.csv");
  io::write_trajectory(p, t, {{"note", "x"}});
  EXPECT_TRUE(fs::exists(io::sidecar_path(p)));
  const auto back = io::read_trajectory(p);
  EXPECT_EQ(back.trajectory.states, t.states);
  EXPECT_EQ(back.trajectory.dt, 0.1);
  EXPECT_EQ(back.trajectory.t0, 0.5);
  EXPECT_EQ(back.metadata.at("note"), "x");
  EXPECT_EQ(io::read_text(p).substr(0, 9), "t,x0,x1,x");
}

TEST(Trajectory, DtFromTimeColumnWithoutSidecar) {
  const fs::path p = scratch("nosidecar.csv");
  fs::remove(io::sidecar_path(p));
  write_raw(p, "t,x0\n0,1\n0.25,2\n0.5,3\n");
  const auto back = io::read_trajectory(p);
  EXPECT_DOUBLE_EQ(back.trajectory.dt, 0.25);
  EXPECT_EQ(back.trajectory.samples(), 3);
}

TEST(Trajectory, ParseErrorsCarryPosition) {
  const fs::path p = scratch("bad.csv");
  fs::remove(io::sidecar_path(p));
  write_raw(p, "t,x0,x1\n0,1,2\n0.1,1,oops\n");
  auto at = parse_error_at([&] { io::read_trajectory(p); });
  EXPECT_EQ(at.first, 3u);
  EXPECT_EQ(at.second, 7u);

  write_raw(p, "t,x0,x1\n0,1,2\n0.1,1\n");
  at = parse_error_at([&] { io::read_trajectory(p); });
  EXPECT_EQ(at.first, 3u);

  write_raw(p, "time,x0\n0,1\n");
  at = parse_error_at([&] { io::read_trajectory(p); });
  EXPECT_EQ(at.first, 1u);
}

TEST(Json, ParseErrorLineAndColumn) {
  const fs::path p = scratch("bad.json");
  write_raw(p, "{\n  \"a\": 1,\n  \"b\": ]\n}\n");
  const auto at = parse_error_at([&] { io::read_json(p); });
  EXPECT_EQ(at.first, 3u);
  EXPECT_EQ(at.second, 8u);
}

TEST(Hash, Sha256KnownAnswer) {
  const fs::path p = scratch("abc.txt");
  write_raw(p, "abc");
  EXPECT_EQ(io::sha256_file(p), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  write_raw(p, "");
  EXPECT_EQ(io::sha256_file(p), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Checkpoint, ModelRoundTripIsExact) {
  const Matrix data = sys::simulate(sys::Kepler{}, (Vector(4) << 1, 0, 0, 0.9).finished(), 0.1, 30).states;
  for (auto variant : {hnko::orthogonal::Variant::Full, hnko::orthogonal::Variant::Kronecker}) {
    mdl::ModelConfig cfg;
    cfg.state_dim = 4;
    cfg.latent_dim = 9;
    cfg.q = 4;
    cfg.variant = variant;
    cfg.seed = 3;
    const auto m = mdl::init_model(cfg, data);
    const auto j = io::checkpoint_to_json(m, {{"experiment", nullptr}});
    EXPECT_EQ(j.at("format"), "hnko-checkpoint");
    const fs::path p = scratch("ckpt.json");
    io::write_json(p, j);
    const auto back = io::checkpoint_model(io::read_json(p));
    const auto a = mdl::parameters(m), b = mdl::parameters(back);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
    EXPECT_EQ(back.koopman.variant(), variant);
    EXPECT_EQ(back.normalizer.shift, m.normalizer.shift);
    EXPECT_EQ(mdl::predict(back, data.col(0), 5), mdl::predict(m, data.col(0), 5));
  }
}

TEST(Checkpoint, RejectsForeignFormat) {
  EXPECT_THROW(io::checkpoint_model({{"format", "other"}, {"version", 1}}), hnko::Error);
}

TEST(LinearModel, RoundTrip) {
  sys::Trajectory t = sys::simulate(sys::MassSpring{}, Vector::Unit(2, 0), 0.1, 40);
  const auto m = hnko::baselines::edmd_fit(t, 2);
  const auto back = io::linear_model_from_json(io::linear_model_to_json(m));
  EXPECT_EQ(back.k, m.k);
  EXPECT_EQ(hnko::baselines::linear_predict(back, t.states.col(0), 10),
            hnko::baselines::linear_predict(m, t.states.col(0), 10));
}

TEST(System, RoundTrip) {
  sys::NBody nb;
  nb.masses = {1.0, 2.0, 0.5};
  const auto j = io::system_to_json(nb);
  const auto back = std::get<sys::NBody>(io::system_from_json(j));
  EXPECT_EQ(back.masses, nb.masses);
  EXPECT_THROW(io::system_from_json({{"type", "pendulum"}}), hnko::Error);
}

TEST(TrainConfig, RoundTrip) {
  hnko::training::TrainConfig c;
  c.epochs = 17;
  c.weights.deg = 2.5;
  c.trainable.radius = false;
  const auto back = io::train_config_from_json(io::train_config_to_json(c));
  EXPECT_EQ(back.epochs, 17);
  EXPECT_EQ(back.weights.deg, 2.5);
  EXPECT_FALSE(back.trainable.radius);
}
