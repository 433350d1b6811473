#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hnko/error.hpp"
#include "hnko/rng.hpp"
#include "hnko/systems.hpp"

using hnko::Index;
using hnko::Matrix;
using hnko::Vector;
namespace sys = hnko::systems;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

const double kFigureEightPeriod = 6.32591398;

Vector figure_eight() {
  const double x = 0.97000436, y = -0.24308753, vx = -0.93240737, vy = -0.86473146;
  return vec({x, y, -x, -y, 0.0, 0.0, -vx / 2, -vy / 2, -vx / 2, -vy / 2, vx, vy});
}

}  // namespace

TEST(Systems, StateDims) {
  EXPECT_EQ(sys::state_dim(sys::NBody{}), 12);
  EXPECT_EQ(sys::state_dim(sys::NBody{24, std::vector<double>(24, 1.0), 1.0, 3}), 144);
  EXPECT_EQ(sys::state_dim(sys::Kepler{}), 4);
  EXPECT_EQ(sys::state_dim(sys::MassSpring{}), 2);
  EXPECT_EQ(sys::state_dim(sys::Kdv{}), 64);
}

TEST(Systems, ValidationErrors) {
  EXPECT_THROW(sys::validate(sys::NBody{3, {1.0, 1.0}, 1.0, 2}), hnko::ValidationError);
  EXPECT_THROW(sys::validate(sys::NBody{2, {1.0, -1.0}, 1.0, 2}), hnko::ValidationError);
  EXPECT_THROW(sys::validate(sys::MassSpring{0.0, 1.0}), hnko::ValidationError);
  EXPECT_THROW(sys::validate(sys::Kdv{8, 50.0}), hnko::ValidationError);
  EXPECT_THROW(sys::simulate(sys::Kepler{}, vec({1, 0, 0}), 0.1, 3), hnko::DimensionError);
  EXPECT_THROW(sys::simulate(sys::Kepler{}, vec({1, 0, 0, 1}), -0.1, 3), hnko::ValidationError);
}

TEST(Systems, HamiltonianFormulas) {
  EXPECT_DOUBLE_EQ(sys::hamiltonian(sys::MassSpring{2.0, 3.0}, vec({1.0, 4.0})), 1.5 + 4.0);
  EXPECT_DOUBLE_EQ(sys::hamiltonian(sys::Kepler{2.0, 0.5}, vec({3.0, 4.0, 1.0, 1.0})),
                   2.0 - 0.5 * 4.0 / 5.0);
  // Two unit masses at distance 2, one moving with speed 1.
  sys::NBody two{2, {1.0, 1.0}, 1.0, 2};
  EXPECT_DOUBLE_EQ(sys::hamiltonian(two, vec({0, 0, 2, 0, 0, 1, 0, 0})), 0.5 - 0.5);
}

TEST(Systems, MassSpringMatchesClosedForm) {
  const sys::MassSpring s{2.0, 8.0};  // omega = 2
  const auto t = sys::simulate(s, vec({0.5, 1.0}), 0.05, 400);
  for (Index k = 0; k < t.samples(); ++k) {
    const double tt = t.time(k);
    const double q = 0.5 * std::cos(2 * tt) + 1.0 / (2.0 * 2.0) * std::sin(2 * tt);
    const double p = -0.5 * 2.0 * 2.0 * std::sin(2 * tt) + 1.0 * std::cos(2 * tt);
    EXPECT_NEAR(t.states(0, k), q, 1e-12);
    EXPECT_NEAR(t.states(1, k), p, 1e-12);
  }
}

TEST(Systems, KeplerCircularOrbit) {
  // q = (cos t, sin t) solves the unit problem exactly.
  const auto t = sys::simulate(sys::Kepler{}, vec({1, 0, 0, 1}), 0.1, 63);
  for (Index k = 0; k < t.samples(); ++k) {
    const double tt = t.time(k);
    EXPECT_NEAR(t.states(0, k), std::cos(tt), 1e-7);
    EXPECT_NEAR(t.states(1, k), std::sin(tt), 1e-7);
    EXPECT_NEAR(t.states(2, k), -std::sin(tt), 1e-7);
  }
}

TEST(Systems, KeplerConservesEnergyAndAngularMomentum) {
  const auto t = sys::simulate(sys::Kepler{}, vec({1, 0, 0, 0.9}), 0.1, 500);
  const double e0 = sys::hamiltonian(sys::Kepler{}, t.states.col(0));
  for (Index k = 0; k < t.samples(); ++k) {
    const Vector x = t.states.col(k);
    EXPECT_NEAR(sys::hamiltonian(sys::Kepler{}, x), e0, 1e-7 * std::abs(e0));
    EXPECT_NEAR(x(0) * x(3) - x(1) * x(2), 0.9, 1e-10);
  }
}

TEST(Systems, TwoBodyCircularOrbit) {
  // Unit masses at distance 1 circle the origin with omega = sqrt(2).
  const sys::NBody two{2, {1.0, 1.0}, 1.0, 2};
  const double w = std::sqrt(2.0), v = 0.5 * w;
  auto max_err = [&](double h) {
    sys::SimulateOptions opt;
    opt.integrator_dt = h;
    const auto t = sys::simulate(two, vec({0.5, 0, -0.5, 0, 0, v, 0, -v}), 0.1, 50, opt);
    double e = 0.0;
    for (Index k = 0; k < t.samples(); ++k) {
      const double a = w * t.time(k);
      e = std::max(e, std::hypot(t.states(0, k) - 0.5 * std::cos(a), t.states(1, k) - 0.5 * std::sin(a)));
    }
    return e;
  };
  const double coarse = max_err(0.01), fine = max_err(0.005);
  EXPECT_LT(coarse, 1e-6);
  // fourth order: halving the step divides the error by ~16
  EXPECT_NEAR(coarse / fine, 16.0, 2.0);
}

TEST(Systems, FigureEightReturnsAfterOnePeriod) {
  const Vector x0 = figure_eight();
  const auto t = sys::simulate(sys::NBody{}, x0, kFigureEightPeriod, 1,
                               {kFigureEightPeriod / 633.0, 0.0});
  EXPECT_LT((t.states.col(1) - x0).norm(), 1e-3);
}

TEST(Systems, NBodyEnergyDriftOverFifty) {
  const auto t = sys::simulate(sys::NBody{}, figure_eight(), 0.1, 500);
  const double e0 = sys::hamiltonian(sys::NBody{}, t.states.col(0));
  double worst = 0.0;
  for (Index k = 0; k < t.samples(); ++k) {
    worst = std::max(worst, std::abs(sys::hamiltonian(sys::NBody{}, t.states.col(k)) - e0));
  }
  EXPECT_LT(worst / std::abs(e0), 1e-6);
}

TEST(Systems, NBodyConservesMomentum) {
  const sys::NBody spec{3, {1.0, 2.0, 0.5}, 1.0, 3};
  Vector x0 = vec({1, 0, 0, -1, 0.5, 0, 0, 1, 0.2, 0, 0.4, 0.1, -0.2, 0.1, 0, 0.3, -0.2, 0.1});
  const auto t = sys::simulate(spec, x0, 0.1, 100);
  const Vector m0 = sys::total_momentum(spec, t.states.col(0));
  for (Index k = 0; k < t.samples(); ++k) {
    EXPECT_LT((sys::total_momentum(spec, t.states.col(k)) - m0).norm(), 1e-12);
  }
}

TEST(Systems, CollisionIsReported) {
  EXPECT_THROW(sys::simulate(sys::Kepler{}, vec({0, 0, 1, 0}), 0.1, 1), hnko::NumericalError);
  const sys::NBody two{2, {1.0, 1.0}, 1.0, 2};
  EXPECT_THROW(sys::hamiltonian(two, vec({1, 1, 1, 1, 0, 0, 0, 0})), hnko::NumericalError);
}

TEST(Kdv, SolitonTravelsAtItsSpeed) {
  const sys::Kdv spec{256, 50.0};
  const double c = 1.0;
  const Vector u0 = sys::kdv_soliton(spec, c, 20.0);
  const auto t = sys::simulate(spec, u0, 0.5, 10);
  double worst = 0.0;
  for (Index k = 0; k < t.samples(); ++k) {
    const Vector exact = sys::kdv_soliton(spec, c, 20.0 + c * t.time(k));
    worst = std::max(worst, (t.states.col(k) - exact).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(Kdv, SolitonProfile) {
  const sys::Kdv spec{64, 50.0};
  const Vector u = sys::kdv_soliton(spec, 2.0, 25.0);
  const Vector x = sys::kdv_grid(spec);
  EXPECT_DOUBLE_EQ(x(1) - x(0), 50.0 / 64.0);
  // Peak at the center node (x = 25 is node 32), value -c/2.
  EXPECT_NEAR(u(32), -1.0, 1e-15);
  const double s = 1.0 / std::cosh(std::sqrt(2.0) / 2.0 * (x(40) - 25.0));
  EXPECT_NEAR(u(40), -s * s, 1e-12);
}

TEST(Kdv, MassAndEnergyConserved) {
  const sys::Kdv spec{64, 50.0};
  Vector u0 = sys::kdv_soliton(spec, 1.0, 15.0) + sys::kdv_soliton(spec, 0.5, 35.0);
  const auto t = sys::simulate(spec, u0, 1.0, 60);
  const auto i0 = sys::invariant_values(spec, t.states.col(0));
  for (Index k = 0; k < t.samples(); ++k) {
    const auto ik = sys::invariant_values(spec, t.states.col(k));
    EXPECT_NEAR(ik.mass, i0.mass, 1e-10);
    EXPECT_NEAR(ik.energy, i0.energy, 1e-4 * i0.energy);
  }
}

TEST(Noise, ZeroVarianceIsExactCopy) {
  const auto t = sys::simulate(sys::MassSpring{}, vec({1, 0}), 0.1, 10);
  EXPECT_EQ(sys::add_noise(t, 0.0, 3).states, t.states);
}

TEST(Noise, SampleMajorGaussian) {
  sys::Trajectory t;
  t.states = Matrix::Zero(3, 4000);
  const auto n = sys::add_noise(t, 0.04, 11);
  hnko::Rng rng(11);
  EXPECT_EQ(n.states(0, 0), 0.2 * rng.normal());
  EXPECT_EQ(n.states(1, 0), 0.2 * rng.normal());
  EXPECT_EQ(n.states(2, 0), 0.2 * rng.normal());
  EXPECT_EQ(n.states(0, 1), 0.2 * rng.normal());
  const double var = n.states.squaredNorm() / static_cast<double>(n.states.size());
  EXPECT_NEAR(var, 0.04, 0.002);
  EXPECT_THROW(sys::add_noise(t, -1.0, 1), hnko::ValidationError);
}
