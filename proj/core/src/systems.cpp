#include "hnko/systems.hpp"

#include <array>
#include <cmath>
#include <sstream>

#include "hnko/error.hpp"
#include "hnko/rng.hpp"

namespace hnko::systems {

// Implemented in kdv.cpp.
Matrix simulate_kdv(const Kdv& spec, const Vector& u0, double dt, Index steps, double h);

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kCollisionDistance = 1e-6;

// Fourth-order Yoshida composition of the drift-kick-drift leapfrog.
struct Yoshida4 {
  static constexpr double cbrt2 = 1.2599210498948731647672106;
  static constexpr double w1 = 1.0 / (2.0 - cbrt2);
  static constexpr double w0 = -cbrt2 / (2.0 - cbrt2);
  static constexpr std::array<double, 4> drift{w1 / 2, (w0 + w1) / 2, (w0 + w1) / 2, w1 / 2};
  static constexpr std::array<double, 3> kick{w1, w0, w1};
};

void check_finite(const Vector& x, double t) {
  if (!x.allFinite()) {
    std::ostringstream os;
    os << "simulate: non-finite state at t=" << t;
    throw NumericalError(os.str());
  }
}

// Accelerations for the n-body problem; also enforces the collision guard.
void nbody_accel(const NBody& s, const Eigen::Ref<const Vector>& q, Eigen::Ref<Vector> acc) {
  const int d = s.spatial_dim;
  acc.setZero();
  for (int i = 0; i < s.bodies; ++i) {
    for (int j = i + 1; j < s.bodies; ++j) {
      const Vector diff = q.segment(i * d, d) - q.segment(j * d, d);
      const double r = diff.norm();
      if (!(r >= kCollisionDistance)) {
        std::ostringstream os;
        os << "simulate: bodies " << i << " and " << j << " closer than " << kCollisionDistance
           << " (distance " << r << ")";
        throw NumericalError(os.str());
      }
      const double inv3 = s.g / (r * r * r);
      acc.segment(i * d, d) -= (s.masses[static_cast<std::size_t>(j)] * inv3) * diff;
      acc.segment(j * d, d) += (s.masses[static_cast<std::size_t>(i)] * inv3) * diff;
    }
  }
}

void kepler_accel(const Kepler& s, const Eigen::Ref<const Vector>& q, Eigen::Ref<Vector> acc) {
  const double r = q.norm();
  if (!(r >= kCollisionDistance)) {
    throw NumericalError("simulate: Kepler orbit reached the origin");
  }
  acc = (-s.g * s.m / (r * r * r)) * q;
}

template <class Accel>
Matrix integrate_separable(Index half, const Vector& x0, double dt, Index steps, double h_req,
                           double t0, Accel&& accel) {
  const auto substeps = std::max<Index>(1, static_cast<Index>(std::ceil(dt / h_req - 1e-9)));
  const double h = dt / static_cast<double>(substeps);
  Matrix out(x0.size(), steps + 1);
  out.col(0) = x0;
  Vector q = x0.head(half);
  Vector p = x0.tail(half);
  Vector acc(half);
  for (Index k = 1; k <= steps; ++k) {
    for (Index s = 0; s < substeps; ++s) {
      for (std::size_t stage = 0; stage < 3; ++stage) {
        q += (Yoshida4::drift[stage] * h) * p;
        accel(q, acc);
        p += (Yoshida4::kick[stage] * h) * acc;
      }
      q += (Yoshida4::drift[3] * h) * p;
    }
    out.col(k).head(half) = q;
    out.col(k).tail(half) = p;
    check_finite(out.col(k), t0 + static_cast<double>(k) * dt);
  }
  return out;
}

}  // namespace

void validate(const SystemSpec& spec) {
  std::visit(overloaded{
                 [](const NBody& s) {
                   if (s.bodies < 1) throw ValidationError("NBody: bodies must be >= 1");
                   if (s.spatial_dim != 2 && s.spatial_dim != 3) {
                     throw ValidationError("NBody: spatial_dim must be 2 or 3");
                   }
                   if (s.masses.size() != static_cast<std::size_t>(s.bodies)) {
                     throw ValidationError("NBody: need one mass per body");
                   }
                   for (double m : s.masses) {
                     if (!(m > 0.0)) throw ValidationError("NBody: masses must be positive");
                   }
                 },
                 [](const Kepler& s) {
                   if (!(s.m > 0.0)) throw ValidationError("Kepler: m must be positive");
                 },
                 [](const MassSpring& s) {
                   if (!(s.m > 0.0) || !(s.k > 0.0)) {
                     throw ValidationError("MassSpring: m and k must be positive");
                   }
                 },
                 [](const Kdv& s) {
                   if (s.grid_points < 16) throw ValidationError("Kdv: grid_points must be >= 16");
                   if (!(s.domain_length > 0.0)) {
                     throw ValidationError("Kdv: domain_length must be positive");
                   }
                 },
             },
             spec);
}

Index state_dim(const SystemSpec& spec) {
  return std::visit(overloaded{
                        [](const NBody& s) -> Index { return 2 * s.spatial_dim * s.bodies; },
                        [](const Kepler&) -> Index { return 4; },
                        [](const MassSpring&) -> Index { return 2; },
                        [](const Kdv& s) -> Index { return s.grid_points; },
                    },
                    spec);
}

std::string system_name(const SystemSpec& spec) {
  return std::visit(overloaded{
                        [](const NBody&) { return std::string("nbody"); },
                        [](const Kepler&) { return std::string("kepler"); },
                        [](const MassSpring&) { return std::string("mass_spring"); },
                        [](const Kdv&) { return std::string("kdv"); },
                    },
                    spec);
}

double stiffness(const MassSpring& spring) { return std::sqrt(spring.k * spring.m); }

Trajectory simulate(const SystemSpec& spec, const Vector& x0, double dt, Index steps,
                    const SimulateOptions& opts) {
  validate(spec);
  if (x0.size() != state_dim(spec)) {
    throw DimensionError("simulate: initial state has dimension " + std::to_string(x0.size()) +
                         ", system expects " + std::to_string(state_dim(spec)));
  }
  if (!(dt > 0.0)) throw ValidationError("simulate: dt must be positive");
  if (steps < 0) throw ValidationError("simulate: steps must be non-negative");
  check_finite(x0, opts.t0);

  Trajectory traj;
  traj.t0 = opts.t0;
  traj.dt = dt;
  traj.states = std::visit(
      overloaded{
          [&](const NBody& s) {
            const Index half = s.spatial_dim * s.bodies;
            Vector scratch(half);
            nbody_accel(s, x0.head(half), scratch);  // rejects coincident starts
            const double h = opts.integrator_dt > 0.0 ? opts.integrator_dt : 0.01;
            return integrate_separable(half, x0, dt, steps, h, opts.t0,
                                       [&](const Vector& q, Vector& a) { nbody_accel(s, q, a); });
          },
          [&](const Kepler& s) {
            const double h = opts.integrator_dt > 0.0 ? opts.integrator_dt : 0.01;
            Vector scratch(2);
            kepler_accel(s, x0.head(2), scratch);
            return integrate_separable(2, x0, dt, steps, h, opts.t0,
                                       [&](const Vector& q, Vector& a) { kepler_accel(s, q, a); });
          },
          [&](const MassSpring& s) {
            // Exact flow: a rotation in (sqrt(k) q, p / sqrt(m)) coordinates.
            const double omega = std::sqrt(s.k / s.m);
            Matrix out(2, steps + 1);
            for (Index k = 0; k <= steps; ++k) {
              const double t = static_cast<double>(k) * dt;
              const double c = std::cos(omega * t);
              const double sn = std::sin(omega * t);
              out(0, k) = x0(0) * c + x0(1) / (s.m * omega) * sn;
              out(1, k) = -x0(0) * s.m * omega * sn + x0(1) * c;
            }
            return out;
          },
          [&](const Kdv& s) {
            const double h = opts.integrator_dt > 0.0 ? opts.integrator_dt : 1e-3;
            return simulate_kdv(s, x0, dt, steps, h);
          },
      },
      spec);
  return traj;
}

double hamiltonian(const SystemSpec& spec, const Vector& state) {
  if (state.size() != state_dim(spec)) {
    throw DimensionError("hamiltonian: state has dimension " + std::to_string(state.size()) +
                         ", system expects " + std::to_string(state_dim(spec)));
  }
  return std::visit(
      overloaded{
          [&](const NBody& s) {
            const int d = s.spatial_dim;
            const Index half = d * s.bodies;
            double kinetic = 0.0;
            double potential = 0.0;
            for (int i = 0; i < s.bodies; ++i) {
              const double mi = s.masses[static_cast<std::size_t>(i)];
              kinetic += 0.5 * mi * state.segment(half + i * d, d).squaredNorm();
              for (int j = i + 1; j < s.bodies; ++j) {
                const double r = (state.segment(i * d, d) - state.segment(j * d, d)).norm();
                if (r == 0.0) {
                  throw NumericalError("hamiltonian: bodies " + std::to_string(i) + " and " +
                                       std::to_string(j) + " coincide");
                }
                potential -= s.g * mi * s.masses[static_cast<std::size_t>(j)] / r;
              }
            }
            return kinetic + potential;
          },
          [&](const Kepler& s) {
            const double r = state.head(2).norm();
            if (r == 0.0) throw NumericalError("hamiltonian: Kepler state at the origin");
            return 0.5 * s.m * state.tail(2).squaredNorm() - s.g * s.m * s.m / r;
          },
          [&](const MassSpring& s) {
            return 0.5 * s.k * state(0) * state(0) + state(1) * state(1) / (2.0 * s.m);
          },
          [&](const Kdv& s) { return invariant_values(s, state).energy; },
      },
      spec);
}

KdvInvariants invariant_values(const Kdv& spec, const Vector& field) {
  if (field.size() != spec.grid_points) {
    throw DimensionError("invariant_values: field length " + std::to_string(field.size()) +
                         " != grid_points " + std::to_string(spec.grid_points));
  }
  const double dx = spec.domain_length / static_cast<double>(spec.grid_points);
  return {dx * field.sum(), dx * field.squaredNorm()};
}

Vector total_momentum(const NBody& spec, const Vector& state) {
  const int d = spec.spatial_dim;
  const Index half = d * spec.bodies;
  Vector mom = Vector::Zero(d);
  for (int i = 0; i < spec.bodies; ++i) {
    mom += spec.masses[static_cast<std::size_t>(i)] * state.segment(half + i * d, d);
  }
  return mom;
}

Vector kdv_grid(const Kdv& spec) {
  const double dx = spec.domain_length / static_cast<double>(spec.grid_points);
  Vector x(spec.grid_points);
  for (Index i = 0; i < x.size(); ++i) x(i) = static_cast<double>(i) * dx;
  return x;
}

Vector kdv_soliton(const Kdv& spec, double speed, double center) {
  const Vector x = kdv_grid(spec);
  const double a = 0.5 * std::sqrt(speed);
  const double L = spec.domain_length;
  Vector u = Vector::Zero(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    for (int image = -2; image <= 2; ++image) {
      const double z = a * (x(i) - center + image * L);
      const double sech = 1.0 / std::cosh(z);
      u(i) -= 0.5 * speed * sech * sech;
    }
  }
  return u;
}

Trajectory add_noise(const Trajectory& traj, double sigma2, std::uint64_t seed) {
  if (!(sigma2 >= 0.0)) throw ValidationError("add_noise: sigma2 must be non-negative");
  Trajectory out = traj;
  if (sigma2 == 0.0) return out;
  const double sd = std::sqrt(sigma2);
  Rng rng(seed);
  for (Index k = 0; k < out.states.cols(); ++k) {
    for (Index i = 0; i < out.states.rows(); ++i) out.states(i, k) += sd * rng.normal();
  }
  return out;
}

}  // namespace hnko::systems
