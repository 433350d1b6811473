#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "hnko/numerics.hpp"

namespace hnko::systems {

/// Gravitational n-body problem, H = sum_i (m_i/2)|p_i|^2 - g sum_{i<j} m_i m_j / |q_i - q_j|.
/// p_i is the velocity of body i, so sum_i m_i p_i is the conserved momentum.
/// State layout: q_1 .. q_N (spatial_dim each), then p_1 .. p_N.
struct NBody {
  int bodies = 3;
  std::vector<double> masses{1.0, 1.0, 1.0};
  double g = 1.0;
  int spatial_dim = 2;
};

/// Planar Kepler problem, H = (m/2)|p|^2 - g m^2 / |q|. State (q1, q2, p1, p2).
struct Kepler {
  double m = 1.0;
  double g = 1.0;
};

/// Friction-free spring, H = k q^2 / 2 + p^2 / (2m), canonical (q, p).
struct MassSpring {
  double m = 1.0;
  double k = 1.0;
};

/// u_t + u_xxx - 6 u u_x = 0 on the periodic domain [0, domain_length),
/// sampled at grid_points equispaced nodes x_i = i * L / s.
struct Kdv {
  int grid_points = 64;
  double domain_length = 50.0;
};

using SystemSpec = std::variant<NBody, Kepler, MassSpring, Kdv>;

/// Throws ValidationError when a spec violates its invariants.
void validate(const SystemSpec& spec);
Index state_dim(const SystemSpec& spec);
std::string system_name(const SystemSpec& spec);
/// sqrt(k m).
double stiffness(const MassSpring& spring);

/// Time-indexed states; column k of states is x at t0 + k*dt.
struct Trajectory {
  double t0 = 0.0;
  double dt = 0.1;
  Matrix states;

  Index dim() const { return states.rows(); }
  Index samples() const { return states.cols(); }
  double time(Index k) const { return t0 + static_cast<double>(k) * dt; }
};

struct SimulateOptions {
  /// Inner integrator step; <= 0 selects the per-system default (0.01 for
  /// NBody/Kepler, 1e-3 for KdV). The observational dt is split into
  /// ceil(dt / integrator_dt) equal substeps. MassSpring uses the exact
  /// rotation update and ignores this.
  double integrator_dt = 0.0;
  double t0 = 0.0;
};

/// Noise-free trajectory with steps + 1 samples spaced dt apart.
/// NBody/Kepler: 4th-order Yoshida composition of leapfrog.
/// MassSpring: closed-form rotation. KdV: Fourier pseudo-spectral with
/// 2/3-rule dealiasing and integrating-factor RK4.
/// Throws NumericalError on near-collision (distance < 1e-6) or NaN.
Trajectory simulate(const SystemSpec& spec, const Vector& x0, double dt, Index steps,
                    const SimulateOptions& opts = {});

/// Total energy. For KdV this is the discrete energy dx * sum u_i^2.
/// Throws NumericalError when two bodies coincide.
double hamiltonian(const SystemSpec& spec, const Vector& state);

struct KdvInvariants {
  double mass = 0.0;
  double energy = 0.0;
};

/// Rectangle-rule mass and energy on the periodic grid.
KdvInvariants invariant_values(const Kdv& spec, const Vector& field);

/// Total linear momentum sum_i m_i p_i (spatial_dim components).
Vector total_momentum(const NBody& spec, const Vector& state);

/// One-soliton profile -(c/2) sech^2(sqrt(c)/2 (x - center)) on the grid,
/// with periodic images folded in.
Vector kdv_soliton(const Kdv& spec, double speed, double center);

/// Grid node coordinates.
Vector kdv_grid(const Kdv& spec);

/// Adds i.i.d. N(0, sigma2) to every coordinate of every sample, drawn in
/// sample-major order from Rng(seed). sigma2 == 0 returns an exact copy.
Trajectory add_noise(const Trajectory& traj, double sigma2, std::uint64_t seed);

}  // namespace hnko::systems
