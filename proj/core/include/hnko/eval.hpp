#pragma once

#include <complex>
#include <map>
#include <string>
#include <vector>

#include "hnko/model.hpp"
#include "hnko/numerics.hpp"
#include "hnko/systems.hpp"

namespace hnko::eval {

/// Values of one conserved quantity along a predicted and a true trajectory.
struct InvariantSeries {
  std::vector<double> predicted;
  std::vector<double> truth;
  /// |I(x̂_k) - I(x̂_0)| / |I(x̂_0)| along the prediction.
  std::vector<double> predicted_drift;
  std::vector<double> truth_drift;
  double max_predicted_drift = 0.0;
  double max_truth_drift = 0.0;
};

struct MetricsReport {
  std::vector<double> mse_per_step;  ///< (1/n)||x̂_k - x_k||^2
  double mean_mse = 0.0;
  /// Same, after dividing each coordinate by max_k |x_k| of the truth.
  std::vector<double> normalized_mse_per_step;
  double normalized_mean_mse = 0.0;
  double wasserstein2 = 0.0;
  std::map<std::string, InvariantSeries> invariant_drift;  ///< "energy", plus "mass" for KdV
  Index horizon = 0;                                       ///< number of steps after x_0
  bool finite = true;
};

struct EvaluateOptions {
  bool compute_wasserstein = true;
  Index wasserstein_cap = 5000;
};

/// Compares time-aligned trajectories of equal length and dimension.
MetricsReport evaluate(const systems::Trajectory& predicted, const systems::Trajectory& truth,
                       const systems::SystemSpec& spec, const EvaluateOptions& options = {});

/// Minimum-cost perfect matching on a square cost matrix (Hungarian
/// algorithm, O(N^3)). Returns assignment[row] = column.
std::vector<Index> linear_assignment(const Matrix& cost);

/// sqrt(min_pi (1/N) sum ||a_i - b_pi(i)||^2) over point sets stored as
/// columns. Throws DimensionError on unequal cardinality or dimension and
/// ValidationError above cap points.
double wasserstein2(const Matrix& a, const Matrix& b, Index cap = 5000);

struct DiscoveredInvariant {
  std::complex<double> eigenvalue;
  Vector coefficients;  ///< c with ||c||_2 = 1
  double temporal_variance = 0.0;
  bool normalized = true;
};

/// Rotation plane of K turning by a small angle; reported, not treated as an
/// invariant.
struct SlowMode {
  std::complex<double> eigenvalue;
  Matrix basis;  ///< p x 2
  double angle = 0.0;
};

struct Discovery {
  double tolerance = 1e-3;
  std::vector<DiscoveredInvariant> invariants;  ///< ascending temporal variance
  std::vector<SlowMode> slow_modes;
};

/// Eigen-directions of the materialised K with real eigenvalue within tol of 1
/// (an orthonormal basis when the eigenvalue is repeated), each scored by the
/// population variance over time of g_c(x_k) = <c, encode(x_k)>.
Discovery discover_invariants(const model::HnkoModel& model, const Matrix& data, double tol = 1e-3);

/// Population variance over time of each row of `series` (rows are features).
Vector temporal_variance(const Matrix& series);

/// Temporal variance of every encoder output g_i(x_k) along data.
Vector feature_variance(const model::HnkoModel& model, const Matrix& data);

}  // namespace hnko::eval
