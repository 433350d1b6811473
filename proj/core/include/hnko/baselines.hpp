#pragma once

#include <optional>
#include <vector>

#include "hnko/numerics.hpp"
#include "hnko/systems.hpp"

namespace hnko::baselines {

/// Tensor-product dictionary of probabilists' Hermite polynomials
/// (He_0 = 1, He_1 = x, He_2 = x^2 - 1, He_{k+1} = x He_k - k He_{k-1})
/// over all multi-indices of total order <= max_order.
///
/// Ordering is graded: order 0 first, then order 1 (entry 1 + i is x_i),
/// then higher orders, each in descending lexicographic order of the
/// multi-index: for n = 2 the order-2 block is (2,0), (1,1), (0,2).
class HermiteDictionary {
 public:
  HermiteDictionary(Index input_dim, int max_order);

  Index input_dim() const { return input_dim_; }
  int max_order() const { return max_order_; }
  Index size() const { return static_cast<Index>(indices_.size()); }
  const std::vector<std::vector<int>>& multi_indices() const { return indices_; }

  /// Lifted vector psi(x).
  Vector lift(const Vector& x) const;
  /// Column-wise lift.
  Matrix lift(const Matrix& x) const;

  /// C(input_dim + max_order, max_order), computed without enumerating.
  static Index size_for(Index input_dim, int max_order);

 private:
  Index input_dim_;
  int max_order_;
  std::vector<std::vector<int>> indices_;
};

/// Probabilists' Hermite polynomial He_n(x).
double hermite_he(int n, double x);

struct LinearModel {
  Matrix k;
  std::optional<HermiteDictionary> dictionary;  ///< nullopt: plain DMD
};

struct EdmdOptions {
  Index dictionary_cap = 5000;
  double rank_tol = 1e-12;
};

/// K = X' X^+ over consecutive samples; minimises ||K X - X'||_F with the
/// minimum-norm solution on rank-deficient data.
LinearModel dmd_fit(const systems::Trajectory& traj, double rank_tol = 1e-12);

/// K = Y' Y^+ on Hermite-lifted samples. Throws ValidationError when the
/// dictionary would exceed options.dictionary_cap entries.
LinearModel edmd_fit(const systems::Trajectory& traj, int max_order, const EdmdOptions& options = {});

/// steps + 1 states starting at x0. DMD: x_{k+1} = K x_k. EDMD: lift,
/// advance, read back the order-1 entries. Diverging rollouts are returned
/// as-is (non-finite entries allowed).
Matrix linear_predict(const LinearModel& model, const Vector& x0, Index steps);

/// max |eigenvalue| of K.
double spectral_radius(const Matrix& k);

}  // namespace hnko::baselines
