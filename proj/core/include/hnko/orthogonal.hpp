#pragma once

#include <vector>

#include "hnko/numerics.hpp"

namespace hnko {
class Rng;
}

namespace hnko::orthogonal {

/// Unconstrained coordinates of a p x p skew-symmetric matrix: the strictly
/// upper triangle, row-major, p(p-1)/2 entries.
class SkewParams {
 public:
  SkewParams() = default;
  /// Zero parameters for dimension dim.
  explicit SkewParams(Index dim);
  /// Throws DimensionError when values.size() != count_for(dim).
  SkewParams(Index dim, Vector values);

  static constexpr Index count_for(Index dim) { return dim * (dim - 1) / 2; }

  Index dim() const { return dim_; }
  const Vector& values() const { return values_; }
  Vector& values() { return values_; }

 private:
  Index dim_ = 0;
  Vector values_;
};

/// alpha: R^{p(p-1)/2} -> so(p), A |-> A - Aᵀ with A strictly upper triangular.
Matrix alpha(Index dim, const Eigen::Ref<const Vector>& params);
Matrix alpha(const SkewParams& a);

enum class Variant { Full, Kronecker };

/// Orthogonal Koopman matrix parameterised through the Lie exponential.
/// Full: K = exp(alpha(A)). Kronecker: K = exp(alpha(A_1)) ⊗ ... ⊗ exp(alpha(A_m)).
class OrthogonalKoopman {
 public:
  OrthogonalKoopman() = default;

  static OrthogonalKoopman full(SkewParams params);
  /// Throws ValidationError if fewer than two factors are given.
  static OrthogonalKoopman kronecker(std::vector<SkewParams> factors);

  /// Zero parameters (K = I). For Kronecker, p must be a perfect square and
  /// is split as sqrt(p) x sqrt(p); non-square p is rejected.
  static OrthogonalKoopman identity(Variant variant, Index p);

  /// Parameters drawn i.i.d. uniform in [-0.1/p, 0.1/p] (per factor, with
  /// that factor's dimension), so K starts near the identity.
  static OrthogonalKoopman random_near_identity(Variant variant, Index p, Rng& rng);

  Variant variant() const { return variant_; }
  Index dim() const;
  const std::vector<SkewParams>& factors() const { return factors_; }
  std::vector<SkewParams>& factors() { return factors_; }
  Index param_count() const;

 private:
  Variant variant_ = Variant::Full;
  std::vector<SkewParams> factors_;
};

/// p x p matrix in SO(p).
Matrix materialize(const OrthogonalKoopman& k);

/// K v without forming K for the Kronecker variant (applies each factor
/// along its tensor mode).
Vector apply(const OrthogonalKoopman& k, const std::vector<Matrix>& factor_matrices,
             const Vector& v);

/// exp(alpha(A_i)) for every factor.
std::vector<Matrix> factor_matrices(const OrthogonalKoopman& k);

/// Full: p(p-1)/2. Kronecker: sum of p_i(p_i-1)/2; ValidationError when the
/// factor dimensions do not multiply to p.
Index param_count(Variant variant, Index p);
Index param_count(Variant variant, Index p, const std::vector<Index>& factor_dims);

/// Integer square root split used by the Kronecker variant; ValidationError
/// when p is not a perfect square.
Index kronecker_factor(Index p);

}  // namespace hnko::orthogonal
