#include "hnko/orthogonal.hpp"

#include <cmath>
#include <string>

#include "hnko/error.hpp"
#include "hnko/rng.hpp"

namespace hnko::orthogonal {

SkewParams::SkewParams(Index dim) : dim_(dim), values_(Vector::Zero(count_for(dim))) {
  if (dim < 1) throw ValidationError("SkewParams: dimension must be >= 1");
}

SkewParams::SkewParams(Index dim, Vector values) : dim_(dim), values_(std::move(values)) {
  if (dim < 1) throw ValidationError("SkewParams: dimension must be >= 1");
  if (values_.size() != count_for(dim)) {
    throw DimensionError("SkewParams: dimension " + std::to_string(dim) + " needs " +
                         std::to_string(count_for(dim)) + " values, got " +
                         std::to_string(values_.size()));
  }
}

Matrix alpha(Index dim, const Eigen::Ref<const Vector>& params) {
  if (params.size() != SkewParams::count_for(dim)) {
    throw DimensionError("alpha: wrong parameter count for dimension " + std::to_string(dim));
  }
  Matrix a = Matrix::Zero(dim, dim);
  Index k = 0;
  for (Index i = 0; i < dim; ++i) {
    for (Index j = i + 1; j < dim; ++j, ++k) {
      a(i, j) = params(k);
      a(j, i) = -params(k);
    }
  }
  return a;
}

Matrix alpha(const SkewParams& a) { return alpha(a.dim(), a.values()); }

OrthogonalKoopman OrthogonalKoopman::full(SkewParams params) {
  OrthogonalKoopman k;
  k.variant_ = Variant::Full;
  k.factors_.push_back(std::move(params));
  return k;
}

OrthogonalKoopman OrthogonalKoopman::kronecker(std::vector<SkewParams> factors) {
  if (factors.size() < 2) throw ValidationError("Kronecker Koopman needs at least two factors");
  OrthogonalKoopman k;
  k.variant_ = Variant::Kronecker;
  k.factors_ = std::move(factors);
  return k;
}

Index kronecker_factor(Index p) {
  auto root = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(p))));
  if (p < 1 || root * root != p) {
    throw ValidationError("Kronecker variant requires a perfect-square latent dimension, got p=" +
                          std::to_string(p));
  }
  return root;
}

OrthogonalKoopman OrthogonalKoopman::identity(Variant variant, Index p) {
  if (variant == Variant::Full) return full(SkewParams(p));
  const Index r = kronecker_factor(p);
  return kronecker({SkewParams(r), SkewParams(r)});
}

OrthogonalKoopman OrthogonalKoopman::random_near_identity(Variant variant, Index p, Rng& rng) {
  OrthogonalKoopman k = identity(variant, p);
  for (SkewParams& f : k.factors_) {
    const double bound = 0.1 / static_cast<double>(f.dim());
    for (Index i = 0; i < f.values().size(); ++i) f.values()(i) = rng.uniform(-bound, bound);
  }
  return k;
}

Index OrthogonalKoopman::dim() const {
  Index d = 1;
  for (const SkewParams& f : factors_) d *= f.dim();
  return factors_.empty() ? 0 : d;
}

Index OrthogonalKoopman::param_count() const {
  Index n = 0;
  for (const SkewParams& f : factors_) n += f.values().size();
  return n;
}

std::vector<Matrix> factor_matrices(const OrthogonalKoopman& k) {
  std::vector<Matrix> out;
  out.reserve(k.factors().size());
  for (const SkewParams& f : k.factors()) out.push_back(numerics::expm(alpha(f)));
  return out;
}

Matrix materialize(const OrthogonalKoopman& k) {
  const std::vector<Matrix> mats = factor_matrices(k);
  if (mats.empty()) return Matrix();
  Matrix out = mats.front();
  for (std::size_t i = 1; i < mats.size(); ++i) out = numerics::kron(out, mats[i]);
  return out;
}

Vector apply(const OrthogonalKoopman& k, const std::vector<Matrix>& mats, const Vector& v) {
  if (v.size() != k.dim()) throw DimensionError("apply: vector length does not match K");
  if (mats.size() == 1) return mats.front() * v;
  // (K_1 ⊗ ... ⊗ K_m) v: index i = (i_1, ..., i_m) with i_m fastest. Apply
  // each factor along its mode of the row-major tensor view of v.
  Vector cur = v;
  Index inner = v.size();
  Index outer = 1;
  for (const Matrix& f : mats) {
    const Index d = f.rows();
    inner /= d;
    Vector next(cur.size());
    for (Index o = 0; o < outer; ++o) {
      for (Index in = 0; in < inner; ++in) {
        for (Index r = 0; r < d; ++r) {
          double acc = 0.0;
          for (Index c = 0; c < d; ++c) acc += f(r, c) * cur((o * d + c) * inner + in);
          next((o * d + r) * inner + in) = acc;
        }
      }
    }
    cur = std::move(next);
    outer *= d;
  }
  return cur;
}

Index param_count(Variant variant, Index p) {
  if (variant == Variant::Full) return SkewParams::count_for(p);
  const Index r = kronecker_factor(p);
  return 2 * SkewParams::count_for(r);
}

Index param_count(Variant variant, Index p, const std::vector<Index>& factor_dims) {
  if (variant == Variant::Full) return SkewParams::count_for(p);
  Index prod = 1;
  Index n = 0;
  for (Index d : factor_dims) {
    prod *= d;
    n += SkewParams::count_for(d);
  }
  if (factor_dims.size() < 2 || prod != p) {
    throw ValidationError("Kronecker factor dimensions must multiply to p=" + std::to_string(p));
  }
  return n;
}

}  // namespace hnko::orthogonal
