#include "hnko/baselines.hpp"

#include <functional>
#include <string>

#include <Eigen/Eigenvalues>

#include "hnko/error.hpp"

namespace hnko::baselines {

double hermite_he(int n, double x) {
  if (n == 0) return 1.0;
  double prev = 1.0;
  double cur = x;
  for (int k = 1; k < n; ++k) {
    const double next = x * cur - static_cast<double>(k) * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

Index HermiteDictionary::size_for(Index input_dim, int max_order) {
  // C(n + d, d) built incrementally; exact for the sizes of interest.
  Index c = 1;
  for (int i = 1; i <= max_order; ++i) c = c * (input_dim + i) / i;
  return c;
}

HermiteDictionary::HermiteDictionary(Index input_dim, int max_order)
    : input_dim_(input_dim), max_order_(max_order) {
  if (input_dim < 1) throw ValidationError("HermiteDictionary: input_dim must be >= 1");
  if (max_order < 0) throw ValidationError("HermiteDictionary: max_order must be >= 0");
  std::vector<int> alpha(static_cast<std::size_t>(input_dim), 0);
  for (int order = 0; order <= max_order; ++order) {
    // Enumerate compositions of `order` into input_dim parts, first part
    // largest-first so x_1 terms come before x_2 terms.
    std::function<void(std::size_t, int)> rec = [&](std::size_t pos, int remaining) {
      if (pos + 1 == alpha.size()) {
        alpha[pos] = remaining;
        indices_.push_back(alpha);
        return;
      }
      for (int e = remaining; e >= 0; --e) {
        alpha[pos] = e;
        rec(pos + 1, remaining - e);
      }
    };
    rec(0, order);
  }
}

Vector HermiteDictionary::lift(const Vector& x) const {
  if (x.size() != input_dim_) throw DimensionError("HermiteDictionary::lift: dimension mismatch");
  // Table of He_k(x_i) for k <= max_order.
  Matrix table(input_dim_, max_order_ + 1);
  for (Index i = 0; i < input_dim_; ++i) {
    for (int k = 0; k <= max_order_; ++k) table(i, k) = hermite_he(k, x(i));
  }
  Vector out(size());
  for (Index j = 0; j < size(); ++j) {
    double v = 1.0;
    const std::vector<int>& a = indices_[static_cast<std::size_t>(j)];
    for (Index i = 0; i < input_dim_; ++i) {
      if (a[static_cast<std::size_t>(i)] != 0) v *= table(i, a[static_cast<std::size_t>(i)]);
    }
    out(j) = v;
  }
  return out;
}

Matrix HermiteDictionary::lift(const Matrix& x) const {
  Matrix out(size(), x.cols());
  for (Index k = 0; k < x.cols(); ++k) out.col(k) = lift(Vector(x.col(k)));
  return out;
}

LinearModel dmd_fit(const systems::Trajectory& traj, double rank_tol) {
  if (traj.samples() < 2) throw ValidationError("dmd_fit: need at least two states");
  const Index m = traj.samples() - 1;
  const Matrix x = traj.states.leftCols(m);
  const Matrix xp = traj.states.rightCols(m);
  return {xp * numerics::pinv(x, rank_tol), std::nullopt};
}

LinearModel edmd_fit(const systems::Trajectory& traj, int max_order, const EdmdOptions& options) {
  if (traj.samples() < 2) throw ValidationError("edmd_fit: need at least two states");
  if (max_order < 1) throw ValidationError("edmd_fit: max_order must be >= 1");
  const Index size = HermiteDictionary::size_for(traj.dim(), max_order);
  if (size > options.dictionary_cap) {
    throw ValidationError("edmd_fit: Hermite dictionary of order " + std::to_string(max_order) +
                          " on " + std::to_string(traj.dim()) + " inputs has " +
                          std::to_string(size) + " entries, above the cap of " +
                          std::to_string(options.dictionary_cap));
  }
  HermiteDictionary dict(traj.dim(), max_order);
  const Matrix lifted = dict.lift(traj.states);
  const Index m = traj.samples() - 1;
  Matrix k = lifted.rightCols(m) * numerics::pinv(lifted.leftCols(m), options.rank_tol);
  return {std::move(k), std::move(dict)};
}

Matrix linear_predict(const LinearModel& model, const Vector& x0, Index steps) {
  if (steps < 0) throw ValidationError("linear_predict: steps must be non-negative");
  const Index n = model.dictionary ? model.dictionary->input_dim() : model.k.rows();
  if (x0.size() != n) throw DimensionError("linear_predict: x0 dimension mismatch");
  Matrix out(n, steps + 1);
  out.col(0) = x0;
  for (Index k = 1; k <= steps; ++k) {
    if (model.dictionary) {
      const Vector z = model.k * model.dictionary->lift(Vector(out.col(k - 1)));
      out.col(k) = z.segment(1, n);
    } else {
      out.col(k) = model.k * out.col(k - 1);
    }
  }
  return out;
}

double spectral_radius(const Matrix& k) {
  if (k.rows() != k.cols()) throw DimensionError("spectral_radius: non-square matrix");
  Eigen::EigenSolver<Matrix> es(k, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace hnko::baselines
