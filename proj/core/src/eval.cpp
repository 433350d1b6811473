#include "hnko/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hnko/error.hpp"
#include "hnko/orthogonal.hpp"

namespace hnko::eval {

namespace {

InvariantSeries make_series(std::vector<double> predicted, std::vector<double> truth) {
  auto drift = [](const std::vector<double>& v, std::vector<double>& out, double& max_out) {
    out.resize(v.size());
    max_out = 0.0;
    if (v.empty()) return;
    const double ref = std::abs(v.front());
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double d = std::abs(v[k] - v.front());
      out[k] = ref > 0.0 ? d / ref : d;
      if (!(out[k] <= max_out)) max_out = out[k];  // propagates NaN
    }
  };
  InvariantSeries s;
  s.predicted = std::move(predicted);
  s.truth = std::move(truth);
  drift(s.predicted, s.predicted_drift, s.max_predicted_drift);
  drift(s.truth, s.truth_drift, s.max_truth_drift);
  return s;
}

double safe_energy(const systems::SystemSpec& spec, const Vector& x) {
  if (!x.allFinite()) return std::numeric_limits<double>::quiet_NaN();
  try {
    return systems::hamiltonian(spec, x);
  } catch (const NumericalError&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace

MetricsReport evaluate(const systems::Trajectory& predicted, const systems::Trajectory& truth,
                       const systems::SystemSpec& spec, const EvaluateOptions& options) {
  if (predicted.samples() != truth.samples()) {
    throw DimensionError("evaluate: trajectories have " + std::to_string(predicted.samples()) +
                         " and " + std::to_string(truth.samples()) + " samples");
  }
  if (predicted.dim() != truth.dim()) {
    throw DimensionError("evaluate: trajectories have dimensions " +
                         std::to_string(predicted.dim()) + " and " + std::to_string(truth.dim()));
  }
  if (truth.dim() != systems::state_dim(spec)) {
    throw DimensionError("evaluate: trajectory dimension does not match the system");
  }
  const Index n = truth.dim();
  const Index samples = truth.samples();

  MetricsReport r;
  r.horizon = samples > 0 ? samples - 1 : 0;
  Vector scale = truth.states.cwiseAbs().rowwise().maxCoeff();
  for (Index i = 0; i < n; ++i) {
    if (!(scale(i) > 0.0)) scale(i) = 1.0;
  }
  r.mse_per_step.resize(static_cast<std::size_t>(samples));
  r.normalized_mse_per_step.resize(static_cast<std::size_t>(samples));
  double sum = 0.0;
  double nsum = 0.0;
  for (Index k = 0; k < samples; ++k) {
    const Vector diff = predicted.states.col(k) - truth.states.col(k);
    const double mse = diff.squaredNorm() / static_cast<double>(n);
    const double nmse = diff.cwiseQuotient(scale).squaredNorm() / static_cast<double>(n);
    r.mse_per_step[static_cast<std::size_t>(k)] = mse;
    r.normalized_mse_per_step[static_cast<std::size_t>(k)] = nmse;
    sum += mse;
    nsum += nmse;
  }
  r.mean_mse = samples > 0 ? sum / static_cast<double>(samples) : 0.0;
  r.normalized_mean_mse = samples > 0 ? nsum / static_cast<double>(samples) : 0.0;
  r.finite = predicted.states.allFinite();

  if (options.compute_wasserstein && samples > 0) {
    r.wasserstein2 = r.finite ? wasserstein2(predicted.states, truth.states, options.wasserstein_cap)
                              : std::numeric_limits<double>::infinity();
  }

  std::vector<double> ep(static_cast<std::size_t>(samples));
  std::vector<double> et(static_cast<std::size_t>(samples));
  for (Index k = 0; k < samples; ++k) {
    ep[static_cast<std::size_t>(k)] = safe_energy(spec, predicted.states.col(k));
    et[static_cast<std::size_t>(k)] = safe_energy(spec, truth.states.col(k));
  }
  r.invariant_drift.emplace("energy", make_series(std::move(ep), std::move(et)));

  if (const auto* kdv = std::get_if<systems::Kdv>(&spec)) {
    std::vector<double> mp(static_cast<std::size_t>(samples));
    std::vector<double> mt(static_cast<std::size_t>(samples));
    for (Index k = 0; k < samples; ++k) {
      mp[static_cast<std::size_t>(k)] = systems::invariant_values(*kdv, predicted.states.col(k)).mass;
      mt[static_cast<std::size_t>(k)] = systems::invariant_values(*kdv, truth.states.col(k)).mass;
    }
    r.invariant_drift.emplace("mass", make_series(std::move(mp), std::move(mt)));
  }
  return r;
}

std::vector<Index> linear_assignment(const Matrix& cost) {
  if (cost.rows() != cost.cols()) throw DimensionError("linear_assignment: cost must be square");
  const Index n = cost.rows();
  // Shortest augmenting path with row/column potentials; 1-based arrays
  // with index 0 as the virtual source column.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<double> v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<Index> match(static_cast<std::size_t>(n + 1), 0);  // column -> row
  std::vector<Index> way(static_cast<std::size_t>(n + 1), 0);
  std::vector<double> minv(static_cast<std::size_t>(n + 1));
  std::vector<char> used(static_cast<std::size_t>(n + 1));
  for (Index i = 1; i <= n; ++i) {
    match[0] = i;
    Index j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const Index i0 = match[static_cast<std::size_t>(j0)];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        if (used[ju]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[ju];
        if (cur < minv[ju]) {
          minv[ju] = cur;
          way[ju] = j0;
        }
        if (minv[ju] < delta) {
          delta = minv[ju];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        if (used[ju]) {
          u[static_cast<std::size_t>(match[ju])] += delta;
          v[ju] -= delta;
        } else {
          minv[ju] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> assignment(static_cast<std::size_t>(n));
  for (Index j = 1; j <= n; ++j) {
    assignment[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = j - 1;
  }
  return assignment;
}

double wasserstein2(const Matrix& a, const Matrix& b, Index cap) {
  if (a.cols() != b.cols()) {
    throw DimensionError("wasserstein2: point sets have " + std::to_string(a.cols()) + " and " +
                         std::to_string(b.cols()) + " points");
  }
  if (a.rows() != b.rows()) throw DimensionError("wasserstein2: point dimensions differ");
  const Index n = a.cols();
  if (n > cap) {
    throw ValidationError("wasserstein2: " + std::to_string(n) +
                          " points exceed the exact-assignment cap of " + std::to_string(cap));
  }
  if (n == 0) return 0.0;
  // ||a_i - b_j||^2 = |a_i|^2 + |b_j|^2 - 2 a_i.b_j, clamped at 0.
  Matrix cost = -2.0 * (a.transpose() * b);
  cost.colwise() += a.colwise().squaredNorm().transpose();
  cost.rowwise() += b.colwise().squaredNorm();
  cost = cost.cwiseMax(0.0);
  const std::vector<Index> assign = linear_assignment(cost);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    total += (a.col(i) - b.col(assign[static_cast<std::size_t>(i)])).squaredNorm();
  }
  return std::sqrt(total / static_cast<double>(n));
}

Vector temporal_variance(const Matrix& series) {
  Vector out(series.rows());
  if (series.cols() == 0) return Vector::Zero(series.rows());
  for (Index i = 0; i < series.rows(); ++i) {
    const double mean = series.row(i).mean();
    out(i) = (series.row(i).array() - mean).square().mean();
  }
  return out;
}

Vector feature_variance(const model::HnkoModel& model, const Matrix& data) {
  return temporal_variance(model::encode(model, data));
}

Discovery discover_invariants(const model::HnkoModel& model, const Matrix& data, double tol) {
  if (!(tol > 0.0)) throw ValidationError("discover_invariants: tolerance must be positive");
  const Matrix k = orthogonal::materialize(model.koopman);
  const Matrix latent = model::encode(model, data);
  Discovery out;
  out.tolerance = tol;
  for (const numerics::SchurBlock& blk : numerics::orthogonal_schur(k)) {
    if (blk.size == 1) {
      const double lambda = blk.block(0, 0);
      if (std::abs(lambda - 1.0) >= tol) continue;
      DiscoveredInvariant inv;
      inv.eigenvalue = {lambda, 0.0};
      inv.coefficients = blk.basis.col(0).normalized();
      const Matrix g = inv.coefficients.transpose() * latent;
      inv.temporal_variance = temporal_variance(g)(0);
      out.invariants.push_back(std::move(inv));
    } else {
      const std::complex<double> lambda = std::polar(1.0, blk.angle);
      if (std::abs(lambda - 1.0) >= tol) continue;
      out.slow_modes.push_back({lambda, blk.basis, blk.angle});
    }
  }
  std::stable_sort(out.invariants.begin(), out.invariants.end(),
                   [](const DiscoveredInvariant& a, const DiscoveredInvariant& b) {
                     return a.temporal_variance < b.temporal_variance;
                   });
  return out;
}

}  // namespace hnko::eval
