#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "otcpcc/greedy.hpp"
#include "otcpcc/measures.hpp"
#include "otcpcc/network_simplex.hpp"

namespace otcpcc {

struct EmdResult {
  double value = 0.0;
  FlowPlan plan;
};

/// Exact earth mover's distance with Euclidean ground cost. The returned
/// plan is a basic optimum (at most m + n - 1 non-zeros).
inline EmdResult emd_exact(const WeightedPointSet& a, const WeightedPointSet& b,
                           SimplexOptions options = {}) {
  const CostMatrix d = cost_matrix(a, b);
  auto sol = solve_transport(a.weights(), b.weights(), d, options);
  // Re-price on the support so the value is exactly <P, D>.
  return {transport_cost(sol.plan, d), std::move(sol.plan)};
}

/// Closed-form 1d EMD for two equally sized uniform samples: the mean
/// absolute difference of the order statistics.
inline double emd_1d(std::vector<double> xs, std::vector<double> ys) {
  if (xs.size() != ys.size() || xs.empty()) {
    throw DomainError("emd_1d needs two equally sized non-empty samples; use emd_1d_general");
  }
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) s += std::abs(xs[i] - ys[i]);
  return s / static_cast<double>(xs.size());
}

inline double emd_1d(const WeightedPointSet& a, const WeightedPointSet& b) {
  if (a.dim() != 1 || b.dim() != 1) throw DimensionError("emd_1d expects 1-dimensional inputs");
  if (a.size() != b.size() || !a.has_uniform_weights() || !b.has_uniform_weights()) {
    throw DomainError(
        "emd_1d needs equal sizes and uniform weights; use emd_1d_general for the weighted case");
  }
  return emd_1d(a.points().data(), b.points().data());
}

namespace detail {

// Stable order by coordinate; ties keep the original index order.
inline std::vector<std::size_t> sorted_order(std::span<const double> xs) {
  std::vector<std::size_t> idx(xs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t l, std::size_t r) { return xs[l] < xs[r]; });
  return idx;
}

// 1d EMD between weighted coordinate lists, plan indexed in the caller's order.
inline EmdResult emd_1d_weighted(std::span<const double> xs, std::span<const double> wa,
                                 std::span<const double> ys, std::span<const double> wb) {
  const auto ia = sorted_order(xs);
  const auto ib = sorted_order(ys);
  std::vector<double> sa(ia.size());
  std::vector<double> sb(ib.size());
  for (std::size_t k = 0; k < ia.size(); ++k) sa[k] = wa[ia[k]];
  for (std::size_t k = 0; k < ib.size(); ++k) sb[k] = wb[ib[k]];
  const FlowPlan sorted_plan = greedy_flow_matching(sa, sb);
  FlowPlan plan(xs.size(), ys.size());
  double value = 0.0;
  for (const auto& e : sorted_plan.entries()) {
    const std::size_t i = ia[e.row];
    const std::size_t j = ib[e.col];
    plan.push(i, j, e.mass);
    value += e.mass * std::abs(xs[i] - ys[j]);
  }
  return {value, std::move(plan)};
}

}  // namespace detail

/// 1d EMD for any sizes and weights: sort both sides, greedy-match the
/// sorted weights, price the plan. Optimal because sorted 1d costs are Monge.
inline EmdResult emd_1d_general(const WeightedPointSet& a, const WeightedPointSet& b) {
  if (a.dim() != 1 || b.dim() != 1) {
    throw DimensionError("emd_1d_general expects 1-dimensional inputs");
  }
  return detail::emd_1d_weighted(a.points().data(), a.weights(), b.points().data(), b.weights());
}

/// Closed-form W2 between Gaussians with diagonal covariances (variances
/// given per coordinate). Test oracle only.
inline double gaussian_w2_oracle(std::span<const double> mean1, std::span<const double> var1,
                                 std::span<const double> mean2, std::span<const double> var2) {
  if (mean1.size() != mean2.size() || var1.size() != mean1.size() ||
      var2.size() != mean2.size()) {
    throw DimensionError("gaussian parameters differ in dimension");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < mean1.size(); ++k) {
    if (var1[k] < 0.0 || var2[k] < 0.0) throw DomainError("variances must be non-negative");
    const double dm = mean1[k] - mean2[k];
    const double ds = std::sqrt(var1[k]) - std::sqrt(var2[k]);
    s += dm * dm + ds * ds;
  }
  return std::sqrt(s);
}

}  // namespace otcpcc
