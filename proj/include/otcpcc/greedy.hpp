#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "otcpcc/measures.hpp"

namespace otcpcc {

/// Residual masses at or below this are treated as exhausted, so rounding
/// residue can never stall a matching loop.
inline constexpr double kMassEpsilon = 1e-15;

namespace detail {

struct Residual {
  std::size_t index;
  double mass;
};

/// Matches two ordered residual queues front to front until one runs dry,
/// appending one plan entry per step. Both greedy_flow_matching and the
/// bottom-up tree matching go through here so their arithmetic is identical.
/// `ai`/`bj` are cursors into the queues and are advanced in place.
inline void match_queues(std::vector<Residual>& as, std::size_t& ai, std::vector<Residual>& bs,
                         std::size_t& bj, FlowPlan& plan) {
  while (ai < as.size() && bj < bs.size()) {
    Residual& x = as[ai];
    Residual& y = bs[bj];
    const double eta = x.mass < y.mass ? x.mass : y.mass;
    if (eta > kMassEpsilon) plan.push(x.index, y.index, eta);
    x.mass -= eta;
    y.mass -= eta;
    if (x.mass <= kMassEpsilon) ++ai;
    if (y.mass <= kMassEpsilon) ++bj;
  }
}

inline std::vector<Residual> residuals(std::span<const double> w) {
  std::vector<Residual> out;
  out.reserve(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out.push_back({i, w[i]});
  return out;
}

}  // namespace detail

/// North-west corner matching of two simplex vectors in their given order.
/// Feasible for both marginals, at most m + n - 1 entries, O(m + n) steps.
inline FlowPlan greedy_flow_matching(std::span<const double> a, std::span<const double> b) {
  FlowPlan plan(a.size(), b.size());
  auto as = detail::residuals(a);
  auto bs = detail::residuals(b);
  std::size_t i = 0;
  std::size_t j = 0;
  detail::match_queues(as, i, bs, j, plan);
  return plan;
}

}  // namespace otcpcc
