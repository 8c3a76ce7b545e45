#pragma once

// Primal network simplex for the balanced transportation problem
//
//   min <P, D>  s.t.  P 1 = a,  P^T 1 = b,  P >= 0.
//
// Supply nodes 0..m-1, demand nodes m..m+n-1 and an artificial root m+n.
// The initial basis is the artificial star around the root; artificial
// arcs into demand nodes carry a prohibitive cost so they leave the basis.
// Every node stores the tree arc to its parent (its "pred" arc) together
// with that arc's flow, so no per-arc state of size m*n is kept besides
// the cost matrix itself. Leaving arcs follow the strongly feasible tree
// rule, which rules out cycling on the heavily degenerate transport
// polytope.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "otcpcc/error.hpp"
#include "otcpcc/measures.hpp"

namespace otcpcc {

/// Reduced-cost tolerance, relative to the largest ground distance.
inline constexpr double kPivotTolerance = 1e-12;

struct SimplexOptions {
  /// Abort with TimeoutError after this many seconds (no limit if empty).
  std::optional<double> max_seconds;
};

struct SimplexStats {
  std::int64_t pivots = 0;
  std::int64_t degenerate_pivots = 0;
};

namespace detail {

class TransportSimplex {
 public:
  TransportSimplex(std::span<const double> supply, std::span<const double> demand,
                   const CostMatrix& cost, SimplexOptions options)
      : m_(static_cast<std::int64_t>(supply.size())),
        n_(static_cast<std::int64_t>(demand.size())),
        nodes_(m_ + n_),
        root_(m_ + n_),
        real_arcs_(m_ * n_),
        cost_(cost.entries().data().data()),
        options_(options) {
    if (cost.rows() != supply.size() || cost.cols() != demand.size()) {
      throw DimensionError("cost matrix shape differs from marginals");
    }
    const double max_cost = cost.max();
    eps_ = kPivotTolerance * (max_cost > 1.0 ? max_cost : 1.0);
    art_cost_ = (max_cost + 1.0) * static_cast<double>(nodes_ + 1);
    init(supply, demand);
  }

  double solve() {
    const auto start = std::chrono::steady_clock::now();
    std::int64_t in_arc = -1;
    while ((in_arc = find_entering_arc()) >= 0) {
      pivot(in_arc);
      ++stats_.pivots;
      if (options_.max_seconds && (stats_.pivots & 1023) == 0) {
        const std::chrono::duration<double> el = std::chrono::steady_clock::now() - start;
        if (el.count() > *options_.max_seconds) {
          throw TimeoutError("exact EMD exceeded its time budget");
        }
      }
    }
    double total = 0.0;
    for (std::int64_t u = 0; u < nodes_; ++u) {
      if (pred_[u] < real_arcs_ && flow_[u] > 0.0) total += flow_[u] * cost_[pred_[u]];
    }
    return total;
  }

  FlowPlan plan() const {
    FlowPlan p(static_cast<std::size_t>(m_), static_cast<std::size_t>(n_));
    for (std::int64_t u = 0; u < nodes_; ++u) {
      const std::int64_t e = pred_[u];
      if (e < real_arcs_ && flow_[u] > kFlowFloor) {
        p.push(static_cast<std::size_t>(e / n_), static_cast<std::size_t>(e % n_), flow_[u]);
      }
    }
    return p;
  }

  const SimplexStats& stats() const { return stats_; }

 private:
  static constexpr double kFlowFloor = 1e-15;
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  std::int64_t source(std::int64_t e) const {
    if (e < real_arcs_) return e / n_;
    const std::int64_t u = e - real_arcs_;
    return art_out_[u] ? u : root_;
  }
  std::int64_t target(std::int64_t e) const {
    if (e < real_arcs_) return m_ + e % n_;
    const std::int64_t u = e - real_arcs_;
    return art_out_[u] ? root_ : u;
  }
  double arc_cost(std::int64_t e) const {
    if (e < real_arcs_) return cost_[e];
    return art_out_[e - real_arcs_] ? 0.0 : art_cost_;
  }
  std::int64_t other_end(std::int64_t e, std::int64_t u) const {
    const std::int64_t s = source(e);
    return s == u ? target(e) : s;
  }

  void init(std::span<const double> supply, std::span<const double> demand) {
    const auto total = static_cast<std::size_t>(nodes_ + 1);
    parent_.assign(total, -1);
    pred_.assign(total, -1);
    forward_.assign(total, 0);
    flow_.assign(total, 0.0);
    depth_.assign(total, 0);
    pi_.assign(total, 0.0);
    art_out_.assign(static_cast<std::size_t>(nodes_), 0);
    adj_.assign(total, {});
    adj_[root_].reserve(static_cast<std::size_t>(nodes_));
    for (std::int64_t u = 0; u < nodes_; ++u) {
      const double s = u < m_ ? supply[u] : -demand[u - m_];
      const std::int64_t e = real_arcs_ + u;
      parent_[u] = root_;
      pred_[u] = e;
      depth_[u] = 1;
      if (s >= 0.0) {
        art_out_[u] = 1;
        forward_[u] = 1;
        flow_[u] = s;
        pi_[u] = 0.0;
      } else {
        art_out_[u] = 0;
        forward_[u] = 0;
        flow_[u] = -s;
        pi_[u] = art_cost_;
      }
      adj_[u].push_back(e);
      adj_[root_].push_back(e);
    }
    block_ = static_cast<std::int64_t>(std::sqrt(static_cast<double>(real_arcs_)));
    if (block_ < 10) block_ = 10;
  }

  // Block search pricing over the real arcs; tree arcs have zero reduced
  // cost and artificial arcs never re-enter.
  std::int64_t find_entering_arc() {
    double best = -eps_;
    std::int64_t in_arc = -1;
    std::int64_t cnt = block_;
    auto scan = [&](std::int64_t from, std::int64_t to) -> bool {
      std::int64_t i = from / n_;
      std::int64_t j = from % n_;
      for (std::int64_t e = from; e < to; ++e) {
        const double c = cost_[e] + pi_[i] - pi_[m_ + j];
        if (c < best) {
          best = c;
          in_arc = e;
        }
        if (++j == n_) {
          j = 0;
          ++i;
        }
        if (--cnt == 0) {
          if (in_arc >= 0) {
            next_arc_ = e + 1 == real_arcs_ ? 0 : e + 1;
            return true;
          }
          cnt = block_;
        }
      }
      return false;
    };
    if (scan(next_arc_, real_arcs_) || scan(0, next_arc_)) return in_arc;
    return in_arc;
  }

  void remove_adj(std::int64_t u, std::int64_t e) {
    auto& v = adj_[u];
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (v[k] == e) {
        v[k] = v.back();
        v.pop_back();
        return;
      }
    }
  }

  void pivot(std::int64_t in_arc) {
    const std::int64_t first = source(in_arc);
    const std::int64_t second = target(in_arc);

    std::int64_t u = first;
    std::int64_t v = second;
    while (u != v) {
      if (depth_[u] >= depth_[v]) {
        u = parent_[u];
      } else {
        v = parent_[v];
      }
    }
    const std::int64_t join = u;

    // Flow is pushed along in_arc, up from `second` to the join node and
    // down from the join node to `first`.
    double delta = kInf;
    std::int64_t u_out = -1;
    int side = 0;
    for (u = first; u != join; u = parent_[u]) {
      const double d = forward_[u] ? clamp(flow_[u]) : kInf;
      if (d < delta) {
        delta = d;
        u_out = u;
        side = 1;
      }
    }
    for (u = second; u != join; u = parent_[u]) {
      const double d = forward_[u] ? kInf : clamp(flow_[u]);
      if (d <= delta) {
        delta = d;
        u_out = u;
        side = 2;
      }
    }
    if (side == 0 || delta == kInf) throw Error("transport problem is unbounded");
    if (delta == 0.0) ++stats_.degenerate_pivots;

    if (delta > 0.0) {
      for (u = first; u != join; u = parent_[u]) flow_[u] += forward_[u] ? -delta : delta;
      for (u = second; u != join; u = parent_[u]) flow_[u] += forward_[u] ? delta : -delta;
    }

    const std::int64_t u_in = side == 1 ? first : second;
    const std::int64_t v_in = side == 1 ? second : first;
    const std::int64_t out_arc = pred_[u_out];
    remove_adj(u_out, out_arc);
    remove_adj(parent_[u_out], out_arc);
    adj_[first].push_back(in_arc);
    adj_[second].push_back(in_arc);

    // Reverse the path u_in .. u_out so that u_in hangs below v_in.
    std::int64_t new_parent = v_in;
    std::int64_t new_pred = in_arc;
    char new_forward = source(in_arc) == u_in ? 1 : 0;
    double new_flow = delta;
    u = u_in;
    while (true) {
      const std::int64_t old_parent = parent_[u];
      const std::int64_t old_pred = pred_[u];
      const char old_forward = forward_[u];
      const double old_flow = flow_[u];
      parent_[u] = new_parent;
      pred_[u] = new_pred;
      forward_[u] = new_forward;
      flow_[u] = new_flow;
      if (u == u_out) break;
      new_parent = u;
      new_pred = old_pred;
      new_forward = old_forward ? 0 : 1;
      new_flow = old_flow;
      u = old_parent;
    }

    // Depths and potentials of the moved subtree.
    stack_.clear();
    set_from_parent(u_in);
    stack_.push_back(u_in);
    while (!stack_.empty()) {
      const std::int64_t x = stack_.back();
      stack_.pop_back();
      for (const std::int64_t e : adj_[x]) {
        const std::int64_t y = other_end(e, x);
        if (y == parent_[x]) continue;
        set_from_parent(y);
        stack_.push_back(y);
      }
    }
  }

  void set_from_parent(std::int64_t y) {
    const std::int64_t p = parent_[y];
    const std::int64_t e = pred_[y];
    depth_[y] = depth_[p] + 1;
    // Tree arcs have zero reduced cost: c(e) + pi[source] - pi[target] = 0.
    pi_[y] = source(e) == y ? pi_[p] - arc_cost(e) : pi_[p] + arc_cost(e);
  }

  static double clamp(double f) { return f > 0.0 ? f : 0.0; }

  std::int64_t m_;
  std::int64_t n_;
  std::int64_t nodes_;
  std::int64_t root_;
  std::int64_t real_arcs_;
  const double* cost_;
  SimplexOptions options_;
  double eps_ = 0.0;
  double art_cost_ = 0.0;
  std::int64_t block_ = 10;
  std::int64_t next_arc_ = 0;

  std::vector<std::int64_t> parent_;
  std::vector<std::int64_t> pred_;
  std::vector<char> forward_;
  std::vector<double> flow_;
  std::vector<std::int64_t> depth_;
  std::vector<double> pi_;
  std::vector<char> art_out_;
  std::vector<std::vector<std::int64_t>> adj_;
  std::vector<std::int64_t> stack_;
  SimplexStats stats_;
};

}  // namespace detail

struct TransportSolution {
  double value = 0.0;
  FlowPlan plan;
  SimplexStats stats;
};

/// Solves the balanced transportation problem for an arbitrary cost matrix.
inline TransportSolution solve_transport(std::span<const double> a, std::span<const double> b,
                                         const CostMatrix& cost, SimplexOptions options = {}) {
  detail::TransportSimplex simplex(a, b, cost, options);
  TransportSolution out;
  out.value = simplex.solve();
  out.plan = simplex.plan();
  out.stats = simplex.stats();
  return out;
}

}  // namespace otcpcc
