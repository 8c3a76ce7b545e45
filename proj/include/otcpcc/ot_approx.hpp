#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "otcpcc/greedy.hpp"
#include "otcpcc/measures.hpp"
#include "otcpcc/ot_exact.hpp"
#include "otcpcc/random.hpp"
#include "otcpcc/trees.hpp"

namespace otcpcc {

// ---------------------------------------------------------------------------
// Sinkhorn

struct SinkhornOptions {
  double epsilon = 10.0;
  int max_iters = 200;
  double tol = 1e-6;
};

struct SinkhornResult {
  double value = 0.0;  // <P, D>, the entropy term is not included
  FlowPlan plan;
  bool converged = false;
  int iterations = 0;
  double marginal_error = 0.0;  // L1 row-marginal error before rounding
  bool log_domain = false;
};

/// Switch to log-domain updates when epsilon is below this fraction of
/// the median ground distance.
inline constexpr double kLogDomainThreshold = 0.05;

namespace detail {

inline double median(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  const auto mid = xs.begin() + static_cast<std::ptrdiff_t>(xs.size() / 2);
  std::nth_element(xs.begin(), mid, xs.end());
  return *mid;
}

inline double log_sum_exp(std::span<const double> xs) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : xs) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - hi);
  return hi + std::log(s);
}

// Projects a nearly feasible plan onto the transport polytope: shrink rows
// and columns that carry too much mass, then spread the missing mass as a
// rank-one correction.
inline void round_to_feasible(Matrix& p, std::span<const double> a, std::span<const double> b) {
  const std::size_t m = p.rows();
  const std::size_t n = p.cols();
  for (std::size_t i = 0; i < m; ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < n; ++j) r += p(i, j);
    if (r > a[i]) {
      const double x = a[i] / r;
      for (std::size_t j = 0; j < n; ++j) p(i, j) *= x;
    }
  }
  std::vector<double> c(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[j] += p(i, j);
  for (std::size_t j = 0; j < n; ++j) {
    if (c[j] > b[j]) {
      const double y = b[j] / c[j];
      for (std::size_t i = 0; i < m; ++i) p(i, j) *= y;
    }
  }
  std::vector<double> er(m), ec(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < n; ++j) r += p(i, j);
    er[i] = std::max(0.0, a[i] - r);
    total += er[i];
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) ec[j] += p(i, j);
  for (std::size_t j = 0; j < n; ++j) ec[j] = std::max(0.0, b[j] - ec[j]);
  if (total > 0.0) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) p(i, j) += er[i] * ec[j] / total;
  }
}

}  // namespace detail

/// Entropic OT by alternating matrix scaling. Reports <P_eps, D> for the
/// scaled plan after it has been rounded onto the exact marginals.
inline SinkhornResult sinkhorn(const WeightedPointSet& A, const WeightedPointSet& B,
                               const SinkhornOptions& opt = {}) {
  if (!(opt.epsilon > 0.0)) throw DomainError("sinkhorn epsilon must be positive");
  if (opt.max_iters < 1) throw DomainError("sinkhorn needs at least one iteration");
  const CostMatrix d = cost_matrix(A, B);
  const std::size_t m = A.size();
  const std::size_t n = B.size();
  const auto& a = A.weights();
  const auto& b = B.weights();
  const double eps = opt.epsilon;

  SinkhornResult res;
  res.log_domain = eps < kLogDomainThreshold * detail::median(d.entries().data());
  Matrix p(m, n);

  if (!res.log_domain) {
    Matrix k(m, n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) k(i, j) = std::exp(-d(i, j) / eps);
    std::vector<double> u(m, 1.0), v(n, 1.0), kv(m), ktu(n);
    for (res.iterations = 1; res.iterations <= opt.max_iters; ++res.iterations) {
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += k(i, j) * v[j];
        u[i] = s > 0.0 ? a[i] / s : 0.0;
      }
      std::fill(ktu.begin(), ktu.end(), 0.0);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ktu[j] += k(i, j) * u[i];
      for (std::size_t j = 0; j < n; ++j) v[j] = ktu[j] > 0.0 ? b[j] / ktu[j] : 0.0;
      double err = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += k(i, j) * v[j];
        err += std::abs(u[i] * s - a[i]);
      }
      res.marginal_error = err;
      if (err < opt.tol) {
        res.converged = true;
        break;
      }
    }
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) p(i, j) = u[i] * k(i, j) * v[j];
  } else {
    const double ninf = -std::numeric_limits<double>::infinity();
    std::vector<double> la(m), lb(n);
    for (std::size_t i = 0; i < m; ++i) la[i] = a[i] > 0.0 ? std::log(a[i]) : ninf;
    for (std::size_t j = 0; j < n; ++j) lb[j] = b[j] > 0.0 ? std::log(b[j]) : ninf;
    std::vector<double> f(m, 0.0), g(n, 0.0), buf(std::max(m, n));
    auto log_plan = [&](std::size_t i, std::size_t j) { return (f[i] + g[j] - d(i, j)) / eps; };
    for (res.iterations = 1; res.iterations <= opt.max_iters; ++res.iterations) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) buf[j] = (g[j] - d(i, j)) / eps;
        f[i] = a[i] > 0.0 ? eps * (la[i] - detail::log_sum_exp({buf.data(), n})) : ninf;
      }
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < m; ++i) buf[i] = (f[i] - d(i, j)) / eps;
        g[j] = b[j] > 0.0 ? eps * (lb[j] - detail::log_sum_exp({buf.data(), m})) : ninf;
      }
      double err = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        if (a[i] > 0.0) {
          for (std::size_t j = 0; j < n; ++j) s += b[j] > 0.0 ? std::exp(log_plan(i, j)) : 0.0;
        }
        err += std::abs(s - a[i]);
      }
      res.marginal_error = err;
      if (err < opt.tol) {
        res.converged = true;
        break;
      }
    }
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        p(i, j) = (a[i] > 0.0 && b[j] > 0.0) ? std::exp(log_plan(i, j)) : 0.0;
  }
  if (res.iterations > opt.max_iters) res.iterations = opt.max_iters;

  detail::round_to_feasible(p, a, b);
  res.plan = FlowPlan(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (p(i, j) > 0.0) {
        res.plan.push(i, j, p(i, j));
        res.value += p(i, j) * d(i, j);
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Sliced Wasserstein

struct SlicedResult {
  double value = 0.0;
  std::vector<std::vector<double>> directions;
  std::vector<FlowPlan> plans;  // one optimal 1d plan per direction
};

/// Unit direction number `index` for a given seed, uniform on the sphere.
inline std::vector<double> projection_direction(std::size_t dim, std::uint64_t seed,
                                                std::size_t index) {
  Rng rng = make_rng(seed, {hash_tag("swd"), index});
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> theta(dim);
  double norm = 0.0;
  while (norm == 0.0) {
    norm = 0.0;
    for (auto& t : theta) {
      t = g(rng);
      norm += t * t;
    }
    norm = std::sqrt(norm);
  }
  for (auto& t : theta) t /= norm;
  return theta;
}

/// Average over random directions of the 1d EMD between the projections.
/// Each direction is seeded from (seed, index), so results do not depend
/// on evaluation order.
inline SlicedResult sliced_wasserstein(const WeightedPointSet& A, const WeightedPointSet& B,
                                       int num_projections = 10, std::uint64_t seed = 0) {
  if (num_projections < 1) throw DomainError("swd needs at least one projection");
  if (A.dim() != B.dim()) throw DimensionError("point sets differ in dimension");
  SlicedResult res;
  std::vector<double> pa(A.size()), pb(B.size());
  for (int k = 0; k < num_projections; ++k) {
    auto theta = projection_direction(A.dim(), seed, static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < A.size(); ++i) {
      double s = 0.0;
      for (std::size_t t = 0; t < theta.size(); ++t) s += theta[t] * A.points()(i, t);
      pa[i] = s;
    }
    for (std::size_t j = 0; j < B.size(); ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < theta.size(); ++t) s += theta[t] * B.points()(j, t);
      pb[j] = s;
    }
    auto r = detail::emd_1d_weighted(pa, A.weights(), pb, B.weights());
    res.value += r.value;
    res.plans.push_back(std::move(r.plan));
    res.directions.push_back(std::move(theta));
  }
  res.value /= num_projections;
  return res;
}

inline double swd(const WeightedPointSet& A, const WeightedPointSet& B, int num_projections = 10,
                  std::uint64_t seed = 0) {
  return sliced_wasserstein(A, B, num_projections, seed).value;
}

// ---------------------------------------------------------------------------
// Tree Wasserstein

namespace detail {

inline void require_leaves(const RootedTree& tree, std::span<const int> leaves) {
  for (int v : leaves) {
    if (v < 0 || static_cast<std::size_t>(v) >= tree.size() || !tree.is_leaf(v)) {
      throw DomainError("mass placed on a node that is not a leaf of the tree");
    }
  }
}

}  // namespace detail

/// 0-1 matrix with one row per non-root node and one column per entry of
/// `leaves`: B(v, k) = 1 when v is leaves[k] or one of its ancestors.
/// Returned together with the row -> node mapping.
inline std::pair<Matrix, std::vector<int>> ancestor_matrix(const RootedTree& tree,
                                                           std::span<const int> leaves) {
  detail::require_leaves(tree, leaves);
  std::vector<int> row_of(tree.size(), -1);
  std::vector<int> nodes;
  for (std::size_t v = 0; v < tree.size(); ++v) {
    if (static_cast<int>(v) == tree.root) continue;
    row_of[v] = static_cast<int>(nodes.size());
    nodes.push_back(static_cast<int>(v));
  }
  Matrix bm(nodes.size(), leaves.size());
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    for (int v = leaves[k]; v != tree.root; v = tree.parent[static_cast<std::size_t>(v)]) {
      bm(static_cast<std::size_t>(row_of[static_cast<std::size_t>(v)]), k) = 1.0;
    }
  }
  return {std::move(bm), std::move(nodes)};
}

/// ||diag(w) B (a - b)||_1 with B the ancestor matrix above. The product
/// B (a - b) is accumulated by walking each leaf's ancestor chain rather
/// than materializing B.
inline double twd_closed_form(const RootedTree& tree, std::span<const int> leaves,
                              std::span<const double> a, std::span<const double> b) {
  if (a.size() != leaves.size() || b.size() != leaves.size()) {
    throw DimensionError("leaf distributions must match the leaf list");
  }
  detail::require_leaves(tree, leaves);
  std::vector<double> diff(tree.size(), 0.0);
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    const double delta = a[k] - b[k];
    if (delta == 0.0) continue;
    for (int v = leaves[k]; v != tree.root; v = tree.parent[static_cast<std::size_t>(v)]) {
      diff[static_cast<std::size_t>(v)] += delta;
    }
  }
  double total = 0.0;
  for (std::size_t v = 0; v < tree.size(); ++v) total += tree.edge_weight[v] * std::abs(diff[v]);
  return total;
}

/// TWD between two class distributions on a label tree.
inline double twd_closed_form(const LabelTree& tree, const std::map<std::string, double>& a,
                              const std::map<std::string, double>& b) {
  std::vector<int> leaves;
  std::vector<double> wa, wb;
  for (const auto& label : tree.labels()) {
    leaves.push_back(tree.leaf(label));
    auto ia = a.find(label);
    auto ib = b.find(label);
    wa.push_back(ia == a.end() ? 0.0 : ia->second);
    wb.push_back(ib == b.end() ? 0.0 : ib->second);
  }
  for (const auto& [label, w] : a) {
    if (!tree.has_label(label)) throw DomainError("class '" + label + "' is not a leaf");
  }
  for (const auto& [label, w] : b) {
    if (!tree.has_label(label)) throw DomainError("class '" + label + "' is not a leaf");
  }
  return twd_closed_form(tree.structure(), leaves, simplex_weights(wa, "twd source"),
                         simplex_weights(wb, "twd target"));
}

// ---------------------------------------------------------------------------
// Bottom-up tree matching and FlowTree

/// Processes nodes by increasing height. Each node greedily matches the
/// unmatched source mass of its subtree against the unmatched target mass
/// (children in order, samples in order) and passes what is left to its
/// parent.
inline FlowPlan bottom_up_tree_matching(const RootedTree& tree, std::span<const int> source_leaf,
                                        std::span<const double> a,
                                        std::span<const int> target_leaf,
                                        std::span<const double> b) {
  if (source_leaf.size() != a.size() || target_leaf.size() != b.size()) {
    throw DimensionError("leaf assignments must match the weight vectors");
  }
  detail::require_leaves(tree, source_leaf);
  detail::require_leaves(tree, target_leaf);
  const std::size_t nodes = tree.size();
  std::vector<std::vector<detail::Residual>> up_a(nodes), up_b(nodes);
  for (std::size_t i = 0; i < a.size(); ++i)
    up_a[static_cast<std::size_t>(source_leaf[i])].push_back({i, a[i]});
  for (std::size_t j = 0; j < b.size(); ++j)
    up_b[static_cast<std::size_t>(target_leaf[j])].push_back({j, b[j]});

  const auto height = tree.heights();
  const int max_height = *std::max_element(height.begin(), height.end());
  std::vector<std::vector<int>> by_height(static_cast<std::size_t>(max_height) + 1);
  for (std::size_t v = 0; v < nodes; ++v)
    by_height[static_cast<std::size_t>(height[v])].push_back(static_cast<int>(v));

  FlowPlan plan(a.size(), b.size());
  std::vector<detail::Residual> qa, qb;
  for (const auto& level : by_height) {
    for (int v : level) {
      const auto& ch = tree.children[static_cast<std::size_t>(v)];
      // A leaf holding both source and target mass matches it in place.
      qa.swap(up_a[static_cast<std::size_t>(v)]);
      qb.swap(up_b[static_cast<std::size_t>(v)]);
      up_a[static_cast<std::size_t>(v)].clear();
      up_b[static_cast<std::size_t>(v)].clear();
      for (int c : ch) {
        auto& ca = up_a[static_cast<std::size_t>(c)];
        auto& cb = up_b[static_cast<std::size_t>(c)];
        qa.insert(qa.end(), ca.begin(), ca.end());
        qb.insert(qb.end(), cb.begin(), cb.end());
        std::vector<detail::Residual>().swap(ca);
        std::vector<detail::Residual>().swap(cb);
      }
      std::size_t ia = 0;
      std::size_t ib = 0;
      detail::match_queues(qa, ia, qb, ib, plan);
      auto& out_a = up_a[static_cast<std::size_t>(v)];
      auto& out_b = up_b[static_cast<std::size_t>(v)];
      out_a.assign(qa.begin() + static_cast<std::ptrdiff_t>(ia), qa.end());
      out_b.assign(qb.begin() + static_cast<std::ptrdiff_t>(ib), qb.end());
    }
  }
  return plan;
}

/// Bottom-up matching of class u's samples against class v's samples on
/// the augmented label tree.
inline FlowPlan bottom_up_tree_matching(const AugmentedTree& tree, const std::string& u,
                                        const std::string& v) {
  const auto mt = tree.matching_tree(u, v);
  return bottom_up_tree_matching(mt.tree, mt.source_leaf, tree.weights(u), mt.target_leaf,
                                 tree.weights(v));
}

/// Bottom-up matching on a quadtree built over A's points followed by B's.
inline FlowPlan bottom_up_tree_matching(const QuadTree& tree, const WeightedPointSet& A,
                                        const WeightedPointSet& B) {
  std::vector<int> src(A.size()), dst(B.size());
  for (std::size_t i = 0; i < A.size(); ++i) src[i] = tree.point_leaf(i);
  for (std::size_t j = 0; j < B.size(); ++j) dst[j] = tree.point_leaf(A.size() + j);
  return bottom_up_tree_matching(tree.tree(), src, A.weights(), dst, B.weights());
}

struct PlanValue {
  double value = 0.0;
  FlowPlan plan;
};

inline Matrix stack_rows(const Matrix& top, const Matrix& bottom) {
  if (top.cols() != bottom.cols()) throw DimensionError("point sets differ in dimension");
  Matrix out(top.rows() + bottom.rows(), top.cols());
  std::copy(top.data().begin(), top.data().end(), out.data().begin());
  std::copy(bottom.data().begin(), bottom.data().end(),
            out.data().begin() + static_cast<std::ptrdiff_t>(top.data().size()));
  return out;
}

/// FlowTree: quadtree over the union of both sets, tree-optimal plan by
/// bottom-up matching, priced with Euclidean distances.
inline PlanValue flowtree(const WeightedPointSet& A, const WeightedPointSet& B,
                          std::uint64_t seed = 0) {
  const QuadTree qt(stack_rows(A.points(), B.points()), seed);
  PlanValue out;
  out.plan = bottom_up_tree_matching(qt, A, B);
  out.value = transport_cost(out.plan, A, B);
  return out;
}

/// Tree Wasserstein distance on the quadtree embedding of both sets.
inline double twd(const WeightedPointSet& A, const WeightedPointSet& B, std::uint64_t seed = 0) {
  const QuadTree qt(stack_rows(A.points(), B.points()), seed);
  const std::size_t m = A.size();
  const std::size_t n = B.size();
  std::vector<int> leaves(m + n);
  std::vector<double> wa(m + n, 0.0), wb(m + n, 0.0);
  for (std::size_t k = 0; k < m + n; ++k) leaves[k] = qt.point_leaf(k);
  std::copy(A.weights().begin(), A.weights().end(), wa.begin());
  std::copy(B.weights().begin(), B.weights().end(), wb.begin() + static_cast<std::ptrdiff_t>(m));
  return twd_closed_form(qt.tree(), leaves, wa, wb);
}

namespace detail {

inline double price_rows(const FlowPlan& plan, const Matrix& zu, const Matrix& zv) {
  double total = 0.0;
  for (const auto& e : plan.entries()) total += e.mass * euclidean(zu.row(e.row), zv.row(e.col));
  return total;
}

}  // namespace detail

/// Fast FlowTree on an augmented label tree. All cross-class sample pairs
/// are equidistant in the tree, so the tree-optimal plan is the greedy
/// matching of the stored weights in sample order; only the distances on
/// its at most m + n - 1 entries are computed.
inline PlanValue fast_flowtree(const AugmentedTree& tree, const std::string& u,
                               const std::string& v, const Matrix& zu, const Matrix& zv) {
  const auto& a = tree.weights(u);
  const auto& b = tree.weights(v);
  if (zu.rows() != a.size() || zv.rows() != b.size()) {
    throw DimensionError("feature rows differ from the stored sample counts");
  }
  if (zu.cols() != zv.cols()) throw DimensionError("feature matrices differ in dimension");
  PlanValue out;
  out.plan = greedy_flow_matching(a, b);
  out.value = detail::price_rows(out.plan, zu, zv);
  return out;
}

/// Fast FlowTree for two weighted sets, as on any augmented tree holding
/// them as two distinct classes.
inline PlanValue fast_flowtree(const WeightedPointSet& A, const WeightedPointSet& B) {
  if (A.dim() != B.dim()) throw DimensionError("point sets differ in dimension");
  PlanValue out;
  out.plan = greedy_flow_matching(A.weights(), B.weights());
  out.value = detail::price_rows(out.plan, A.points(), B.points());
  return out;
}

}  // namespace otcpcc
