#pragma once

// Test-only helpers: random trees and all-pairs shortest paths computed
// with Floyd-Warshall on the undirected edge list, independent of the
// library's LCA code.

#include <limits>
#include <random>
#include <string>
#include <vector>

#include "otcpcc/trees.hpp"

namespace otcpcc::oracle {

inline std::vector<std::vector<double>> all_pairs_paths(const RootedTree& t) {
  const std::size_t n = t.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, inf));
  for (std::size_t v = 0; v < n; ++v) {
    d[v][v] = 0.0;
    const int p = t.parent[v];
    if (p >= 0) {
      d[v][static_cast<std::size_t>(p)] = t.edge_weight[v];
      d[static_cast<std::size_t>(p)][v] = t.edge_weight[v];
    }
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
  return d;
}

/// Random label tree with `leaves` labelled leaves c0, c1, ... Every
/// internal node gets at least one child; weights are integers in [1, 4]
/// unless `unit` is set.
inline LabelTree random_label_tree(std::mt19937_64& rng, std::size_t leaves, bool unit = false) {
  // Grow a random rooted tree by attaching each new node to an earlier
  // one, then label whichever nodes end up childless.
  const std::size_t extra = leaves + rng() % (leaves + 1);
  std::vector<int> parent{-1};
  std::vector<double> weight{0.0};
  while (true) {
    parent.assign(1, -1);
    weight.assign(1, 0.0);
    for (std::size_t v = 1; v <= extra; ++v) {
      parent.push_back(static_cast<int>(rng() % v));
      weight.push_back(unit ? 1.0 : static_cast<double>(1 + rng() % 4));
    }
    std::vector<int> kids(parent.size(), 0);
    for (std::size_t v = 1; v < parent.size(); ++v) ++kids[static_cast<std::size_t>(parent[v])];
    std::size_t nleaf = 0;
    for (int k : kids) nleaf += k == 0 ? 1 : 0;
    if (nleaf >= 2) break;
  }
  std::vector<int> kids(parent.size(), 0);
  for (std::size_t v = 1; v < parent.size(); ++v) ++kids[static_cast<std::size_t>(parent[v])];
  LabelTree t;
  std::size_t next = 0;
  for (std::size_t v = 0; v < parent.size(); ++v) {
    std::optional<std::string> label;
    if (kids[v] == 0) label = "c" + std::to_string(next++);
    t.add(parent[v], "n" + std::to_string(v), label, weight[v]);
  }
  t.finalize();
  return t;
}

}  // namespace otcpcc::oracle
