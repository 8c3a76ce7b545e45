#pragma once

// Test-only reference solvers for the transport LP. They share no code
// with the library's solvers.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace otcpcc::oracle {

/// Successive shortest paths (Bellman-Ford) on the residual graph of the
/// bipartite transport network. Returns the optimal <P, D>.
inline double min_cost_flow_oracle(const std::vector<double>& a, const std::vector<double>& b,
                                   const std::vector<std::vector<double>>& cost) {
  const int m = static_cast<int>(a.size());
  const int n = static_cast<int>(b.size());
  const int s = m + n;
  const int t = m + n + 1;
  const int nodes = m + n + 2;
  struct Arc {
    int to;
    double cap;
    double cost;
    int rev;
  };
  std::vector<std::vector<Arc>> g(nodes);
  auto add = [&](int u, int v, double cap, double c) {
    g[u].push_back({v, cap, c, static_cast<int>(g[v].size())});
    g[v].push_back({u, 0.0, -c, static_cast<int>(g[u].size()) - 1});
  };
  for (int i = 0; i < m; ++i) add(s, i, a[i], 0.0);
  for (int j = 0; j < n; ++j) add(m + j, t, b[j], 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) add(i, m + j, 2.0, cost[i][j]);

  const double inf = std::numeric_limits<double>::infinity();
  double total = 0.0;
  while (true) {
    std::vector<double> dist(nodes, inf);
    std::vector<int> pv(nodes, -1), pe(nodes, -1);
    dist[s] = 0.0;
    for (int it = 0; it < nodes; ++it) {
      bool changed = false;
      for (int u = 0; u < nodes; ++u) {
        if (dist[u] == inf) continue;
        for (int k = 0; k < static_cast<int>(g[u].size()); ++k) {
          const Arc& e = g[u][k];
          if (e.cap > 1e-14 && dist[u] + e.cost < dist[e.to] - 1e-14) {
            dist[e.to] = dist[u] + e.cost;
            pv[e.to] = u;
            pe[e.to] = k;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    if (dist[t] == inf) break;
    double push = inf;
    for (int v = t; v != s; v = pv[v]) push = std::min(push, g[pv[v]][pe[v]].cap);
    for (int v = t; v != s; v = pv[v]) {
      Arc& e = g[pv[v]][pe[v]];
      e.cap -= push;
      g[v][e.rev].cap += push;
    }
    total += push * dist[t];
  }
  return total;
}

/// Brute force over permutation plans; optimal for uniform m == n inputs
/// (Birkhoff-von Neumann).
inline double permutation_oracle(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += cost[i][perm[i]];
    best = std::min(best, s / n);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Textbook raw-sum form n*Sxy - Sx*Sy over the root of the two
// corresponding variance terms.
inline double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    syy += static_cast<long double>(y[i]) * y[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  const long double num = n * sxy - sx * sy;
  const long double den = std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
  return static_cast<double>(num / den);
}

}  // namespace otcpcc::oracle
