#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "otcpcc/cpcc.hpp"
#include "otcpcc/random.hpp"

namespace otcpcc {

struct GradcheckResult {
  double max_relative_error = 0.0;  // max |analytic - fd| / max |fd|
  double max_abs_error = 0.0;
  double fd_scale = 0.0;
  std::size_t coordinates = 0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Compares the analytic dCPCC/dZ against central differences of the full
/// CPCC, recomputing every transport problem at each perturbed point.
inline GradcheckResult gradcheck(const ClassBatch& batch, const LabelTree& tree, Method method,
                                 const RhoOptions& opt = {}, double step = 1e-5,
                                 double tolerance = 1e-3) {
  if (!(step > 0.0)) throw DomainError("finite-difference step must be positive");
  const auto analytic = emd_cpcc_subgradient(batch, tree, method, opt);
  ClassBatch work = batch;
  // The cache would only ever return the same uniform plans; bypass it so
  // the forward path is exercised from scratch.
  RhoOptions fwd = opt;
  fwd.cache = nullptr;
  GradcheckResult res;
  res.tolerance = tolerance;
  std::vector<double> fd, an;
  for (std::size_t c = 0; c < work.size(); ++c) {
    Matrix& z = work.features(c);
    const Matrix& g = analytic.at(work.label(c));
    for (std::size_t i = 0; i < z.rows(); ++i) {
      for (std::size_t k = 0; k < z.cols(); ++k) {
        const double keep = z(i, k);
        z(i, k) = keep + step;
        const double up = compute_cpcc(work, tree, method, fwd).value;
        z(i, k) = keep - step;
        const double down = compute_cpcc(work, tree, method, fwd).value;
        z(i, k) = keep;
        fd.push_back((up - down) / (2.0 * step));
        an.push_back(g(i, k));
      }
    }
  }
  res.coordinates = fd.size();
  for (std::size_t q = 0; q < fd.size(); ++q) {
    res.fd_scale = std::max(res.fd_scale, std::abs(fd[q]));
    res.max_abs_error = std::max(res.max_abs_error, std::abs(fd[q] - an[q]));
  }
  res.max_relative_error = res.max_abs_error / std::max(res.fd_scale, 1e-300);
  if (res.fd_scale == 0.0 && res.max_abs_error == 0.0) res.max_relative_error = 0.0;
  res.passed = res.max_relative_error <= tolerance;
  return res;
}

struct GradcheckInstance {
  LabelTree tree;
  ClassBatch batch;
};

/// Three classes A, B, C under root -> {X -> {A, B}, C}, so the tree
/// distances are not all equal. Each class has between 1 and n samples
/// (exactly n when `fixed_size`), Gaussian around a random class center.
inline GradcheckInstance make_gradcheck_instance(std::size_t n, std::size_t d, std::uint64_t seed,
                                                 bool fixed_size = false) {
  if (n == 0 || d == 0) throw DomainError("gradcheck needs n >= 1 and d >= 1");
  GradcheckInstance inst;
  inst.tree.add(-1, "root", std::nullopt);
  const int x = inst.tree.add(0, "X", std::nullopt);
  inst.tree.add(x, "A", "A");
  inst.tree.add(x, "B", "B");
  inst.tree.add(0, "C", "C");
  inst.tree.finalize();
  Rng rng = make_rng(seed, {hash_tag("gradcheck")});
  std::normal_distribution<double> g(0.0, 1.0);
  for (const char* label : {"A", "B", "C"}) {
    const std::size_t m = fixed_size ? n : 1 + rng() % n;
    std::vector<double> center(d);
    for (auto& c : center) c = 3.0 * g(rng);
    Matrix z(m, d);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < d; ++k) z(i, k) = center[k] + g(rng);
    inst.batch.add(label, std::move(z));
  }
  return inst;
}

}  // namespace otcpcc
