#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "otcpcc/greedy.hpp"
#include "otcpcc/measures.hpp"
#include "otcpcc/methods.hpp"
#include "otcpcc/trees.hpp"

namespace otcpcc {

// ---------------------------------------------------------------------------
// Flow weights

enum class FlowScheme { uniform, dist, inv };

inline FlowScheme flow_scheme_from_string(const std::string& s) {
  if (s == "uniform") return FlowScheme::uniform;
  if (s == "dist") return FlowScheme::dist;
  if (s == "inv") return FlowScheme::inv;
  throw DomainError("unknown flow-weight scheme '" + s + "' (expected uniform, dist or inv)");
}

/// Per-sample weights of one class. dist and inv take a softmax of the
/// distance (resp. negated distance) of every sample to the class mean.
inline std::vector<double> flow_weights(const Matrix& z, FlowScheme scheme) {
  const std::size_t n = z.rows();
  if (n == 0) throw DimensionError("flow weights need at least one sample");
  if (scheme == FlowScheme::uniform) return uniform_weights(n);
  std::vector<double> mu(z.cols(), 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < z.cols(); ++k) mu[k] += z(i, k);
  for (auto& x : mu) x /= static_cast<double>(n);
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = euclidean(z.row(i), mu);
    s[i] = scheme == FlowScheme::dist ? r : -r;
  }
  const double hi = *std::max_element(s.begin(), s.end());
  double total = 0.0;
  for (auto& x : s) {
    x = std::exp(x - hi);
    total += x;
  }
  for (auto& x : s) x /= total;
  return s;
}

// ---------------------------------------------------------------------------
// Class batches

/// Features of the classes present in one batch, in order of first
/// appearance, each with its flow weights.
class ClassBatch {
 public:
  ClassBatch() = default;

  void add(std::string label, Matrix features, std::optional<std::vector<double>> weights = {}) {
    if (index_.count(label)) throw DomainError("class '" + label + "' added twice");
    if (features.rows() == 0) throw DimensionError("class '" + label + "' has no samples");
    if (!features_.empty() && features.cols() != features_.front().cols()) {
      throw DimensionError("class '" + label + "' differs in feature dimension");
    }
    std::vector<double> w = weights ? simplex_weights(std::move(*weights), "flow weights")
                                    : uniform_weights(features.rows());
    if (w.size() != features.rows()) {
      throw DimensionError("class '" + label + "' has " + std::to_string(features.rows()) +
                           " samples but " + std::to_string(w.size()) + " weights");
    }
    // Validates coordinates.
    WeightedPointSet check(features, w);
    index_[label] = labels_.size();
    labels_.push_back(std::move(label));
    features_.push_back(std::move(features));
    weights_.push_back(std::move(w));
  }

  /// Groups labelled rows by class.
  static ClassBatch from_samples(const std::vector<std::string>& labels, const Matrix& z,
                                 FlowScheme scheme = FlowScheme::uniform) {
    if (labels.size() != z.rows()) throw DimensionError("one label per feature row is required");
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::size_t>> rows;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      auto [it, fresh] = rows.try_emplace(labels[i]);
      if (fresh) order.push_back(labels[i]);
      it->second.push_back(i);
    }
    ClassBatch batch;
    for (const auto& label : order) {
      const auto& idx = rows[label];
      Matrix f(idx.size(), z.cols());
      for (std::size_t r = 0; r < idx.size(); ++r)
        std::copy(z.row(idx[r]).begin(), z.row(idx[r]).end(), f.row(r).begin());
      auto w = flow_weights(f, scheme);
      batch.add(label, std::move(f), std::move(w));
    }
    return batch;
  }

  std::size_t size() const { return labels_.size(); }
  std::size_t dim() const { return features_.empty() ? 0 : features_.front().cols(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(std::size_t c) const { return labels_[c]; }
  std::size_t index(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) throw DomainError("class '" + label + "' is not in the batch");
    return it->second;
  }
  const Matrix& features(std::size_t c) const { return features_[c]; }
  Matrix& features(std::size_t c) { return features_[c]; }
  const std::vector<double>& weights(std::size_t c) const { return weights_[c]; }
  WeightedPointSet point_set(std::size_t c) const { return WeightedPointSet(features_[c], weights_[c]); }

 private:
  std::vector<std::string> labels_;
  std::vector<Matrix> features_;
  std::vector<std::vector<double>> weights_;
  std::map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Plan cache

/// Greedy plans between uniform marginals, keyed by (m, n). Safe for
/// concurrent lookups; racing writers store identical plans.
class PlanCache {
 public:
  FlowPlan lookup(std::size_t m, std::size_t n) {
    const auto key = std::minmax(m, n);
    {
      std::shared_lock lock(mutex_);
      auto it = plans_.find(key);
      if (it != plans_.end()) {
        hits_.fetch_add(1, std::memory_order_relaxed);
        return m <= n ? it->second : it->second.transposed();
      }
    }
    misses_.fetch_add(1, std::memory_order_relaxed);
    FlowPlan plan = greedy_flow_matching(uniform_weights(key.first), uniform_weights(key.second));
    {
      std::unique_lock lock(mutex_);
      plans_.insert_or_assign(key, plan);
    }
    return m <= n ? plan : plan.transposed();
  }

  std::size_t hits() const { return hits_.load(); }
  std::size_t misses() const { return misses_.load(); }
  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return plans_.size();
  }

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::pair<std::size_t, std::size_t>, FlowPlan> plans_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

// ---------------------------------------------------------------------------
// Pairwise class distances

struct RhoOptions {
  MethodParams method{};
  unsigned threads = 1;
  PlanCache* cache = nullptr;  // used by fastft when both classes are uniform
};

struct PairTransport {
  std::size_t u = 0;  // batch indices, u < v
  std::size_t v = 0;
  Distance distance;
};

namespace detail {

inline bool is_uniform(const std::vector<double>& w) {
  const double x = 1.0 / static_cast<double>(w.size());
  for (double y : w)
    if (std::abs(y - x) > 1e-15) return false;
  return true;
}

template <class F>
void parallel_for(std::size_t count, unsigned threads, F&& body) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t k = 0; k < count; ++k) body(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  const unsigned n = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  for (unsigned t = 0; t < n; ++t) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < count; k = next++) {
        try {
          body(k);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// Class distance and transport details for every unordered pair of
/// batch classes, in batch order. fastft needs the label tree.
inline std::vector<PairTransport> pairwise_transport(const ClassBatch& batch, Method method,
                                                     const LabelTree* tree,
                                                     const RhoOptions& opt = {}) {
  if (batch.size() < 2) throw DomainError("at least two classes are needed");
  std::optional<AugmentedTree> aug;
  if (tree) {
    for (const auto& label : batch.labels()) {
      if (!tree->has_label(label)) throw DomainError("class '" + label + "' is not a leaf of the tree");
    }
  }
  if (method == Method::fastft) {
    if (!tree) throw DomainError("the fastft backend requires a label tree");
    std::map<std::string, std::vector<double>> w;
    for (std::size_t c = 0; c < batch.size(); ++c) w[batch.label(c)] = batch.weights(c);
    aug.emplace(*tree, std::move(w));
  }
  std::vector<PairTransport> pairs;
  for (std::size_t u = 0; u < batch.size(); ++u)
    for (std::size_t v = u + 1; v < batch.size(); ++v) pairs.push_back({u, v, {}});

  detail::parallel_for(pairs.size(), opt.threads, [&](std::size_t k) {
    auto& p = pairs[k];
    if (method == Method::fastft) {
      const auto& zu = batch.features(p.u);
      const auto& zv = batch.features(p.v);
      if (opt.cache && detail::is_uniform(batch.weights(p.u)) && detail::is_uniform(batch.weights(p.v))) {
        FlowPlan plan = opt.cache->lookup(zu.rows(), zv.rows());
        p.distance.value = detail::price_rows(plan, zu, zv);
        p.distance.plans.push_back(std::move(plan));
      } else {
        auto r = fast_flowtree(*aug, batch.label(p.u), batch.label(p.v), zu, zv);
        p.distance.value = r.value;
        p.distance.plans.push_back(std::move(r.plan));
      }
    } else {
      p.distance = compute_distance(method, batch.point_set(p.u), batch.point_set(p.v), opt.method);
    }
  });
  return pairs;
}

using PairValues = std::map<std::pair<std::string, std::string>, double>;

inline PairValues pairwise_rho(const ClassBatch& batch, Method method, const LabelTree* tree,
                               const RhoOptions& opt = {}) {
  PairValues out;
  for (const auto& p : pairwise_transport(batch, method, tree, opt))
    out[{batch.label(p.u), batch.label(p.v)}] = p.distance.value;
  return out;
}

// ---------------------------------------------------------------------------
// CPCC

struct Pearson {
  double value = 0.0;
  bool degenerate = false;
};

/// Variances at or below (this * largest magnitude)^2 count as zero.
inline constexpr double kDegenerateScale = 1e-12;

namespace detail {

struct Centered {
  std::vector<double> t, r;
  double stt = 0.0, srr = 0.0, str = 0.0;
  bool degenerate = false;
};

inline Centered center(std::span<const double> t, std::span<const double> r) {
  if (t.size() != r.size()) throw DimensionError("value lists differ in length");
  if (t.size() < 2) throw DomainError("cpcc needs at least two pairs");
  for (std::size_t p = 0; p < t.size(); ++p) {
    if (!std::isfinite(t[p]) || !std::isfinite(r[p])) throw DomainError("cpcc inputs must be finite");
  }
  Centered c;
  const double n = static_cast<double>(t.size());
  double mt = 0.0, mr = 0.0, at = 0.0, ar = 0.0;
  for (std::size_t p = 0; p < t.size(); ++p) {
    mt += t[p];
    mr += r[p];
    at = std::max(at, std::abs(t[p]));
    ar = std::max(ar, std::abs(r[p]));
  }
  mt /= n;
  mr /= n;
  for (std::size_t p = 0; p < t.size(); ++p) {
    c.t.push_back(t[p] - mt);
    c.r.push_back(r[p] - mr);
    c.stt += c.t.back() * c.t.back();
    c.srr += c.r.back() * c.r.back();
    c.str += c.t.back() * c.r.back();
  }
  const auto tiny = [&](double s, double scale) {
    const double e = kDegenerateScale * scale;
    return s <= e * e * n;
  };
  c.degenerate = tiny(c.stt, at) || tiny(c.srr, ar);
  return c;
}

}  // namespace detail

/// Pearson correlation of two equally long lists; 0 with the degenerate
/// flag when either list has no spread.
inline Pearson pearson(std::span<const double> t, std::span<const double> r) {
  const auto c = detail::center(t, r);
  if (c.degenerate) return {0.0, true};
  return {std::clamp(c.str / std::sqrt(c.stt * c.srr), -1.0, 1.0), false};
}

/// dCPCC/drho for each pair; zero when degenerate.
inline std::vector<double> pearson_gradient(std::span<const double> t, std::span<const double> r) {
  const auto c = detail::center(t, r);
  std::vector<double> g(t.size(), 0.0);
  if (c.degenerate) return g;
  const double root = std::sqrt(c.stt * c.srr);
  const double value = c.str / root;
  for (std::size_t p = 0; p < g.size(); ++p) g[p] = c.t[p] / root - value * c.r[p] / c.srr;
  return g;
}

inline Pearson cpcc(const PairValues& t, const PairValues& rho) {
  if (t.size() != rho.size()) throw DomainError("tree and feature pair sets differ");
  std::vector<double> tv, rv;
  for (const auto& [key, value] : t) {
    auto it = rho.find(key);
    if (it == rho.end()) {
      throw DomainError("pair (" + key.first + ", " + key.second + ") has no feature distance");
    }
    tv.push_back(value);
    rv.push_back(it->second);
  }
  return pearson(tv, rv);
}

struct PairRecord {
  std::string u, v;
  double t = 0.0;
  double rho = 0.0;
};

struct CpccResult {
  double value = 0.0;
  bool degenerate = false;
  Method backend = Method::l2;
  std::vector<PairRecord> pairs;
  /// dCPCC/dZ_c per class label, when requested.
  std::optional<std::map<std::string, Matrix>> gradients;
};

namespace detail {

// Adds coef * drho/dZ for one pair, with the plans held fixed.
inline void accumulate_pair_gradient(Method method, const ClassBatch& batch, const PairTransport& p,
                                     double coef, Matrix& gu, Matrix& gv) {
  const Matrix& zu = batch.features(p.u);
  const Matrix& zv = batch.features(p.v);
  const std::size_t d = zu.cols();
  std::vector<double> diff(d);
  switch (method) {
    case Method::l2: {
      const auto& wu = batch.weights(p.u);
      const auto& wv = batch.weights(p.v);
      std::fill(diff.begin(), diff.end(), 0.0);
      for (std::size_t i = 0; i < zu.rows(); ++i)
        for (std::size_t k = 0; k < d; ++k) diff[k] += wu[i] * zu(i, k);
      for (std::size_t j = 0; j < zv.rows(); ++j)
        for (std::size_t k = 0; k < d; ++k) diff[k] -= wv[j] * zv(j, k);
      double norm = 0.0;
      for (double x : diff) norm += x * x;
      norm = std::sqrt(norm);
      if (norm == 0.0) return;
      for (std::size_t i = 0; i < zu.rows(); ++i)
        for (std::size_t k = 0; k < d; ++k) gu(i, k) += coef * wu[i] * diff[k] / norm;
      for (std::size_t j = 0; j < zv.rows(); ++j)
        for (std::size_t k = 0; k < d; ++k) gv(j, k) -= coef * wv[j] * diff[k] / norm;
      return;
    }
    case Method::swd: {
      const double scale = coef / static_cast<double>(p.distance.plans.size());
      for (std::size_t q = 0; q < p.distance.plans.size(); ++q) {
        const auto& theta = p.distance.directions[q];
        for (const auto& e : p.distance.plans[q].entries()) {
          double s = 0.0;
          for (std::size_t k = 0; k < d; ++k) s += theta[k] * (zu(e.row, k) - zv(e.col, k));
          if (s == 0.0) continue;
          const double sign = s > 0.0 ? 1.0 : -1.0;
          for (std::size_t k = 0; k < d; ++k) {
            gu(e.row, k) += scale * e.mass * sign * theta[k];
            gv(e.col, k) -= scale * e.mass * sign * theta[k];
          }
        }
      }
      return;
    }
    case Method::twd:
      throw DomainError("no subgradient is provided for the twd backend");
    default:
      break;
  }
  for (const auto& e : p.distance.plans.front().entries()) {
    double norm = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      diff[k] = zu(e.row, k) - zv(e.col, k);
      norm += diff[k] * diff[k];
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;  // subgradient choice at coincident points
    for (std::size_t k = 0; k < d; ++k) {
      const double g = coef * e.mass * diff[k] / norm;
      gu(e.row, k) += g;
      gv(e.col, k) -= g;
    }
  }
}

}  // namespace detail

/// CPCC between the label-tree metric and the chosen class distance over
/// all class pairs of the batch; optionally with dCPCC/dZ for each class.
inline CpccResult compute_cpcc(const ClassBatch& batch, const LabelTree& tree, Method method,
                               const RhoOptions& opt = {}, bool with_gradient = false) {
  const auto pairs = pairwise_transport(batch, method, &tree, opt);
  CpccResult res;
  res.backend = method;
  std::vector<double> tv, rv;
  for (const auto& p : pairs) {
    const double t = tree.distance(batch.label(p.u), batch.label(p.v));
    res.pairs.push_back({batch.label(p.u), batch.label(p.v), t, p.distance.value});
    tv.push_back(t);
    rv.push_back(p.distance.value);
  }
  const auto pr = pearson(tv, rv);
  res.value = pr.value;
  res.degenerate = pr.degenerate;
  if (with_gradient) {
    if (method == Method::twd) throw DomainError("no subgradient is provided for the twd backend");
    const auto coef = pearson_gradient(tv, rv);
    std::vector<Matrix> grads;
    for (std::size_t c = 0; c < batch.size(); ++c)
      grads.emplace_back(batch.features(c).rows(), batch.features(c).cols());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      if (coef[k] == 0.0) continue;
      detail::accumulate_pair_gradient(method, batch, pairs[k], coef[k], grads[pairs[k].u],
                                       grads[pairs[k].v]);
    }
    res.gradients.emplace();
    for (std::size_t c = 0; c < batch.size(); ++c) (*res.gradients)[batch.label(c)] = std::move(grads[c]);
  }
  return res;
}

/// dCPCC/dZ per class with every transport plan held constant.
inline std::map<std::string, Matrix> emd_cpcc_subgradient(const ClassBatch& batch,
                                                          const LabelTree& tree, Method method,
                                                          const RhoOptions& opt = {}) {
  return *compute_cpcc(batch, tree, method, opt, true).gradients;
}

/// ce_loss + lambda * (-cpcc): a positive lambda rewards a higher CPCC.
inline double regularized_loss(double ce_loss, double lambda, double cpcc_value) {
  return ce_loss + lambda * (-cpcc_value);
}

inline double cpcc_regularized_loss(const ClassBatch& batch, const LabelTree& tree, Method method,
                                    double lambda, double ce_loss, const RhoOptions& opt = {}) {
  if (lambda == 0.0) return ce_loss;
  return regularized_loss(ce_loss, lambda, compute_cpcc(batch, tree, method, opt).value);
}

}  // namespace otcpcc
