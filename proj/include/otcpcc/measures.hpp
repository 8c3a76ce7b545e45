#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "otcpcc/error.hpp"

namespace otcpcc {

/// Marginal tolerance used by validate_plan.
inline constexpr double kMarginalTolerance = 1e-8;
/// Tolerance for recomputing a cost matrix entry.
inline constexpr double kRecomputeTolerance = 1e-12;
/// Largest deviation of a weight sum from 1 that constructors silently fix.
inline constexpr double kRenormalizeTolerance = 1e-6;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionError("matrix data size does not match its shape");
    }
  }

  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m.cols_) throw DimensionError("ragged matrix rows");
      std::copy(rows[i].begin(), rows[i].end(), m.row_begin(i));
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  double* row_begin(std::size_t i) { return data_.data() + i * cols_; }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double euclidean(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double diff = x[k] - y[k];
    s += diff * diff;
  }
  return std::sqrt(s);
}

namespace detail {

inline void require_simplex(std::vector<double>& w, const char* what) {
  double sum = 0.0;
  for (double x : w) {
    if (!std::isfinite(x) || x < 0.0) {
      throw DomainError(std::string(what) + ": weights must be finite and non-negative");
    }
    sum += x;
  }
  if (std::abs(sum - 1.0) > kRenormalizeTolerance) {
    std::ostringstream os;
    os << what << ": weights sum to " << sum << ", expected 1";
    throw DomainError(os.str());
  }
  if (sum != 1.0) {
    for (double& x : w) x /= sum;
  }
}

}  // namespace detail

/// Normalizes a weight vector that is already on the simplex up to
/// kRenormalizeTolerance; throws DomainError otherwise.
inline std::vector<double> simplex_weights(std::vector<double> w, const char* what = "weights") {
  if (w.empty()) throw DomainError(std::string(what) + ": empty weight vector");
  detail::require_simplex(w, what);
  return w;
}

inline std::vector<double> uniform_weights(std::size_t n) {
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

/// A discrete measure: n points in d dimensions with simplex weights.
class WeightedPointSet {
 public:
  WeightedPointSet() = default;

  /// Uniform weights.
  explicit WeightedPointSet(Matrix points)
      : WeightedPointSet(points, uniform_weights(points.rows())) {}

  WeightedPointSet(Matrix points, std::vector<double> weights)
      : points_(std::move(points)), weights_(std::move(weights)) {
    if (points_.rows() == 0 || points_.cols() == 0) {
      throw DimensionError("point set needs at least one point and one dimension");
    }
    if (weights_.size() != points_.rows()) {
      throw DimensionError("weight vector length differs from number of points");
    }
    for (double x : points_.data()) {
      if (!std::isfinite(x)) throw DomainError("point coordinates must be finite");
    }
    detail::require_simplex(weights_, "point set");
  }

  /// One-dimensional set from raw coordinates.
  static WeightedPointSet line(const std::vector<double>& xs) {
    return WeightedPointSet(Matrix(xs.size(), 1, xs));
  }
  static WeightedPointSet line(const std::vector<double>& xs, std::vector<double> weights) {
    return WeightedPointSet(Matrix(xs.size(), 1, xs), std::move(weights));
  }

  std::size_t size() const { return points_.rows(); }
  std::size_t dim() const { return points_.cols(); }
  const Matrix& points() const { return points_; }
  std::span<const double> point(std::size_t i) const { return points_.row(i); }
  const std::vector<double>& weights() const { return weights_; }
  double weight(std::size_t i) const { return weights_[i]; }

  /// Weighted mean of the points.
  std::vector<double> mean() const {
    std::vector<double> mu(dim(), 0.0);
    for (std::size_t i = 0; i < size(); ++i) {
      for (std::size_t k = 0; k < dim(); ++k) mu[k] += weights_[i] * points_(i, k);
    }
    return mu;
  }

  bool has_uniform_weights() const {
    const double u = 1.0 / static_cast<double>(size());
    return std::all_of(weights_.begin(), weights_.end(),
                       [u](double w) { return std::abs(w - u) <= 1e-12; });
  }

 private:
  Matrix points_;
  std::vector<double> weights_;
};

/// Distance between the weighted means; the lower bound of every
/// feasible transport cost.
inline double centroid_distance(const WeightedPointSet& a, const WeightedPointSet& b) {
  if (a.dim() != b.dim()) throw DimensionError("point sets differ in dimension");
  const auto ma = a.mean();
  const auto mb = b.mean();
  return euclidean(ma, mb);
}

enum class GroundMetric { euclidean };

/// Pairwise ground distances between two point sets.
class CostMatrix {
 public:
  CostMatrix() = default;
  explicit CostMatrix(Matrix entries) : entries_(std::move(entries)) {
    for (double x : entries_.data()) {
      if (!std::isfinite(x) || x < 0.0) throw DomainError("cost entries must be finite and >= 0");
    }
  }

  std::size_t rows() const { return entries_.rows(); }
  std::size_t cols() const { return entries_.cols(); }
  double operator()(std::size_t i, std::size_t j) const { return entries_(i, j); }
  const Matrix& entries() const { return entries_; }
  GroundMetric ground_metric() const { return GroundMetric::euclidean; }

  double max() const {
    const auto& d = entries_.data();
    return d.empty() ? 0.0 : *std::max_element(d.begin(), d.end());
  }

 private:
  Matrix entries_;
};

inline CostMatrix cost_matrix(const WeightedPointSet& a, const WeightedPointSet& b) {
  if (a.dim() != b.dim()) throw DimensionError("point sets differ in dimension");
  Matrix d(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto zi = a.point(i);
    for (std::size_t j = 0; j < b.size(); ++j) d(i, j) = euclidean(zi, b.point(j));
  }
  return CostMatrix(std::move(d));
}

struct FlowEntry {
  std::size_t row = 0;
  std::size_t col = 0;
  double mass = 0.0;

  bool operator==(const FlowEntry&) const = default;
};

/// Sparse transport plan stored as (row, col, mass) triplets.
class FlowPlan {
 public:
  FlowPlan() = default;
  FlowPlan(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {}
  FlowPlan(std::size_t rows, std::size_t cols, std::vector<FlowEntry> entries)
      : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    std::unordered_set<std::size_t> seen;
    seen.reserve(entries_.size());
    for (const auto& e : entries_) check_entry(e, seen);
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const std::vector<FlowEntry>& entries() const { return entries_; }
  std::size_t nonzeros() const { return entries_.size(); }

  /// Appends a new (row, col) pair; callers guarantee it is not present yet.
  void push(std::size_t i, std::size_t j, double mass) {
    if (i >= rows_ || j >= cols_) throw DimensionError("plan entry index out of bounds");
    if (!(mass > 0.0)) throw DomainError("plan masses must be strictly positive");
    entries_.push_back({i, j, mass});
  }

  FlowPlan transposed() const {
    FlowPlan t(cols_, rows_);
    t.entries_.reserve(entries_.size());
    for (const auto& e : entries_) t.entries_.push_back({e.col, e.row, e.mass});
    return t;
  }

  std::vector<double> row_sums() const {
    std::vector<double> r(rows_, 0.0);
    for (const auto& e : entries_) r[e.row] += e.mass;
    return r;
  }
  std::vector<double> col_sums() const {
    std::vector<double> c(cols_, 0.0);
    for (const auto& e : entries_) c[e.col] += e.mass;
    return c;
  }

  Matrix dense() const {
    Matrix m(rows_, cols_);
    for (const auto& e : entries_) m(e.row, e.col) += e.mass;
    return m;
  }

  bool operator==(const FlowPlan&) const = default;

 private:
  void check_entry(const FlowEntry& e, std::unordered_set<std::size_t>& seen) const {
    if (e.row >= rows_ || e.col >= cols_) throw DimensionError("plan entry index out of bounds");
    if (!(e.mass > 0.0) || !std::isfinite(e.mass)) {
      throw DomainError("plan masses must be finite and strictly positive");
    }
    if (!seen.insert(e.row * cols_ + e.col).second) throw DomainError("duplicate plan entry");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<FlowEntry> entries_;
};

/// <P, D> over the sparse entries of P.
inline double transport_cost(const FlowPlan& plan, const CostMatrix& cost) {
  if (plan.rows() != cost.rows() || plan.cols() != cost.cols()) {
    throw DimensionError("plan and cost matrix shapes differ");
  }
  double total = 0.0;
  for (const auto& e : plan.entries()) {
    if (e.row >= cost.rows() || e.col >= cost.cols()) {
      throw DimensionError("plan entry index out of bounds");
    }
    total += e.mass * cost(e.row, e.col);
  }
  return total;
}

/// <P, D> where only the distances on the support of P are evaluated.
inline double transport_cost(const FlowPlan& plan, const WeightedPointSet& a,
                             const WeightedPointSet& b) {
  if (plan.rows() != a.size() || plan.cols() != b.size()) {
    throw DimensionError("plan shape differs from point set sizes");
  }
  double total = 0.0;
  for (const auto& e : plan.entries()) total += e.mass * euclidean(a.point(e.row), b.point(e.col));
  return total;
}

struct PlanDiagnostics {
  bool feasible = false;
  double tolerance = kMarginalTolerance;
  double worst_row_violation = 0.0;
  std::size_t worst_row = 0;
  double worst_col_violation = 0.0;
  std::size_t worst_col = 0;
  std::string message;

  explicit operator bool() const { return feasible; }
};

/// Checks both marginal constraints of a plan; never throws on infeasible
/// plans, the diagnostics name the worst row and column instead.
inline PlanDiagnostics validate_plan(const FlowPlan& plan, std::span<const double> a,
                                     std::span<const double> b,
                                     double tolerance = kMarginalTolerance) {
  PlanDiagnostics diag;
  diag.tolerance = tolerance;
  if (plan.rows() != a.size() || plan.cols() != b.size()) {
    diag.message = "shape mismatch between plan and marginals";
    return diag;
  }
  const auto r = plan.row_sums();
  const auto c = plan.col_sums();
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double v = std::abs(r[i] - a[i]);
    if (v > diag.worst_row_violation) {
      diag.worst_row_violation = v;
      diag.worst_row = i;
    }
  }
  for (std::size_t j = 0; j < c.size(); ++j) {
    const double v = std::abs(c[j] - b[j]);
    if (v > diag.worst_col_violation) {
      diag.worst_col_violation = v;
      diag.worst_col = j;
    }
  }
  bool negative = false;
  for (const auto& e : plan.entries()) negative = negative || !(e.mass >= 0.0);
  diag.feasible = !negative && diag.worst_row_violation <= tolerance &&
                  diag.worst_col_violation <= tolerance;
  std::ostringstream os;
  if (diag.feasible) {
    os << "plan feasible";
  } else if (negative) {
    os << "plan has negative masses";
  } else {
    os << "row " << diag.worst_row << " off by " << diag.worst_row_violation << ", column "
       << diag.worst_col << " off by " << diag.worst_col_violation << " (tolerance " << tolerance
       << ")";
  }
  diag.message = os.str();
  return diag;
}

/// True when the plan has at most rows + cols - 1 non-zeros.
inline bool is_basic_sparse(const FlowPlan& plan) {
  return plan.nonzeros() + 1 <= plan.rows() + plan.cols();
}

}  // namespace otcpcc
