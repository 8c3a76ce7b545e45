#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "otcpcc/cpcc.hpp"
#include "otcpcc/io.hpp"
#include "otcpcc/methods.hpp"
#include "otcpcc/random.hpp"

namespace otcpcc {

enum class Scenario { gaussian, mixture };

inline Scenario scenario_from_string(const std::string& s) {
  if (s == "gaussian") return Scenario::gaussian;
  if (s == "mixture") return Scenario::mixture;
  throw DomainError("unknown scenario '" + s + "' (expected gaussian or mixture)");
}

inline std::string to_string(Scenario s) { return s == Scenario::gaussian ? "gaussian" : "mixture"; }

/// Two synthetic point clouds. gaussian: isotropic normals whose mean is
/// mean_a (resp. mean_b) in every coordinate. mixture: each point picks
/// one of two equally likely components whose means are given per cloud.
struct SyntheticSpec {
  Scenario scenario = Scenario::gaussian;
  std::size_t dim = 128;
  double stddev = 1.0;
  double mean_a = 1.0;
  double mean_b = 4.0;
  std::pair<double, double> components_a{0.0, 5.0};
  std::pair<double, double> components_b{2.0, 3.0};

  void validate() const {
    if (dim == 0) throw DomainError("synthetic dimension must be positive");
    for (double x : {stddev, mean_a, mean_b, components_a.first, components_a.second,
                     components_b.first, components_b.second}) {
      if (!std::isfinite(x)) throw DomainError("synthetic parameters must be finite");
    }
    if (stddev < 0.0) throw DomainError("standard deviation must be non-negative");
  }
};

inline std::pair<WeightedPointSet, WeightedPointSet> generate_synthetic(const SyntheticSpec& spec,
                                                                        std::size_t n,
                                                                        std::uint64_t seed) {
  spec.validate();
  if (n == 0) throw DomainError("sample size must be positive");
  Rng rng = make_rng(seed, {hash_tag("synthetic"), n});
  std::normal_distribution<double> g(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  auto cloud = [&](double mean, std::pair<double, double> comps) {
    Matrix m(n, spec.dim);
    for (std::size_t i = 0; i < n; ++i) {
      double mu = mean;
      if (spec.scenario == Scenario::mixture) mu = coin(rng) ? comps.second : comps.first;
      for (std::size_t k = 0; k < spec.dim; ++k) m(i, k) = mu + spec.stddev * g(rng);
    }
    return WeightedPointSet(std::move(m));
  };
  auto a = cloud(spec.mean_a, spec.components_a);
  auto b = cloud(spec.mean_b, spec.components_b);
  return {std::move(a), std::move(b)};
}

struct BenchRecord {
  std::string method;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double seconds = 0.0;
  double value = 0.0;
  double abs_error = std::numeric_limits<double>::quiet_NaN();
  bool timed_out = false;
};

struct BenchOptions {
  std::size_t dim = 128;
  Scenario scenario = Scenario::gaussian;
  double budget_seconds = 60.0;  // per trial, and for each exact reference
  MethodParams params{};
  unsigned threads = 1;  // error study only; timing is always serial
};

namespace detail {

struct Timed {
  double seconds = 0.0;
  double value = 0.0;
  bool timed_out = false;
};

inline Timed timed_distance(Method m, const WeightedPointSet& a, const WeightedPointSet& b,
                            MethodParams params, double budget) {
  if (m == Method::emd) params.simplex.max_seconds = budget;
  const auto start = std::chrono::steady_clock::now();
  Timed t;
  try {
    t.value = compute_distance(m, a, b, params).value;
  } catch (const TimeoutError&) {
    t.timed_out = true;
  }
  t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (t.seconds > budget) t.timed_out = true;
  return t;
}

}  // namespace detail

/// Mean wall-clock time of one distance computation per (method, n).
/// Trial data comes from the stream (seed, method, n, trial). Each method
/// gets one unmeasured warm-up call. Trials over the budget are excluded
/// from the means; once every trial of a size times out, larger sizes of
/// that method are skipped.
inline std::vector<BenchRecord> bench_timing(const std::vector<Method>& methods,
                                             std::vector<std::size_t> sizes, int repeats,
                                             std::uint64_t seed, const BenchOptions& opt = {}) {
  if (methods.empty()) throw DomainError("no methods to benchmark");
  if (sizes.empty()) throw DomainError("no sizes to benchmark");
  if (repeats < 1) throw DomainError("repeats must be at least 1");
  std::sort(sizes.begin(), sizes.end());
  SyntheticSpec spec;
  spec.scenario = opt.scenario;
  spec.dim = opt.dim;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<BenchRecord> out;
  for (Method m : methods) {
    const auto tag = hash_tag(to_string(m));
    {
      const auto [a, b] = generate_synthetic(spec, sizes.front(), derive_seed(seed, {tag, 0, 0xffff}));
      detail::timed_distance(m, a, b, opt.params, opt.budget_seconds);
    }
    bool skip = false;
    for (std::size_t n : sizes) {
      BenchRecord rec{std::string(to_string(m)), n, seed, nan, nan, nan, true};
      if (!skip) {
        double secs = 0.0, vals = 0.0;
        int ok = 0;
        for (int trial = 0; trial < repeats; ++trial) {
          const auto [a, b] = generate_synthetic(
              spec, n, derive_seed(seed, {tag, n, static_cast<std::uint64_t>(trial)}));
          const auto t = detail::timed_distance(m, a, b, opt.params, opt.budget_seconds);
          if (t.timed_out) continue;
          secs += t.seconds;
          vals += t.value;
          ++ok;
        }
        if (ok > 0) {
          rec.seconds = secs / ok;
          rec.value = vals / ok;
          rec.timed_out = false;
        } else {
          skip = true;
        }
      }
      out.push_back(std::move(rec));
    }
  }
  return out;
}

/// Error of each method against the exact EMD on identical inputs. The
/// data of (n, seed) is shared by all methods; an l2 row is always added.
/// Instances whose exact reference exceeds the budget produce no rows.
inline std::vector<BenchRecord> bench_error(std::vector<Method> methods,
                                            const std::vector<std::size_t>& sizes,
                                            const std::vector<std::uint64_t>& seeds,
                                            const BenchOptions& opt = {}) {
  if (methods.empty()) throw DomainError("no methods to benchmark");
  if (sizes.empty() || seeds.empty()) throw DomainError("sizes and seeds must be non-empty");
  if (std::find(methods.begin(), methods.end(), Method::l2) == methods.end())
    methods.push_back(Method::l2);
  SyntheticSpec spec;
  spec.scenario = opt.scenario;
  spec.dim = opt.dim;
  std::vector<std::pair<std::size_t, std::uint64_t>> jobs;
  for (std::size_t n : sizes)
    for (std::uint64_t s : seeds) jobs.push_back({n, s});
  std::vector<std::vector<BenchRecord>> results(jobs.size());
  detail::parallel_for(jobs.size(), opt.threads, [&](std::size_t k) {
    const auto [n, s] = jobs[k];
    const auto [a, b] = generate_synthetic(spec, n, derive_seed(s, {hash_tag("error-study")}));
    const auto ref = detail::timed_distance(Method::emd, a, b, opt.params, opt.budget_seconds);
    if (ref.timed_out) return;
    for (Method m : methods) {
      BenchRecord rec{std::string(to_string(m)), n, s, 0.0, 0.0, 0.0, false};
      if (m == Method::emd) {
        rec.seconds = ref.seconds;
        rec.value = ref.value;
      } else {
        const auto t = detail::timed_distance(m, a, b, opt.params, opt.budget_seconds);
        rec.seconds = t.seconds;
        rec.value = t.value;
        rec.timed_out = t.timed_out;
        if (t.timed_out) rec.value = std::numeric_limits<double>::quiet_NaN();
      }
      rec.abs_error = std::abs(rec.value - ref.value);
      results[k].push_back(std::move(rec));
    }
  });
  std::vector<BenchRecord> out;
  for (auto& r : results)
    for (auto& rec : r) out.push_back(std::move(rec));
  return out;
}

inline void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records,
                            const std::vector<std::pair<std::string, std::string>>& meta = {}) {
  for (const auto& [k, v] : meta) out << "# " << k << ": " << v << '\n';
  out << "method,n,seed,seconds,value,abs_error\n";
  for (const auto& r : records) {
    out << r.method << ',' << r.n << ',' << r.seed << ',' << io::fmt(r.seconds) << ','
        << io::fmt(r.value) << ',' << io::fmt(r.abs_error) << '\n';
  }
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("slope needs at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += std::log(x[k]);
    my += std::log(y[k]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (std::log(x[k]) - mx) * (std::log(y[k]) - my);
    sxx += (std::log(x[k]) - mx) * (std::log(x[k]) - mx);
  }
  return sxy / sxx;
}

}  // namespace otcpcc
