#pragma once

// One entry point for every class-distance method, shared by the CPCC
// backends, the benchmark harness and the command line.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "otcpcc/measures.hpp"
#include "otcpcc/network_simplex.hpp"
#include "otcpcc/ot_approx.hpp"
#include "otcpcc/ot_exact.hpp"

namespace otcpcc {

enum class Method { l2, emd, sinkhorn, swd, twd, flowtree, fastft };

inline constexpr std::array<Method, 7> kAllMethods{Method::l2,   Method::emd,      Method::sinkhorn,
                                                   Method::swd,  Method::twd,      Method::flowtree,
                                                   Method::fastft};

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::l2: return "l2";
    case Method::emd: return "emd";
    case Method::sinkhorn: return "sinkhorn";
    case Method::swd: return "swd";
    case Method::twd: return "twd";
    case Method::flowtree: return "flowtree";
    case Method::fastft: return "fastft";
  }
  return "?";
}

inline std::optional<Method> parse_method(std::string_view name) {
  for (Method m : kAllMethods)
    if (to_string(m) == name) return m;
  return std::nullopt;
}

inline Method method_from_string(std::string_view name) {
  if (auto m = parse_method(name)) return *m;
  throw DomainError("unknown method '" + std::string(name) +
                    "' (expected l2, emd, sinkhorn, swd, twd, flowtree or fastft)");
}

/// Methods whose value is the cost of an explicit transport plan.
inline bool produces_plan(Method m) {
  return m == Method::emd || m == Method::sinkhorn || m == Method::flowtree || m == Method::fastft;
}

struct MethodParams {
  SinkhornOptions sinkhorn{};
  int projections = 10;
  std::uint64_t seed = 0;
  SimplexOptions simplex{};
};

struct Distance {
  double value = 0.0;
  /// The plan for plan-producing methods; one 1d plan per direction for swd.
  std::vector<FlowPlan> plans;
  std::vector<std::vector<double>> directions;  // swd only
  bool converged = true;                        // sinkhorn only
};

/// fastft here works on the two weight vectors directly, which is what it
/// computes on any augmented label tree holding A and B as two classes.
inline Distance compute_distance(Method m, const WeightedPointSet& A, const WeightedPointSet& B,
                                 const MethodParams& p = {}) {
  if (A.dim() != B.dim()) throw DimensionError("point sets differ in dimension");
  Distance out;
  switch (m) {
    case Method::l2:
      out.value = centroid_distance(A, B);
      break;
    case Method::emd: {
      auto r = emd_exact(A, B, p.simplex);
      out.value = r.value;
      out.plans.push_back(std::move(r.plan));
      break;
    }
    case Method::sinkhorn: {
      auto r = sinkhorn(A, B, p.sinkhorn);
      out.value = r.value;
      out.converged = r.converged;
      out.plans.push_back(std::move(r.plan));
      break;
    }
    case Method::swd: {
      auto r = sliced_wasserstein(A, B, p.projections, p.seed);
      out.value = r.value;
      out.plans = std::move(r.plans);
      out.directions = std::move(r.directions);
      break;
    }
    case Method::twd:
      out.value = twd(A, B, p.seed);
      break;
    case Method::flowtree: {
      auto r = flowtree(A, B, p.seed);
      out.value = r.value;
      out.plans.push_back(std::move(r.plan));
      break;
    }
    case Method::fastft: {
      auto r = fast_flowtree(A, B);
      out.value = r.value;
      out.plans.push_back(std::move(r.plan));
      break;
    }
  }
  return out;
}

}  // namespace otcpcc
