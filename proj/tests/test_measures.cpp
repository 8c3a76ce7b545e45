#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "otcpcc/greedy.hpp"
#include "otcpcc/measures.hpp"
#include "support/instances.hpp"

using namespace otcpcc;

namespace {

WeightedPointSet pts(std::vector<std::vector<double>> rows) {
  return WeightedPointSet(Matrix::from_rows(rows));
}

}  // namespace

TEST(CostMatrix, SinglePointIdentity) {
  const auto d = cost_matrix(pts({{0, 0}}), pts({{0, 0}}));
  ASSERT_EQ(d.rows(), 1u);
  EXPECT_EQ(d(0, 0), 0.0);
}

TEST(CostMatrix, ThreeFourFive) {
  EXPECT_DOUBLE_EQ(cost_matrix(pts({{0, 0}}), pts({{3, 4}}))(0, 0), 5.0);
}

TEST(CostMatrix, OneDimensionalHandComputed) {
  const auto d = cost_matrix(pts({{0}, {1}}), pts({{2}, {3}}));
  EXPECT_EQ(d.entries(), Matrix::from_rows({{2, 3}, {1, 2}}));
}

TEST(CostMatrix, DimensionMismatchThrows) {
  EXPECT_THROW(cost_matrix(pts({{0, 0}}), pts({{0}})), DimensionError);
}

TEST(CostMatrix, NonFiniteCoordinateRejected) {
  EXPECT_THROW(pts({{0, NAN}}), DomainError);
  EXPECT_THROW(pts({{INFINITY}}), DomainError);
}

TEST(CostMatrix, SwapGivesTransposeAndRecomputes) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = oracle::random_set(rng, 1 + rng() % 7, 3, true);
    const auto b = oracle::random_set(rng, 1 + rng() % 7, 3, true);
    const auto ab = cost_matrix(a, b);
    const auto ba = cost_matrix(b, a);
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = 0; j < b.size(); ++j) {
        EXPECT_EQ(ab(i, j), ba(j, i));
        double s = 0.0;
        for (std::size_t k = 0; k < 3; ++k) s += std::pow(a.point(i)[k] - b.point(j)[k], 2);
        EXPECT_NEAR(ab(i, j), std::sqrt(s), kRecomputeTolerance);
        EXPECT_GE(ab(i, j), 0.0);
      }
    }
  }
}

TEST(WeightedPointSet, RenormalizesSmallDriftAndRejectsLarge) {
  const WeightedPointSet ok(Matrix(2, 1, {0.0, 1.0}), {0.5, 0.5 + 5e-7});
  EXPECT_NEAR(ok.weight(0) + ok.weight(1), 1.0, 1e-15);
  EXPECT_THROW(WeightedPointSet(Matrix(2, 1, {0.0, 1.0}), {0.5, 0.6}), DomainError);
  EXPECT_THROW(WeightedPointSet(Matrix(2, 1, {0.0, 1.0}), {1.5, -0.5}), DomainError);
  EXPECT_THROW(WeightedPointSet(Matrix(2, 1, {0.0, 1.0}), {1.0}), DimensionError);
}

TEST(WeightedPointSet, SinglePointAllowed) {
  const auto s = pts({{1.5, 2.5}});
  EXPECT_EQ(s.size(), 1u);
  EXPECT_EQ(s.weight(0), 1.0);
}

TEST(TransportCost, SingleEntry) {
  FlowPlan p(1, 1, {{0, 0, 1.0}});
  EXPECT_EQ(transport_cost(p, CostMatrix(Matrix(1, 1, {5.0}))), 5.0);
}

TEST(TransportCost, DiagonalOnIdenticalSetsIsZero) {
  const auto a = pts({{0, 0}, {1, 2}, {3, 1}});
  FlowPlan p(3, 3, {{0, 0, 1.0 / 3}, {1, 1, 1.0 / 3}, {2, 2, 1.0 / 3}});
  EXPECT_EQ(transport_cost(p, cost_matrix(a, a)), 0.0);
}

TEST(TransportCost, HandArithmetic) {
  FlowPlan p(2, 3, {{0, 0, 1.0 / 3}, {0, 1, 1.0 / 6}, {1, 1, 1.0 / 6}, {1, 2, 1.0 / 3}});
  const CostMatrix d(Matrix::from_rows({{2, 3, 4}, {1, 2, 3}}));
  EXPECT_NEAR(transport_cost(p, d), 2.5, 1e-15);
}

TEST(TransportCost, ShapeMismatchThrows) {
  FlowPlan p(2, 2, {{0, 0, 0.5}, {1, 1, 0.5}});
  EXPECT_THROW(transport_cost(p, CostMatrix(Matrix(1, 1, {5.0}))), DimensionError);
}

TEST(FlowPlan, RejectsDuplicatesAndNonPositiveMass) {
  EXPECT_THROW(FlowPlan(2, 2, {{0, 0, 0.5}, {0, 0, 0.5}}), DomainError);
  EXPECT_THROW(FlowPlan(2, 2, {{0, 0, 0.0}}), DomainError);
  EXPECT_THROW(FlowPlan(2, 2, {{2, 0, 0.5}}), DimensionError);
}

TEST(ValidatePlan, DiagonalUniformIsFeasible) {
  FlowPlan p(2, 2, {{0, 0, 0.5}, {1, 1, 0.5}});
  const std::vector<double> u{0.5, 0.5};
  const auto diag = validate_plan(p, u, u);
  EXPECT_TRUE(diag.feasible) << diag.message;
}

TEST(ValidatePlan, MissingMassNamesRow) {
  FlowPlan p(2, 2, {{0, 0, 0.4}, {1, 1, 0.5}});
  const std::vector<double> u{0.5, 0.5};
  const auto diag = validate_plan(p, u, u);
  EXPECT_FALSE(diag.feasible);
  EXPECT_EQ(diag.worst_row, 0u);
  EXPECT_NEAR(diag.worst_row_violation, 0.1, 1e-12);
  EXPECT_NE(diag.message.find("row 0"), std::string::npos);
}

TEST(ValidatePlan, GreedyOutputOnRandomSimplexPairs) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = oracle::random_simplex(rng, 1 + rng() % 20);
    const auto b = oracle::random_simplex(rng, 1 + rng() % 20);
    const auto plan = greedy_flow_matching(a, b);
    const auto diag = validate_plan(plan, a, b);
    EXPECT_TRUE(diag.feasible) << diag.message;
    EXPECT_TRUE(is_basic_sparse(plan));
  }
}
