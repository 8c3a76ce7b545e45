#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "otcpcc/trees.hpp"
#include "support/instances.hpp"
#include "support/tree_oracle.hpp"

using namespace otcpcc;

namespace {

const char* kTwoLeaves = R"({"name": "root", "children": [
  {"name": "a", "label": "A"}, {"name": "b", "label": "B"}]})";

const char* kTwoCoarse = R"({"name": "root", "children": [
  {"name": "animal", "children": [
    {"label": "bird"}, {"label": "cat"}, {"label": "deer"},
    {"label": "dog"}, {"label": "frog"}, {"label": "horse"}]},
  {"name": "transportation", "children": [
    {"label": "airplane"}, {"label": "automobile"}, {"label": "ship"}, {"label": "truck"}]}]})";

std::string parse_error(const std::string& text) {
  try {
    parse_label_tree(text);
  } catch (const ParseError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ParseLabelTree, RootWithTwoLeaves) {
  const auto t = parse_label_tree(std::string(kTwoLeaves));
  EXPECT_EQ(t.size(), 3u);
  EXPECT_EQ(t.labels(), (std::vector<std::string>{"A", "B"}));
  EXPECT_EQ(t.structure().edge_weight[1], 1.0);
}

TEST(ParseLabelTree, TwoCoarseTenFine) {
  const auto t = parse_label_tree(std::string(kTwoCoarse));
  EXPECT_EQ(t.size(), 13u);
  EXPECT_EQ(t.leaves().size(), 10u);
}

TEST(ParseLabelTree, WeightedSubtreeRoundTrips) {
  const std::string text = R"({"name": "r", "children": [
    {"name": "sea", "weight": 4, "children": [{"label": "otter", "weight": 4}, {"label": "seal", "weight": 4}]},
    {"name": "land", "children": [{"label": "fox"}]}]})";
  const auto t = parse_label_tree(text);
  const auto again = parse_label_tree(to_json(t));
  EXPECT_EQ(to_json(again), to_json(t));
  EXPECT_EQ(again.structure().edge_weight, t.structure().edge_weight);
  EXPECT_EQ(again.structure().edge_weight[1], 4.0);
  EXPECT_DOUBLE_EQ(again.distance("otter", "seal"), 8.0);
}

TEST(ParseLabelTree, ErrorsNameTheNodePath) {
  EXPECT_NE(parse_error(R"({"name": "r", "children": [{"name": "x", "label": "A"},
                           {"name": "y", "label": "A"}]})")
                .find("/r/y"),
            std::string::npos);
  EXPECT_NE(parse_error(R"({"name": "r", "children": [{"name": "x", "label": "A", "weight": 0}]})")
                .find("/r/x"),
            std::string::npos);
  EXPECT_NE(parse_error(R"({"name": "r", "children": [{"name": "x", "label": "A", "weight": -2}]})"),
            "");
  EXPECT_NE(parse_error(R"({"name": "r", "colour": "red", "children": [{"label": "A"}]})")
                .find("colour"),
            std::string::npos);
  EXPECT_NE(parse_error(R"({"name": "r", "children": [{"name": "x"}]})").find("/r/x"),
            std::string::npos);
  EXPECT_NE(parse_error(R"({"name": "r", "label": "R", "children": [{"label": "A"}]})"), "");
  EXPECT_NE(parse_error(R"({"name": "r", "weight": 2, "children": [{"label": "A"}]})"), "");
  EXPECT_NE(parse_error("{not json"), "");
  EXPECT_NE(parse_error(R"({"name": "r", "children": {"label": "A"}})"), "");
}

TEST(TreeMetric, DiagonalSiblingsAndCousins) {
  const auto m = tree_metric(parse_label_tree(std::string(kTwoCoarse)));
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(m(i, i), 0.0);
  EXPECT_EQ(m("cat", "dog"), 2.0);
  EXPECT_EQ(m("cat", "ship"), 4.0);
  EXPECT_EQ(m("cat", "dog") / m("cat", "ship"), 0.5);
}

TEST(TreeMetric, MatchesShortestPathsAndIsATreeMetric) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const auto t = oracle::random_label_tree(rng, 2 + rng() % 12);
    const auto m = tree_metric(t);
    const auto paths = oracle::all_pairs_paths(t.structure());
    const auto& leaves = t.leaves();
    const std::size_t k = leaves.size();
    ASSERT_LE(k, 40u);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        EXPECT_DOUBLE_EQ(m(i, j), paths[static_cast<std::size_t>(leaves[i])][static_cast<std::size_t>(leaves[j])]);
        EXPECT_EQ(m(i, j), m(j, i));
        for (std::size_t l = 0; l < std::min<std::size_t>(k, 20); ++l) {
          EXPECT_LE(m(i, l), m(i, j) + m(j, l) + 1e-12);
        }
      }
    }
    // Four-point condition on sampled quadruples: the two largest of the
    // three pair sums coincide.
    for (int q = 0; q < 50 && k >= 4; ++q) {
      const std::size_t x = rng() % k, y = rng() % k, z = rng() % k, w = rng() % k;
      std::vector<double> s{m(x, y) + m(z, w), m(x, z) + m(y, w), m(x, w) + m(y, z)};
      std::sort(s.begin(), s.end());
      EXPECT_NEAR(s[1], s[2], 1e-12);
    }
  }
}

TEST(AugmentTree, OneSamplePerClass) {
  const auto t = parse_label_tree(std::string(kTwoLeaves));
  const auto aug = augment_tree(t, {{"A", {1.0}}, {"B", {1.0}}});
  const auto s = aug.structure();
  EXPECT_EQ(s.size(), 5u);
  for (std::size_t v = 3; v < 5; ++v) {
    EXPECT_EQ(s.edge_weight[v], 1.0);
    EXPECT_TRUE(s.is_leaf(static_cast<int>(v)));
  }
}

TEST(AugmentTree, UniformAndWeightedSamples) {
  const auto t = parse_label_tree(std::string(kTwoLeaves));
  const auto aug = augment_tree(t, {{"A", {1.0 / 3, 1.0 / 3, 1.0 / 3}}, {"B", {0.7, 0.3}}});
  EXPECT_EQ(aug.samples("A"), 3u);
  EXPECT_EQ(aug.weights("B"), (std::vector<double>{0.7, 0.3}));
  const auto s = aug.structure();
  EXPECT_EQ(s.children[static_cast<std::size_t>(t.leaf("A"))].size(), 3u);
}

TEST(AugmentTree, Errors) {
  const auto t = parse_label_tree(std::string(kTwoLeaves));
  EXPECT_THROW(augment_tree(t, {{"Z", {1.0}}}), DomainError);
  EXPECT_THROW(augment_tree(t, {{"A", {0.5, 0.2}}}), DomainError);
}

TEST(AugmentTree, CrossClassSampleDistanceIsConstant) {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = oracle::random_label_tree(rng, 2 + rng() % 6);
    std::map<std::string, std::vector<double>> w;
    for (const auto& label : t.labels()) w[label] = oracle::random_simplex(rng, 1 + rng() % 3);
    const auto aug = augment_tree(t, w);
    const auto s = aug.structure();
    const auto paths = oracle::all_pairs_paths(s);
    // Sample leaves follow the label tree nodes class by class.
    std::vector<std::pair<std::string, std::size_t>> owner;
    for (const auto& [label, ws] : w)
      for (std::size_t i = 0; i < ws.size(); ++i) owner.push_back({label, t.size() + owner.size()});
    for (const auto& [u, x] : owner) {
      for (const auto& [v, y] : owner) {
        if (u == v) continue;
        EXPECT_DOUBLE_EQ(paths[x][y], aug.sample_distance(u, v));
        EXPECT_DOUBLE_EQ(paths[x][y], t.distance(u, v) + 2.0);
      }
    }
  }
}

TEST(QuadTree, SinglePointIsDepthZero) {
  const QuadTree q(Matrix(1, 3, {1, 2, 3}), 5);
  EXPECT_EQ(q.depth(), 0);
  EXPECT_EQ(q.point_cell(0), q.tree().root);
}

TEST(QuadTree, IdenticalPointsShareALeafAtMaxDepth) {
  const QuadTree q(Matrix::from_rows({{0, 0}, {0, 0}, {5, 5}}), 9);
  EXPECT_EQ(q.point_cell(0), q.point_cell(1));
  EXPECT_EQ(q.cell(q.point_cell(0)).depth, q.max_depth());
  EXPECT_NE(q.point_cell(0), q.point_cell(2));
}

TEST(QuadTree, ContainmentAndDeterminism) {
  std::mt19937_64 rng(41);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix pts = oracle::random_points(rng, 100, 2, 0.0, 3.0);
    const QuadTree q(pts, seed);
    const QuadTree again(pts, seed);
    const auto& t = q.tree();
    EXPECT_EQ(t.parent, again.tree().parent);
    std::set<int> leaves;
    for (std::size_t i = 0; i < 100; ++i) {
      const int c = q.point_cell(i);
      ASSERT_TRUE(q.is_cell(c));
      const auto& cell = q.cell(c);
      for (std::size_t k = 0; k < 2; ++k) {
        EXPECT_LE(std::abs(q.shifted_point(i)[k] - cell.center[k]), cell.half_width);
      }
      EXPECT_TRUE(t.is_leaf(q.point_leaf(i)));
      EXPECT_EQ(t.parent[static_cast<std::size_t>(q.point_leaf(i))], c);
      leaves.insert(q.point_leaf(i));
    }
    EXPECT_EQ(leaves.size(), 100u);
    for (std::size_t v = 0; v < t.size(); ++v) {
      const int p = t.parent[v];
      if (p < 0 || !q.is_cell(static_cast<int>(v))) continue;
      const auto& child = q.cell(static_cast<int>(v));
      const auto& par = q.cell(p);
      EXPECT_EQ(child.depth, par.depth + 1);
      EXPECT_DOUBLE_EQ(child.half_width, par.half_width / 2);
      for (std::size_t k = 0; k < 2; ++k) {
        EXPECT_LE(std::abs(child.center[k] - par.center[k]) + child.half_width,
                  par.half_width + 1e-12);
      }
      EXPECT_DOUBLE_EQ(t.edge_weight[v], q.level_weight(child.depth));
    }
    const double diag = q.root_width() * std::sqrt(2.0);
    const int bound =
        static_cast<int>(std::ceil(std::log2(diag / (QuadTree::kLeafResolution * q.spread())))) + 1;
    EXPECT_LE(q.depth(), bound);
  }
}

TEST(QuadTree, LevelWeightsHalveAndTreeDistanceDominates) {
  std::mt19937_64 rng(43);
  for (std::size_t d : {1u, 2u, 5u, 16u}) {
    const Matrix pts = oracle::random_points(rng, 60, d);
    const QuadTree q(pts, 3 + d);
    for (int l = 1; l < 8; ++l) EXPECT_DOUBLE_EQ(q.level_weight(l + 1), q.level_weight(l) / 2);
    for (std::size_t i = 0; i < 60; ++i)
      for (std::size_t j = 0; j < 60; ++j)
        EXPECT_GE(q.tree_distance(i, j) + 1e-12, euclidean(pts.row(i), pts.row(j)));
  }
}
