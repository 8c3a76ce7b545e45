#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "otcpcc/error.hpp"
#include "otcpcc/measures.hpp"

namespace otcpcc {

/// Parent-linked rooted tree with a weight on every edge to a parent.
/// Children keep insertion order; bottom-up matching relies on it.
struct RootedTree {
  std::vector<int> parent;          // -1 at the root
  std::vector<double> edge_weight;  // 0 at the root
  std::vector<std::vector<int>> children;
  int root = 0;

  std::size_t size() const { return parent.size(); }
  bool is_leaf(int v) const { return children[static_cast<std::size_t>(v)].empty(); }

  int add_node(int parent_id, double weight) {
    const int id = static_cast<int>(parent.size());
    parent.push_back(parent_id);
    edge_weight.push_back(parent_id < 0 ? 0.0 : weight);
    children.emplace_back();
    if (parent_id >= 0) children[static_cast<std::size_t>(parent_id)].push_back(id);
    return id;
  }

  /// Height of each node: 0 for leaves, 1 + max child height otherwise.
  std::vector<int> heights() const {
    std::vector<int> h(size(), 0);
    for (int v : postorder()) {
      for (int c : children[static_cast<std::size_t>(v)]) {
        h[static_cast<std::size_t>(v)] =
            std::max(h[static_cast<std::size_t>(v)], h[static_cast<std::size_t>(c)] + 1);
      }
    }
    return h;
  }

  std::vector<int> postorder() const {
    std::vector<int> order;
    order.reserve(size());
    std::vector<std::pair<int, std::size_t>> stack{{root, 0}};
    while (!stack.empty()) {
      auto& [v, k] = stack.back();
      const auto& ch = children[static_cast<std::size_t>(v)];
      if (k < ch.size()) {
        const int c = ch[k++];
        stack.push_back({c, 0});
      } else {
        order.push_back(v);
        stack.pop_back();
      }
    }
    return order;
  }

  /// Sum of edge weights from the root.
  std::vector<double> weighted_depths() const {
    std::vector<double> wd(size(), 0.0);
    auto order = postorder();
    std::reverse(order.begin(), order.end());  // parents before children
    for (int v : order) {
      const int p = parent[static_cast<std::size_t>(v)];
      if (p >= 0) {
        wd[static_cast<std::size_t>(v)] =
            wd[static_cast<std::size_t>(p)] + edge_weight[static_cast<std::size_t>(v)];
      }
    }
    return wd;
  }

  std::vector<int> depths() const {
    std::vector<int> d(size(), 0);
    auto order = postorder();
    std::reverse(order.begin(), order.end());
    for (int v : order) {
      const int p = parent[static_cast<std::size_t>(v)];
      if (p >= 0) d[static_cast<std::size_t>(v)] = d[static_cast<std::size_t>(p)] + 1;
    }
    return d;
  }

  /// Lowest common ancestor by walking parent pointers.
  int lca(int u, int v, std::span<const int> depth) const {
    while (depth[static_cast<std::size_t>(u)] > depth[static_cast<std::size_t>(v)])
      u = parent[static_cast<std::size_t>(u)];
    while (depth[static_cast<std::size_t>(v)] > depth[static_cast<std::size_t>(u)])
      v = parent[static_cast<std::size_t>(v)];
    while (u != v) {
      u = parent[static_cast<std::size_t>(u)];
      v = parent[static_cast<std::size_t>(v)];
    }
    return u;
  }
};

// ---------------------------------------------------------------------------
// Label trees

/// Weighted class hierarchy. Leaves carry distinct class labels.
class LabelTree {
 public:
  struct Node {
    std::string name;
    std::optional<std::string> label;
  };

  LabelTree() = default;

  const RootedTree& structure() const { return tree_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }

  /// Leaves in pre-order.
  const std::vector<int>& leaves() const { return leaves_; }
  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    out.reserve(leaves_.size());
    for (int v : leaves_) out.push_back(*nodes_[static_cast<std::size_t>(v)].label);
    return out;
  }

  bool has_label(const std::string& label) const { return leaf_of_.count(label) > 0; }
  int leaf(const std::string& label) const {
    auto it = leaf_of_.find(label);
    if (it == leaf_of_.end()) throw DomainError("class '" + label + "' is not a leaf of the tree");
    return it->second;
  }

  /// Shortest-path distance between two class leaves.
  double distance(const std::string& u, const std::string& v) const {
    const int a = leaf(u);
    const int b = leaf(v);
    const int w = tree_.lca(a, b, depth_);
    return wdepth_[static_cast<std::size_t>(a)] + wdepth_[static_cast<std::size_t>(b)] -
           2.0 * wdepth_[static_cast<std::size_t>(w)];
  }

  /// Builder used by the parser and by tests: adds a node under `parent`
  /// (-1 for the root). Call finalize() once all nodes are added.
  int add(int parent, std::string name, std::optional<std::string> label, double weight = 1.0) {
    if (parent < 0 && !nodes_.empty()) throw ParseError("label tree can only have one root");
    if (parent >= 0 && (!std::isfinite(weight) || weight <= 0.0)) {
      throw ParseError("edge weight of '" + name + "' must be finite and positive");
    }
    nodes_.push_back({std::move(name), std::move(label)});
    return tree_.add_node(parent, weight);
  }

  void finalize() {
    if (nodes_.empty()) throw ParseError("label tree is empty");
    leaves_.clear();
    leaf_of_.clear();
    // Pre-order walk collecting leaves and checking labels.
    std::vector<int> pre;
    std::vector<int> st{0};
    while (!st.empty()) {
      const int v = st.back();
      st.pop_back();
      pre.push_back(v);
      const auto& ch = tree_.children[static_cast<std::size_t>(v)];
      for (auto it = ch.rbegin(); it != ch.rend(); ++it) st.push_back(*it);
    }
    for (int v : pre) {
      const auto& node = nodes_[static_cast<std::size_t>(v)];
      if (tree_.is_leaf(v)) {
        if (!node.label) throw ParseError("leaf " + path(v) + " has no class label");
        if (!leaf_of_.emplace(*node.label, v).second) {
          throw ParseError("duplicate class label '" + *node.label + "' at " + path(v));
        }
        leaves_.push_back(v);
      } else if (node.label) {
        throw ParseError("internal node " + path(v) + " carries a label");
      }
    }
    depth_ = tree_.depths();
    wdepth_ = tree_.weighted_depths();
  }

  /// Slash-separated node names from the root, used in error messages.
  std::string path(int v) const {
    std::vector<std::string> parts;
    for (int u = v; u >= 0; u = tree_.parent[static_cast<std::size_t>(u)]) {
      const auto& n = nodes_[static_cast<std::size_t>(u)];
      parts.push_back(n.name.empty() ? (n.label ? *n.label : "#" + std::to_string(u)) : n.name);
    }
    std::string out;
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) out += "/" + *it;
    return out;
  }

 private:
  RootedTree tree_;
  std::vector<Node> nodes_;
  std::vector<int> leaves_;
  std::unordered_map<std::string, int> leaf_of_;
  std::vector<int> depth_;
  std::vector<double> wdepth_;
};

namespace detail {

inline void parse_node(const nlohmann::json& j, int parent, LabelTree& tree,
                       const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": tree node must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key != "name" && key != "weight" && key != "label" && key != "children") {
      throw ParseError(where + ": unknown key '" + key + "'");
    }
  }
  std::string name;
  if (j.contains("name")) {
    if (!j["name"].is_string()) throw ParseError(where + ": 'name' must be a string");
    name = j["name"].get<std::string>();
  }
  const std::string here = where + "/" + (name.empty() ? "?" : name);
  double weight = 1.0;
  if (j.contains("weight")) {
    if (parent < 0) throw ParseError(here + ": the root has no parent edge to weigh");
    if (!j["weight"].is_number()) throw ParseError(here + ": 'weight' must be a number");
    weight = j["weight"].get<double>();
    if (!std::isfinite(weight) || weight <= 0.0) {
      throw ParseError(here + ": edge weight must be finite and positive");
    }
  }
  std::optional<std::string> label;
  if (j.contains("label")) {
    if (!j["label"].is_string()) throw ParseError(here + ": 'label' must be a string");
    label = j["label"].get<std::string>();
  }
  const int id = tree.add(parent, name, label, weight);
  if (j.contains("children")) {
    if (!j["children"].is_array()) throw ParseError(here + ": 'children' must be an array");
    if (label && !j["children"].empty()) {
      throw ParseError(here + ": labels are only allowed on leaves");
    }
    for (const auto& c : j["children"]) parse_node(c, id, tree, here);
  }
}

}  // namespace detail

/// Parses the label-tree JSON document
/// `{"name", "weight" (edge to parent, default 1), "label" (leaves), "children"}`.
inline LabelTree parse_label_tree(const nlohmann::json& doc) {
  LabelTree tree;
  detail::parse_node(doc, -1, tree, "");
  tree.finalize();
  return tree;
}

inline LabelTree parse_label_tree(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("label tree is not valid JSON: ") + e.what());
  }
  return parse_label_tree(doc);
}

inline nlohmann::json to_json(const LabelTree& tree, int v = 0) {
  const auto& node = tree.nodes()[static_cast<std::size_t>(v)];
  const auto& st = tree.structure();
  nlohmann::json j = nlohmann::json::object();
  if (!node.name.empty()) j["name"] = node.name;
  if (st.parent[static_cast<std::size_t>(v)] >= 0) j["weight"] = st.edge_weight[static_cast<std::size_t>(v)];
  if (node.label) j["label"] = *node.label;
  const auto& ch = st.children[static_cast<std::size_t>(v)];
  if (!ch.empty()) {
    j["children"] = nlohmann::json::array();
    for (int c : ch) j["children"].push_back(to_json(tree, c));
  }
  return j;
}

/// Leaf-to-leaf shortest-path distances of a label tree.
class TreeMetric {
 public:
  TreeMetric() = default;
  TreeMetric(std::vector<std::string> labels, Matrix distances)
      : labels_(std::move(labels)), distances_(std::move(distances)) {
    for (std::size_t i = 0; i < labels_.size(); ++i) index_[labels_[i]] = i;
  }

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const Matrix& matrix() const { return distances_; }
  std::size_t index(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) throw DomainError("unknown class '" + label + "'");
    return it->second;
  }
  double operator()(std::size_t i, std::size_t j) const { return distances_(i, j); }
  double operator()(const std::string& u, const std::string& v) const {
    return distances_(index(u), index(v));
  }

 private:
  std::vector<std::string> labels_;
  Matrix distances_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Distances via weighted depth sums at the lowest common ancestor.
inline TreeMetric tree_metric(const LabelTree& tree) {
  const auto labels = tree.labels();
  Matrix d(labels.size(), labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      d(i, j) = d(j, i) = tree.distance(labels[i], labels[j]);
    }
  }
  return TreeMetric(labels, std::move(d));
}

// ---------------------------------------------------------------------------
// Augmented trees

/// Leaf indices of the samples that enter a bottom-up matching.
struct MatchingLeaves {
  RootedTree tree;
  std::vector<int> source_leaf;  // node of each source sample
  std::vector<int> target_leaf;  // node of each target sample
};

/// Label tree whose class leaves are extended with one unit-weight edge per
/// sample; each sample carries a flow weight.
class AugmentedTree {
 public:
  static constexpr double kSampleEdgeWeight = 1.0;

  AugmentedTree(LabelTree tree, std::map<std::string, std::vector<double>> sample_weights)
      : tree_(std::move(tree)) {
    for (auto& [label, w] : sample_weights) {
      if (!tree_.has_label(label)) {
        throw DomainError("class '" + label + "' is not a leaf of the label tree");
      }
      weights_[label] = simplex_weights(std::move(w), "sample weights");
    }
  }

  const LabelTree& label_tree() const { return tree_; }
  bool has_class(const std::string& label) const { return weights_.count(label) > 0; }
  const std::vector<double>& weights(const std::string& label) const {
    auto it = weights_.find(label);
    if (it == weights_.end()) throw DomainError("class '" + label + "' has no samples");
    return it->second;
  }
  std::size_t samples(const std::string& label) const { return weights(label).size(); }

  /// The full augmented structure: label tree nodes followed by sample
  /// leaves, class by class in label order.
  RootedTree structure() const {
    RootedTree t = tree_.structure();
    for (const auto& [label, w] : weights_) {
      const int leaf = tree_.leaf(label);
      for (std::size_t i = 0; i < w.size(); ++i) t.add_node(leaf, kSampleEdgeWeight);
    }
    return t;
  }

  /// Tree distance between sample leaves of classes u and v.
  double sample_distance(const std::string& u, const std::string& v) const {
    if (u == v) return 2.0 * kSampleEdgeWeight;
    return tree_.distance(u, v) + 2.0 * kSampleEdgeWeight;
  }

  /// Label tree extended only with the samples of classes u and v, as the
  /// input of a bottom-up matching from u to v.
  MatchingLeaves matching_tree(const std::string& u, const std::string& v) const {
    MatchingLeaves out{tree_.structure(), {}, {}};
    for (std::size_t i = 0; i < weights(u).size(); ++i) {
      out.source_leaf.push_back(out.tree.add_node(tree_.leaf(u), kSampleEdgeWeight));
    }
    for (std::size_t j = 0; j < weights(v).size(); ++j) {
      out.target_leaf.push_back(out.tree.add_node(tree_.leaf(v), kSampleEdgeWeight));
    }
    return out;
  }

 private:
  LabelTree tree_;
  std::map<std::string, std::vector<double>> weights_;
};

inline AugmentedTree augment_tree(const LabelTree& tree,
                                  std::map<std::string, std::vector<double>> samples_per_class) {
  return AugmentedTree(tree, std::move(samples_per_class));
}

// ---------------------------------------------------------------------------
// Randomly shifted quadtree

/// 2^d-ary spatial subdivision of a point cloud under a random shift. Only
/// occupied children are materialized. Every input point hangs off its
/// leaf cell as its own leaf node, with an edge as long as half the leaf
/// cell's diagonal, so the tree metric dominates the Euclidean distance.
class QuadTree {
 public:
  /// Leaf cells stop shrinking once their diagonal is below this fraction
  /// of the data diameter.
  static constexpr double kLeafResolution = 1e-3;

  struct Cell {
    std::vector<double> center;
    double half_width = 0.0;
    int depth = 0;
  };

  QuadTree(const Matrix& points, std::uint64_t seed) { build(points, seed); }

  const RootedTree& tree() const { return tree_; }
  /// Node id of the leaf representing input point i.
  int point_leaf(std::size_t i) const { return point_leaf_[i]; }
  /// Cell id (a node of tree()) containing point i at the finest level.
  int point_cell(std::size_t i) const { return point_cell_[i]; }
  bool is_cell(int node) const { return cell_of_node_[static_cast<std::size_t>(node)] >= 0; }
  const Cell& cell(int node) const {
    return cells_[static_cast<std::size_t>(cell_of_node_[static_cast<std::size_t>(node)])];
  }
  std::span<const double> shift() const { return shift_; }
  std::span<const double> shifted_point(std::size_t i) const { return shifted_.row(i); }
  double root_width() const { return root_width_; }
  /// Spread of the data (max distance from the first point); the diameter
  /// lies between this and twice this.
  double spread() const { return diameter_; }
  int max_depth() const { return max_depth_; }
  /// Deepest level reached by any cell.
  int depth() const {
    int d = 0;
    for (const auto& c : cells_) d = std::max(d, c.depth);
    return d;
  }
  std::size_t dim() const { return dim_; }

  /// Weight of the edge from a level-(level - 1) cell down to level `level`.
  double level_weight(int level) const {
    return root_width_ * std::ldexp(1.0, -level) * std::sqrt(static_cast<double>(dim_));
  }

  /// Tree path length between two input points.
  double tree_distance(std::size_t i, std::size_t j) const {
    const int u = point_leaf_[i];
    const int v = point_leaf_[j];
    if (u == v) return 0.0;
    const int w = tree_.lca(u, v, depth_);
    return wdepth_[static_cast<std::size_t>(u)] + wdepth_[static_cast<std::size_t>(v)] -
           2.0 * wdepth_[static_cast<std::size_t>(w)];
  }

 private:
  void build(const Matrix& points, std::uint64_t seed) {
    const std::size_t n = points.rows();
    dim_ = points.cols();
    if (n == 0 || dim_ == 0) throw DimensionError("quadtree needs at least one point");
    std::vector<double> lo(dim_), hi(dim_);
    for (std::size_t k = 0; k < dim_; ++k) lo[k] = hi[k] = points(0, k);
    for (std::size_t i = 1; i < n; ++i) {
      for (std::size_t k = 0; k < dim_; ++k) {
        lo[k] = std::min(lo[k], points(i, k));
        hi[k] = std::max(hi[k], points(i, k));
      }
    }
    double box = 0.0;
    for (std::size_t k = 0; k < dim_; ++k) box = std::max(box, hi[k] - lo[k]);
    diameter_ = data_diameter(points);

    // Shift uniform in [0, W)^d with W twice the bounding-box width; the
    // root cell has side 2W so every shifted point lies inside it.
    const double w = 2.0 * (box > 0.0 ? box : 1.0);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, w);
    shift_.resize(dim_);
    for (auto& s : shift_) s = unif(rng);
    root_width_ = 2.0 * w;
    shifted_ = Matrix(n, dim_);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < dim_; ++k) shifted_(i, k) = points(i, k) - lo[k] + shift_[k];
    }

    const double sqrt_d = std::sqrt(static_cast<double>(dim_));
    if (diameter_ > 0.0) {
      const double ratio = root_width_ * sqrt_d / (kLeafResolution * diameter_);
      max_depth_ = std::max(0, static_cast<int>(std::ceil(std::log2(ratio))));
    } else {
      max_depth_ = 0;
    }

    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    point_cell_.assign(n, -1);
    std::vector<double> center(dim_, root_width_ / 2.0);
    const int root = add_cell(-1, center, root_width_ / 2.0, 0);
    subdivide(root, all);

    point_leaf_.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
      const int c = point_cell_[i];
      const int depth = cells_[static_cast<std::size_t>(cell_of_node_[static_cast<std::size_t>(c)])].depth;
      point_leaf_[i] = tree_.add_node(c, level_weight(depth + 1));
      cell_of_node_.push_back(-1);
    }
    depth_ = tree_.depths();
    wdepth_ = tree_.weighted_depths();
  }

  int add_cell(int parent, std::vector<double> center, double half_width, int depth) {
    const int node = tree_.add_node(parent, parent < 0 ? 0.0 : level_weight(depth));
    cell_of_node_.push_back(static_cast<int>(cells_.size()));
    cells_.push_back({std::move(center), half_width, depth});
    return node;
  }

  void subdivide(int root, std::vector<std::size_t> root_points) {
    struct Pending {
      int node;
      std::vector<std::size_t> pts;
    };
    std::vector<Pending> stack;
    stack.push_back({root, std::move(root_points)});
    const std::size_t words = (dim_ + 63) / 64;
    while (!stack.empty()) {
      Pending job = std::move(stack.back());
      stack.pop_back();
      const Cell c = cell(job.node);
      if (job.pts.size() < 2 || c.depth >= max_depth_) {
        for (std::size_t i : job.pts) point_cell_[i] = job.node;
        continue;
      }
      // Orthant key: one bit per coordinate. std::map keeps the child
      // order deterministic.
      std::map<std::vector<std::uint64_t>, std::vector<std::size_t>> groups;
      for (std::size_t i : job.pts) {
        std::vector<std::uint64_t> key(words, 0);
        for (std::size_t k = 0; k < dim_; ++k) {
          if (shifted_(i, k) >= c.center[k]) key[k / 64] |= (std::uint64_t{1} << (k % 64));
        }
        groups[key].push_back(i);
      }
      const double h = c.half_width / 2.0;
      std::vector<Pending> next;
      for (auto& [key, pts] : groups) {
        std::vector<double> center(dim_);
        for (std::size_t k = 0; k < dim_; ++k) {
          const bool upper = (key[k / 64] >> (k % 64)) & 1U;
          center[k] = c.center[k] + (upper ? h : -h);
        }
        const int child = add_cell(job.node, std::move(center), h, c.depth + 1);
        next.push_back({child, std::move(pts)});
      }
      for (auto it = next.rbegin(); it != next.rend(); ++it) stack.push_back(std::move(*it));
    }
  }

  // Largest distance from the first point: within a factor 2 of the true
  // diameter, at O(nd) cost.
  static double data_diameter(const Matrix& points) {
    double best = 0.0;
    for (std::size_t i = 1; i < points.rows(); ++i)
      best = std::max(best, euclidean(points.row(0), points.row(i)));
    return best;
  }

  RootedTree tree_;
  std::vector<Cell> cells_;
  std::vector<int> cell_of_node_;
  std::vector<int> point_leaf_;
  std::vector<int> point_cell_;
  std::vector<int> depth_;
  std::vector<double> wdepth_;
  std::vector<double> shift_;
  Matrix shifted_;
  double root_width_ = 0.0;
  double diameter_ = 0.0;
  int max_depth_ = 0;
  std::size_t dim_ = 0;
};

inline QuadTree build_quadtree(const WeightedPointSet& points, std::uint64_t seed) {
  return QuadTree(points.points(), seed);
}

}  // namespace otcpcc
