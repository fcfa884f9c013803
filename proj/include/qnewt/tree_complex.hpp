#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "qnewt/differential.hpp"
#include "qnewt/error.hpp"
#include "qnewt/pseudolinear.hpp"
#include "qnewt/qspace.hpp"

namespace qnewt {

/// Rooted binary tree. Nodes carry external integer ids (arbitrary, unique);
/// internally they are stored densely in BFS-reachable order from the root.
class BinaryTree {
 public:
  struct Node {
    std::int64_t id = 0;
    int parent = -1;             ///< internal index; -1 for the root
    std::array<int, 2> children = {-1, -1};
    int depth = 0;
  };

  BinaryTree() = default;

  /// Builds from (id, parent-id) pairs; parent_id < 0 marks the root.
  /// Validates: unique ids, exactly one root, parents present, at most two
  /// children per node, all nodes reachable.
  static BinaryTree from_edges(const std::vector<std::pair<std::int64_t, std::int64_t>>& id_parent,
                               bool parent_negative_is_root = true) {
    BinaryTree tree;
    std::map<std::int64_t, int> index_of;
    for (const auto& [id, parent] : id_parent) {
      if (index_of.count(id)) fail(ErrorCode::config_error, "duplicate node id");
      index_of[id] = static_cast<int>(tree.nodes_.size());
      Node node;
      node.id = id;
      tree.nodes_.push_back(node);
      (void)parent;
      (void)parent_negative_is_root;
    }
    int root = -1;
    for (std::size_t i = 0; i < id_parent.size(); ++i) {
      const auto parent_id = id_parent[i].second;
      if (parent_id < 0) {
        if (root >= 0) fail(ErrorCode::config_error, "two roots");
        root = static_cast<int>(i);
        continue;
      }
      const auto it = index_of.find(parent_id);
      if (it == index_of.end()) fail(ErrorCode::config_error, "unknown parent id");
      Node& parent = tree.nodes_[static_cast<std::size_t>(it->second)];
      if (parent.children[0] < 0) {
        parent.children[0] = static_cast<int>(i);
      } else if (parent.children[1] < 0) {
        parent.children[1] = static_cast<int>(i);
      } else {
        fail(ErrorCode::config_error, "node has more than two children");
      }
      tree.nodes_[i].parent = it->second;
    }
    if (root < 0) fail(ErrorCode::config_error, "no root");
    tree.root_ = root;
    // Depths + reachability.
    std::vector<int> order{root};
    tree.nodes_[static_cast<std::size_t>(root)].depth = 0;
    for (std::size_t q = 0; q < order.size(); ++q) {
      const Node& node = tree.nodes_[static_cast<std::size_t>(order[q])];
      for (int c : node.children) {
        if (c < 0) continue;
        tree.nodes_[static_cast<std::size_t>(c)].depth = node.depth + 1;
        order.push_back(c);
      }
    }
    if (order.size() != tree.nodes_.size())
      fail(ErrorCode::config_error, "tree is not connected");
    return tree;
  }

  int root() const { return root_; }
  std::size_t size() const { return nodes_.size(); }
  const Node& node(int i) const { return nodes_.at(static_cast<std::size_t>(i)); }
  int depth(int i) const { return node(i).depth; }

  int index_of_id(std::int64_t id) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (nodes_[i].id == id) return static_cast<int>(i);
    fail(ErrorCode::invalid_point, "unknown node id " + std::to_string(id));
  }

  /// External ids along the root-to-node path (inclusive).
  std::vector<std::int64_t> id_path(int i) const {
    std::vector<std::int64_t> path;
    for (int cur = i; cur >= 0; cur = node(cur).parent) path.push_back(node(cur).id);
    std::reverse(path.begin(), path.end());
    return path;
  }

  /// Lowest common ancestor by depth lifting.
  int lca(int a, int b) const {
    while (depth(a) > depth(b)) a = node(a).parent;
    while (depth(b) > depth(a)) b = node(b).parent;
    while (a != b) {
      a = node(a).parent;
      b = node(b).parent;
    }
    return a;
  }

  int max_depth() const {
    int best = 0;
    for (const auto& n : nodes_) best = std::max(best, n.depth);
    return best;
  }

 private:
  std::vector<Node> nodes_;
  int root_ = -1;
};

inline BinaryTree tree_from_json(const nlohmann::json& j) {
  if (!j.contains("nodes") || !j["nodes"].is_array())
    fail(ErrorCode::config_error, "tree json needs a nodes array");
  std::vector<std::pair<std::int64_t, std::int64_t>> edges;
  for (const auto& n : j["nodes"]) {
    const std::int64_t id = n.at("id").get<std::int64_t>();
    std::int64_t parent = -1;
    if (n.contains("parent") && !n["parent"].is_null())
      parent = n["parent"].get<std::int64_t>();
    edges.emplace_back(id, parent);
  }
  BinaryTree tree = BinaryTree::from_edges(edges);
  if (j.contains("root")) {
    const auto declared = j["root"].get<std::int64_t>();
    if (tree.node(tree.root()).id != declared)
      fail(ErrorCode::config_error, "declared root does not match the parentless node");
  }
  return tree;
}

inline nlohmann::ordered_json tree_to_json(const BinaryTree& tree) {
  nlohmann::ordered_json j;
  j["root"] = tree.node(tree.root()).id;
  auto& nodes = j["nodes"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const auto& n = tree.node(static_cast<int>(i));
    nlohmann::ordered_json entry;
    entry["id"] = n.id;
    if (n.parent < 0)
      entry["parent"] = nullptr;
    else
      entry["parent"] = tree.node(n.parent).id;
    nodes.push_back(entry);
  }
  return j;
}

/// Seeded generator: a depth-bounded binary tree in which every internal node
/// has exactly two children. The root is always internal (for max_depth >= 1);
/// deeper nodes close with probability 0.3 until the depth bound. Ids are
/// assigned in BFS creation order starting at 0.
inline BinaryTree random_full_binary_tree(int max_depth, std::uint64_t seed) {
  if (max_depth < 1) fail(ErrorCode::out_of_range, "max_depth must be >= 1");
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<std::int64_t, std::int64_t>> edges;
  edges.emplace_back(0, -1);
  std::vector<std::pair<std::int64_t, int>> queue{{0, 0}};  // (id, depth)
  std::int64_t next_id = 1;
  for (std::size_t q = 0; q < queue.size(); ++q) {
    const auto [id, depth] = queue[q];
    const bool internal = depth == 0 || (depth < max_depth && unit(rng) >= 0.3);
    if (!internal) continue;
    for (int c = 0; c < 2; ++c) {
      edges.emplace_back(next_id, id);
      queue.emplace_back(next_id, depth + 1);
      ++next_id;
    }
  }
  return BinaryTree::from_edges(edges);
}

/// A point of the glued-interval complex: `x` in [0, 1] along the unit
/// interval owned by `node`. The 1-end of a node's interval is identified
/// with the 0-end of each child's interval, so a raw pair is one
/// representative of its point; equality is distance zero, never tuple
/// comparison.
struct TreePoint {
  int node = 0;
  double x = 0.0;
};

/// The tree-of-unit-intervals space: one interval per node, glued junction
/// at every parent/child boundary, carrying the geodesic metric (which is
/// symmetric and satisfies the quasi-metric axioms exactly, including across
/// glued representatives).
class TreeCubicalComplex {
 public:
  using Point = TreePoint;

  explicit TreeCubicalComplex(BinaryTree tree) : tree_(std::move(tree)) {
    // Distinguished path: deepest node, ties broken by the lexicographically
    // smallest external-id path from the root.
    const int deepest = tree_.max_depth();
    int chosen = -1;
    std::vector<std::int64_t> chosen_path;
    for (std::size_t i = 0; i < tree_.size(); ++i) {
      if (tree_.depth(static_cast<int>(i)) != deepest) continue;
      auto path = tree_.id_path(static_cast<int>(i));
      if (chosen < 0 || path < chosen_path) {
        chosen = static_cast<int>(i);
        chosen_path = std::move(path);
      }
    }
    spine_.clear();
    for (int cur = chosen; cur >= 0; cur = tree_.node(cur).parent) spine_.push_back(cur);
    std::reverse(spine_.begin(), spine_.end());
    d_max_ = static_cast<double>(deepest) + 1.0;
  }

  const BinaryTree& tree() const { return tree_; }

  /// Canonical representative: junction points are written as (node, 1) of
  /// the parent-side interval, i.e. (b, 0) with b != root becomes
  /// (parent(b), 1). Coordinates are validated to [0, 1] (1e-9 slack).
  TreePoint canonical(const TreePoint& p) const {
    if (p.node < 0 || p.node >= static_cast<int>(tree_.size()))
      fail(ErrorCode::invalid_point, "node index out of range");
    double x = p.x;
    if (x < -1e-9 || x > 1.0 + 1e-9)
      fail(ErrorCode::invalid_point, "coordinate outside [0, 1]");
    x = std::clamp(x, 0.0, 1.0);
    if (x == 0.0 && p.node != tree_.root())
      return TreePoint{tree_.node(p.node).parent, 1.0};
    return TreePoint{p.node, x};
  }

  /// Arc distance from the root anchor (root, 0): depth(node) + x. Agrees on
  /// all representatives of a glued point and is 1-Lipschitz for the
  /// geodesic distance.
  double anchor_distance(const TreePoint& p) const {
    const TreePoint c = canonical(p);
    return static_cast<double>(tree_.depth(c.node)) + c.x;
  }

  /// Geodesic distance. Same-interval pairs: |x - y|. Ancestor-line pairs:
  /// the anchor distances differ by exactly the path length. Pairs whose
  /// tree path turns at a strict common ancestor meet at the junction below
  /// it: d_r(p) + d_r(q) - 2 (depth(lca) + 1).
  double distance(const TreePoint& a, const TreePoint& b) const {
    const TreePoint p = canonical(a);
    const TreePoint q = canonical(b);
    if (p.node == q.node) return std::abs(p.x - q.x);
    const int anc = tree_.lca(p.node, q.node);
    const double dp = static_cast<double>(tree_.depth(p.node)) + p.x;
    const double dq = static_cast<double>(tree_.depth(q.node)) + q.x;
    if (anc == p.node || anc == q.node) return std::abs(dp - dq);
    return dp + dq - 2.0 * (static_cast<double>(tree_.depth(anc)) + 1.0);
  }

  double max_anchor_distance() const { return d_max_; }

  const std::vector<int>& spine() const { return spine_; }

  /// The distinguished path point at arc length t from the anchor; t must
  /// lie in [0, max_anchor_distance()].
  TreePoint path_point(double t) const {
    if (t < -1e-12 || t > d_max_ + 1e-12)
      fail(ErrorCode::out_of_range, "path parameter outside [0, d_max]");
    t = std::clamp(t, 0.0, d_max_);
    const int last = static_cast<int>(spine_.size()) - 1;
    const int k = std::min(static_cast<int>(std::floor(t)), last);
    return TreePoint{spine_[static_cast<std::size_t>(k)], t - static_cast<double>(k)};
  }

  /// Clamps an arc-length parameter into [0, max_anchor_distance()].
  double clamp_range(double t) const { return std::clamp(t, 0.0, d_max_); }

  bool on_distinguished_path(const TreePoint& p) const {
    const TreePoint c = canonical(p);
    return std::find(spine_.begin(), spine_.end(), c.node) != spine_.end();
  }

  /// Random point: uniform node, uniform coordinate.
  TreePoint sample_uniform(Rng& rng) const {
    std::uniform_int_distribution<int> node(0, static_cast<int>(tree_.size()) - 1);
    std::uniform_real_distribution<double> coord(0.0, 1.0);
    return canonical(TreePoint{node(rng), coord(rng)});
  }

  /// Non-backtracking random walk of length r from the center; the result's
  /// geodesic distance to the center equals the distance walked unless a
  /// boundary point (root anchor or a leaf bottom) cut the walk short.
  TreePoint sample_at_distance(const TreePoint& center, double r, Rng& rng) const {
    TreePoint cur = canonical(center);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    // +1 walks toward the 1-end (away from the root), -1 toward the 0-end.
    int dir;
    const bool can_descend =
        cur.x < 1.0 || tree_.node(cur.node).children[0] >= 0;
    const bool can_ascend = !(cur.node == tree_.root() && cur.x == 0.0);
    if (can_descend && can_ascend)
      dir = unit(rng) < 0.5 ? 1 : -1;
    else
      dir = can_descend ? 1 : -1;
    double remaining = r;
    while (remaining > 0.0) {
      if (dir > 0) {
        const double gap = 1.0 - cur.x;
        if (remaining <= gap) return TreePoint{cur.node, cur.x + remaining};
        remaining -= gap;
        const auto& children = tree_.node(cur.node).children;
        int options[2];
        int count = 0;
        for (int c : children)
          if (c >= 0) options[count++] = c;
        if (count == 0) return TreePoint{cur.node, 1.0};  // leaf bottom
        cur = TreePoint{options[count == 1 ? 0 : (unit(rng) < 0.5 ? 0 : 1)], 0.0};
      } else {
        const double gap = cur.x;
        if (remaining <= gap) return TreePoint{cur.node, cur.x - remaining};
        remaining -= gap;
        if (cur.node == tree_.root()) return TreePoint{cur.node, 0.0};  // anchor
        const int parent = tree_.node(cur.node).parent;
        // Continuations at the junction (parent, 1): up the parent interval,
        // or down a sibling interval.
        int sibling = -1;
        for (int c : tree_.node(parent).children)
          if (c >= 0 && c != cur.node) sibling = c;
        const bool go_up = sibling < 0 || unit(rng) < 0.5;
        if (go_up) {
          cur = TreePoint{parent, 1.0};
          dir = -1;
        } else {
          cur = TreePoint{sibling, 0.0};
          dir = 1;
        }
      }
    }
    return cur;
  }

 private:
  BinaryTree tree_;
  std::vector<int> spine_;
  double d_max_ = 1.0;
};

// ---------------------------------------------------------------------------
// Objective and differential on the complex
// ---------------------------------------------------------------------------

/// Scalar objective in the anchor-distance variable s = anchor_distance(p):
/// the solver works on F(p) = df(s), whose selections use ddf(s).
struct TreeObjective {
  std::function<double(double)> f, df, ddf;
  std::string name;
};

/// f(s) = exp(s) - a s; df has its root at s = ln a.
inline TreeObjective exp_linear_objective(double a = 2.0) {
  TreeObjective obj;
  obj.name = "exp_linear";
  obj.f = [a](double s) { return std::exp(s) - a * s; };
  obj.df = [a](double s) { return std::exp(s) - a; };
  obj.ddf = [](double s) { return std::exp(s); };
  return obj;
}

/// f(s) = (s - center)^2 / 2.
inline TreeObjective quadratic_objective(double center) {
  TreeObjective obj;
  obj.name = "quadratic";
  obj.f = [center](double s) { return 0.5 * (s - center) * (s - center); };
  obj.df = [center](double s) { return s - center; };
  obj.ddf = [](double) { return 1.0; };
  return obj;
}

/// F(p) = df(anchor_distance(p)) as a 1-vector.
inline std::function<Vector(const TreePoint&)> tree_objective_map(
    std::shared_ptr<const TreeCubicalComplex> space, TreeObjective obj) {
  return [space, df = obj.df](const TreePoint& p) -> Vector {
    Vector v(1);
    v[0] = df(space->anchor_distance(p));
    return v;
  };
}

/// Differential of the tree objective. The selection at p is
///   H(q1, q2) = ddf(d_r(p)) (d_r(q2) - d_r(q1))
/// with quasi-inverse
///   H_inv(q, v) = path_point(clamp(d_r(q) + v / ddf(d_r(p))))
/// and certified operator norm 1 / |ddf(d_r(p))|. The inverse retracts onto
/// the distinguished path, so H_inv(q, 0) = q holds exactly for on-path q
/// and generally fails off-path; axiom checks should sample on-path
/// arguments.
inline NewtonDifferential<TreeCubicalComplex> tree_differential(
    std::shared_ptr<const TreeCubicalComplex> space, TreeObjective obj) {
  NewtonDifferential<TreeCubicalComplex> hf;
  hf.n = 1;
  hf.selections_at = [space, ddf = obj.ddf](const TreePoint& p) {
    const double c2 = ddf(space->anchor_distance(p));
    Selection<TreeCubicalComplex> sel;
    sel.map.n = 1;
    sel.map.label = "tree";
    sel.map.eval = [space, c2](const TreePoint& q1, const TreePoint& q2) -> Vector {
      Vector v(1);
      v[0] = c2 * (space->anchor_distance(q2) - space->anchor_distance(q1));
      return v;
    };
    if (std::abs(c2) > 1e-300) {
      QuasiInverse<TreeCubicalComplex> inv;
      inv.eval = [space, c2](const TreePoint& q, const Vector& v) -> TreePoint {
        return space->path_point(space->clamp_range(space->anchor_distance(q) + v[0] / c2));
      };
      inv.norm_bound = 1.0 / std::abs(c2);
      sel.inverse = std::move(inv);
    }
    return std::vector<Selection<TreeCubicalComplex>>{sel};
  };
  return hf;
}

/// Uniform random point of the distinguished path.
inline TreePoint sample_on_path(const TreeCubicalComplex& space, Rng& rng) {
  std::uniform_real_distribution<double> t(0.0, space.max_anchor_distance());
  return space.path_point(t(rng));
}

}  // namespace qnewt
