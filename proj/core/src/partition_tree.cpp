#include "mlkrig/partition_tree.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <set>

#include "mlkrig/error.hpp"
#include "mlkrig/rng.hpp"

namespace mlkrig::tree {

std::string to_string(SplitRule rule) { return rule == SplitRule::RP ? "rp" : "kd"; }

SplitRule parse_rule(const std::string &name) {
  if (name == "rp" || name == "RP")
    return SplitRule::RP;
  if (name == "kd" || name == "kD" || name == "KD")
    return SplitRule::KD;
  throw ConfigError("unknown tree rule '" + name + "'");
}

std::string to_string(SearchRule rule) {
  return rule == SearchRule::Verbatim ? "verbatim" : "two_sided";
}

SearchRule parse_search_rule(const std::string &name) {
  if (name == "verbatim")
    return SearchRule::Verbatim;
  if (name == "two_sided")
    return SearchRule::TwoSided;
  throw ConfigError("unknown search rule '" + name + "'");
}

double PartitionTree::project(const TreeNode &node, const double *x) const {
  if (node.axis >= 0)
    return x[node.axis];
  double s = 0.0;
  for (Eigen::Index k = 0; k < node.v.size(); ++k)
    s += node.v[k] * x[k];
  return s;
}

namespace {

void check_distinct(const Points &points) {
  const Index n = points.cols();
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](Index a, Index b) {
    for (Eigen::Index k = 0; k < points.rows(); ++k) {
      if (points(k, a) != points(k, b))
        return points(k, a) < points(k, b);
    }
    return false;
  };
  std::sort(order.begin(), order.end(), less);
  for (Index i = 1; i < n; ++i)
    if (!less(order[i - 1], order[i]))
      throw ConfigError("build_tree: duplicate observation locations (points " +
                        std::to_string(order[i - 1]) + " and " +
                        std::to_string(order[i]) + ")");
}

} // namespace

PartitionTree build_tree(const Points &points, int n0, SplitRule rule,
                         std::uint64_t seed) {
  const Index n = points.cols();
  const Index d = points.rows();
  if (n < 1)
    throw ConfigError("build_tree: need at least one point");
  if (n0 < 2)
    throw ConfigError("build_tree: n0 must be >= 2");
  check_distinct(points);

  PartitionTree tree;
  tree.n0 = n0;
  tree.rule = rule;
  tree.seed = seed;
  tree.permutation.resize(n);
  std::iota(tree.permutation.begin(), tree.permutation.end(), 0);

  Rng rng(seed);
  TreeNode root;
  root.begin = 0;
  root.end = n;
  tree.nodes.push_back(root);

  std::vector<std::pair<double, Index>> proj;
  // Breadth-first so node ids are grouped by depth.
  for (std::size_t cur = 0; cur < tree.nodes.size(); ++cur) {
    TreeNode node = tree.nodes[cur];
    tree.t = std::max(tree.t, node.depth);
    if (node.size() < n0)
      continue;
    if (rule == SplitRule::KD) {
      node.axis = static_cast<int>(node.depth % d);
      node.v = Eigen::VectorXd::Unit(d, node.axis);
    } else {
      node.v.resize(d);
      for (Index k = 0; k < d; ++k)
        node.v[k] = rng.normal();
      node.v /= node.v.norm();
    }
    proj.clear();
    for (Index pos = node.begin; pos < node.end; ++pos) {
      const Index idx = tree.permutation[pos];
      proj.emplace_back(tree.project(node, points.col(idx).data()), idx);
    }
    std::stable_sort(proj.begin(), proj.end(),
                     [](const auto &a, const auto &b) { return a.first < b.first; });
    const Index s = node.size();
    const Index nl = (s + 1) / 2;
    for (Index k = 0; k < s; ++k)
      tree.permutation[node.begin + k] = proj[k].second;
    node.threshold = proj[nl - 1].first;

    TreeNode l, r;
    l.depth = r.depth = node.depth + 1;
    l.parent = r.parent = node.id;
    l.begin = node.begin;
    l.end = node.begin + nl;
    r.begin = l.end;
    r.end = node.end;
    l.id = static_cast<Index>(tree.nodes.size());
    r.id = l.id + 1;
    node.left = l.id;
    node.right = r.id;
    tree.nodes[cur] = node;
    tree.nodes.push_back(l);
    tree.nodes.push_back(r);
  }
  tree.levels.assign(tree.t + 1, {});
  for (const auto &node : tree.nodes)
    tree.levels[node.depth].push_back(node.id);
  return tree;
}

std::vector<Index> search_cells(const PartitionTree &tree,
                                const Points &points,
                                const std::vector<Index> &members,
                                int target_depth, double tau,
                                SearchRule rule) {
  if (members.empty())
    throw ConfigError("search_cells: empty source set");
  if (target_depth < 0 || target_depth > tree.t)
    throw ConfigError("search_cells: target depth out of range");
  std::vector<Index> out;
  std::vector<Index> stack{0};
  while (!stack.empty()) {
    const TreeNode &node = tree.nodes[stack.back()];
    stack.pop_back();
    if (node.depth == target_depth) {
      out.push_back(node.id);
      continue;
    }
    if (node.leaf())
      continue;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (Index m : members) {
      const double p = tree.project(node, points.col(m).data());
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
    const bool left_only = hi + tau <= node.threshold;
    // Slack keeps points at exactly distance tau despite roundoff in lo - tau.
    const bool right_only = rule == SearchRule::TwoSided &&
                            lo - tau > node.threshold + 1e-12 * (std::abs(lo) + tau);
    // Push right first so the left subtree is visited first.
    if (!left_only)
      stack.push_back(node.right);
    if (!right_only)
      stack.push_back(node.left);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Index> search_cells(const PartitionTree &tree,
                                const Points &points, Index source_node,
                                int target_depth, double tau,
                                SearchRule rule) {
  const TreeNode &node = tree.nodes.at(source_node);
  std::vector<Index> members(tree.permutation.begin() + node.begin,
                             tree.permutation.begin() + node.end);
  return search_cells(tree, points, members, target_depth, tau, rule);
}

nlohmann::json tree_stats(const PartitionTree &tree) {
  nlohmann::json j;
  j["n"] = tree.num_points();
  j["n0"] = tree.n0;
  j["t"] = tree.t;
  j["rule"] = to_string(tree.rule);
  j["seed"] = tree.seed;
  j["rng_version"] = Rng::kVersion;
  j["nodes"] = tree.nodes.size();
  nlohmann::json levels = nlohmann::json::array();
  for (int q = 0; q <= tree.t; ++q) {
    Index mn = tree.num_points(), mx = 0, leaves = 0;
    for (Index id : tree.levels[q]) {
      const auto &node = tree.nodes[id];
      mn = std::min(mn, node.size());
      mx = std::max(mx, node.size());
      leaves += node.leaf() ? 1 : 0;
    }
    levels.push_back({{"depth", q},
                      {"cells", tree.levels[q].size()},
                      {"leaves", leaves},
                      {"min_size", mn},
                      {"max_size", mx}});
  }
  j["levels"] = levels;
  return j;
}

} // namespace mlkrig::tree
