#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mlkrig/types.hpp"

namespace mlkrig::tree {

enum class SplitRule { RP, KD };

// How search_cells prunes. Verbatim prunes only the right child (a cell
// sitting clearly left of the threshold); TwoSided also prunes the left
// child when the whole point set sits clearly to the right.
enum class SearchRule { Verbatim, TwoSided };

std::string to_string(SplitRule rule);
SplitRule parse_rule(const std::string &name);
std::string to_string(SearchRule rule);
SearchRule parse_search_rule(const std::string &name);

struct TreeNode {
  Index id = 0;
  int depth = 0;
  Eigen::VectorXd v; // unit split vector, empty for leaves
  int axis = -1;     // coordinate for kD splits
  double threshold = 0.0;
  Index left = -1;
  Index right = -1;
  Index parent = -1;
  Index begin = 0; // range into the permutation
  Index end = 0;

  bool leaf() const { return left < 0; }
  Index size() const { return end - begin; }
};

struct PartitionTree {
  std::vector<TreeNode> nodes; // ids are positions; breadth-first order
  int t = 0;
  std::vector<Index> permutation; // permuted position -> original index
  std::vector<std::vector<Index>> levels;
  int n0 = 2;
  SplitRule rule = SplitRule::KD;
  std::uint64_t seed = 0;

  const TreeNode &root() const { return nodes.front(); }
  Index num_points() const { return static_cast<Index>(permutation.size()); }
  // Projection of point x onto the split direction of an internal node.
  double project(const TreeNode &node, const double *x) const;
};

inline constexpr double kInfiniteTau = std::numeric_limits<double>::infinity();

PartitionTree build_tree(const Points &points, int n0, SplitRule rule,
                         std::uint64_t seed);

// Node ids at target_depth reached by the radius-tau descent from the
// point set K (columns of `points` selected by `members`).
std::vector<Index> search_cells(const PartitionTree &tree,
                                const Points &points,
                                const std::vector<Index> &members,
                                int target_depth, double tau,
                                SearchRule rule = SearchRule::Verbatim);

// Convenience overload for the points of a tree node.
std::vector<Index> search_cells(const PartitionTree &tree,
                                const Points &points, Index source_node,
                                int target_depth, double tau,
                                SearchRule rule = SearchRule::Verbatim);

nlohmann::json tree_stats(const PartitionTree &tree);

} // namespace mlkrig::tree
