#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ruleflow/dataset.hpp"

namespace ruleflow {

/// Axis-aligned split: rows with feature <= threshold go left.
struct SplitNode {
  Eigen::Index feature = 0;
  double threshold = 0.0;
  std::size_t left = 0;   // node indices into RegressionTree::nodes
  std::size_t right = 0;
};

struct LeafNode {
  double mean = 0.0;
  Eigen::Index n_samples = 0;
  double sum_sq_dev = 0.0;
};

using TreeNode = std::variant<SplitNode, LeafNode>;

/// CART regression tree stored as a flat pre-order node array (root at 0).
struct RegressionTree {
  std::vector<TreeNode> nodes;
  int max_depth = 0;
  Eigen::Index min_leaf = 1;
  std::vector<std::string> feature_names;
  std::size_t n_leaves = 0;

  int depth() const;
};

inline constexpr int kMaxTreeDepth = 32;
inline constexpr Eigen::Index kDefaultMinLeaf = 20;

/// Greedy exhaustive CART fit on SSE reduction. Candidate thresholds are
/// midpoints between consecutive distinct values; ties resolve to the lowest
/// feature index, then the smallest threshold.
RegressionTree fit_tree(const Dataset& train, int max_depth,
                        Eigen::Index min_leaf = kDefaultMinLeaf);

double predict(const RegressionTree& tree, std::span<const double> row);
double predict(const RegressionTree& tree, const Vector& row);
Vector predict(const RegressionTree& tree, const Matrix& rows);

/// Index of the leaf node a row lands in.
std::size_t route(const RegressionTree& tree, std::span<const double> row);

struct PathStep {
  Eigen::Index feature = 0;
  bool goes_left = true;  // true: feature <= threshold, false: feature > threshold
  double threshold = 0.0;
};

struct LeafPath {
  double mean = 0.0;
  Eigen::Index n_samples = 0;
  std::vector<PathStep> path;
};

/// Depth-first, left-to-right leaf enumeration with root-to-leaf paths.
std::vector<LeafPath> leaves(const RegressionTree& tree);

std::string tree_to_json(const RegressionTree& tree);
RegressionTree tree_from_json(std::string_view text);

}  // namespace ruleflow
