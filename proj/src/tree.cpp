#include "ruleflow/tree.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <json.hpp>

#include "ruleflow/error.hpp"

namespace ruleflow {
namespace {

struct Candidate {
  Eigen::Index feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& train, int max_depth, Eigen::Index min_leaf)
      : train_(train), max_depth_(max_depth), min_leaf_(min_leaf) {}

  std::size_t build(std::vector<Eigen::Index>& rows, int depth) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    double sum = 0.0;
    double lo = train_.target[rows.front()];
    double hi = lo;
    for (auto r : rows) {
      const double y = train_.target[r];
      sum += y;
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
    const double mean = sum / static_cast<double>(n);
    double sse = 0.0;
    for (auto r : rows) {
      const double d = train_.target[r] - mean;
      sse += d * d;
    }

    const bool stop = depth >= max_depth_ || n < 2 * min_leaf_ || lo == hi;
    const Candidate best = stop ? Candidate{} : best_split(rows, mean, sse);
    if (best.feature < 0) {
      ++n_leaves_;
      nodes_.emplace_back(LeafNode{mean, n, sse});
      return nodes_.size() - 1;
    }

    const std::size_t self = nodes_.size();
    nodes_.emplace_back(SplitNode{best.feature, best.threshold, 0, 0});
    std::vector<Eigen::Index> left;
    std::vector<Eigen::Index> right;
    for (auto r : rows) {
      (train_.features(r, best.feature) <= best.threshold ? left : right)
          .push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const std::size_t l = build(left, depth + 1);
    const std::size_t rr = build(right, depth + 1);
    auto& split = std::get<SplitNode>(nodes_[self]);
    split.left = l;
    split.right = rr;
    return self;
  }

  std::vector<TreeNode> take_nodes() { return std::move(nodes_); }
  std::size_t n_leaves() const { return n_leaves_; }

 private:
  Candidate best_split(const std::vector<Eigen::Index>& rows, double mean,
                       double sse) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    Candidate best;
    // Gains below rounding noise of the parent SSE are not real reductions.
    const double min_gain = 1e-12 * sse;
    std::vector<std::pair<double, double>> xy(rows.size());
    for (Eigen::Index f = 0; f < train_.n_cols(); ++f) {
      for (std::size_t k = 0; k < rows.size(); ++k) {
        xy[k] = {train_.features(rows[k], f), train_.target[rows[k]] - mean};
      }
      std::sort(xy.begin(), xy.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      double total = 0.0;
      for (const auto& p : xy) total += p.second;
      const double base = total * total / static_cast<double>(n);

      double left_sum = 0.0;
      for (Eigen::Index i = 0; i + 1 < n; ++i) {
        left_sum += xy[i].second;
        const Eigen::Index n_left = i + 1;
        const Eigen::Index n_right = n - n_left;
        if (n_left < min_leaf_) continue;
        if (n_right < min_leaf_) break;
        const double x0 = xy[i].first;
        const double x1 = xy[i + 1].first;
        if (!(x0 < x1)) continue;
        const double right_sum = total - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(n_left) +
                            right_sum * right_sum / static_cast<double>(n_right) -
                            base;
        if (gain > min_gain && gain > best.gain) {
          double threshold = x0 + (x1 - x0) / 2.0;
          if (!(threshold >= x0 && threshold < x1)) threshold = x0;
          best = {f, threshold, gain};
        }
      }
    }
    return best;
  }

  const Dataset& train_;
  int max_depth_;
  Eigen::Index min_leaf_;
  std::vector<TreeNode> nodes_;
  std::size_t n_leaves_ = 0;
};

int subtree_depth(const RegressionTree& tree, std::size_t node) {
  if (const auto* s = std::get_if<SplitNode>(&tree.nodes[node])) {
    return 1 + std::max(subtree_depth(tree, s->left),
                        subtree_depth(tree, s->right));
  }
  return 0;
}

}  // namespace

int RegressionTree::depth() const {
  return nodes.empty() ? 0 : subtree_depth(*this, 0);
}

RegressionTree fit_tree(const Dataset& train, int max_depth,
                        Eigen::Index min_leaf) {
  if (train.n_rows() == 0) throw ValidationError("empty training set");
  if (max_depth < 1 || max_depth > kMaxTreeDepth) {
    throw ValidationError("max_depth must lie in [1, " +
                          std::to_string(kMaxTreeDepth) + "], got " +
                          std::to_string(max_depth));
  }
  if (min_leaf < 1) throw ValidationError("min_leaf must be >= 1");
  if (train.n_rows() < 2 * min_leaf) {
    throw ValidationError("training set has " + std::to_string(train.n_rows()) +
                          " rows, fewer than 2 * min_leaf");
  }
  validate(train);

  TreeBuilder builder(train, max_depth, min_leaf);
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(train.n_rows()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i] = static_cast<Eigen::Index>(i);
  }
  builder.build(rows, 0);

  RegressionTree tree;
  tree.n_leaves = builder.n_leaves();
  tree.nodes = builder.take_nodes();
  tree.max_depth = max_depth;
  tree.min_leaf = min_leaf;
  tree.feature_names = train.feature_names;
  return tree;
}

std::size_t route(const RegressionTree& tree, std::span<const double> row) {
  if (static_cast<std::size_t>(row.size()) != tree.feature_names.size()) {
    throw ValidationError("row has " + std::to_string(row.size()) +
                          " features, tree expects " +
                          std::to_string(tree.feature_names.size()));
  }
  std::size_t node = 0;
  while (const auto* s = std::get_if<SplitNode>(&tree.nodes[node])) {
    node = row[static_cast<std::size_t>(s->feature)] <= s->threshold ? s->left
                                                                     : s->right;
  }
  return node;
}

double predict(const RegressionTree& tree, std::span<const double> row) {
  return std::get<LeafNode>(tree.nodes[route(tree, row)]).mean;
}

double predict(const RegressionTree& tree, const Vector& row) {
  return predict(tree, std::span<const double>(row.data(),
                                               static_cast<std::size_t>(row.size())));
}

Vector predict(const RegressionTree& tree, const Matrix& rows) {
  Vector out(rows.rows());
  Vector row(rows.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    row = rows.row(i).transpose();
    out[i] = predict(tree, row);
  }
  return out;
}

std::vector<LeafPath> leaves(const RegressionTree& tree) {
  std::vector<LeafPath> out;
  std::vector<PathStep> path;
  std::function<void(std::size_t)> walk = [&](std::size_t node) {
    if (const auto* s = std::get_if<SplitNode>(&tree.nodes[node])) {
      path.push_back({s->feature, true, s->threshold});
      walk(s->left);
      path.back().goes_left = false;
      walk(s->right);
      path.pop_back();
      return;
    }
    const auto& leaf = std::get<LeafNode>(tree.nodes[node]);
    out.push_back({leaf.mean, leaf.n_samples, path});
  };
  if (!tree.nodes.empty()) walk(0);
  return out;
}

namespace {

using nlohmann::json;

json node_to_json(const RegressionTree& tree, std::size_t node) {
  if (const auto* s = std::get_if<SplitNode>(&tree.nodes[node])) {
    return json{{"feature", tree.feature_names[static_cast<std::size_t>(s->feature)]},
                {"feature_index", s->feature},
                {"threshold", s->threshold},
                {"left", node_to_json(tree, s->left)},
                {"right", node_to_json(tree, s->right)}};
  }
  const auto& leaf = std::get<LeafNode>(tree.nodes[node]);
  return json{{"leaf", true},
              {"mean", leaf.mean},
              {"n_samples", leaf.n_samples},
              {"sum_sq_dev", leaf.sum_sq_dev}};
}

std::size_t node_from_json(const json& j, RegressionTree& tree, int depth) {
  if (depth > kMaxTreeDepth) throw ValidationError("tree document too deep");
  if (j.value("leaf", false)) {
    tree.nodes.emplace_back(LeafNode{j.at("mean").get<double>(),
                                     j.at("n_samples").get<Eigen::Index>(),
                                     j.at("sum_sq_dev").get<double>()});
    ++tree.n_leaves;
    return tree.nodes.size() - 1;
  }
  const auto feature = j.at("feature_index").get<Eigen::Index>();
  if (feature < 0 ||
      feature >= static_cast<Eigen::Index>(tree.feature_names.size()) ||
      tree.feature_names[static_cast<std::size_t>(feature)] !=
          j.at("feature").get<std::string>()) {
    throw ValidationError("tree document has inconsistent feature reference");
  }
  const std::size_t self = tree.nodes.size();
  tree.nodes.emplace_back(SplitNode{feature, j.at("threshold").get<double>(), 0, 0});
  const std::size_t l = node_from_json(j.at("left"), tree, depth + 1);
  const std::size_t r = node_from_json(j.at("right"), tree, depth + 1);
  auto& split = std::get<SplitNode>(tree.nodes[self]);
  split.left = l;
  split.right = r;
  return self;
}

}  // namespace

std::string tree_to_json(const RegressionTree& tree) {
  json doc{{"max_depth", tree.max_depth},
           {"min_leaf", tree.min_leaf},
           {"feature_names", tree.feature_names},
           {"n_leaves", tree.n_leaves},
           {"root", node_to_json(tree, 0)}};
  return doc.dump(2) + "\n";
}

RegressionTree tree_from_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    RegressionTree tree;
    tree.max_depth = doc.at("max_depth").get<int>();
    tree.min_leaf = doc.at("min_leaf").get<Eigen::Index>();
    tree.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    node_from_json(doc.at("root"), tree, 0);
    if (tree.n_leaves != doc.at("n_leaves").get<std::size_t>()) {
      throw ValidationError("tree document leaf count mismatch");
    }
    return tree;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed tree document: ") + e.what());
  }
}

}  // namespace ruleflow
