#include <doctest.h>

#include <cmath>
#include <functional>

#include "oracles.hpp"
#include "ruleflow/error.hpp"
#include "ruleflow/random.hpp"
#include "ruleflow/tree.hpp"

using namespace ruleflow;

namespace {

Dataset one_feature(std::vector<double> x, std::vector<double> y) {
  const auto n = static_cast<Eigen::Index>(x.size());
  return make_dataset({"x"}, Eigen::Map<Matrix>(x.data(), n, 1),
                      Eigen::Map<Vector>(y.data(), n));
}

Dataset noisy_grid(std::uint64_t seed, Eigen::Index n, Eigen::Index p) {
  Rng rng(seed);
  Matrix x(n, p);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      // Coarse grid so ties between values and between splits occur.
      x(i, j) = std::floor(rng.uniform() * 20.0) / 2.0;
    }
    y(i) = (x(i, 0) > 4.0 ? 50.0 : 5.0) + x(i, 1) * x(i, 2) + rng.normal();
  }
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < p; ++j) names.push_back("f" + std::to_string(j));
  return make_dataset(names, x, y);
}

const LeafNode& leaf_at(const RegressionTree& t, std::size_t i) {
  return std::get<LeafNode>(t.nodes.at(i));
}

}  // namespace

TEST_CASE("constant target gives a single leaf") {
  const Dataset ds = one_feature({1, 2, 3, 4}, {5, 5, 5, 5});
  const RegressionTree t = fit_tree(ds, 3, 1);
  CHECK(t.n_leaves == 1);
  CHECK(t.depth() == 0);
  CHECK(predict(t, Vector(Vector::Constant(1, 123.0))) == 5.0);
  const auto ls = leaves(t);
  REQUIRE(ls.size() == 1);
  CHECK(ls[0].path.empty());
}

TEST_CASE("four-point split lands on the brute-force optimum") {
  const std::vector<double> x{1, 2, 3, 4}, y{0, 0, 10, 10};
  const auto expected = oracle::best_split(x, y);
  CHECK(expected.threshold == 2.5);

  const RegressionTree t = fit_tree(one_feature(x, y), 1, 1);
  REQUIRE(t.n_leaves == 2);
  const auto& root = std::get<SplitNode>(t.nodes[0]);
  CHECK(root.feature == 0);
  CHECK(root.threshold == 2.5);
  CHECK(leaf_at(t, root.left).mean == 0.0);
  CHECK(leaf_at(t, root.right).mean == 10.0);

  CHECK(predict(t, Vector(Vector::Constant(1, 2.0))) == 0.0);
  CHECK(predict(t, Vector(Vector::Constant(1, 2.5))) == 0.0);
  CHECK(predict(t, Vector(Vector::Constant(1, 2.6))) == 10.0);

  const auto ls = leaves(t);
  REQUIRE(ls.size() == 2);
  CHECK(ls[0].mean == 0.0);
  CHECK(ls[0].path.size() == 1);
  CHECK(ls[0].path[0].goes_left);
  CHECK(ls[0].path[0].threshold == 2.5);
  CHECK(ls[1].mean == 10.0);
  CHECK_FALSE(ls[1].path[0].goes_left);
}

TEST_CASE("root split matches the brute-force oracle on random data") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 100);
    std::vector<double> x(60), y(60);
    for (std::size_t i = 0; i < 60; ++i) {
      x[i] = rng.uniform(0.0, 10.0);
      y[i] = 10.0 + std::sin(x[i]) * 5.0 + rng.normal();
    }
    const auto expected = oracle::best_split(x, y);
    const RegressionTree t = fit_tree(one_feature(x, y), 1, 1);
    REQUIRE(t.nodes.size() == 3);
    CHECK(std::get<SplitNode>(t.nodes[0]).threshold == expected.threshold);
  }
}

TEST_CASE("ties resolve to the lowest feature index") {
  // Both features separate y identically.
  Matrix x(4, 2);
  x << 1, 1, 2, 2, 3, 3, 4, 4;
  Vector y(4);
  y << 0, 0, 10, 10;
  const RegressionTree t = fit_tree(make_dataset({"a", "b"}, x, y), 1, 1);
  CHECK(std::get<SplitNode>(t.nodes[0]).feature == 0);
}

TEST_CASE("ties between thresholds resolve to the smallest") {
  // Splitting at 1.5 or 3.5 gives the same reduction.
  const std::vector<double> x{1, 2, 3, 4}, y{0, 5, 5, 10};
  const RegressionTree t = fit_tree(one_feature(x, y), 1, 1);
  CHECK(std::get<SplitNode>(t.nodes[0]).threshold == 1.5);
}

TEST_CASE("fit_tree rejects bad inputs") {
  const Dataset ds = one_feature({1, 2, 3, 4}, {0, 0, 10, 10});
  CHECK_THROWS_AS(fit_tree(ds, 0, 1), Error);
  CHECK_THROWS_AS(fit_tree(ds, kMaxTreeDepth + 1, 1), Error);
  CHECK_THROWS_AS(fit_tree(ds, 3, 20), Error);
  const RegressionTree t = fit_tree(ds, 1, 1);
  CHECK_THROWS_AS(predict(t, Vector(Vector::Zero(2))), Error);
}

TEST_CASE("structural invariants over depths 1-15") {
  for (int depth = 1; depth <= 15; ++depth) {
    const Dataset ds = noisy_grid(static_cast<std::uint64_t>(depth), 600, 4);
    const RegressionTree t = fit_tree(ds, depth, 5);
    CAPTURE(depth);
    CHECK(t.depth() <= depth);
    CHECK(t.n_leaves <= (std::size_t{1} << depth));
    const auto ls = leaves(t);
    CHECK(ls.size() == t.n_leaves);

    Eigen::Index total = 0;
    double weighted = 0.0;
    for (const auto& l : ls) {
      total += l.n_samples;
      weighted += static_cast<double>(l.n_samples) * l.mean;
      CHECK(l.n_samples >= 5);
      CHECK(static_cast<int>(l.path.size()) <= depth);
    }
    CHECK(total == ds.n_rows());
    CHECK(std::abs(weighted / double(ds.n_rows()) - ds.target.mean()) < 1e-9);

    // Training predictions are the leaf means each row lands in.
    const Vector pred = predict(t, ds.features);
    for (Eigen::Index i = 0; i < ds.n_rows(); ++i) {
      const Vector row = ds.features.row(i).transpose();
      const auto leaf = route(t, std::span<const double>(row.data(), row.size()));
      CHECK(pred[i] == leaf_at(t, leaf).mean);
    }
  }
}

TEST_CASE("every split strictly reduces SSE") {
  const Dataset ds = noisy_grid(77, 500, 3);
  const RegressionTree t = fit_tree(ds, 8, 3);
  // Recompute per-node row sets by routing and compare SSEs.
  std::function<void(std::size_t, const std::vector<Eigen::Index>&)> walk =
      [&](std::size_t node, const std::vector<Eigen::Index>& rows) {
        const auto* split = std::get_if<SplitNode>(&t.nodes[node]);
        if (split == nullptr) return;
        std::vector<Eigen::Index> l, r;
        std::vector<double> yl, yr, yall;
        for (auto i : rows) {
          yall.push_back(ds.target[i]);
          if (ds.features(i, split->feature) <= split->threshold) {
            l.push_back(i);
            yl.push_back(ds.target[i]);
          } else {
            r.push_back(i);
            yr.push_back(ds.target[i]);
          }
        }
        CHECK(oracle::sse(yall) - oracle::sse(yl) - oracle::sse(yr) > 0.0);
        walk(split->left, l);
        walk(split->right, r);
      };
  std::vector<Eigen::Index> all(static_cast<std::size_t>(ds.n_rows()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<Eigen::Index>(i);
  walk(0, all);
}

TEST_CASE("fitting is deterministic and JSON round-trips") {
  const Dataset ds = noisy_grid(9, 400, 4);
  const RegressionTree a = fit_tree(ds, 6, 10);
  const RegressionTree b = fit_tree(ds, 6, 10);
  CHECK(tree_to_json(a) == tree_to_json(b));

  const RegressionTree back = tree_from_json(tree_to_json(a));
  CHECK(back.nodes.size() == a.nodes.size());
  CHECK(back.n_leaves == a.n_leaves);
  CHECK(back.feature_names == a.feature_names);
  CHECK(tree_to_json(back) == tree_to_json(a));
  CHECK(predict(back, ds.features) == predict(a, ds.features));
  CHECK_THROWS_AS(tree_from_json("{\"nope\": 1}"), Error);
}
