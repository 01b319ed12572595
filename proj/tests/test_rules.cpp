#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "ruleflow/error.hpp"
#include "ruleflow/random.hpp"
#include "ruleflow/rules.hpp"
#include "ruleflow/synthetic.hpp"

using namespace ruleflow;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool raw_path_holds(const LeafPath& leaf, const Matrix& x, Eigen::Index row) {
  for (const auto& s : leaf.path) {
    const double v = x(row, s.feature);
    if (s.goes_left ? !(v <= s.threshold) : !(v > s.threshold)) return false;
  }
  return true;
}

Dataset uniform_rows(std::uint64_t seed, Eigen::Index n,
                     const std::vector<std::string>& names) {
  Rng rng(seed);
  Matrix x(n, static_cast<Eigen::Index>(names.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
  return make_dataset(names, x, Vector::Zero(n));
}

}  // namespace

TEST_CASE("merge_path intersects same-feature steps") {
  const std::vector<std::string> names{"x"};
  const std::vector<PathStep> path{{0, true, 5.0}, {0, true, 3.0}, {0, false, 1.0}};
  const auto conds = merge_path(path, names);
  REQUIRE(conds.size() == 1);
  CHECK(conds[0] == Condition{"x", 1.0, 3.0});
}

TEST_CASE("merged conditions keep first-appearance order") {
  const std::vector<std::string> names{"a", "b"};
  const std::vector<PathStep> path{{1, false, 2.0}, {0, true, 7.0}, {1, true, 9.0}};
  const auto conds = merge_path(path, names);
  REQUIRE(conds.size() == 2);
  CHECK(conds[0] == Condition{"b", 2.0, 9.0});
  CHECK(conds[1] == Condition{"a", -kInf, 7.0});
}

TEST_CASE("rule_matches uses (lower, upper]") {
  Rule r;
  r.conditions = {{"x", 1.0, 3.0}};
  const std::vector<std::string> names{"x"};
  auto at = [&](double v) { return rule_matches(r, names, std::span<const double>(&v, 1)); };
  CHECK(at(3.0));
  CHECK_FALSE(at(1.0));
  CHECK_FALSE(at(3.0001));
  CHECK(at(2.0));

  const Rule empty;
  const double v = -1e300;
  CHECK(rule_matches(empty, names, std::span<const double>(&v, 1)));

  const std::vector<std::string> other{"y"};
  CHECK_THROWS_WITH_AS(rule_matches(r, other, std::span<const double>(&v, 1)),
                       doctest::Contains("'x'"), Error);
}

TEST_CASE("top-flow rule from a depth-3 tree, hand evaluated") {
  const Rule r = parse_rule(
      "distance_miles <= 46.08 AND POIs_Destination > 323 AND POIs_Origin > 307 => 31867.81");
  CHECK(r.conditions.size() == 3);
  CHECK(r.leaf_mean == 31867.81);
  const std::vector<std::string> names{"distance_miles", "POIs_Destination", "POIs_Origin"};
  const std::vector<double> row{40, 400, 400};
  CHECK(rule_matches(r, names, row));
  const std::vector<double> far{50, 400, 400};
  CHECK_FALSE(rule_matches(r, names, far));
}

TEST_CASE("single-leaf tree gives one vacuous rule") {
  Matrix x(4, 1);
  x << 1, 2, 3, 4;
  const Dataset ds = make_dataset({"x"}, x, Vector::Constant(4, 3.0));
  const RuleSet set = extract_rules(fit_tree(ds, 2, 1), ds);
  REQUIRE(set.rules.size() == 1);
  CHECK(set.rules[0].conditions.empty());
  CHECK(set.rules[0].support == 4);
  CHECK(set.rules[0].indicator_variance == 0.0);
  CHECK(format_conditions(set.rules[0]) == "TRUE");
}

TEST_CASE("extract_rules rejects a column mismatch") {
  const Dataset train = make_synthetic(200, 1);
  const RegressionTree t = fit_tree(train, 3);
  const Dataset renamed = make_dataset({"a", "b", "c", "d", "e", "f"}, train.features, train.target);
  CHECK_THROWS_AS(extract_rules(t, renamed), Error);
}

TEST_CASE("rules on the synthetic surface") {
  const Dataset train = make_synthetic(4000, 3);
  for (int depth = 1; depth <= 10; ++depth) {
    CAPTURE(depth);
    const RegressionTree t = fit_tree(train, depth);
    const RuleSet set = extract_rules(t, train);
    const auto ls = leaves(t);
    REQUIRE(set.rules.size() == ls.size());
    CHECK(set.complete_partition);
    CHECK(set.source_depth == depth);

    const Dataset enc = encode(set, train);
    REQUIRE(enc.n_cols() == static_cast<Eigen::Index>(set.rules.size()));
    CHECK(enc.feature_names.front() == "rule_" + std::to_string(depth) + "_0");
    for (std::size_t r = 0; r < set.rules.size(); ++r) {
      const auto& rule = set.rules[r];
      CHECK(enc.features.col(static_cast<Eigen::Index>(r)).sum() == double(rule.support));
      const double p = double(rule.support) / double(train.n_rows());
      CHECK(rule.indicator_variance == doctest::Approx(p * (1 - p)).epsilon(1e-15));
      CHECK(rule.indicator_variance >= 0.0);
      CHECK(rule.indicator_variance <= 0.25);
      CHECK(rule.leaf_mean == ls[r].mean);
    }

    // Merged conditions agree with the raw path on fresh rows.
    const Dataset fresh = uniform_rows(static_cast<std::uint64_t>(depth), 500, train.feature_names);
    const Dataset fresh_enc = encode(set, fresh);
    for (Eigen::Index i = 0; i < fresh.n_rows(); ++i) {
      CHECK(fresh_enc.features.row(i).sum() == 1.0);
      for (std::size_t r = 0; r < ls.size(); ++r) {
        CHECK((fresh_enc.features(i, static_cast<Eigen::Index>(r)) == 1.0) ==
              raw_path_holds(ls[r], fresh.features, i));
      }
    }
  }
}

TEST_CASE("variance filter") {
  Rule r;
  r.support = 5000;
  const double p = 5000.0 / 100000.0;
  r.indicator_variance = p * (1 - p);
  CHECK(r.indicator_variance == doctest::Approx(0.0475).epsilon(1e-15));
  Rule all;
  all.support = 100000;
  all.indicator_variance = 0.0;
  RuleSet set{{r, all}, 4, 100000, true};
  set.rules[1].index = 1;

  CHECK(filter_by_variance(set, 0.0).rules.size() == 2);
  CHECK(filter_by_variance(set, 0.0).complete_partition);
  for (double t : {0.01, 0.001, 0.0001}) {
    const RuleSet kept = filter_by_variance(set, t);
    REQUIRE(kept.rules.size() == 1);
    CHECK(kept.rules[0].index == 0);
    CHECK_FALSE(kept.complete_partition);
  }
  CHECK_THROWS_AS(filter_by_variance(set, -0.1), Error);
}

TEST_CASE("variance thresholds nest") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset train = make_synthetic(2000, seed);
    const RuleSet set = extract_rules(fit_tree(train, 10, 5), train);
    std::vector<std::size_t> prev;
    for (std::size_t r = 0; r < set.rules.size(); ++r) prev.push_back(set.rules[r].index);
    for (double t : {0.0001, 0.001, 0.01}) {
      std::vector<std::size_t> cur;
      for (const auto& rule : filter_by_variance(set, t).rules) cur.push_back(rule.index);
      CHECK(std::includes(prev.begin(), prev.end(), cur.begin(), cur.end()));
      prev = cur;
    }
    // A filtered subset of the partition is never more than one-hot.
    const Dataset enc = encode(filter_by_variance(set, 0.01), train);
    if (enc.n_cols() > 0) CHECK(enc.features.rowwise().sum().maxCoeff() <= 1.0);
  }
}

TEST_CASE("format and parse") {
  Rule r;
  r.conditions = {{"distance_miles", 46.08, 58.77}};
  r.leaf_mean = 2728.7;
  CHECK(format_conditions(r) == "46.08 < distance_miles <= 58.77");
  CHECK(format_rule(r) == "46.08 < distance_miles <= 58.77 => 2728.70");

  r.conditions.push_back({"NaturalAreaCounts_Destination", 935.5, kInf});
  CHECK(format_conditions(r) ==
        "46.08 < distance_miles <= 58.77 AND NaturalAreaCounts_Destination > 935.5");

  const Dataset train = make_synthetic(3000, 8);
  const RuleSet set = extract_rules(fit_tree(train, 8), train);
  for (const auto& rule : set.rules) {
    const Rule back = parse_rule(format_rule(rule));
    CHECK(back.conditions == rule.conditions);
    CHECK(std::abs(back.leaf_mean - rule.leaf_mean) <= 0.005 + 1e-9);
  }
  CHECK_THROWS_AS(parse_rule("x <> 3 => 1"), Error);
}

TEST_CASE("JSON and text export") {
  const Dataset train = make_synthetic(3000, 4);
  const RuleSet set = extract_rules(fit_tree(train, 5), train);
  const RuleSet back = rules_from_json(rules_to_json(set));
  REQUIRE(back.rules.size() == set.rules.size());
  CHECK(back.source_depth == set.source_depth);
  CHECK(back.n_train_rows == set.n_train_rows);
  CHECK(back.complete_partition == set.complete_partition);
  for (std::size_t i = 0; i < set.rules.size(); ++i) {
    CHECK(back.rules[i].conditions == set.rules[i].conditions);
    CHECK(back.rules[i].leaf_mean == set.rules[i].leaf_mean);
    CHECK(back.rules[i].support == set.rules[i].support);
    CHECK(back.rules[i].index == set.rules[i].index);
  }
  const std::string text = rules_to_text(set);
  CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(set.rules.size()));
  CHECK(text.rfind("rule_5_0\t", 0) == 0);
}
