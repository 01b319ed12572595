#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ruleflow/dataset.hpp"
#include "ruleflow/tree.hpp"

namespace ruleflow {

/// Half-open interval (lower, upper] on one named feature.
struct Condition {
  std::string feature;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  bool holds(double value) const { return lower < value && value <= upper; }
  bool operator==(const Condition&) const = default;
};

/// One root-to-leaf path with its conditions merged per feature.
struct Rule {
  std::size_t index = 0;  // depth-first leaf position in the source tree
  std::vector<Condition> conditions;
  double leaf_mean = 0.0;
  Eigen::Index support = 0;
  double indicator_variance = 0.0;
};

struct RuleSet {
  std::vector<Rule> rules;
  int source_depth = 0;
  Eigen::Index n_train_rows = 0;
  bool complete_partition = false;
};

/// One rule per leaf of `tree`, in depth-first order. Support and indicator
/// variance p(1-p) are measured on `train`.
RuleSet extract_rules(const RegressionTree& tree, const Dataset& train);

/// Intersects a raw path into at most one interval per feature, ordered by
/// first appearance on the path.
std::vector<Condition> merge_path(std::span<const PathStep> path,
                                  std::span<const std::string> feature_names);

/// Evaluates the conjunction against a row addressed by column names.
bool rule_matches(const Rule& rule, std::span<const std::string> names,
                  std::span<const double> row);

/// `rule_<depth>_<index>`.
std::string rule_name(const RuleSet& set, const Rule& rule);

/// One 0/1 column per rule, in rule order. Target is carried over.
Dataset encode(const RuleSet& set, const Dataset& ds);

/// Keeps rules with indicator variance >= threshold, order preserved.
RuleSet filter_by_variance(const RuleSet& set, double threshold);

/// `a < f <= b`, `f <= b`, `f > a` joined by ` AND `; `TRUE` when empty.
std::string format_conditions(const Rule& rule);

/// format_conditions followed by ` => ` and the leaf mean to 2 decimals.
std::string format_rule(const Rule& rule);

/// Inverse of format_rule. Conditions round-trip exactly; the mean carries
/// the two printed decimals.
Rule parse_rule(std::string_view text);

/// Line-per-rule text export: name, rule, support, variance (tab separated).
std::string rules_to_text(const RuleSet& set);

std::string rules_to_json(const RuleSet& set);
RuleSet rules_from_json(std::string_view text);

}  // namespace ruleflow
