#include "ruleflow/rules.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "ruleflow/csv.hpp"
#include "ruleflow/error.hpp"

namespace ruleflow {
namespace {

double indicator_variance(Eigen::Index support, Eigen::Index n) {
  if (n == 0) return 0.0;
  const double p = static_cast<double>(support) / static_cast<double>(n);
  return p * (1.0 - p);
}

std::vector<Eigen::Index> resolve(const Rule& rule,
                                  std::span<const std::string> names) {
  std::vector<Eigen::Index> cols;
  cols.reserve(rule.conditions.size());
  for (const auto& c : rule.conditions) {
    Eigen::Index found = -1;
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (names[j] == c.feature) {
        found = static_cast<Eigen::Index>(j);
        break;
      }
    }
    if (found < 0) {
      throw ValidationError("rule references absent column '" + c.feature + "'");
    }
    cols.push_back(found);
  }
  return cols;
}

double parse_number(std::string_view s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ValidationError("bad number '" + std::string(s) + "' in rule text");
  }
  return v;
}

std::vector<std::string_view> split_on(std::string_view s, std::string_view sep) {
  std::vector<std::string_view> parts;
  for (;;) {
    const auto pos = s.find(sep);
    if (pos == std::string_view::npos) {
      parts.push_back(s);
      return parts;
    }
    parts.push_back(s.substr(0, pos));
    s.remove_prefix(pos + sep.size());
  }
}

}  // namespace

std::vector<Condition> merge_path(std::span<const PathStep> path,
                                  std::span<const std::string> feature_names) {
  std::vector<Condition> merged;
  std::unordered_map<Eigen::Index, std::size_t> slot;
  for (const auto& step : path) {
    auto [it, fresh] = slot.try_emplace(step.feature, merged.size());
    if (fresh) {
      Condition c;
      c.feature = feature_names[static_cast<std::size_t>(step.feature)];
      merged.push_back(c);
    }
    auto& c = merged[it->second];
    if (step.goes_left) {
      c.upper = std::min(c.upper, step.threshold);
    } else {
      c.lower = std::max(c.lower, step.threshold);
    }
  }
  for (const auto& c : merged) {
    if (!(c.lower < c.upper)) {
      throw ValidationError("path yields an empty interval on '" + c.feature + "'");
    }
  }
  return merged;
}

RuleSet extract_rules(const RegressionTree& tree, const Dataset& train) {
  if (train.feature_names != tree.feature_names) {
    throw ValidationError("training columns do not match the tree's columns");
  }
  RuleSet set;
  set.source_depth = tree.max_depth;
  set.n_train_rows = train.n_rows();
  set.complete_partition = true;

  // Leaf node index -> rule position, so support comes from one routing pass.
  std::unordered_map<std::size_t, std::size_t> leaf_to_rule;
  std::vector<std::size_t> order;
  {
    std::vector<std::size_t> stack{0};
    while (!stack.empty()) {
      const std::size_t node = stack.back();
      stack.pop_back();
      if (const auto* s = std::get_if<SplitNode>(&tree.nodes[node])) {
        stack.push_back(s->right);
        stack.push_back(s->left);
      } else {
        leaf_to_rule[node] = order.size();
        order.push_back(node);
      }
    }
  }

  const auto paths = leaves(tree);
  for (std::size_t k = 0; k < paths.size(); ++k) {
    Rule rule;
    rule.index = k;
    rule.conditions = merge_path(paths[k].path, tree.feature_names);
    rule.leaf_mean = paths[k].mean;
    set.rules.push_back(std::move(rule));
  }

  Vector row(train.n_cols());
  for (Eigen::Index i = 0; i < train.n_rows(); ++i) {
    row = train.features.row(i).transpose();
    const auto leaf = route(tree, std::span<const double>(
                                      row.data(), static_cast<std::size_t>(row.size())));
    ++set.rules[leaf_to_rule.at(leaf)].support;
  }
  for (auto& rule : set.rules) {
    rule.indicator_variance = indicator_variance(rule.support, set.n_train_rows);
  }
  return set;
}

bool rule_matches(const Rule& rule, std::span<const std::string> names,
                  std::span<const double> row) {
  if (names.size() != row.size()) {
    throw ValidationError("row width does not match its column names");
  }
  const auto cols = resolve(rule, names);
  for (std::size_t k = 0; k < cols.size(); ++k) {
    if (!rule.conditions[k].holds(row[static_cast<std::size_t>(cols[k])])) {
      return false;
    }
  }
  return true;
}

std::string rule_name(const RuleSet& set, const Rule& rule) {
  return "rule_" + std::to_string(set.source_depth) + "_" +
         std::to_string(rule.index);
}

Dataset encode(const RuleSet& set, const Dataset& ds) {
  Dataset out;
  out.target = ds.target;
  out.features.resize(ds.n_rows(), static_cast<Eigen::Index>(set.rules.size()));
  using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;
  for (std::size_t r = 0; r < set.rules.size(); ++r) {
    const Rule& rule = set.rules[r];
    const auto cols = resolve(rule, ds.feature_names);
    Mask mask = Mask::Constant(ds.n_rows(), true);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const auto x = ds.features.col(cols[k]).array();
      const auto& c = rule.conditions[k];
      mask = mask && (x > c.lower) && (x <= c.upper);
    }
    out.features.col(static_cast<Eigen::Index>(r)) = mask.cast<double>().matrix();
    out.feature_names.push_back(rule_name(set, rule));
  }
  return out;
}

RuleSet filter_by_variance(const RuleSet& set, double threshold) {
  if (!(threshold >= 0.0)) {
    throw ValidationError("variance threshold must be non-negative");
  }
  RuleSet out = set;
  out.rules.clear();
  for (const auto& rule : set.rules) {
    if (rule.indicator_variance >= threshold) out.rules.push_back(rule);
  }
  out.complete_partition =
      set.complete_partition && out.rules.size() == set.rules.size();
  return out;
}

std::string format_conditions(const Rule& rule) {
  if (rule.conditions.empty()) return "TRUE";
  std::string out;
  for (const auto& c : rule.conditions) {
    if (!out.empty()) out += " AND ";
    const bool has_lower = std::isfinite(c.lower);
    const bool has_upper = std::isfinite(c.upper);
    if (has_lower && has_upper) {
      out += format_real(c.lower) + " < " + c.feature + " <= " + format_real(c.upper);
    } else if (has_upper) {
      out += c.feature + " <= " + format_real(c.upper);
    } else if (has_lower) {
      out += c.feature + " > " + format_real(c.lower);
    } else {
      out += format_real(c.lower) + " < " + c.feature + " <= " + format_real(c.upper);
    }
  }
  return out;
}

std::string format_rule(const Rule& rule) {
  return format_conditions(rule) + " => " + format_fixed(rule.leaf_mean, 2);
}

Rule parse_rule(std::string_view text) {
  const auto halves = split_on(text, " => ");
  if (halves.size() != 2) throw ValidationError("rule text lacks ' => '");
  Rule rule;
  rule.leaf_mean = parse_number(halves[1]);
  if (halves[0] == "TRUE") return rule;
  for (auto part : split_on(halves[0], " AND ")) {
    const auto tok = split_on(part, " ");
    Condition c;
    if (tok.size() == 5 && tok[1] == "<" && tok[3] == "<=") {
      c.lower = parse_number(tok[0]);
      c.feature = std::string(tok[2]);
      c.upper = parse_number(tok[4]);
    } else if (tok.size() == 3 && tok[1] == "<=") {
      c.feature = std::string(tok[0]);
      c.upper = parse_number(tok[2]);
    } else if (tok.size() == 3 && tok[1] == ">") {
      c.feature = std::string(tok[0]);
      c.lower = parse_number(tok[2]);
    } else {
      throw ValidationError("unrecognised condition '" + std::string(part) + "'");
    }
    rule.conditions.push_back(std::move(c));
  }
  return rule;
}

std::string rules_to_text(const RuleSet& set) {
  std::ostringstream os;
  for (const auto& rule : set.rules) {
    os << rule_name(set, rule) << '\t' << format_rule(rule) << "\tsupport="
       << rule.support << "\tvariance=" << format_real(rule.indicator_variance)
       << '\n';
  }
  return os.str();
}

namespace {

using nlohmann::json;

json bound_to_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double bound_from_json(const json& j, double unbounded) {
  return j.is_null() ? unbounded : j.get<double>();
}

}  // namespace

std::string rules_to_json(const RuleSet& set) {
  json rules = json::array();
  for (const auto& rule : set.rules) {
    json conds = json::array();
    for (const auto& c : rule.conditions) {
      conds.push_back({{"feature", c.feature},
                       {"lower", bound_to_json(c.lower)},
                       {"upper", bound_to_json(c.upper)}});
    }
    rules.push_back({{"index", rule.index},
                     {"conditions", conds},
                     {"leaf_mean", rule.leaf_mean},
                     {"support", rule.support},
                     {"indicator_variance", rule.indicator_variance}});
  }
  json doc{{"source_depth", set.source_depth},
           {"n_train_rows", set.n_train_rows},
           {"complete_partition", set.complete_partition},
           {"rules", rules}};
  return doc.dump(2) + "\n";
}

RuleSet rules_from_json(std::string_view text) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  try {
    const json doc = json::parse(text);
    RuleSet set;
    set.source_depth = doc.at("source_depth").get<int>();
    set.n_train_rows = doc.at("n_train_rows").get<Eigen::Index>();
    set.complete_partition = doc.at("complete_partition").get<bool>();
    for (const auto& r : doc.at("rules")) {
      Rule rule;
      rule.index = r.at("index").get<std::size_t>();
      rule.leaf_mean = r.at("leaf_mean").get<double>();
      rule.support = r.at("support").get<Eigen::Index>();
      rule.indicator_variance = r.at("indicator_variance").get<double>();
      for (const auto& c : r.at("conditions")) {
        rule.conditions.push_back({c.at("feature").get<std::string>(),
                                   bound_from_json(c.at("lower"), -kInf),
                                   bound_from_json(c.at("upper"), kInf)});
      }
      set.rules.push_back(std::move(rule));
    }
    return set;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed rule document: ") + e.what());
  }
}

}  // namespace ruleflow
