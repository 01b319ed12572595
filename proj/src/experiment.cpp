#include "ruleflow/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <mutex>
#include <set>
#include <thread>

#include "ruleflow/error.hpp"
#include "ruleflow/random.hpp"

namespace ruleflow {

std::string threshold_label(double threshold) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), threshold,
                           std::chars_format::fixed);
  return std::string(buf, res.ptr);
}

std::string ExperimentConfig::label() const {
  switch (type) {
    case DatasetType::kFinal:
      return "final";
    case DatasetType::kRulesOnly:
      return "rules_only";
    case DatasetType::kRulesPlusFinal:
      return "rules_plus_final";
    case DatasetType::kVariancePlusFinal:
      return "var_" + threshold_label(variance_threshold.value_or(0.0)) +
             "_plus_final";
  }
  return "unknown";
}

ExperimentConfig parse_label(const std::string& label, std::optional<int> depth) {
  ExperimentConfig cfg;
  cfg.depth = depth;
  if (label == "final") {
    cfg.type = DatasetType::kFinal;
  } else if (label == "rules_only") {
    cfg.type = DatasetType::kRulesOnly;
  } else if (label == "rules_plus_final") {
    cfg.type = DatasetType::kRulesPlusFinal;
  } else if (label.starts_with("var_") && label.ends_with("_plus_final")) {
    const std::string num = label.substr(4, label.size() - 4 - 11);
    double t = 0.0;
    auto res = std::from_chars(num.data(), num.data() + num.size(), t);
    if (res.ec != std::errc() || res.ptr != num.data() + num.size()) {
      throw ValidationError("bad variance threshold in dataset type '" + label + "'");
    }
    cfg.type = DatasetType::kVariancePlusFinal;
    cfg.variance_threshold = t;
  } else {
    throw ValidationError("unknown dataset type '" + label + "'");
  }
  if ((cfg.type == DatasetType::kFinal) != !depth.has_value()) {
    throw ValidationError("dataset type '" + label +
                          (depth ? "' does not take a depth" : "' requires a depth"));
  }
  return cfg;
}

std::uint64_t cell_seed(std::uint64_t global_seed, std::optional<int> depth,
                        const std::string& label) {
  const auto d = static_cast<std::uint64_t>(depth.value_or(0));
  return hash_combine(hash_combine(global_seed, d), hash_string(label));
}

std::vector<ExperimentConfig> build_matrix(const std::vector<int>& depths,
                                           const std::vector<double>& thresholds,
                                           std::uint64_t global_seed) {
  if (depths.empty()) throw UsageError("depth list is empty");
  std::set<int> seen;
  for (int d : depths) {
    if (d < 1 || d > kMaxTreeDepth) {
      throw UsageError("tree depth " + std::to_string(d) + " out of range");
    }
    if (!seen.insert(d).second) {
      throw UsageError("duplicate tree depth " + std::to_string(d));
    }
  }
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    if (!(thresholds[k] >= 0.0)) throw UsageError("variance thresholds must be >= 0");
    if (k > 0 && !(thresholds[k] < thresholds[k - 1])) {
      throw UsageError("variance thresholds must be strictly descending");
    }
  }

  std::vector<ExperimentConfig> matrix;
  auto add = [&](DatasetType type, std::optional<int> depth,
                 std::optional<double> threshold) {
    ExperimentConfig cfg{type, depth, threshold, 0};
    cfg.seed = cell_seed(global_seed, depth, cfg.label());
    matrix.push_back(cfg);
  };
  add(DatasetType::kFinal, std::nullopt, std::nullopt);
  for (int d : seen) {
    add(DatasetType::kRulesOnly, d, std::nullopt);
    add(DatasetType::kRulesPlusFinal, d, std::nullopt);
    for (double t : thresholds) add(DatasetType::kVariancePlusFinal, d, t);
  }
  return matrix;
}

DepthArtifacts build_depth(const SplitPair& base, int depth, Eigen::Index min_leaf) {
  DepthArtifacts art;
  art.tree = fit_tree(base.train, depth, min_leaf);
  art.rules = extract_rules(art.tree, base.train);
  art.train_rules = encode(art.rules, base.train);
  art.test_rules = encode(art.rules, base.test);
  return art;
}

CellData assemble_cell(const ExperimentConfig& cfg, const SplitPair& base,
                       const DepthArtifacts* artifacts) {
  CellData cell;
  if (cfg.type == DatasetType::kFinal) {
    cell.train = base.train;
    cell.test = base.test;
    return cell;
  }
  if (!artifacts) throw ValidationError("cell '" + cfg.label() + "' needs a tree");
  cell.n_rules_all = artifacts->rules.rules.size();

  Dataset train_rules = artifacts->train_rules;
  Dataset test_rules = artifacts->test_rules;
  cell.n_rules_selected = cell.n_rules_all;
  if (cfg.type == DatasetType::kVariancePlusFinal) {
    const RuleSet kept =
        filter_by_variance(artifacts->rules, cfg.variance_threshold.value());
    std::vector<std::string> names;
    for (const auto& rule : kept.rules) names.push_back(rule_name(kept, rule));
    train_rules = select_columns(train_rules, names);
    test_rules = select_columns(test_rules, names);
    cell.n_rules_selected = names.size();
  }

  if (cfg.type == DatasetType::kRulesOnly) {
    cell.train = std::move(train_rules);
    cell.test = std::move(test_rules);
  } else {
    cell.train = hconcat(base.train, train_rules);
    cell.test = hconcat(base.test, test_rules);
  }
  if (cell.train.n_cols() == 0) throw ValidationError("empty feature set");
  return cell;
}

MetricsReport train_and_score(const ExperimentConfig& cfg, const CellData& cell,
                              const ExperimentSettings& settings) {
  TrainConfig tc = settings.train;
  tc.seed = cfg.seed;
  auto model = init_mlp<double>(cell.train.n_cols(), settings.hidden_dims, cfg.seed);
  auto [trained, history] = train(std::move(model), cell.train.features,
                                  cell.train.target, tc);
  const Vector predicted = predict_batch(trained, cell.test.features);
  return evaluate(cell.test.target, predicted, cell.n_rules_selected);
}

ExperimentResult run_cell(const ExperimentConfig& cfg, const SplitPair& base,
                          const DepthArtifacts* artifacts,
                          const ExperimentSettings& settings) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult result;
  result.config = cfg;
  try {
    const CellData cell = assemble_cell(cfg, base, artifacts);
    result.n_rules_all = cell.n_rules_all;
    result.n_rules_selected = cell.n_rules_selected;
    result.metrics = train_and_score(cfg, cell, settings);
  } catch (const std::exception& e) {
    std::string where = cfg.label();
    if (cfg.depth) where += " depth " + std::to_string(*cfg.depth);
    result.error = where + ": " + e.what();
  }
  result.wall_time = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start)
                         .count();
  return result;
}

ExperimentResult run_cell(const ExperimentConfig& cfg, const SplitPair& base,
                          const ExperimentSettings& settings) {
  if (!cfg.depth) return run_cell(cfg, base, nullptr, settings);
  try {
    const DepthArtifacts art = build_depth(base, *cfg.depth, settings.min_leaf);
    return run_cell(cfg, base, &art, settings);
  } catch (const std::exception& e) {
    ExperimentResult result;
    result.config = cfg;
    result.error = cfg.label() + " depth " + std::to_string(*cfg.depth) + ": " + e.what();
    return result;
  }
}

namespace {

template <typename Fn>
void parallel_for(std::size_t n, int parallelism, Fn fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, parallelism));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

}  // namespace

std::vector<DepthBuild> build_depths(const SplitPair& base, const std::vector<int>& depths,
                                     Eigen::Index min_leaf, int parallelism) {
  std::vector<DepthBuild> builds;
  for (int d : depths) {
    const bool seen = std::any_of(builds.begin(), builds.end(),
                                  [&](const DepthBuild& b) { return b.depth == d; });
    if (!seen) builds.push_back({d, std::nullopt, {}});
  }
  parallel_for(builds.size(), parallelism, [&](std::size_t k) {
    try {
      builds[k].artifacts = build_depth(base, builds[k].depth, min_leaf);
    } catch (const std::exception& e) {
      builds[k].error = e.what();
    }
  });
  return builds;
}

std::vector<ExperimentResult> run_cells(const std::vector<ExperimentConfig>& matrix,
                                        const SplitPair& base,
                                        const std::vector<DepthBuild>& depths,
                                        const ExperimentSettings& settings, int parallelism,
                                        const ProgressFn& progress) {
  std::vector<ExperimentResult> results(matrix.size());
  std::mutex progress_mutex;
  std::size_t done = 0;
  parallel_for(matrix.size(), parallelism, [&](std::size_t i) {
    const auto& cfg = matrix[i];
    const DepthArtifacts* art = nullptr;
    std::string depth_error;
    if (cfg.depth) {
      const auto it = std::find_if(depths.begin(), depths.end(),
                                   [&](const DepthBuild& b) { return b.depth == *cfg.depth; });
      if (it == depths.end()) {
        depth_error = "no tree was built for this depth";
      } else if (it->artifacts) {
        art = &*it->artifacts;
      } else {
        depth_error = it->error;
      }
    }
    if (!depth_error.empty()) {
      results[i].config = cfg;
      results[i].error =
          cfg.label() + " depth " + std::to_string(*cfg.depth) + ": " + depth_error;
    } else {
      results[i] = run_cell(cfg, base, art, settings);
    }
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(results[i], ++done, matrix.size());
    }
  });
  return results;
}

std::vector<ExperimentResult> run_all(const std::vector<ExperimentConfig>& matrix,
                                      const SplitPair& base,
                                      const ExperimentSettings& settings,
                                      int parallelism, const ProgressFn& progress) {
  std::vector<int> depths;
  for (const auto& cfg : matrix) {
    if (cfg.depth) depths.push_back(*cfg.depth);
  }
  const auto builds = build_depths(base, depths, settings.min_leaf, parallelism);
  return run_cells(matrix, base, builds, settings, parallelism, progress);
}

}  // namespace ruleflow
