#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ruleflow/dataset.hpp"
#include "ruleflow/metrics.hpp"
#include "ruleflow/mlp.hpp"
#include "ruleflow/rules.hpp"
#include "ruleflow/tree.hpp"

namespace ruleflow {

/// Feature-set families of the experiment matrix.
enum class DatasetType {
  kFinal,             // base features only
  kRulesOnly,         // all rule indicators of one tree
  kRulesPlusFinal,    // base features + all rule indicators
  kVariancePlusFinal  // base features + variance-filtered rule indicators
};

struct ExperimentConfig {
  DatasetType type = DatasetType::kFinal;
  std::optional<int> depth;                  // absent only for kFinal
  std::optional<double> variance_threshold;  // present only for kVariancePlusFinal
  std::uint64_t seed = 0;                    // network seed for this cell

  /// `final`, `rules_only`, `rules_plus_final`, `var_<t>_plus_final`.
  std::string label() const;
};

/// Threshold rendered in plain decimal form, e.g. 0.0001.
std::string threshold_label(double threshold);

/// Inverse of ExperimentConfig::label for the type/threshold part.
ExperimentConfig parse_label(const std::string& label, std::optional<int> depth);

std::uint64_t cell_seed(std::uint64_t global_seed, std::optional<int> depth,
                        const std::string& label);

/// Final first, then per ascending depth: rules_only, rules_plus_final and
/// one variance cell per threshold in the given (descending) order.
std::vector<ExperimentConfig> build_matrix(const std::vector<int>& depths,
                                           const std::vector<double>& thresholds,
                                           std::uint64_t global_seed);

struct ExperimentSettings {
  std::vector<Eigen::Index> hidden_dims{64, 32};
  TrainConfig train;
  Eigen::Index min_leaf = kDefaultMinLeaf;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::size_t n_rules_all = 0;
  std::size_t n_rules_selected = 0;
  MetricsReport metrics;
  double wall_time = 0.0;
  std::optional<std::string> error;
};

/// Per-depth tree, its full rule set and the full indicator encodings.
/// Shared read-only by every cell of that depth.
struct DepthArtifacts {
  RegressionTree tree;
  RuleSet rules;
  Dataset train_rules;
  Dataset test_rules;
};

DepthArtifacts build_depth(const SplitPair& base, int depth, Eigen::Index min_leaf);

/// One depth's artifacts, or the reason they could not be built.
struct DepthBuild {
  int depth = 0;
  std::optional<DepthArtifacts> artifacts;
  std::string error;
};

/// Builds each listed depth (duplicates ignored, order kept) with up to
/// `parallelism` workers.
std::vector<DepthBuild> build_depths(const SplitPair& base, const std::vector<int>& depths,
                                     Eigen::Index min_leaf, int parallelism);

/// The feature sets a cell trains and evaluates on.
struct CellData {
  Dataset train;
  Dataset test;
  std::size_t n_rules_all = 0;
  std::size_t n_rules_selected = 0;
};

CellData assemble_cell(const ExperimentConfig& cfg, const SplitPair& base,
                       const DepthArtifacts* artifacts);

/// Trains a fresh network on `cell.train` and scores it on `cell.test`.
MetricsReport train_and_score(const ExperimentConfig& cfg, const CellData& cell,
                              const ExperimentSettings& settings);

ExperimentResult run_cell(const ExperimentConfig& cfg, const SplitPair& base,
                          const DepthArtifacts* artifacts,
                          const ExperimentSettings& settings);

/// Convenience overload that fits its own tree.
ExperimentResult run_cell(const ExperimentConfig& cfg, const SplitPair& base,
                          const ExperimentSettings& settings);

using ProgressFn = std::function<void(const ExperimentResult&, std::size_t done,
                                      std::size_t total)>;

/// Runs every cell against prebuilt depth artifacts, which must cover every
/// depth in `matrix`. Output order follows `matrix`; a failing cell yields
/// an error record and the rest continue.
std::vector<ExperimentResult> run_cells(const std::vector<ExperimentConfig>& matrix,
                                        const SplitPair& base,
                                        const std::vector<DepthBuild>& depths,
                                        const ExperimentSettings& settings, int parallelism,
                                        const ProgressFn& progress = {});

/// build_depths for the matrix's depths followed by run_cells.
/// Runs every cell with up to `parallelism` workers. Output order follows
/// `matrix`; a failing cell yields an error record and the rest continue.
std::vector<ExperimentResult> run_all(const std::vector<ExperimentConfig>& matrix,
                                      const SplitPair& base,
                                      const ExperimentSettings& settings,
                                      int parallelism, const ProgressFn& progress = {});

}  // namespace ruleflow
