#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ruleflow/experiment.hpp"
#include "ruleflow/metrics.hpp"

namespace ruleflow {

/// `dataset_type,depth,variance_threshold,n_rules,mae,r2,cpc,mae_per_rule,...`
std::string metrics_csv_header();

/// One row in the metrics_csv_header layout; absent values are empty cells.
std::string metrics_csv_row(const std::string& dataset_type, std::optional<int> depth,
                            std::optional<double> variance_threshold,
                            const MetricsReport& report);

std::string results_csv(const std::vector<ExperimentResult>& results);

/// Reads a results.csv back. Rule counts other than `n_rules` are inferred:
/// rules_only and rules_plus_final rows carry the full count.
std::vector<ExperimentResult> parse_results_csv(const std::filesystem::path& path);

struct RuleCountRow {
  int depth = 0;
  std::optional<std::size_t> all;
  std::vector<std::optional<std::size_t>> selected;  // per threshold
};

struct RuleCountTable {
  std::vector<double> thresholds;  // descending
  std::vector<RuleCountRow> rows;  // ascending depth
};

/// Counts recovered from cell results (depths without cells are absent).
RuleCountTable rule_counts(const std::vector<ExperimentResult>& results);
/// Counts straight from the fitted trees, so depths need no cells.
RuleCountTable rule_counts(const std::vector<DepthBuild>& builds,
                           const std::vector<double>& thresholds);
std::string rule_counts_csv(const RuleCountTable& table);

/// Writes results.csv, rule_counts.csv, series_<metric>.csv (plus
/// errors.csv when any cell failed and SVG charts when `plots` is set).
/// Returns the written paths.
std::vector<std::filesystem::path> emit_reports(
    const std::vector<ExperimentResult>& results, const std::filesystem::path& out_dir,
    bool plots = false);
/// As above with an explicit rule-count table.
std::vector<std::filesystem::path> emit_reports(
    const std::vector<ExperimentResult>& results, const RuleCountTable& counts,
    const std::filesystem::path& out_dir, bool plots = false);

}  // namespace ruleflow
