#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ruleflow/dataset.hpp"

namespace ruleflow {

/// Replaces each missing cell with its column's median (mean of the two
/// middle order statistics for even counts). A column with no present value
/// is an error.
Dataset impute_median(const Dataset& ds);

/// Median with the mean-of-middles convention. `values` is taken by copy.
double median(std::vector<double> values);

/// Per-column z-score parameters (population variance). Constant columns are
/// flagged and pass through untouched.
struct ScalingStats {
  std::vector<std::string> columns;
  std::vector<double> mean;
  std::vector<double> sd;
  std::vector<bool> constant;
};

/// Columns that standardization applies to by default: every non-binary one.
std::vector<std::string> non_binary_columns(const Dataset& ds);

ScalingStats fit_standardizer(const Dataset& ds,
                              const std::vector<std::string>& columns);
Dataset apply_standardizer(const Dataset& ds, const ScalingStats& stats);
Dataset invert_standardizer(const Dataset& ds, const ScalingStats& stats);

inline constexpr double kInfiniteVif = std::numeric_limits<double>::infinity();

/// VIF_j = 1 / (1 - R²_j) from an intercept OLS fit of column j on the other
/// columns. Exact collinearity yields kInfiniteVif.
std::vector<double> compute_vif(const Dataset& ds);

struct VifStep {
  std::vector<std::string> columns;  // columns present at this step
  std::vector<double> vif;           // aligned with `columns`
  std::string removed;               // empty on the final step
};

struct VifResult {
  Dataset data;
  std::vector<std::string> removed;
  std::vector<VifStep> trace;
};

/// Greedy elimination: drop the highest-VIF column and recompute until every
/// VIF is <= threshold. Among exactly tied maxima the highest-indexed column
/// goes first, so the earliest column of a duplicated group survives.
VifResult vif_filter(const Dataset& ds, double threshold = 10.0);

/// Seeded uniform partition; train gets round(ratio * n) rows. Row order
/// inside each side follows the source order.
SplitPair train_test_split(const Dataset& ds, double ratio, std::uint64_t seed);

struct PreprocessSettings {
  double split_ratio = 0.8;
  std::uint64_t seed = 42;
  double vif_threshold = 10.0;
};

struct PreparedData {
  SplitPair split;
  ScalingStats scaling;
  VifResult vif;  // `vif.data` is the filtered training set
};

/// impute -> split -> standardize (fit on train) -> VIF filter (decided on
/// train, applied to both sides).
PreparedData prepare(const Dataset& raw, const PreprocessSettings& settings);

}  // namespace ruleflow
