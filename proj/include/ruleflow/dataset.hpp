#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ruleflow {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Tabular regression data: one row per origin-destination record, named
/// feature columns and a non-negative flow target. Missing feature cells
/// are stored as quiet NaN until imputed.
struct Dataset {
  std::vector<std::string> feature_names;
  Matrix features;  // n_rows x n_cols
  Vector target;    // n_rows

  Eigen::Index n_rows() const { return features.rows(); }
  Eigen::Index n_cols() const { return features.cols(); }

  std::optional<Eigen::Index> column_index(const std::string& name) const;
  Eigen::Index require_column(const std::string& name) const;

  std::size_t missing_count() const;
};

/// Checks every structural invariant; throws ValidationError otherwise.
/// `allow_missing` permits NaN feature cells (pre-imputation state).
void validate(const Dataset& ds, bool allow_missing = false);

Dataset make_dataset(std::vector<std::string> names, Matrix features,
                     Vector target, bool allow_missing = false);

Dataset select_rows(const Dataset& ds, std::span<const Eigen::Index> rows);
Dataset select_columns(const Dataset& ds, std::span<const std::string> names);
Dataset drop_columns(const Dataset& ds, std::span<const std::string> names);

/// Appends `extra`'s columns after `base`'s. Targets must agree.
Dataset hconcat(const Dataset& base, const Dataset& extra);

/// True when every value in the column is exactly 0 or 1.
bool is_binary_column(const Matrix& features, Eigen::Index col);

struct SplitPair {
  Dataset train;
  Dataset test;
  std::uint64_t seed = 0;
  double ratio = 0.8;
  std::vector<Eigen::Index> train_rows;  // indices into the source
  std::vector<Eigen::Index> test_rows;
};

}  // namespace ruleflow
