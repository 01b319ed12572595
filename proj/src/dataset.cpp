#include "ruleflow/dataset.hpp"

#include <cmath>
#include <unordered_set>

#include "ruleflow/error.hpp"

namespace ruleflow {

std::optional<Eigen::Index> Dataset::column_index(
    const std::string& name) const {
  for (std::size_t j = 0; j < feature_names.size(); ++j) {
    if (feature_names[j] == name) return static_cast<Eigen::Index>(j);
  }
  return std::nullopt;
}

Eigen::Index Dataset::require_column(const std::string& name) const {
  auto idx = column_index(name);
  if (!idx) throw ValidationError("missing column '" + name + "'");
  return *idx;
}

std::size_t Dataset::missing_count() const {
  return static_cast<std::size_t>(features.array().isNaN().count());
}

void validate(const Dataset& ds, bool allow_missing) {
  if (static_cast<Eigen::Index>(ds.feature_names.size()) != ds.n_cols()) {
    throw ValidationError("feature name count does not match column count");
  }
  if (ds.target.size() != ds.n_rows()) {
    throw ValidationError("target length does not match row count");
  }
  std::unordered_set<std::string> seen;
  for (const auto& name : ds.feature_names) {
    if (!seen.insert(name).second) {
      throw ValidationError("duplicate column '" + name + "'");
    }
  }
  for (Eigen::Index i = 0; i < ds.target.size(); ++i) {
    if (!std::isfinite(ds.target[i]) || ds.target[i] < 0.0) {
      throw ValidationError("target row " + std::to_string(i) +
                            " is negative or non-finite");
    }
  }
  for (Eigen::Index j = 0; j < ds.n_cols(); ++j) {
    for (Eigen::Index i = 0; i < ds.n_rows(); ++i) {
      const double v = ds.features(i, j);
      if (std::isnan(v) && allow_missing) continue;
      if (!std::isfinite(v)) {
        throw ValidationError("non-finite value in column '" +
                              ds.feature_names[j] + "' row " +
                              std::to_string(i));
      }
    }
  }
}

Dataset make_dataset(std::vector<std::string> names, Matrix features,
                     Vector target, bool allow_missing) {
  Dataset ds{std::move(names), std::move(features), std::move(target)};
  validate(ds, allow_missing);
  return ds;
}

Dataset select_rows(const Dataset& ds, std::span<const Eigen::Index> rows) {
  Dataset out;
  out.feature_names = ds.feature_names;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), ds.n_cols());
  out.target.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    out.features.row(i) = ds.features.row(rows[k]);
    out.target[i] = ds.target[rows[k]];
  }
  return out;
}

Dataset select_columns(const Dataset& ds, std::span<const std::string> names) {
  Dataset out;
  out.features.resize(ds.n_rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t k = 0; k < names.size(); ++k) {
    out.features.col(static_cast<Eigen::Index>(k)) =
        ds.features.col(ds.require_column(names[k]));
    out.feature_names.push_back(names[k]);
  }
  out.target = ds.target;
  return out;
}

Dataset drop_columns(const Dataset& ds, std::span<const std::string> names) {
  std::unordered_set<std::string> drop(names.begin(), names.end());
  for (const auto& name : drop) ds.require_column(name);
  std::vector<std::string> keep;
  for (const auto& name : ds.feature_names) {
    if (!drop.contains(name)) keep.push_back(name);
  }
  return select_columns(ds, keep);
}

Dataset hconcat(const Dataset& base, const Dataset& extra) {
  if (base.n_rows() != extra.n_rows()) {
    throw ValidationError("row count mismatch in column concatenation");
  }
  Dataset out;
  out.feature_names = base.feature_names;
  out.feature_names.insert(out.feature_names.end(), extra.feature_names.begin(),
                           extra.feature_names.end());
  out.features.resize(base.n_rows(), base.n_cols() + extra.n_cols());
  out.features.leftCols(base.n_cols()) = base.features;
  out.features.rightCols(extra.n_cols()) = extra.features;
  out.target = base.target;
  validate(out, true);
  return out;
}

bool is_binary_column(const Matrix& features, Eigen::Index col) {
  return (features.col(col).array() == 0.0 || features.col(col).array() == 1.0)
      .all();
}

}  // namespace ruleflow
