#include "ruleflow/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ruleflow/error.hpp"
#include "ruleflow/random.hpp"

namespace ruleflow {

double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return lower + (upper - lower) / 2.0;
}

Dataset impute_median(const Dataset& ds) {
  Dataset out = ds;
  for (Eigen::Index j = 0; j < ds.n_cols(); ++j) {
    auto col = out.features.col(j);
    std::vector<double> present;
    present.reserve(static_cast<std::size_t>(col.size()));
    bool any_missing = false;
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      if (std::isnan(col[i])) {
        any_missing = true;
      } else {
        present.push_back(col[i]);
      }
    }
    if (!any_missing) continue;
    if (present.empty()) {
      throw ValidationError("column '" + ds.feature_names[j] +
                            "' is entirely missing");
    }
    const double fill = median(std::move(present));
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      if (std::isnan(col[i])) col[i] = fill;
    }
  }
  return out;
}

std::vector<std::string> non_binary_columns(const Dataset& ds) {
  std::vector<std::string> cols;
  for (Eigen::Index j = 0; j < ds.n_cols(); ++j) {
    if (!is_binary_column(ds.features, j)) cols.push_back(ds.feature_names[j]);
  }
  return cols;
}

ScalingStats fit_standardizer(const Dataset& ds,
                              const std::vector<std::string>& columns) {
  ScalingStats stats;
  for (const auto& name : columns) {
    const auto col = ds.features.col(ds.require_column(name));
    const double n = static_cast<double>(col.size());
    if (col.size() == 0) throw ValidationError("cannot fit scaling on 0 rows");
    const double mean = col.sum() / n;
    const double var = (col.array() - mean).square().sum() / n;
    const bool constant = col.minCoeff() == col.maxCoeff();
    stats.columns.push_back(name);
    stats.mean.push_back(mean);
    stats.sd.push_back(constant ? 0.0 : std::sqrt(var));
    stats.constant.push_back(constant);
  }
  return stats;
}

namespace {

template <typename Fn>
Dataset transform_columns(const Dataset& ds, const ScalingStats& stats, Fn fn) {
  Dataset out = ds;
  for (std::size_t k = 0; k < stats.columns.size(); ++k) {
    const auto idx = ds.column_index(stats.columns[k]);
    if (!idx) {
      throw ValidationError("scaling column '" + stats.columns[k] +
                            "' absent from dataset");
    }
    if (!std::isfinite(stats.mean[k]) || !std::isfinite(stats.sd[k]) ||
        (!stats.constant[k] && stats.sd[k] <= 0.0)) {
      throw NumericError("invalid scaling stats for '" + stats.columns[k] + "'");
    }
    if (stats.constant[k]) continue;
    auto col = out.features.col(*idx);
    fn(col, stats.mean[k], stats.sd[k]);
  }
  return out;
}

}  // namespace

Dataset apply_standardizer(const Dataset& ds, const ScalingStats& stats) {
  return transform_columns(ds, stats, [](auto& col, double mean, double sd) {
    col = (col.array() - mean) / sd;
  });
}

Dataset invert_standardizer(const Dataset& ds, const ScalingStats& stats) {
  return transform_columns(ds, stats, [](auto& col, double mean, double sd) {
    col = col.array() * sd + mean;
  });
}

std::vector<double> compute_vif(const Dataset& ds) {
  const Eigen::Index n = ds.n_rows();
  const Eigen::Index p = ds.n_cols();
  if (n <= p) {
    throw ValidationError("VIF needs more rows than columns (" +
                          std::to_string(n) + " <= " + std::to_string(p) + ")");
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    if (ds.features.col(j).minCoeff() == ds.features.col(j).maxCoeff()) {
      throw ValidationError("VIF undefined for constant column '" +
                            ds.feature_names[j] + "'");
    }
  }

  std::vector<double> vif(static_cast<std::size_t>(p));
  Matrix design(n, p);  // intercept + the other p-1 columns
  design.col(0).setOnes();
  for (Eigen::Index j = 0; j < p; ++j) {
    Eigen::Index c = 1;
    for (Eigen::Index k = 0; k < p; ++k) {
      if (k != j) design.col(c++) = ds.features.col(k);
    }
    const Vector y = ds.features.col(j);
    const double centered_ss = (y.array() - y.mean()).square().sum();
    const Vector coef = design.colPivHouseholderQr().solve(y);
    const double residual_ss = (y - design * coef).squaredNorm();
    // Relative residual at rounding level means y lies in the span.
    if (residual_ss <= 1e-20 * centered_ss) {
      vif[static_cast<std::size_t>(j)] = kInfiniteVif;
    } else {
      vif[static_cast<std::size_t>(j)] = centered_ss / residual_ss;
    }
  }
  return vif;
}

VifResult vif_filter(const Dataset& ds, double threshold) {
  VifResult result{ds, {}, {}};
  for (;;) {
    VifStep step;
    step.columns = result.data.feature_names;
    step.vif = result.data.n_cols() > 0 ? compute_vif(result.data)
                                        : std::vector<double>{};
    std::size_t worst = 0;
    for (std::size_t j = 1; j < step.vif.size(); ++j) {
      if (step.vif[j] >= step.vif[worst]) worst = j;
    }
    if (step.vif.empty() || step.vif[worst] <= threshold) {
      result.trace.push_back(std::move(step));
      break;
    }
    step.removed = step.columns[worst];
    result.removed.push_back(step.removed);
    const std::vector<std::string> drop{step.removed};
    result.data = drop_columns(result.data, drop);
    result.trace.push_back(std::move(step));
  }
  return result;
}

SplitPair train_test_split(const Dataset& ds, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ValidationError("split ratio must lie in (0, 1)");
  }
  const Eigen::Index n = ds.n_rows();
  if (n < 2) throw ValidationError("need at least 2 rows to split");
  const auto n_train =
      static_cast<Eigen::Index>(std::llround(ratio * static_cast<double>(n)));
  if (n_train == 0) throw ValidationError("empty train split");
  if (n_train == n) throw ValidationError("empty test split");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(seed);
  rng.shuffle(std::span<Eigen::Index>(order));

  SplitPair split;
  split.seed = seed;
  split.ratio = ratio;
  split.train_rows.assign(order.begin(), order.begin() + n_train);
  split.test_rows.assign(order.begin() + n_train, order.end());
  std::sort(split.train_rows.begin(), split.train_rows.end());
  std::sort(split.test_rows.begin(), split.test_rows.end());
  split.train = select_rows(ds, split.train_rows);
  split.test = select_rows(ds, split.test_rows);
  return split;
}

PreparedData prepare(const Dataset& raw, const PreprocessSettings& settings) {
  PreparedData out;
  const Dataset imputed = impute_median(raw);
  out.split = train_test_split(imputed, settings.split_ratio, settings.seed);
  out.scaling =
      fit_standardizer(out.split.train, non_binary_columns(out.split.train));
  out.split.train = apply_standardizer(out.split.train, out.scaling);
  out.split.test = apply_standardizer(out.split.test, out.scaling);
  out.vif = vif_filter(out.split.train, settings.vif_threshold);
  out.split.train = out.vif.data;
  out.split.test = drop_columns(out.split.test, out.vif.removed);
  return out;
}

}  // namespace ruleflow
