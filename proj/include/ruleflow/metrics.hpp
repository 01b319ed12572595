#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "ruleflow/error.hpp"

namespace ruleflow {
namespace metrics_detail {

template <typename A, typename P>
void check_pair(const Eigen::DenseBase<A>& actual,
                const Eigen::DenseBase<P>& predicted, Eigen::Index min_n) {
  if (actual.size() != predicted.size()) {
    throw ValidationError("actual and predicted lengths differ");
  }
  if (actual.size() < min_n) {
    throw ValidationError("metric needs at least " + std::to_string(min_n) +
                          " values");
  }
  if (!actual.derived().array().isFinite().all() ||
      !predicted.derived().array().isFinite().all()) {
    throw ValidationError("metric inputs must be finite");
  }
}

}  // namespace metrics_detail

/// Mean absolute error.
template <typename A, typename P>
typename A::Scalar mae(const Eigen::DenseBase<A>& actual,
                       const Eigen::DenseBase<P>& predicted) {
  metrics_detail::check_pair(actual, predicted, 1);
  using Scalar = typename A::Scalar;
  return (actual.derived().array() - predicted.derived().array()).abs().sum() /
         static_cast<Scalar>(actual.size());
}

/// Coefficient of determination. Constant `actual` is an error.
template <typename A, typename P>
typename A::Scalar r_squared(const Eigen::DenseBase<A>& actual,
                             const Eigen::DenseBase<P>& predicted) {
  metrics_detail::check_pair(actual, predicted, 2);
  using Scalar = typename A::Scalar;
  const auto y = actual.derived().array();
  const Scalar mean = y.sum() / static_cast<Scalar>(y.size());
  const Scalar total = (y - mean).square().sum();
  if (total == Scalar(0)) {
    throw ValidationError("R^2 undefined: actual values are constant");
  }
  const Scalar residual = (y - predicted.derived().array()).square().sum();
  return Scalar(1) - residual / total;
}

/// Common part of commuters (Sorensen-Dice overlap of two flow vectors).
/// Both vectors must be non-negative and not both all-zero.
template <typename A, typename P>
typename A::Scalar cpc(const Eigen::DenseBase<A>& actual,
                       const Eigen::DenseBase<P>& predicted) {
  metrics_detail::check_pair(actual, predicted, 1);
  using Scalar = typename A::Scalar;
  const auto real = actual.derived().array();
  const auto gen = predicted.derived().array();
  if ((real < Scalar(0)).any() || (gen < Scalar(0)).any()) {
    throw ValidationError("CPC needs non-negative flows");
  }
  const Scalar denom = gen.sum() + real.sum();
  if (denom == Scalar(0)) throw ValidationError("CPC undefined: both totals are zero");
  return Scalar(2) * gen.min(real).sum() / denom;
}

struct MetricsReport {
  double mae = 0.0;
  double r2 = 0.0;
  double cpc = 0.0;
  std::size_t n_rules = 0;
  std::optional<double> mae_per_rule;
  std::optional<double> r2_per_rule;
  std::optional<double> cpc_per_rule;
};

/// Divides each metric by the rule count.
inline MetricsReport per_rule(MetricsReport report, std::size_t n_rules) {
  if (n_rules == 0) throw ValidationError("per-rule metrics need n_rules >= 1");
  const double n = static_cast<double>(n_rules);
  report.n_rules = n_rules;
  report.mae_per_rule = report.mae / n;
  report.r2_per_rule = report.r2 / n;
  report.cpc_per_rule = report.cpc / n;
  return report;
}

/// All three metrics. Negative predictions are clamped to zero for CPC
/// only; MAE and R² see the raw predictions.
template <typename A, typename P>
MetricsReport evaluate(const Eigen::DenseBase<A>& actual,
                       const Eigen::DenseBase<P>& predicted,
                       std::size_t n_rules = 0) {
  MetricsReport report;
  report.mae = static_cast<double>(mae(actual, predicted));
  report.r2 = static_cast<double>(r_squared(actual, predicted));
  report.cpc = static_cast<double>(
      cpc(actual, predicted.derived().array().max(typename P::Scalar(0)).matrix()));
  report.n_rules = n_rules;
  return n_rules > 0 ? per_rule(report, n_rules) : report;
}

}  // namespace ruleflow
