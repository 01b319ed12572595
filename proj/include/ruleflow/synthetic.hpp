#pragma once

#include <cstdint>

#include "ruleflow/dataset.hpp"

namespace ruleflow {

/// Plateau values of the synthetic flow surface, largest first.
inline constexpr double kSyntheticPlateaus[8] = {
    31867.81, 9709.81, 6492.03, 2728.70, 1648.22, 544.09, 515.81, 106.32};

/// Six uniform [0, 1) features. The flow is one of eight plateaus chosen by
/// thresholds on the first three features, times (1 + 0.1 * N(0, 1))
/// relative noise clamped at zero. Target column name: `pop_flows`.
Dataset make_synthetic(Eigen::Index n_rows, std::uint64_t seed);

/// Noise-free plateau for a feature row.
double synthetic_plateau(double distance, double poi_destination, double poi_origin);

}  // namespace ruleflow
