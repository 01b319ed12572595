#include "ruleflow/synthetic.hpp"

#include <algorithm>

#include "ruleflow/random.hpp"

namespace ruleflow {

double synthetic_plateau(double distance, double poi_destination, double poi_origin) {
  const bool near = distance <= 0.45;
  const bool busy_dest = poi_destination > 0.5;
  const bool busy_origin = poi_origin > 0.55;
  if (near) {
    if (busy_dest) return busy_origin ? kSyntheticPlateaus[0] : kSyntheticPlateaus[1];
    return busy_origin ? kSyntheticPlateaus[2] : kSyntheticPlateaus[4];
  }
  if (busy_dest) return busy_origin ? kSyntheticPlateaus[3] : kSyntheticPlateaus[5];
  return busy_origin ? kSyntheticPlateaus[6] : kSyntheticPlateaus[7];
}

Dataset make_synthetic(Eigen::Index n_rows, std::uint64_t seed) {
  Dataset ds;
  ds.feature_names = {"distance",         "poi_destination",   "poi_origin",
                      "natural_area_dest", "employment_origin", "employment_dest"};
  ds.features.resize(n_rows, 6);
  ds.target.resize(n_rows);
  Rng rng(seed);
  for (Eigen::Index i = 0; i < n_rows; ++i) {
    for (Eigen::Index j = 0; j < 6; ++j) ds.features(i, j) = rng.uniform();
    const double level =
        synthetic_plateau(ds.features(i, 0), ds.features(i, 1), ds.features(i, 2));
    ds.target[i] = std::max(0.0, level * (1.0 + 0.1 * rng.normal()));
  }
  return ds;
}

}  // namespace ruleflow
