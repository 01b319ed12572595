#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ruleflow/experiment.hpp"
#include "ruleflow/preprocess.hpp"

namespace ruleflow {

/// Everything `run-matrix` needs. Loaded from a JSON document; relative
/// paths resolve against the document's directory.
struct RunConfig {
  std::filesystem::path input_csv;
  std::string target_column = "pop_flows";
  double split_ratio = 0.8;
  std::uint64_t global_seed = 42;
  // Trees are fit (and rules counted) at every entry of `depths`; networks
  // are trained for `matrix_depths`, which defaults to `depths` when a config
  // names only the latter.
  std::vector<int> depths{3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
  std::optional<std::vector<int>> matrix_depths{{3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14}};
  std::vector<double> variance_thresholds{0.01, 0.001, 0.0001};
  double vif_threshold = 10.0;
  Eigen::Index min_leaf = kDefaultMinLeaf;
  ExperimentSettings nn;  // hidden_dims + train config; min_leaf mirrored
  int parallelism = 1;
  std::filesystem::path out_dir = "results";
  bool emit_plots = false;

  const std::vector<int>& network_depths() const { return matrix_depths ? *matrix_depths : depths; }

  PreprocessSettings preprocess() const {
    return {split_ratio, global_seed, vif_threshold};
  }
  ExperimentSettings experiment() const {
    ExperimentSettings s = nn;
    s.min_leaf = min_leaf;
    return s;
  }
};

/// Parses and validates; every offending key is listed in one UsageError.
RunConfig parse_run_config(const std::string& text,
                           const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace ruleflow
