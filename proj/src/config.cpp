#include "ruleflow/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ruleflow/error.hpp"

namespace ruleflow {
namespace {

using nlohmann::json;

class KeyReader {
 public:
  KeyReader(const json& doc, std::string prefix, std::vector<std::string>& problems)
      : doc_(doc), prefix_(std::move(prefix)), problems_(problems) {}

  template <typename T, typename Check>
  void read(const std::string& key, T& out, Check check, const char* expectation) {
    seen_.insert(key);
    if (!doc_.contains(key)) return;
    try {
      T value = doc_.at(key).get<T>();
      if (!check(value)) {
        problems_.push_back(prefix_ + key + " (" + expectation + ")");
        return;
      }
      out = std::move(value);
    } catch (const json::exception&) {
      problems_.push_back(prefix_ + key + " (" + expectation + ")");
    }
  }

  template <typename T>
  void read(const std::string& key, T& out, const char* expectation) {
    read(key, out, [](const T&) { return true; }, expectation);
  }

  void require(const std::string& key) {
    if (!doc_.contains(key)) problems_.push_back(prefix_ + key + " (required)");
  }

  void mark(const std::string& key) { seen_.insert(key); }

  void reject_unknown() {
    for (const auto& [key, _] : doc_.items()) {
      if (!seen_.contains(key)) problems_.push_back(prefix_ + key + " (unknown key)");
    }
  }

 private:
  const json& doc_;
  std::string prefix_;
  std::vector<std::string>& problems_;
  std::set<std::string> seen_;
};

}  // namespace

RunConfig parse_run_config(const std::string& text,
                           const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw UsageError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw UsageError("config must be a JSON object");

  RunConfig cfg;
  std::vector<std::string> problems;
  KeyReader top(doc, "", problems);
  std::string input, out_dir = cfg.out_dir.string();
  top.require("input_csv");
  top.read("input_csv", input, [](const std::string& s) { return !s.empty(); },
           "non-empty path");
  top.read("target_column", cfg.target_column,
           [](const std::string& s) { return !s.empty(); }, "non-empty string");
  top.read("split_ratio", cfg.split_ratio,
           [](double r) { return r > 0.0 && r < 1.0; }, "number in (0, 1)");
  top.read("global_seed", cfg.global_seed, "non-negative integer");
  const auto valid_depths = [](const std::vector<int>& d) {
    if (d.empty()) return false;
    for (int x : d) {
      if (x < 1 || x > kMaxTreeDepth) return false;
    }
    return true;
  };
  if (doc.contains("depths") && !doc.contains("matrix_depths")) cfg.matrix_depths.reset();
  top.read("depths", cfg.depths, valid_depths, "non-empty list of depths in [1, 32]");
  std::vector<int> matrix_depths;
  top.read("matrix_depths", matrix_depths, valid_depths,
           "non-empty list of depths in [1, 32]");
  if (!matrix_depths.empty()) {
    const bool covered = std::all_of(matrix_depths.begin(), matrix_depths.end(), [&](int d) {
      return std::find(cfg.depths.begin(), cfg.depths.end(), d) != cfg.depths.end();
    });
    if (covered) {
      cfg.matrix_depths = matrix_depths;
    } else {
      problems.push_back("matrix_depths (every entry must also appear in depths)");
    }
  }
  top.read("variance_thresholds", cfg.variance_thresholds,
           [](const std::vector<double>& t) {
             for (std::size_t k = 0; k < t.size(); ++k) {
               if (!(t[k] >= 0.0)) return false;
               if (k > 0 && !(t[k] < t[k - 1])) return false;
             }
             return true;
           },
           "descending list of non-negative numbers");
  top.read("vif_threshold", cfg.vif_threshold, [](double v) { return v >= 1.0; },
           "number >= 1");
  top.read("min_leaf", cfg.min_leaf, [](Eigen::Index m) { return m >= 1; },
           "integer >= 1");
  top.read("parallelism", cfg.parallelism, [](int p) { return p >= 1; },
           "integer >= 1");
  top.read("out_dir", out_dir, [](const std::string& s) { return !s.empty(); },
           "non-empty path");
  top.read("emit_plots", cfg.emit_plots, "boolean");

  top.mark("nn");
  if (doc.contains("nn")) {
    const json& nn = doc.at("nn");
    if (!nn.is_object()) {
      problems.push_back("nn (object)");
    } else {
      KeyReader sub(nn, "nn.", problems);
      auto& tc = cfg.nn.train;
      sub.read("hidden_dims", cfg.nn.hidden_dims,
               [](const std::vector<Eigen::Index>& h) {
                 for (auto x : h) {
                   if (x < 1) return false;
                 }
                 return true;
               },
               "list of positive widths");
      sub.read("learning_rate", tc.learning_rate, [](double v) { return v >= 0.0; },
               "number >= 0");
      sub.read("epochs", tc.epochs, [](int v) { return v >= 1; }, "integer >= 1");
      sub.read("batch_size", tc.batch_size, [](Eigen::Index v) { return v >= 1; },
               "integer >= 1");
      int patience = tc.early_stop_patience.value_or(0);
      sub.read("patience", patience, [](int v) { return v >= 0; },
               "integer >= 0 (0 disables early stopping)");
      tc.early_stop_patience =
          patience > 0 ? std::optional<int>(patience) : std::nullopt;
      sub.read("validation_fraction", tc.validation_fraction,
               [](double v) { return v >= 0.0 && v < 1.0; }, "number in [0, 1)");
      sub.read("target_standardize", tc.target_standardize, "boolean");
      sub.reject_unknown();
    }
  }
  top.reject_unknown();

  if (!problems.empty()) {
    std::string msg = "invalid config keys:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw UsageError(msg);
  }
  cfg.input_csv = input;
  cfg.out_dir = out_dir;
  if (cfg.input_csv.is_relative() && !base_dir.empty()) {
    cfg.input_csv = base_dir / cfg.input_csv;
  }
  if (cfg.out_dir.is_relative() && !base_dir.empty()) {
    cfg.out_dir = base_dir / cfg.out_dir;
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path());
}

}  // namespace ruleflow
