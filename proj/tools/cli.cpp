#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ruleflow/config.hpp"
#include "ruleflow/csv.hpp"
#include "ruleflow/error.hpp"
#include "ruleflow/experiment.hpp"
#include "ruleflow/metrics.hpp"
#include "ruleflow/mlp.hpp"
#include "ruleflow/preprocess.hpp"
#include "ruleflow/report.hpp"
#include "ruleflow/rules.hpp"
#include "ruleflow/tree.hpp"

namespace ruleflow::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("file not found: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

/// A header-level check so a wrong --target is reported as a flag error.
void require_target(const fs::path& csv, const std::string& target) {
  std::ifstream in(csv);
  if (!in) throw ValidationError("file not found: " + csv.string());
  std::string header;
  std::getline(in, header);
  std::stringstream ss(header);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    if (cell == target) return;
  }
  throw UsageError("--target column '" + target + "' not found in " + csv.string());
}

Dataset load_clean(const fs::path& path, const std::string& target) {
  require_target(path, target);
  Dataset ds = load_csv(path, target);
  if (ds.missing_count() > 0) {
    throw ValidationError(path.string() + " has missing cells; run preprocess first");
  }
  return ds;
}

json vif_report_json(const VifResult& vif, double threshold) {
  json trace = json::array();
  for (const auto& step : vif.trace) {
    json vifs = json::object();
    for (std::size_t k = 0; k < step.columns.size(); ++k) {
      vifs[step.columns[k]] =
          std::isfinite(step.vif[k]) ? json(step.vif[k]) : json("inf");
    }
    trace.push_back({{"vif", vifs},
                     {"removed", step.removed.empty() ? json(nullptr)
                                                      : json(step.removed)}});
  }
  return {{"threshold", threshold},
          {"removed", vif.removed},
          {"kept", vif.data.feature_names},
          {"trace", trace}};
}

json scaling_json(const ScalingStats& stats) {
  json cols = json::array();
  for (std::size_t k = 0; k < stats.columns.size(); ++k) {
    cols.push_back({{"column", stats.columns[k]},
                    {"mean", stats.mean[k]},
                    {"sd", stats.sd[k]},
                    {"constant", static_cast<bool>(stats.constant[k])}});
  }
  return {{"columns", cols}};
}

std::vector<Eigen::Index> parse_dims(const std::string& text) {
  std::vector<Eigen::Index> dims;
  if (text.empty()) return dims;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      dims.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("--hidden expects comma-separated positive widths, got '" +
                       text + "'");
    }
  }
  return dims;
}

Vector column_of(const CsvTable& table, const std::string& column,
                 const fs::path& path) {
  if (column.empty()) return table.values.col(0);
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (table.header[j] == column) return table.values.col(static_cast<Eigen::Index>(j));
  }
  throw UsageError("column '" + column + "' not found in " + path.string());
}

struct Commands {
  std::ostream& out;
  std::ostream& err;

  // preprocess
  std::string pp_input, pp_target = "pop_flows", pp_out;
  double pp_vif = 10.0, pp_ratio = 0.8;
  std::uint64_t pp_seed = 42;

  // fit-tree
  std::string ft_train, ft_target = "pop_flows", ft_out;
  int ft_depth = 3;
  long ft_min_leaf = kDefaultMinLeaf;

  // extract-rules
  std::string er_tree, er_train, er_target = "pop_flows", er_out, er_text;
  std::optional<double> er_threshold;

  // encode
  std::string en_rules, en_input, en_target = "pop_flows", en_out;
  bool en_with_base = false;

  // train-nn
  std::string tn_train, tn_target = "pop_flows", tn_out, tn_hidden = "64,32";
  double tn_lr = 1e-3;
  int tn_epochs = 200, tn_patience = 20;
  long tn_batch = 256;
  std::optional<std::uint64_t> tn_seed, tn_global_seed;
  std::optional<int> tn_depth;
  std::string tn_type;
  bool tn_raw_target = false;

  // evaluate
  std::string ev_model, ev_test, ev_target = "pop_flows", ev_actual, ev_predicted,
                                 ev_column, ev_type = "final", ev_out;
  std::optional<int> ev_depth;
  std::optional<double> ev_threshold;
  std::size_t ev_rules = 0;

  // run-matrix
  std::string rm_config, rm_out_dir;
  std::optional<int> rm_parallelism;
  bool rm_stdout = false;

  // report
  std::string rp_results, rp_out;
  bool rp_plots = false;

  int preprocess() {
    require_target(pp_input, pp_target);
    const Dataset raw = load_csv(pp_input, pp_target);
    const PreparedData prep = prepare(raw, {pp_ratio, pp_seed, pp_vif});
    const fs::path dir = pp_out;
    fs::create_directories(dir);
    write_csv(dir / "train.csv", prep.split.train, pp_target);
    write_csv(dir / "test.csv", prep.split.test, pp_target);
    write_text(dir / "vif_report.json", vif_report_json(prep.vif, pp_vif).dump(2) + "\n");
    write_text(dir / "scaling.json", scaling_json(prep.scaling).dump(2) + "\n");
    err << "preprocess: " << prep.split.train.n_rows() << " train / "
        << prep.split.test.n_rows() << " test rows, " << prep.vif.removed.size()
        << " column(s) removed by VIF\n";
    return kOk;
  }

  int fit_tree_cmd() {
    const Dataset train = load_clean(ft_train, ft_target);
    const RegressionTree tree = fit_tree(train, ft_depth, ft_min_leaf);
    write_text(ft_out, tree_to_json(tree));
    err << "fit-tree: depth " << tree.depth() << ", " << tree.n_leaves << " leaves\n";
    return kOk;
  }

  int extract_rules_cmd() {
    const RegressionTree tree = tree_from_json(read_text(er_tree));
    const Dataset train = load_clean(er_train, er_target);
    RuleSet set = extract_rules(tree, train);
    if (er_threshold) set = filter_by_variance(set, *er_threshold);
    write_text(er_out, rules_to_json(set));
    if (!er_text.empty()) write_text(er_text, rules_to_text(set));
    err << "extract-rules: " << set.rules.size() << " rules\n";
    return kOk;
  }

  int encode_cmd() {
    const RuleSet set = rules_from_json(read_text(en_rules));
    const Dataset ds = load_clean(en_input, en_target);
    const Dataset encoded = encode(set, ds);
    write_csv(en_out, en_with_base ? hconcat(ds, encoded) : encoded, en_target);
    return kOk;
  }

  int train_nn_cmd() {
    const Dataset train = load_clean(tn_train, tn_target);
    std::uint64_t seed = tn_seed.value_or(0);
    if (tn_global_seed) {
      if (tn_type.empty()) throw UsageError("--global-seed needs --dataset-type");
      const ExperimentConfig cell = parse_label(tn_type, tn_depth);
      seed = cell_seed(*tn_global_seed, cell.depth, cell.label());
    }
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.learning_rate = tn_lr;
    cfg.epochs = tn_epochs;
    cfg.batch_size = tn_batch;
    cfg.early_stop_patience =
        tn_patience > 0 ? std::optional<int>(tn_patience) : std::nullopt;
    cfg.target_standardize = !tn_raw_target;
    auto model = init_mlp<double>(train.n_cols(), parse_dims(tn_hidden), seed);
    auto [trained, history] = train_nn(std::move(model), train, cfg);
    write_text(tn_out, mlp_to_json(trained));
    err << "train-nn: " << history.train_loss.size() << " epochs, final loss "
        << (history.train_loss.empty() ? 0.0 : history.train_loss.back()) << "\n";
    return kOk;
  }

  static std::pair<MlpModel<double>, TrainHistory> train_nn(MlpModel<double> model,
                                                            const Dataset& data,
                                                            const TrainConfig& cfg) {
    return ruleflow::train(std::move(model), data.features, data.target, cfg);
  }

  int evaluate_cmd() {
    Vector actual, predicted;
    if (!ev_model.empty()) {
      if (ev_test.empty()) throw UsageError("--model needs --test");
      const auto model = mlp_from_json<double>(read_text(ev_model));
      const Dataset test = load_clean(ev_test, ev_target);
      actual = test.target;
      predicted = predict_batch(model, test.features);
    } else {
      if (ev_actual.empty() || ev_predicted.empty()) {
        throw UsageError("evaluate needs --model/--test or --actual/--predicted");
      }
      const CsvTable a = read_table(ev_actual);
      const CsvTable p = read_table(ev_predicted);
      actual = column_of(a, ev_column, ev_actual);
      predicted = column_of(p, ev_column, ev_predicted);
    }
    const ExperimentConfig label = parse_label(ev_type, ev_depth);
    std::optional<double> threshold = label.variance_threshold;
    if (ev_threshold) threshold = ev_threshold;
    const MetricsReport report = evaluate(actual, predicted, ev_rules);
    const std::string text = metrics_csv_header() + "\n" +
                             metrics_csv_row(label.label(), ev_depth, threshold, report) +
                             "\n";
    out << text;
    if (!ev_out.empty()) write_text(ev_out, text);
    return kOk;
  }

  int run_matrix_cmd() {
    RunConfig cfg = load_run_config(rm_config);
    if (rm_parallelism) cfg.parallelism = *rm_parallelism;
    if (!rm_out_dir.empty()) cfg.out_dir = rm_out_dir;

    err << "run-matrix: loading " << cfg.input_csv.string() << "\n";
    require_target(cfg.input_csv, cfg.target_column);
    const Dataset raw = load_csv(cfg.input_csv, cfg.target_column);
    const PreparedData prep = prepare(raw, cfg.preprocess());
    if (!prep.vif.removed.empty()) {
      err << "run-matrix: VIF removed";
      for (const auto& c : prep.vif.removed) err << ' ' << c;
      err << "\n";
    }
    const auto matrix =
        build_matrix(cfg.network_depths(), cfg.variance_thresholds, cfg.global_seed);
    err << "run-matrix: " << matrix.size() << " cells, parallelism "
        << cfg.parallelism << "\n";
    std::vector<int> tree_depths = cfg.depths;
    tree_depths.insert(tree_depths.end(), cfg.network_depths().begin(),
                       cfg.network_depths().end());
    const auto builds =
        build_depths(prep.split, tree_depths, cfg.min_leaf, cfg.parallelism);
    const auto results = run_cells(
        matrix, prep.split, builds, cfg.experiment(), cfg.parallelism,
        [&](const ExperimentResult& r, std::size_t done, std::size_t total) {
          err << "[" << done << "/" << total << "] " << r.config.label();
          if (r.config.depth) err << " depth " << *r.config.depth;
          if (r.error) {
            err << " FAILED: " << *r.error << "\n";
          } else {
            err << " mae=" << r.metrics.mae << " r2=" << r.metrics.r2
                << " cpc=" << r.metrics.cpc << " (" << r.wall_time << "s)\n";
          }
        });
    emit_reports(results, rule_counts(builds, cfg.variance_thresholds), cfg.out_dir,
                 cfg.emit_plots);
    if (rm_stdout) out << results_csv(results);
    std::size_t failed = 0;
    for (const auto& r : results) failed += r.error ? 1 : 0;
    err << "run-matrix: wrote " << cfg.out_dir.string() << " (" << failed
        << " failed cell(s))\n";
    return failed == results.size() ? kRuntimeError : kOk;
  }

  int report_cmd() {
    const auto results = parse_results_csv(rp_results);
    emit_reports(results, rp_out, rp_plots);
    return kOk;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Commands cmd{out, err};
  CLI::App app{"Rule-augmented neural regression for origin-destination flows",
               "ruleflow"};
  app.require_subcommand(1);
  std::function<int()> action;

  auto* pp = app.add_subcommand("preprocess", "impute, scale and VIF-filter a CSV");
  pp->add_option("--input", cmd.pp_input, "raw CSV")->required();
  pp->add_option("--target", cmd.pp_target, "flow column")->required();
  pp->add_option("--out", cmd.pp_out, "output directory")->required();
  pp->add_option("--vif-threshold", cmd.pp_vif, "maximum VIF")->capture_default_str();
  pp->add_option("--split-ratio", cmd.pp_ratio, "train fraction")->capture_default_str();
  pp->add_option("--seed", cmd.pp_seed, "split seed")->capture_default_str();
  pp->callback([&] { action = [&] { return cmd.preprocess(); }; });

  auto* ft = app.add_subcommand("fit-tree", "fit a regression tree");
  ft->add_option("--train", cmd.ft_train, "training CSV")->required();
  ft->add_option("--target", cmd.ft_target, "flow column")->capture_default_str();
  ft->add_option("--depth", cmd.ft_depth, "maximum depth")->required();
  ft->add_option("--min-leaf", cmd.ft_min_leaf, "minimum rows per leaf")
      ->capture_default_str();
  ft->add_option("--out", cmd.ft_out, "tree JSON")->required();
  ft->callback([&] { action = [&] { return cmd.fit_tree_cmd(); }; });

  auto* er = app.add_subcommand("extract-rules", "turn tree leaves into rules");
  er->add_option("--tree", cmd.er_tree, "tree JSON")->required();
  er->add_option("--train", cmd.er_train, "training CSV")->required();
  er->add_option("--target", cmd.er_target, "flow column")->capture_default_str();
  er->add_option("--out", cmd.er_out, "rule JSON")->required();
  er->add_option("--text", cmd.er_text, "human-readable rule list");
  er->add_option("--variance-threshold", cmd.er_threshold, "drop rules below");
  er->callback([&] { action = [&] { return cmd.extract_rules_cmd(); }; });

  auto* en = app.add_subcommand("encode", "write rule indicator columns");
  en->add_option("--rules", cmd.en_rules, "rule JSON")->required();
  en->add_option("--input", cmd.en_input, "CSV to encode")->required();
  en->add_option("--target", cmd.en_target, "flow column")->capture_default_str();
  en->add_option("--out", cmd.en_out, "encoded CSV")->required();
  en->add_flag("--with-base", cmd.en_with_base, "keep base features before rules");
  en->callback([&] { action = [&] { return cmd.encode_cmd(); }; });

  auto* tn = app.add_subcommand("train-nn", "train the neural regressor");
  tn->add_option("--train", cmd.tn_train, "training CSV")->required();
  tn->add_option("--target", cmd.tn_target, "flow column")->capture_default_str();
  tn->add_option("--out", cmd.tn_out, "model checkpoint")->required();
  tn->add_option("--hidden", cmd.tn_hidden, "hidden widths")->capture_default_str();
  tn->add_option("--learning-rate", cmd.tn_lr)->capture_default_str();
  tn->add_option("--epochs", cmd.tn_epochs)->capture_default_str();
  tn->add_option("--batch-size", cmd.tn_batch)->capture_default_str();
  tn->add_option("--patience", cmd.tn_patience, "0 disables early stopping")
      ->capture_default_str();
  auto* seed_opt = tn->add_option("--seed", cmd.tn_seed, "network seed");
  tn->add_option("--global-seed", cmd.tn_global_seed,
                 "derive the seed of a matrix cell")
      ->excludes(seed_opt);
  tn->add_option("--dataset-type", cmd.tn_type, "cell type for --global-seed");
  tn->add_option("--depth", cmd.tn_depth, "cell depth for --global-seed");
  tn->add_flag("--raw-target", cmd.tn_raw_target, "train on unscaled targets");
  tn->callback([&] { action = [&] { return cmd.train_nn_cmd(); }; });

  auto* ev = app.add_subcommand("evaluate", "score predictions (MAE, R2, CPC)");
  ev->add_option("--model", cmd.ev_model, "model checkpoint");
  ev->add_option("--test", cmd.ev_test, "test CSV for --model");
  ev->add_option("--target", cmd.ev_target, "flow column")->capture_default_str();
  ev->add_option("--actual", cmd.ev_actual, "CSV of observed flows");
  ev->add_option("--predicted", cmd.ev_predicted, "CSV of predicted flows");
  ev->add_option("--column", cmd.ev_column, "column in --actual/--predicted");
  ev->add_option("--dataset-type", cmd.ev_type, "row label")->capture_default_str();
  ev->add_option("--depth", cmd.ev_depth, "row label");
  ev->add_option("--variance-threshold", cmd.ev_threshold, "row label");
  ev->add_option("--n-rules", cmd.ev_rules, "rule count for per-rule metrics");
  ev->add_option("--out", cmd.ev_out, "also write the row here");
  ev->callback([&] { action = [&] { return cmd.evaluate_cmd(); }; });

  auto* rm = app.add_subcommand("run-matrix", "run the full experiment matrix");
  rm->add_option("--config", cmd.rm_config, "JSON run config")->required();
  rm->add_option("--parallelism", cmd.rm_parallelism, "worker threads")
      ->check(CLI::PositiveNumber);
  rm->add_option("--out-dir", cmd.rm_out_dir, "override out_dir");
  rm->add_flag("--stdout", cmd.rm_stdout, "also print results.csv");
  rm->callback([&] { action = [&] { return cmd.run_matrix_cmd(); }; });

  auto* rp = app.add_subcommand("report", "rebuild report files from results.csv");
  rp->add_option("--results", cmd.rp_results, "results.csv")->required();
  rp->add_option("--out", cmd.rp_out, "output directory")->required();
  rp->add_flag("--plots", cmd.rp_plots, "write SVG charts");
  rp->callback([&] { action = [&] { return cmd.report_cmd(); }; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    return action ? action() : kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::kUsage:
        return kUsage;
      case ErrorKind::kValidation:
        return kDataError;
      case ErrorKind::kNumeric:
        return kRuntimeError;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return kRuntimeError;
}

}  // namespace ruleflow::cli
