#include "ruleflow/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ruleflow/csv.hpp"
#include "ruleflow/error.hpp"

namespace ruleflow {
namespace {

std::string opt_real(const std::optional<double>& v) {
  return v ? format_real(*v) : std::string();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
  if (!out) throw ValidationError("write failed: " + path.string());
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

struct SeriesDef {
  std::string name;
  std::optional<double> (*get)(const MetricsReport&);
};

const std::vector<SeriesDef>& series_defs() {
  static const std::vector<SeriesDef> defs{
      {"mae", [](const MetricsReport& m) -> std::optional<double> { return m.mae; }},
      {"r2", [](const MetricsReport& m) -> std::optional<double> { return m.r2; }},
      {"cpc", [](const MetricsReport& m) -> std::optional<double> { return m.cpc; }},
      {"mae_per_rule", [](const MetricsReport& m) { return m.mae_per_rule; }},
      {"r2_per_rule", [](const MetricsReport& m) { return m.r2_per_rule; }},
      {"cpc_per_rule", [](const MetricsReport& m) { return m.cpc_per_rule; }},
  };
  return defs;
}

struct Point {
  int depth;
  std::string type;
  double value;
};

std::vector<Point> series_points(const std::vector<ExperimentResult>& results,
                                 const SeriesDef& def) {
  std::set<int> depths;
  for (const auto& r : results) {
    if (r.config.depth) depths.insert(*r.config.depth);
  }
  std::vector<Point> points;
  for (const auto& r : results) {
    if (r.error) continue;
    const auto v = def.get(r.metrics);
    if (!v) continue;
    if (r.config.depth) {
      points.push_back({*r.config.depth, r.config.label(), *v});
    } else {
      // The base-feature cell has no depth; repeat it as a flat baseline.
      for (int d : depths) points.push_back({d, r.config.label(), *v});
    }
  }
  std::stable_sort(points.begin(), points.end(),
                   [](const Point& a, const Point& b) { return a.depth < b.depth; });
  return points;
}

std::string svg_chart(const std::string& title, const std::vector<Point>& points) {
  std::vector<std::string> types;
  for (const auto& p : points) {
    if (std::find(types.begin(), types.end(), p.type) == types.end()) {
      types.push_back(p.type);
    }
  }
  const double w = 640, h = 400, left = 70, right = 190, top = 40, bottom = 50;
  int d_min = points.front().depth, d_max = points.front().depth;
  double v_min = points.front().value, v_max = points.front().value;
  for (const auto& p : points) {
    d_min = std::min(d_min, p.depth);
    d_max = std::max(d_max, p.depth);
    v_min = std::min(v_min, p.value);
    v_max = std::max(v_max, p.value);
  }
  if (d_max == d_min) ++d_max;
  if (v_max == v_min) v_max = v_min + 1.0;
  auto sx = [&](double d) {
    return left + (d - d_min) / (d_max - d_min) * (w - left - right);
  };
  auto sy = [&](double v) {
    return h - bottom - (v - v_min) / (v_max - v_min) * (h - top - bottom);
  };
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\""
     << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<text x=\"" << left << "\" y=\"24\" font-size=\"15\">" << title << "</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right
     << "\" y2=\"" << h - bottom << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
     << h - bottom << "\" stroke=\"black\"/>\n";
  for (int d = d_min; d <= d_max; ++d) {
    os << "<text x=\"" << sx(d) << "\" y=\"" << h - bottom + 18
       << "\" text-anchor=\"middle\">" << d << "</text>\n";
  }
  os << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 12
     << "\" text-anchor=\"middle\">tree depth</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = v_min + (v_max - v_min) * k / 4.0;
    os << "<text x=\"" << left - 6 << "\" y=\"" << sy(v) + 4
       << "\" text-anchor=\"end\">" << format_fixed(v, 3) << "</text>\n";
  }
  for (std::size_t t = 0; t < types.size(); ++t) {
    const char* color = colors[t % 8];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : points) {
      if (p.type == types[t]) os << sx(p.depth) << ',' << sy(p.value) << ' ';
    }
    os << "\"/>\n";
    const double ly = top + 16.0 * static_cast<double>(t);
    os << "<line x1=\"" << w - right + 12 << "\" y1=\"" << ly << "\" x2=\""
       << w - right + 32 << "\" y2=\"" << ly << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << w - right + 38 << "\" y=\"" << ly + 4 << "\">" << types[t]
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace

std::string metrics_csv_header() {
  return "dataset_type,depth,variance_threshold,n_rules,mae,r2,cpc,mae_per_rule,"
         "r2_per_rule,cpc_per_rule";
}

std::string metrics_csv_row(const std::string& dataset_type, std::optional<int> depth,
                            std::optional<double> variance_threshold,
                            const MetricsReport& report) {
  std::string row = dataset_type + ",";
  row += depth ? std::to_string(*depth) : "";
  row += ",";
  row += variance_threshold ? threshold_label(*variance_threshold) : "";
  row += "," + std::to_string(report.n_rules);
  row += "," + format_real(report.mae) + "," + format_real(report.r2) + "," +
         format_real(report.cpc);
  row += "," + opt_real(report.mae_per_rule) + "," + opt_real(report.r2_per_rule) +
         "," + opt_real(report.cpc_per_rule);
  return row;
}

std::string results_csv(const std::vector<ExperimentResult>& results) {
  std::string out = metrics_csv_header() + "\n";
  for (const auto& r : results) {
    if (r.error) {
      out += r.config.label() + "," +
             (r.config.depth ? std::to_string(*r.config.depth) : "") + "," +
             (r.config.variance_threshold
                  ? threshold_label(*r.config.variance_threshold)
                  : "") +
             ",,,,,,,\n";
      continue;
    }
    out += metrics_csv_row(r.config.label(), r.config.depth,
                           r.config.variance_threshold, r.metrics) +
           "\n";
  }
  return out;
}

std::vector<ExperimentResult> parse_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("file not found: " + path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != metrics_csv_header()) {
    throw ValidationError(path.string() + ": unexpected results header");
  }
  std::vector<ExperimentResult> results;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 10) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": expected 10 cells");
    }
    try {
      ExperimentResult r;
      const std::optional<int> depth =
          cells[1].empty() ? std::nullopt : std::optional<int>(std::stoi(cells[1]));
      r.config = parse_label(cells[0], depth);
      if (cells[3].empty()) {
        r.error = "recorded as failed";
      } else {
        r.metrics.n_rules = static_cast<std::size_t>(std::stoull(cells[3]));
        r.metrics.mae = std::stod(cells[4]);
        r.metrics.r2 = std::stod(cells[5]);
        r.metrics.cpc = std::stod(cells[6]);
        r.metrics.mae_per_rule = parse_opt(cells[7]);
        r.metrics.r2_per_rule = parse_opt(cells[8]);
        r.metrics.cpc_per_rule = parse_opt(cells[9]);
        r.n_rules_selected = r.metrics.n_rules;
        if (r.config.type == DatasetType::kRulesOnly ||
            r.config.type == DatasetType::kRulesPlusFinal) {
          r.n_rules_all = r.metrics.n_rules;
        }
      }
      results.push_back(std::move(r));
    } catch (const std::invalid_argument&) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": unparseable value");
    }
  }
  return results;
}

RuleCountTable rule_counts(const std::vector<ExperimentResult>& results) {
  RuleCountTable table;
  std::set<double, std::greater<>> thresholds;
  std::set<int> depths;
  for (const auto& r : results) {
    if (r.config.depth) depths.insert(*r.config.depth);
    if (r.config.variance_threshold) thresholds.insert(*r.config.variance_threshold);
  }
  table.thresholds.assign(thresholds.begin(), thresholds.end());
  for (int d : depths) {
    RuleCountRow row;
    row.depth = d;
    row.selected.resize(table.thresholds.size());
    for (const auto& r : results) {
      if (r.error || r.config.depth != d) continue;
      if (r.n_rules_all > 0) row.all = std::max(row.all.value_or(0), r.n_rules_all);
      if (r.config.variance_threshold) {
        const auto k = static_cast<std::size_t>(
            std::find(table.thresholds.begin(), table.thresholds.end(),
                      *r.config.variance_threshold) -
            table.thresholds.begin());
        row.selected[k] = r.n_rules_selected;
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

RuleCountTable rule_counts(const std::vector<DepthBuild>& builds,
                           const std::vector<double>& thresholds) {
  RuleCountTable table;
  table.thresholds = thresholds;
  std::vector<const DepthBuild*> sorted;
  for (const auto& b : builds) sorted.push_back(&b);
  std::sort(sorted.begin(), sorted.end(),
            [](const DepthBuild* a, const DepthBuild* b) { return a->depth < b->depth; });
  for (const DepthBuild* b : sorted) {
    RuleCountRow row;
    row.depth = b->depth;
    row.selected.resize(thresholds.size());
    if (b->artifacts) {
      const RuleSet& set = b->artifacts->rules;
      row.all = set.rules.size();
      for (std::size_t k = 0; k < thresholds.size(); ++k) {
        row.selected[k] = filter_by_variance(set, thresholds[k]).rules.size();
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string rule_counts_csv(const RuleCountTable& table) {
  std::string out = "depth,all_rules";
  for (double t : table.thresholds) out += ",var_" + threshold_label(t);
  out += "\n";
  for (const auto& row : table.rows) {
    out += std::to_string(row.depth) + ",";
    out += row.all ? std::to_string(*row.all) : "";
    for (const auto& s : row.selected) {
      out += ",";
      out += s ? std::to_string(*s) : "";
    }
    out += "\n";
  }
  return out;
}

std::vector<std::filesystem::path> emit_reports(
    const std::vector<ExperimentResult>& results, const std::filesystem::path& out_dir,
    bool plots) {
  return emit_reports(results, rule_counts(results), out_dir, plots);
}

std::vector<std::filesystem::path> emit_reports(
    const std::vector<ExperimentResult>& results, const RuleCountTable& counts,
    const std::filesystem::path& out_dir, bool plots) {
  if (results.empty()) throw ValidationError("no results to report");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw ValidationError("cannot create output directory " + out_dir.string());
  }
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    const auto path = out_dir / name;
    write_file(path, text);
    written.push_back(path);
  };

  emit("results.csv", results_csv(results));
  emit("rule_counts.csv", rule_counts_csv(counts));

  std::string errors;
  for (const auto& r : results) {
    if (!r.error) continue;
    std::string msg = *r.error;
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    errors += r.config.label() + "," +
              (r.config.depth ? std::to_string(*r.config.depth) : "") + "," + msg + "\n";
  }
  if (!errors.empty()) emit("errors.csv", "dataset_type,depth,error\n" + errors);

  for (const auto& def : series_defs()) {
    const auto points = series_points(results, def);
    std::string text = "depth,dataset_type,value\n";
    for (const auto& p : points) {
      text += std::to_string(p.depth) + "," + p.type + "," + format_real(p.value) + "\n";
    }
    emit("series_" + def.name + ".csv", text);
    if (plots && !points.empty()) emit("series_" + def.name + ".svg", svg_chart(def.name, points));
  }
  return written;
}

}  // namespace ruleflow
