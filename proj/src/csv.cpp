#include "ruleflow/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "ruleflow/error.hpp"

namespace ruleflow {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return cells;
}

std::string unquote(std::string_view s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    s = s.substr(1, s.size() - 2);
  }
  return std::string(s);
}

}  // namespace

std::string format_real(double value) {
  if (std::isnan(value)) return "NA";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string format_fixed(double value, int decimals) {
  if (!std::isfinite(value)) return format_real(value);
  char buf[128];
  auto res = std::to_chars(buf, buf + sizeof(buf), value,
                           std::chars_format::fixed, decimals);
  return std::string(buf, res.ptr);
}

CsvTable read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("file not found: " + path.string());

  CsvTable table;
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) {
    throw ValidationError(path.string() + ": missing header row");
  }
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
    line.erase(0, 3);
  }
  for (auto cell : split_line(line)) table.header.push_back(unquote(cell));
  const auto n_cols = table.header.size();

  std::vector<double> values;
  std::size_t n_rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != n_cols) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": malformed row, expected " +
                            std::to_string(n_cols) + " cells, found " +
                            std::to_string(cells.size()));
    }
    for (std::size_t j = 0; j < n_cols; ++j) {
      const auto cell = cells[j];
      if (cell.empty() || cell == "NA") {
        values.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      double v = 0.0;
      const char* first = cell.data();
      if (*first == '+') ++first;
      auto res = std::from_chars(first, cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                              ": unparseable cell '" + std::string(cell) +
                              "' in column '" + table.header[j] + "'");
      }
      values.push_back(v);
    }
    ++n_rows;
  }
  if (n_rows == 0) throw ValidationError(path.string() + ": empty dataset");

  table.values = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                          Eigen::RowMajor>>(
      values.data(), static_cast<Eigen::Index>(n_rows),
      static_cast<Eigen::Index>(n_cols));
  return table;
}

Dataset load_csv(const std::filesystem::path& path,
                 const std::string& target_column) {
  CsvTable table = read_table(path);
  Eigen::Index target_col = -1;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (table.header[j] == target_column && target_col < 0) {
      target_col = static_cast<Eigen::Index>(j);
    } else {
      names.push_back(table.header[j]);
    }
  }
  if (target_col < 0) {
    throw ValidationError(path.string() + ": missing target column '" +
                          target_column + "'");
  }
  const Eigen::Index n = table.values.rows();
  Matrix features(n, static_cast<Eigen::Index>(names.size()));
  Eigen::Index out = 0;
  for (Eigen::Index j = 0; j < table.values.cols(); ++j) {
    if (j == target_col) continue;
    features.col(out++) = table.values.col(j);
  }
  return make_dataset(std::move(names), std::move(features),
                      table.values.col(target_col), /*allow_missing=*/true);
}

void write_table(const std::filesystem::path& path, const CsvTable& table) {
  std::ostringstream os;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (j) os << ',';
    os << table.header[j];
  }
  os << '\n';
  for (Eigen::Index i = 0; i < table.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < table.values.cols(); ++j) {
      if (j) os << ',';
      os << format_real(table.values(i, j));
    }
    os << '\n';
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << os.str();
}

void write_csv(const std::filesystem::path& path, const Dataset& ds,
               const std::string& target_column) {
  CsvTable table;
  table.header = ds.feature_names;
  table.header.push_back(target_column);
  table.values.resize(ds.n_rows(), ds.n_cols() + 1);
  table.values.leftCols(ds.n_cols()) = ds.features;
  table.values.col(ds.n_cols()) = ds.target;
  write_table(path, table);
}

}  // namespace ruleflow
