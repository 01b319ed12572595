#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ruleflow/dataset.hpp"

namespace ruleflow {

/// Raw numeric table: header plus a dense matrix, missing cells as NaN.
struct CsvTable {
  std::vector<std::string> header;
  Matrix values;
};

/// Reads a comma-separated numeric table. Empty cells and the literal `NA`
/// are missing. Throws on unreadable files, ragged rows, unparseable cells
/// and files with no data rows.
CsvTable read_table(const std::filesystem::path& path);

/// Loads a dataset; `target_column` becomes the target, every other column
/// a feature in header order. Missing feature cells stay NaN.
Dataset load_csv(const std::filesystem::path& path,
                 const std::string& target_column);

/// Writes features then the target column, shortest round-trip reals.
void write_csv(const std::filesystem::path& path, const Dataset& ds,
               const std::string& target_column);

void write_table(const std::filesystem::path& path, const CsvTable& table);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_real(double value);

/// Fixed-point rendering with `decimals` digits after the point.
std::string format_fixed(double value, int decimals);

}  // namespace ruleflow
