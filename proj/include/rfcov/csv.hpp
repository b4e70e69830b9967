#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rfcov/matrix.hpp"

namespace rfcov::csv {

using Metadata = std::vector<std::pair<std::string, std::string>>;

/// Covariates x1..xp and an optional outcome column y.
struct Dataset {
  Matrix x;
  std::optional<std::vector<double>> y;
};

/// Numeric table with a header row. Lines starting with '#' and blank lines
/// are skipped. Errors name the 1-based line and column.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

Table parse_table(const std::string& text, const std::string& source);
Table read_table(const std::string& path);

/// Header must be x1..xp in order, with y allowed in any position. A missing
/// y throws ConfigError when `require_y` is set.
Dataset to_dataset(const Table& table, bool require_y);
Dataset read_dataset(const std::string& path, bool require_y);

/// Shortest round-trip decimal form.
std::string format_double(double v);

std::string metadata_block(const Metadata& metadata);
std::string dataset_csv(const Dataset& data, const Metadata& metadata);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace rfcov::csv
