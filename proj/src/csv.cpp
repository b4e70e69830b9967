#include "rfcov/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rfcov/error.hpp"

namespace rfcov::csv {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

Table parse_table(const std::string& text, const std::string& source) {
  Table table;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto fields = split(t);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw DataError(source + ": line " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(table.header.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto& f = fields[c];
      const char* end = f.data() + f.size();
      auto [ptr, ec] = std::from_chars(f.data(), end, row[c]);
      if (f.empty() || ec != std::errc() || ptr != end || !std::isfinite(row[c])) {
        throw DataError(source + ": line " + std::to_string(line_no) + ", column " +
                        std::to_string(c + 1) + " (" + table.header[c] + "): invalid number '" +
                        f + "'");
      }
    }
    table.rows.push_back(std::move(row));
  }
  if (!have_header) throw DataError(source + ": missing header row");
  return table;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path + "'");
}

Table read_table(const std::string& path) { return parse_table(read_text(path), path); }

Dataset to_dataset(const Table& table, bool require_y) {
  std::optional<std::size_t> y_col;
  std::vector<std::size_t> x_cols;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const auto& name = table.header[c];
    if (name == "y") {
      if (y_col) throw ConfigError("duplicate y column");
      y_col = c;
    } else if (name == "x" + std::to_string(x_cols.size() + 1)) {
      x_cols.push_back(c);
    } else {
      throw ConfigError("unexpected column '" + name + "' at position " + std::to_string(c + 1) +
                        " (expected x" + std::to_string(x_cols.size() + 1) + " or y)");
    }
  }
  if (x_cols.empty()) throw ConfigError("no covariate columns (x1..xp)");
  if (require_y && !y_col) throw ConfigError("missing y column");
  if (table.rows.empty()) throw DataError("no data rows");
  Dataset d;
  d.x = Matrix(table.rows.size(), x_cols.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t j = 0; j < x_cols.size(); ++j) d.x(r, j) = table.rows[r][x_cols[j]];
  }
  if (y_col) {
    d.y.emplace(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) (*d.y)[r] = table.rows[r][*y_col];
  }
  return d;
}

Dataset read_dataset(const std::string& path, bool require_y) {
  return to_dataset(read_table(path), require_y);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string metadata_block(const Metadata& metadata) {
  std::string out;
  for (const auto& [k, v] : metadata) out += "# " + k + ": " + v + "\n";
  return out;
}

std::string dataset_csv(const Dataset& data, const Metadata& metadata) {
  std::string out = metadata_block(metadata);
  for (std::size_t j = 0; j < data.x.cols(); ++j) out += (j ? ",x" : "x") + std::to_string(j + 1);
  if (data.y) out += ",y";
  out += '\n';
  for (std::size_t r = 0; r < data.x.rows(); ++r) {
    for (std::size_t j = 0; j < data.x.cols(); ++j) {
      if (j) out += ',';
      out += format_double(data.x(r, j));
    }
    if (data.y) out += ',' + format_double((*data.y)[r]);
    out += '\n';
  }
  return out;
}

}  // namespace rfcov::csv
