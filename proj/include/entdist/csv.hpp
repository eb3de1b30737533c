#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

// Small CSV helpers.  The artifact formats are plain comma-separated fields
// with no quoting (labels are alphanumeric by construction); floats are
// written with %.17g so every file re-ingests to the exact same doubles.

namespace entdist {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV file '" + path + "'");
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      table.header = split_csv_line(line);
      first = false;
    } else {
      auto rows = split_csv_line(line);
      if (rows.size() != table.header.size())
        throw std::runtime_error("CSV file '" + path + "': row has " +
                                 std::to_string(rows.size()) + " fields, header has " +
                                 std::to_string(table.header.size()));
      table.rows.push_back(std::move(rows));
    }
  }
  if (first) throw std::runtime_error("CSV file '" + path + "' is empty");
  return table;
}

inline void require_columns(const CsvTable& table, const std::vector<std::string>& expected,
                            const std::string& what) {
  if (table.header != expected) {
    std::string want;
    for (const auto& c : expected) want += (want.empty() ? "" : ",") + c;
    std::string got;
    for (const auto& c : table.header) got += (got.empty() ? "" : ",") + c;
    throw std::runtime_error(what + ": expected header '" + want + "', got '" + got + "'");
  }
}

inline double parse_double_field(const std::string& field, const std::string& what) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(field, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error(what + ": '" + field + "' is not a number");
  }
  if (pos != field.size())
    throw std::runtime_error(what + ": trailing characters in '" + field + "'");
  return v;
}

inline long long parse_int_field(const std::string& field, const std::string& what) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(field, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error(what + ": '" + field + "' is not an integer");
  }
  if (pos != field.size())
    throw std::runtime_error(what + ": trailing characters in '" + field + "'");
  return v;
}

}  // namespace entdist
