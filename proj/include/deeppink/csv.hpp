#pragma once

#include <Eigen/Dense>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "deeppink/errors.hpp"

// CSV dialect: comma separator, one mandatory header row, decimal numbers,
// no quoting. Values are written with 17 significant digits so that a
// write-then-read round trip reproduces every double exactly.

namespace deeppink {

struct CsvTable {
  std::vector<std::string> names;
  Eigen::MatrixXd values;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

inline double parse_double(const std::string& field, std::size_t row,
                           std::size_t col) {
  const char* begin = field.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw IoError("row " + std::to_string(row) + ", column " +
                  std::to_string(col + 1) + ": cannot parse '" + field +
                  "' as a number");
  }
  return v;
}

inline std::string trim_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace detail

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");

  std::string line;
  if (!std::getline(in, line)) throw IoError("'" + path + "' is empty");
  CsvTable table;
  table.names = detail::split_csv_line(detail::trim_cr(line));
  const std::size_t p = table.names.size();
  for (const auto& name : table.names) {
    if (name.empty()) throw IoError("'" + path + "': empty column name in header");
  }

  std::vector<double> data;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    line = detail::trim_cr(line);
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != p) {
      throw IoError("'" + path + "', row " + std::to_string(rows + 1) + ": expected " +
                    std::to_string(p) + " fields, got " + std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < p; ++j) {
      data.push_back(detail::parse_double(fields[j], rows + 1, j));
    }
    ++rows;
  }
  if (rows == 0) throw IoError("'" + path + "' has a header but no data rows");

  table.values.resize(rows, p);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          data[i * p + j];
    }
  }
  return table;
}

inline std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_csv(const std::string& path, const std::vector<std::string>& names,
                      const Eigen::MatrixXd& values) {
  if (static_cast<Eigen::Index>(names.size()) != values.cols()) {
    throw DimensionMismatch("header size does not match column count");
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (j) out << ',';
    out << names[j];
  }
  out << '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      if (j) out << ',';
      out << format_value(values(i, j));
    }
    out << '\n';
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

// Single-column response file.
inline Eigen::VectorXd read_response_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  if (table.values.cols() != 1) {
    throw IoError("'" + path + "': expected a single response column, got " +
                  std::to_string(table.values.cols()));
  }
  return table.values.col(0);
}

}  // namespace deeppink
