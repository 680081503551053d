#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dvs/design_matrix.hpp"
#include "dvs/errors.hpp"
#include "dvs/expdesign.hpp"

namespace dvs {

enum class TableFormat { kCsv, kTsv, kWhitespace };
enum class Orientation { kSamplesAsRows, kColumnsAsGiven };

/// Rectangular numeric file content; rows and columns as they appear on disk.
struct ParsedTable {
  std::vector<std::string> header;  // empty when the file has none
  Eigen::MatrixXd values;
  std::uint64_t fingerprint = 0;  // FNV-1a of the raw bytes
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_line(std::string_view line, TableFormat format) {
  std::vector<std::string> cells;
  if (format == TableFormat::kWhitespace) {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      std::size_t start = i;
      while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
      if (i > start) cells.emplace_back(line.substr(start, i - start));
    }
    return cells;
  }
  const char delim = format == TableFormat::kCsv ? ',' : '\t';
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    const std::string_view cell =
        line.substr(start, pos == std::string_view::npos ? pos : pos - start);
    cells.emplace_back(trim(cell));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

inline double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
  std::string_view body = cell;
  if (!body.empty() && body.front() == '+') body.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), value);
  if (ec != std::errc{} || ptr != body.data() + body.size() || !std::isfinite(value))
    throw ParseError("non-numeric cell '" + cell + "'", row, col);
  return value;
}

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (const char c : bytes) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 1099511628211ULL;
  }
  return hash;
}

}  // namespace detail

/// Reads a delimited numeric table. Rows and columns in errors are 1-based
/// physical file coordinates; blank lines are skipped.
inline ParsedTable load_table(const std::string& path, TableFormat format, bool has_header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'", 0, 0);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string content = buffer.str();

  ParsedTable table;
  table.fingerprint = detail::fnv1a(content);

  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  std::size_t line_number = 0;
  std::size_t start = 0;
  while (start <= content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string::npos) end = content.size();
    std::string_view line(content.data() + start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_number;
    if (!detail::trim(line).empty()) {
      rows.push_back(detail::split_line(line, format));
      line_numbers.push_back(line_number);
    }
    if (end == content.size()) break;
    start = end + 1;
  }

  std::size_t first_data = 0;
  if (has_header) {
    if (rows.empty()) throw ParseError("file has a header but no data", 0, 0);
    table.header = rows[0];
    first_data = 1;
  }
  if (rows.size() <= first_data) throw ParseError("file has no data rows", 0, 0);

  const std::size_t width = rows[first_data].size();
  if (has_header && table.header.size() != width)
    throw ParseError("header width differs from data width", line_numbers[0],
                     std::min(table.header.size(), width) + 1);

  table.values.resize(static_cast<Eigen::Index>(rows.size() - first_data),
                      static_cast<Eigen::Index>(width));
  for (std::size_t r = first_data; r < rows.size(); ++r) {
    if (rows[r].size() != width)
      throw ParseError("ragged row: expected " + std::to_string(width) + " cells, found " +
                           std::to_string(rows[r].size()),
                       line_numbers[r], std::min(rows[r].size(), width) + 1);
    for (std::size_t c = 0; c < width; ++c)
      table.values(static_cast<Eigen::Index>(r - first_data), static_cast<Eigen::Index>(c)) =
          detail::parse_cell(rows[r][c], line_numbers[r], c + 1);
  }
  return table;
}

/// Loads a design matrix; samples-as-rows tables are transposed so samples
/// become columns.
inline DesignMatrix load_design_matrix(const std::string& path, TableFormat format,
                                       bool has_header, Orientation orientation,
                                       double rank_tol_scale = kDefaultRankTolScale,
                                       std::uint64_t* fingerprint = nullptr) {
  const ParsedTable table = load_table(path, format, has_header);
  if (fingerprint != nullptr) *fingerprint = table.fingerprint;
  if (orientation == Orientation::kSamplesAsRows)
    return DesignMatrix(table.values.transpose(), rank_tol_scale);
  return DesignMatrix(table.values, rank_tol_scale);
}

/// Resolves a response column given either a 1-based index or a header name.
inline Eigen::Index resolve_response_column(const ParsedTable& table,
                                            const std::string& response) {
  if (response.empty()) return table.values.cols() - 1;
  int index = 0;
  const auto [ptr, ec] = std::from_chars(response.data(), response.data() + response.size(), index);
  if (ec == std::errc{} && ptr == response.data() + response.size()) {
    if (index < 1 || index > table.values.cols())
      throw std::domain_error("response column index " + response + " outside [1, " +
                              std::to_string(table.values.cols()) + "]");
    return index - 1;
  }
  for (std::size_t i = 0; i < table.header.size(); ++i)
    if (table.header[i] == response) return static_cast<Eigen::Index>(i);
  throw std::domain_error("response column '" + response + "' not found in header");
}

/// Loads a samples-as-rows table with a response column into a regression
/// dataset. The response defaults to the last column.
inline RegressionDataset load_regression_dataset(const std::string& path, TableFormat format,
                                                 bool has_header,
                                                 const std::string& response_column = "",
                                                 bool standardize = false,
                                                 std::uint64_t* fingerprint = nullptr) {
  const ParsedTable table = load_table(path, format, has_header);
  if (fingerprint != nullptr) *fingerprint = table.fingerprint;
  if (table.values.cols() < 2)
    throw std::domain_error("regression table needs at least one feature and one response");
  const Eigen::Index response = resolve_response_column(table, response_column);
  Eigen::MatrixXd X(table.values.rows(), table.values.cols() - 1);
  Eigen::Index out = 0;
  for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
    if (c == response) continue;
    X.col(out++) = table.values.col(c);
  }
  return make_regression_dataset(std::move(X), table.values.col(response), standardize);
}

}  // namespace dvs
