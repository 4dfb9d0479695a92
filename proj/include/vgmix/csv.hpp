// Plain CSV for numeric data: comma-separated, one header row, '.' decimals,
// no quoting. An optional label column holds positive integers or blanks
// (blank = unlabeled). Values are written with 17 significant digits so a
// write/read cycle reproduces every double exactly.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vgmix/errors.hpp"
#include "vgmix/linalg.hpp"

namespace vgmix {

class CsvError : public Error {
 public:
  using Error::Error;
};

struct Dataset {
  std::vector<std::string> column_names;  // feature columns only
  Matrix rows;
  std::optional<std::string> label_name;
  std::vector<std::optional<std::size_t>> labels;  // 1-based as in the file; empty if no label column

  std::size_t size() const { return rows.rows(); }
};

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::string cell_where(std::size_t line, std::string_view column) {
  return "row " + std::to_string(line) + ", column \"" + std::string(column) + "\"";
}

inline double parse_real(std::string_view cell, std::size_t line, std::string_view column) {
  if (cell.empty()) throw CsvError("empty value at " + cell_where(line, column));
  if (cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || end != cell.data() + cell.size() || !std::isfinite(v))
    throw CsvError("cannot parse \"" + std::string(cell) + "\" as a finite number at " +
                   cell_where(line, column));
  return v;
}

inline std::optional<std::size_t> parse_label(std::string_view cell, std::size_t line,
                                              std::string_view column) {
  if (cell.empty()) return std::nullopt;
  unsigned long long v = 0;
  const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || end != cell.data() + cell.size() || v == 0)
    throw CsvError("label \"" + std::string(cell) + "\" is not a positive integer at " +
                   cell_where(line, column));
  return static_cast<std::size_t>(v);
}

}  // namespace detail

/// Reads a dataset. `label_column` names the label column, if any; columns in
/// `exclude` are skipped. A zero-byte input gives an empty dataset.
inline Dataset read_csv(std::istream& in, const std::optional<std::string>& label_column = {},
                        const std::vector<std::string>& exclude = {}) {
  Dataset ds;
  std::string line;
  if (!std::getline(in, line)) {
    if (label_column) ds.label_name = label_column;
    return ds;
  }
  std::vector<std::string> header;
  for (auto h : detail::split_commas(line)) header.emplace_back(detail::trim(h));

  std::optional<std::size_t> label_idx;
  std::vector<std::size_t> feature_idx;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (label_column && header[j] == *label_column) {
      label_idx = j;
    } else if (std::find(exclude.begin(), exclude.end(), header[j]) == exclude.end()) {
      feature_idx.push_back(j);
      ds.column_names.push_back(header[j]);
    }
  }
  if (label_column && !label_idx) throw CsvError("label column \"" + *label_column + "\" not found");
  for (const auto& e : exclude)
    if (std::find(header.begin(), header.end(), e) == header.end())
      throw CsvError("excluded column \"" + e + "\" not found");
  ds.label_name = label_column;

  std::vector<double> values;
  std::size_t n = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_commas(line);
    if (cells.size() != header.size())
      throw CsvError("row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                     " fields, header has " + std::to_string(header.size()));
    for (std::size_t j : feature_idx)
      values.push_back(detail::parse_real(detail::trim(cells[j]), line_no, header[j]));
    if (label_idx)
      ds.labels.push_back(detail::parse_label(detail::trim(cells[*label_idx]), line_no, header[*label_idx]));
    ++n;
  }
  const std::size_t p = feature_idx.size();
  ds.rows = Matrix(n, p);
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(i * p), p, ds.rows.row(i).begin());
  return ds;
}

inline Dataset ingest_csv(const std::string& path, const std::optional<std::string>& label_column = {},
                          const std::vector<std::string>& exclude = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError("cannot open " + path);
  try {
    return read_csv(in, label_column, exclude);
  } catch (const CsvError& e) {
    throw CsvError(path + ": " + e.what());
  }
}

/// 17 significant digits: enough to round-trip any finite double.
inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Writes the dataset in the dialect read_csv accepts; labels go last.
inline void write_csv(std::ostream& out, const Dataset& ds) {
  const bool with_labels = ds.label_name.has_value();
  for (std::size_t j = 0; j < ds.column_names.size(); ++j) out << (j ? "," : "") << ds.column_names[j];
  if (with_labels) out << (ds.column_names.empty() ? "" : ",") << *ds.label_name;
  out << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto r = ds.rows.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << format_real(r[j]);
    if (with_labels) {
      out << (r.empty() ? "" : ",");
      if (i < ds.labels.size() && ds.labels[i]) out << *ds.labels[i];
    }
    out << '\n';
  }
}

}  // namespace vgmix
