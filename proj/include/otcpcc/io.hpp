#pragma once

// CSV readers and writers for the command line.
//
//   points:  one row per sample, numeric columns; an optional header row,
//            and if the header names a column "weight" it holds the
//            sample weights.
//   data:    label,f0,f1,...  (optional header row)
//   plan:    i,j,mass

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "otcpcc/error.hpp"
#include "otcpcc/measures.hpp"

namespace otcpcc::io {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::optional<double> to_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return x;
}

/// Non-empty, non-comment lines with their 1-based line numbers.
inline std::vector<std::pair<std::size_t, std::string_view>> lines(std::string_view text) {
  std::vector<std::pair<std::size_t, std::string_view>> out;
  std::size_t no = 0;
  while (!text.empty()) {
    ++no;
    const auto nl = text.find('\n');
    auto line = trim(text.substr(0, nl));
    text.remove_prefix(nl == text.npos ? text.size() : nl + 1);
    if (line.empty() || line.front() == '#') continue;
    out.push_back({no, line});
  }
  return out;
}

namespace detail {

inline ParseError bad(const std::string& where, std::size_t line, const std::string& what) {
  return ParseError(where + ":" + std::to_string(line) + ": " + what);
}

inline bool is_header(const std::vector<std::string_view>& cells, std::size_t first_numeric) {
  for (std::size_t k = first_numeric; k < cells.size(); ++k)
    if (!to_double(cells[k])) return true;
  return false;
}

}  // namespace detail

inline WeightedPointSet parse_points(std::string_view text, const std::string& where = "points") {
  const auto ls = lines(text);
  std::size_t begin = 0;
  std::optional<std::size_t> weight_col;
  if (!ls.empty() && detail::is_header(split(ls[0].second), 0)) {
    const auto head = split(ls[0].second);
    for (std::size_t k = 0; k < head.size(); ++k)
      if (head[k] == "weight") weight_col = k;
    begin = 1;
  }
  std::vector<double> coords, weights;
  std::size_t cols = 0;
  for (std::size_t r = begin; r < ls.size(); ++r) {
    const auto [no, line] = ls[r];
    const auto cells = split(line);
    if (r == begin) cols = cells.size();
    if (cells.size() != cols) throw detail::bad(where, no, "expected " + std::to_string(cols) + " columns");
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const auto x = to_double(cells[k]);
      if (!x) throw detail::bad(where, no, "'" + std::string(cells[k]) + "' is not a number");
      (weight_col && k == *weight_col ? weights : coords).push_back(*x);
    }
  }
  const std::size_t rows = ls.size() - begin;
  if (rows == 0) throw ParseError(where + ": no samples");
  const std::size_t dim = cols - (weight_col ? 1 : 0);
  if (dim == 0) throw ParseError(where + ": no coordinate columns");
  Matrix m(rows, dim, std::move(coords));
  if (weight_col) return WeightedPointSet(std::move(m), std::move(weights));
  return WeightedPointSet(std::move(m));
}

inline WeightedPointSet read_points(const std::string& path) { return parse_points(read_file(path), path); }

struct LabelledData {
  std::vector<std::string> labels;
  Matrix features;
};

inline LabelledData parse_data(std::string_view text, const std::string& where = "data") {
  const auto ls = lines(text);
  std::size_t begin = 0;
  if (!ls.empty() && detail::is_header(split(ls[0].second), 1)) begin = 1;
  LabelledData out;
  std::vector<double> values;
  std::size_t cols = 0;
  for (std::size_t r = begin; r < ls.size(); ++r) {
    const auto [no, line] = ls[r];
    const auto cells = split(line);
    if (r == begin) cols = cells.size();
    if (cells.size() != cols) throw detail::bad(where, no, "expected " + std::to_string(cols) + " columns");
    if (cols < 2) throw detail::bad(where, no, "need a label and at least one feature");
    if (cells[0].empty()) throw detail::bad(where, no, "empty class label");
    out.labels.emplace_back(cells[0]);
    for (std::size_t k = 1; k < cells.size(); ++k) {
      const auto x = to_double(cells[k]);
      if (!x) throw detail::bad(where, no, "'" + std::string(cells[k]) + "' is not a number");
      values.push_back(*x);
    }
  }
  if (out.labels.empty()) throw ParseError(where + ": no samples");
  out.features = Matrix(out.labels.size(), cols - 1, std::move(values));
  return out;
}

inline LabelledData read_data(const std::string& path) { return parse_data(read_file(path), path); }

/// Shortest decimal form that reads back to the same double.
inline std::string exact(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

/// 12 significant digits, as printed by the command line.
inline std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline void write_plan(std::ostream& out, const FlowPlan& plan) {
  out << "i,j,mass\n";
  for (const auto& e : plan.entries()) out << e.row << ',' << e.col << ',' << exact(e.mass) << '\n';
}

inline FlowPlan parse_plan(std::string_view text, std::size_t rows, std::size_t cols,
                           const std::string& where = "plan") {
  std::vector<FlowEntry> entries;
  for (const auto& [no, line] : lines(text)) {
    const auto cells = split(line);
    if (cells.size() == 3 && cells[0] == "i") continue;
    if (cells.size() != 3) throw detail::bad(where, no, "expected i,j,mass");
    const auto i = to_double(cells[0]);
    const auto j = to_double(cells[1]);
    const auto m = to_double(cells[2]);
    if (!i || !j || !m || *i < 0 || *j < 0) throw detail::bad(where, no, "malformed entry");
    entries.push_back({static_cast<std::size_t>(*i), static_cast<std::size_t>(*j), *m});
  }
  return FlowPlan(rows, cols, std::move(entries));
}

inline void write_matrix(std::ostream& out, const Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t k = 0; k < m.cols(); ++k) out << (k ? "," : "") << exact(m(i, k));
    out << '\n';
  }
}

}  // namespace otcpcc::io
