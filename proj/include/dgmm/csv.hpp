#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dgmm/errors.hpp"
#include "dgmm/linalg.hpp"

namespace dgmm {

// Doubles are serialized with 17 significant digits so save->load round-trips
// are bit-exact.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{}) {
    throw IoError("cannot parse number '" + std::string(s) + "' in " + where);
  }
  for (const char* p = ptr; p < end; ++p) {
    if (*p != ' ' && *p != '\t' && *p != '\r') {
      throw IoError("trailing garbage '" + std::string(s) + "' in " + where);
    }
  }
  return v;
}

inline void write_matrix_csv(const std::filesystem::path& path,
                             const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile(path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string_view cell(line.data() + start,
                                  (comma == std::string::npos ? line.size()
                                                              : comma) -
                                      start);
      const double v = parse_double(
          cell, path.string() + ":" + std::to_string(line_no));
      if (!std::isfinite(v)) {
        throw NonFiniteEntry(path.string() + ": non-finite value at row " +
                             std::to_string(line_no) + ", col " +
                             std::to_string(row.size() + 1));
      }
      row.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw IoError(path.string() + ": ragged row " + std::to_string(line_no));
    }
    rows.push_back(std::move(row));
  }
  Matrix m(static_cast<Index>(rows.size()),
           rows.empty() ? 0 : static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return m;
}

inline void write_index_list(const std::filesystem::path& path,
                             const std::vector<Index>& ids) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (Index id : ids) out << id << '\n';
}

inline std::vector<Index> read_index_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile(path.string());
  std::vector<Index> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ids.push_back(static_cast<Index>(
        parse_double(line, path.string())));
  }
  return ids;
}

}  // namespace dgmm
