#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "recast/format.hpp"
#include "recast/source_models.hpp"
#include "recast/types.hpp"

namespace recast {

/// Header row plus string cells; numeric interpretation happens at the point
/// of use so parse errors can carry line numbers.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  Eigen::Index column(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<Eigen::Index>(j);
    throw DataError("csv: no column named '" + name + "'");
  }

  bool has_column(const std::string& name) const {
    for (const auto& h : header)
      if (h == name) return true;
    return false;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

inline double parse_double(const std::string& cell, long long line_no, const std::string& col) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last)
    throw DataError("csv: line " + std::to_string(line_no) + ": cannot parse '" + cell +
                    "' in column '" + col + "' as a number");
  return v;
}

}  // namespace detail

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("csv: cannot open " + path);
  CsvTable table;
  std::string line;
  long long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (line_no == 1) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size())
      throw DataError("csv: line " + std::to_string(line_no) + ": expected " +
                      std::to_string(table.header.size()) + " fields, found " +
                      std::to_string(cells.size()));
    table.rows.push_back(std::move(cells));
  }
  if (table.header.empty()) throw DataError("csv: " + path + " has no header row");
  return table;
}

/// Builds a Dataset from a labeled CSV: the named column is the response,
/// every other column is a numeric feature; optionally a leading intercept
/// column of ones is added.
inline Dataset dataset_from_csv(const CsvTable& table, const std::string& label_col,
                                ResponseKind kind, bool add_intercept = true) {
  const Eigen::Index label_idx = table.column(label_col);
  const Eigen::Index n = static_cast<Eigen::Index>(table.rows.size());
  if (n == 0) throw DataError("csv: no data rows");
  const Eigen::Index n_features = static_cast<Eigen::Index>(table.header.size()) - 1;
  if (n_features < 1) throw DataError("csv: need at least one feature column");

  Dataset d;
  d.kind = kind;
  d.X.resize(n, n_features + (add_intercept ? 1 : 0));
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const long long line_no = i + 2;  // header is line 1
    Eigen::Index out_j = 0;
    if (add_intercept) d.X(i, out_j++) = 1.0;
    for (std::size_t j = 0; j < table.header.size(); ++j) {
      const double v = detail::parse_double(table.rows[static_cast<std::size_t>(i)][j], line_no,
                                            table.header[j]);
      if (static_cast<Eigen::Index>(j) == label_idx)
        d.y[i] = v;
      else
        d.X(i, out_j++) = v;
    }
  }
  d.validate();
  return d;
}

/// Feature-only matrix (no label column present).
inline Matrix features_from_csv(const CsvTable& table, bool add_intercept = true) {
  const Eigen::Index n = static_cast<Eigen::Index>(table.rows.size());
  if (n == 0) throw DataError("csv: no data rows");
  Matrix X(n, static_cast<Eigen::Index>(table.header.size()) + (add_intercept ? 1 : 0));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index out_j = 0;
    if (add_intercept) X(i, out_j++) = 1.0;
    for (std::size_t j = 0; j < table.header.size(); ++j)
      X(i, out_j++) = detail::parse_double(table.rows[static_cast<std::size_t>(i)][j], i + 2,
                                           table.header[j]);
  }
  return X;
}

inline void write_matrix_csv(const Matrix& m, const std::vector<std::string>& header,
                             const std::string& path) {
  if (static_cast<Eigen::Index>(header.size()) != m.cols())
    throw DataError("write_matrix_csv: header size mismatch");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("write_matrix_csv: cannot open " + path);
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
}

inline Matrix matrix_from_csv(const CsvTable& table) {
  Matrix m(static_cast<Eigen::Index>(table.rows.size()),
           static_cast<Eigen::Index>(table.header.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = detail::parse_double(
          table.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], i + 2,
          table.header[static_cast<std::size_t>(j)]);
  return m;
}

}  // namespace recast
