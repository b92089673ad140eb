#ifndef MULTIVIEW_IO_HPP
#define MULTIVIEW_IO_HPP

#include "multiview/common.hpp"
#include "multiview/netcore.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace multiview {

struct LabeledMatrix {
  Matrix values;
  std::vector<std::string> row_labels;  // empty unless requested
};

/// Numeric CSV, one observation per row. With `row_labels`, the first column
/// holds a node label. Non-numeric or non-finite cells are rejected with
/// their 1-based row/column position.
inline LabeledMatrix read_matrix_csv(std::istream& in, bool has_header = false, bool row_labels = false,
                                     char delimiter = ',') {
  std::vector<std::vector<double>> rows;
  LabeledMatrix out;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && has_header) continue;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto fields = detail::split_fields(line, delimiter);
    std::size_t first = row_labels ? 1 : 0;
    if (fields.size() <= first) throw InputError("row " + std::to_string(lineno) + ": no numeric columns");
    if (row_labels) out.row_labels.push_back(fields[0]);
    std::vector<double> row;
    row.reserve(fields.size() - first);
    for (std::size_t c = first; c < fields.size(); ++c) {
      std::string cell = fields[c];
      auto b = cell.find_first_not_of(" \t");
      auto e = cell.find_last_not_of(" \t");
      cell = b == std::string::npos ? std::string() : cell.substr(b, e - b + 1);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
        throw InputError("row " + std::to_string(lineno) + ", column " + std::to_string(c + 1) +
                         ": invalid numeric value '" + cell + "'");
      row.push_back(v);
    }
    if (width == 0) width = row.size();
    else if (row.size() != width)
      throw InputError("row " + std::to_string(lineno) + ": expected " + std::to_string(width) + " values, found " +
                       std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError("matrix file is empty");
  out.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j)
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return out;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InputError("file not found: " + path.string());
  std::ifstream in(path);
  if (!in) throw InputError("cannot open file: " + path.string());
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write file: " + path.string());
  out.precision(17);
  return out;
}

inline void write_matrix_csv(std::ostream& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << m(i, j);
    }
    out << '\n';
  }
}

inline void write_labeled_rows_csv(std::ostream& out, const std::vector<std::string>& labels, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << labels[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << m(i, j);
    out << '\n';
  }
}

inline void write_edge_list(std::ostream& out, const AdjacencyView& a, const std::vector<std::string>& labels) {
  for (const auto& [i, j] : a.edges())
    out << labels[static_cast<std::size_t>(i)] << '\t' << labels[static_cast<std::size_t>(j)] << '\n';
}

/// Zero-padded labels so that lexicographic order equals index order.
inline std::vector<std::string> padded_node_labels(int n, const std::string& prefix = "v") {
  int width = 1;
  for (int x = std::max(n - 1, 1); x >= 10; x /= 10) ++width;
  std::vector<std::string> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::string digits = std::to_string(i);
    labels[static_cast<std::size_t>(i)] = prefix + std::string(static_cast<std::size_t>(width) - digits.size(), '0') + digits;
  }
  return labels;
}

}  // namespace multiview

#endif  // MULTIVIEW_IO_HPP
