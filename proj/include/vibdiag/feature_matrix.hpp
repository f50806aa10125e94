#pragma once

// Labeled feature matrix q[n, j] with class labels, and its delimited-text form
// (header of feature names plus "label", one row per window).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vibdiag/error.hpp"
#include "vibdiag/ingest.hpp"

namespace vibdiag {

struct LabeledFeatureMatrix {
  Eigen::MatrixXd q;            // rows = samples, columns = features
  std::vector<int> labels;      // class id per row
  std::vector<std::string> names;

  std::size_t rows() const { return static_cast<std::size_t>(q.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(q.cols()); }

  /// Sorted distinct class ids.
  std::vector<int> classes() const {
    std::vector<int> c(labels.begin(), labels.end());
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
    return c;
  }

  std::map<int, std::size_t> class_counts() const {
    std::map<int, std::size_t> counts;
    for (int l : labels) ++counts[l];
    return counts;
  }

  /// Row indices of each class, in dataset order.
  std::map<int, std::vector<std::size_t>> class_rows() const {
    std::map<int, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < labels.size(); ++i) out[labels[i]].push_back(i);
    return out;
  }

  LabeledFeatureMatrix subset(std::span<const std::size_t> row_idx) const {
    LabeledFeatureMatrix out;
    out.names = names;
    out.q.resize(static_cast<Eigen::Index>(row_idx.size()), q.cols());
    out.labels.reserve(row_idx.size());
    for (std::size_t r = 0; r < row_idx.size(); ++r) {
      out.q.row(static_cast<Eigen::Index>(r)) = q.row(static_cast<Eigen::Index>(row_idx[r]));
      out.labels.push_back(labels[row_idx[r]]);
    }
    return out;
  }

  /// Throws unless the matrix has >= 2 classes, >= 1 column, finite values.
  void validate(std::size_t min_classes = 2) const {
    if (q.cols() < 1) throw DataError("feature matrix has no columns");
    if (labels.size() != rows()) throw DataError("feature matrix: label count != row count");
    if (!names.empty() && names.size() != cols()) throw DataError("feature matrix: name count != column count");
    if (classes().size() < min_classes)
      throw DataError("feature matrix needs at least " + std::to_string(min_classes) + " classes");
    if (!q.allFinite()) throw DataError("feature matrix contains non-finite values");
  }
};

inline void write_feature_csv(const std::filesystem::path& path, const LabeledFeatureMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (std::size_t j = 0; j < m.cols(); ++j)
    out << (j < m.names.size() ? m.names[j] : "f" + std::to_string(j + 1)) << ',';
  out << "label\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j)
      out << detail::format_double(m.q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) << ',';
    out << m.labels[i] << '\n';
  }
}

inline LabeledFeatureMatrix read_feature_csv(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("feature file '" + path.string() + "' not found");
  const auto lines = detail::read_lines(path);
  if (lines.empty()) throw DataError(path.string() + ": empty file");
  const auto header = detail::split_cells(lines.front());
  if (header.size() < 2 || header.back() != "label")
    throw DataError(path.string() + ": header must end with a 'label' column");
  LabeledFeatureMatrix m;
  for (std::size_t j = 0; j + 1 < header.size(); ++j) m.names.emplace_back(header[j]);
  const std::size_t cols = m.names.size();
  std::vector<std::vector<double>> rows;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    if (detail::trim(lines[r]).empty()) continue;
    const auto cells = detail::split_cells(lines[r]);
    if (cells.size() != cols + 1)
      throw DataError(path.string() + ": row " + std::to_string(r + 1) + " has " +
                      std::to_string(cells.size()) + " cells, expected " + std::to_string(cols + 1));
    std::vector<double> row(cols);
    for (std::size_t j = 0; j <= cols; ++j) {
      const auto v = detail::parse_double(cells[j]);
      if (!v || !std::isfinite(*v))
        throw DataError(path.string() + ": row " + std::to_string(r + 1) + ", column " +
                        std::to_string(j + 1) + ": '" + std::string(cells[j]) + "' is not a finite number");
      if (j < cols) {
        row[j] = *v;
      } else {
        if (*v != std::floor(*v)) throw DataError(path.string() + ": row " + std::to_string(r + 1) + ": label must be an integer");
        m.labels.push_back(static_cast<int>(*v));
      }
    }
    rows.push_back(std::move(row));
  }
  m.q.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols; ++j)
      m.q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

}  // namespace vibdiag
