#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mpeccq/core.hpp"

namespace mpeccq::bho {

/// Labelled samples; row k of `features` pairs with labels(k) in {-1, +1}.
struct Dataset {
  Matrix features;
  Vector labels;

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }

  void validate() const {
    if (features.rows() == 0) throw StructuralError("dataset: no samples");
    if (labels.size() != features.rows()) throw StructuralError("dataset: label count differs from sample count");
    for (Index k = 0; k < labels.size(); ++k)
      if (labels(k) != 1.0 && labels(k) != -1.0)
        throw StructuralError("dataset: label " + std::to_string(k) + " is not +-1");
    if (!features.allFinite()) throw StructuralError("dataset: non-finite feature");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline bool parse_double(const std::string& s, double& v) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

/// Reads comma-separated samples, label in the last column. A first row
/// with any non-numeric cell is taken as a header. Labels 0/1 map to -1/+1.
inline Dataset parse_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    std::vector<double> vals(cells.size());
    bool numeric = true;
    for (std::size_t k = 0; k < cells.size(); ++k) numeric = numeric && detail::parse_double(cells[k], vals[k]);
    if (!numeric) {
      if (rows.empty() && width == 0) {
        width = cells.size();  // header
        continue;
      }
      throw ParseError("csv line " + std::to_string(line_no) + ": non-numeric cell");
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width)
      throw ParseError("csv line " + std::to_string(line_no) + ": expected " + std::to_string(width) + " cells, got " +
                       std::to_string(cells.size()));
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw ParseError("csv: no data rows");
  if (width < 2) throw ParseError("csv: need at least one feature column and a label column");

  Dataset ds;
  ds.features.resize(static_cast<Index>(rows.size()), static_cast<Index>(width - 1));
  ds.labels.resize(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c + 1 < width; ++c) ds.features(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    const double y = rows[r][width - 1];
    if (y == 1.0) {
      ds.labels(static_cast<Index>(r)) = 1.0;
    } else if (y == -1.0 || y == 0.0) {
      ds.labels(static_cast<Index>(r)) = -1.0;
    } else {
      throw ParseError("csv row " + std::to_string(r + 1) + ": label must be -1, +1, 0 or 1");
    }
  }
  ds.validate();
  return ds;
}

inline Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return parse_csv(in);
}

/// Per-fold validation and training sample indices into the dataset.
struct FoldSplit {
  Index T = 0, m1 = 0, m2 = 0;
  std::uint64_t seed = 0;
  std::vector<IndexList> validation_indices;
  std::vector<IndexList> training_indices;
};

/// Shuffles sample indices with the seeded engine. Fold t validates on the
/// t-th block of m1 shuffled samples; its training set is the first m2
/// shuffled samples outside that block. Samples beyond these are unused.
inline FoldSplit split_folds(const Dataset& ds, Index T, Index m1, Index m2, std::uint64_t seed) {
  if (T < 1 || m1 < 1 || m2 < 1) throw StructuralError("split_folds: T, m1, m2 must be >= 1");
  const Index N = ds.size();
  if (N < T * m1) throw StructuralError("split_folds: need at least T*m1 samples");
  if (N - m1 < m2) throw StructuralError("split_folds: need at least m1+m2 samples");

  IndexList perm(static_cast<std::size_t>(N));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  FoldSplit fs{T, m1, m2, seed, {}, {}};
  for (Index t = 0; t < T; ++t) {
    const Index lo = t * m1, hi = lo + m1;
    fs.validation_indices.emplace_back(perm.begin() + lo, perm.begin() + hi);
    IndexList train;
    for (Index k = 0; k < N && static_cast<Index>(train.size()) < m2; ++k)
      if (k < lo || k >= hi) train.push_back(perm[static_cast<std::size_t>(k)]);
    fs.training_indices.push_back(std::move(train));
  }
  return fs;
}

}  // namespace mpeccq::bho
