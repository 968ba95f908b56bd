#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mpeccq {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IndexList = std::vector<Index>;

/// Thrown when input shapes disagree with the declared problem dimensions.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a point cannot be assigned to an activity class under the
/// configured tolerances (e.g. both sides of a complementarity pair positive).
class ClassificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown by readers on malformed input documents.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thresholds that turn exact-zero tests into floating point decisions.
struct Tolerances {
  double activity_eps = 1e-8;       // |value| <= eps counts as zero
  double rank_rel_tol = 1e-10;      // relative singular value cutoff
  double pd_eps = 1e-8;             // minimum eigenvalue threshold
  double strict_margin_eps = 1e-9;  // LP margin that counts as strict
  double feas_eps = 1e-8;           // feasibility residual bound

  void validate() const {
    if (!(activity_eps > 0 && rank_rel_tol > 0 && pd_eps > 0 &&
          strict_margin_eps > 0 && feas_eps > 0)) {
      throw StructuralError("all tolerances must be strictly positive");
    }
  }
};

/// Default enumeration cap on the biactive set for branch-enumerating checks.
inline constexpr std::size_t kDefaultBiactiveCap = 12;

/// Rows of `m` selected by `rows`, in the given order.
inline Matrix select_rows(const Matrix& m, const IndexList& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Index>(k)) = m.row(rows[k]);
  return out;
}

/// Submatrix m(rows, cols).
inline Matrix select(const Matrix& m, const IndexList& rows, const IndexList& cols) {
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c)
      out(static_cast<Index>(r), static_cast<Index>(c)) = m(rows[r], cols[c]);
  return out;
}

inline Matrix vstack(const std::vector<Matrix>& blocks, Index cols) {
  Index rows = 0;
  for (const auto& b : blocks) rows += b.rows();
  Matrix out(rows, cols);
  Index at = 0;
  for (const auto& b : blocks) {
    if (b.rows() == 0) continue;
    if (b.cols() != cols) throw StructuralError("vstack: column count mismatch");
    out.middleRows(at, b.rows()) = b;
    at += b.rows();
  }
  return out;
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace mpeccq
