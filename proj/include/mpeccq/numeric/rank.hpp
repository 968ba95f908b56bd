#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include <Eigen/SVD>
#include <Eigen/Eigenvalues>

#include "mpeccq/core.hpp"

namespace mpeccq::numeric {

/// Row rank of a matrix together with the singular values that decided it.
///
/// When the rank is below the row count, `null_witness` holds a unit vector y
/// with yᵀM ≈ 0, i.e. a nontrivial row combination certifying dependence.
struct RankResult {
  Index rank = 0;
  Index rows = 0;
  Index cols = 0;
  std::vector<double> singular_values;  // descending
  std::optional<Vector> null_witness;

  bool full_row_rank() const { return rank == rows; }
};

/// Numerical rank: singular values above rank_rel_tol * σ_max * max(rows, cols).
inline RankResult numerical_rank(const Matrix& m, double rank_rel_tol) {
  RankResult out;
  out.rows = m.rows();
  out.cols = m.cols();
  if (m.rows() == 0 || m.cols() == 0) {
    // An empty set of rows is independent; rows of zero width are all zero.
    if (m.rows() > 0) out.null_witness = Vector::Unit(m.rows(), 0);
    return out;
  }
  if (!m.allFinite()) throw StructuralError("numerical_rank: non-finite entry");

  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU);
  const Vector& sv = svd.singularValues();
  out.singular_values.assign(sv.data(), sv.data() + sv.size());
  const double cutoff =
      sv.size() > 0 ? rank_rel_tol * sv(0) * static_cast<double>(std::max(m.rows(), m.cols())) : 0.0;
  for (Index k = 0; k < sv.size(); ++k)
    if (sv(k) > cutoff) ++out.rank;

  if (out.rank < m.rows()) {
    // Columns of U beyond the rank span the (numerical) left null space.
    Vector y = svd.matrixU().col(out.rank);
    // Fix the sign so the largest-magnitude entry is positive (determinism).
    Index arg = 0;
    y.cwiseAbs().maxCoeff(&arg);
    if (y(arg) < 0) y = -y;
    out.null_witness = y;
  }
  return out;
}

/// True iff the symmetric matrix has minimum eigenvalue > pd_eps * (1 + trace/rows).
/// Empty matrices count as positive definite.
inline bool is_positive_definite(const Matrix& m, double pd_eps) {
  if (m.rows() != m.cols()) throw StructuralError("is_positive_definite: matrix is not square");
  if (m.rows() == 0) return true;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw StructuralError("is_positive_definite: matrix is not symmetric");
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  const double min_eig = eig.eigenvalues().minCoeff();
  const double threshold = pd_eps * (1.0 + sym.trace() / static_cast<double>(sym.rows()));
  return min_eig > threshold;
}

}  // namespace mpeccq::numeric
