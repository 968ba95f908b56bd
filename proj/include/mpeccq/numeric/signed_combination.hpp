#pragma once

#include <optional>
#include <string>

#include "mpeccq/core.hpp"
#include "mpeccq/numeric/rank.hpp"
#include "mpeccq/numeric/simplex.hpp"

namespace mpeccq::numeric {

/// Rows grouped by the sign class imposed on their combination coefficient.
/// Coefficients of `zero_rows` are fixed at zero; the block only keeps
/// provenance so witnesses index every row of the query.
struct SignedCombinationQuery {
  Matrix nonneg_rows;      // coefficient >= 0
  Matrix strict_pos_rows;  // coefficient > 0
  Matrix zero_rows;        // coefficient == 0
  Matrix free_rows;        // unrestricted

  explicit SignedCombinationQuery(Index cols = 0)
      : nonneg_rows(0, cols), strict_pos_rows(0, cols), zero_rows(0, cols), free_rows(0, cols) {}

  Index cols() const { return nonneg_rows.cols(); }
  Index total_rows() const {
    return nonneg_rows.rows() + strict_pos_rows.rows() + zero_rows.rows() + free_rows.rows();
  }
  /// All rows stacked in witness order: nonneg, strict, zero, free.
  Matrix stacked() const {
    return vstack({nonneg_rows, strict_pos_rows, zero_rows, free_rows}, cols());
  }
};

/// A nonzero coefficient vector over all query rows (witness order) whose
/// combination vanishes, normalised to unit 1-norm.
struct CombinationWitness {
  bool exists = false;
  Vector coefficients;
  double margin = 0.0;
};

/// Decides whether a nonzero combination with the query's sign classes sums
/// to zero.
///
/// Pure-free dependence is settled by the rank test alone. Otherwise an LP
/// with the sign-restricted coefficients summing to 1 (free coefficients
/// split into nonnegative halves) either maximises the smallest strict
/// coefficient or, without strict rows, minimises the free mass. With strict
/// rows a witness exists iff the smallest strict coefficient of the unit
/// 1-norm witness reaches `strict_margin_eps`.
inline CombinationWitness signed_combination_exists(const SignedCombinationQuery& q, const Tolerances& tol) {
  const Index n = q.cols();
  if (q.strict_pos_rows.cols() != n || q.zero_rows.cols() != n || q.free_rows.cols() != n)
    throw StructuralError("signed_combination_exists: blocks disagree on column count");

  const Index kn = q.nonneg_rows.rows();
  const Index ks = q.strict_pos_rows.rows();
  const Index kz = q.zero_rows.rows();
  const Index kf = q.free_rows.rows();
  const Index total = kn + ks + kz + kf;

  CombinationWitness out;
  out.coefficients = Vector::Zero(total);

  if (ks == 0) {
    if (kf > 0) {
      const RankResult rr = numerical_rank(q.free_rows, tol.rank_rel_tol);
      if (rr.rank < kf) {
        Vector y = *rr.null_witness;
        y /= y.lpNorm<1>();
        out.exists = true;
        out.coefficients.tail(kf) = y;
        return out;
      }
    }
    if (kn == 0) return out;
  }

  LinearProgram lp;
  std::vector<Index> a(static_cast<std::size_t>(kn)), s(static_cast<std::size_t>(ks));
  std::vector<Index> fp(static_cast<std::size_t>(kf)), fm(static_cast<std::size_t>(kf));
  for (auto& v : a) v = lp.add_variable();
  for (auto& v : s) v = lp.add_variable();
  for (Index i = 0; i < kf; ++i) {
    fp[static_cast<std::size_t>(i)] = lp.add_variable();
    fm[static_cast<std::size_t>(i)] = lp.add_variable();
  }
  const Index t = ks > 0 ? lp.add_variable(0.0, 1.0) : -1;

  for (Index j = 0; j < n; ++j) {
    std::vector<std::pair<Index, double>> terms;
    for (Index i = 0; i < kn; ++i)
      if (q.nonneg_rows(i, j) != 0.0) terms.push_back({a[static_cast<std::size_t>(i)], q.nonneg_rows(i, j)});
    for (Index i = 0; i < ks; ++i)
      if (q.strict_pos_rows(i, j) != 0.0) terms.push_back({s[static_cast<std::size_t>(i)], q.strict_pos_rows(i, j)});
    for (Index i = 0; i < kf; ++i) {
      const double v = q.free_rows(i, j);
      if (v == 0.0) continue;
      terms.push_back({fp[static_cast<std::size_t>(i)], v});
      terms.push_back({fm[static_cast<std::size_t>(i)], -v});
    }
    if (!terms.empty()) lp.add_constraint(std::move(terms), Sense::eq, 0.0);
  }
  {
    // Free rows are independent here, so any witness has sign-restricted mass.
    std::vector<std::pair<Index, double>> norm;
    for (Index v : a) norm.push_back({v, 1.0});
    for (Index v : s) norm.push_back({v, 1.0});
    lp.add_constraint(std::move(norm), Sense::eq, 1.0);
  }
  if (ks > 0) {
    for (Index v : s) lp.add_constraint({{v, 1.0}, {t, -1.0}}, Sense::ge, 0.0);
    lp.set_objective(t, 1.0);
    lp.set_maximize(true);
  } else {
    for (Index i = 0; i < kf; ++i) {
      lp.set_objective(fp[static_cast<std::size_t>(i)], 1.0);
      lp.set_objective(fm[static_cast<std::size_t>(i)], 1.0);
    }
  }

  const LpSolution sol = lp.solve();
  if (!sol.feasible() || (ks > 0 && sol.objective < tol.strict_margin_eps)) {
    out.margin = sol.feasible() ? sol.objective : 0.0;
    return out;
  }

  Vector coef = Vector::Zero(total);
  for (Index i = 0; i < kn; ++i) coef(i) = sol.x(a[static_cast<std::size_t>(i)]);
  for (Index i = 0; i < ks; ++i) coef(kn + i) = sol.x(s[static_cast<std::size_t>(i)]);
  for (Index i = 0; i < kf; ++i)
    coef(kn + ks + kz + i) = sol.x(fp[static_cast<std::size_t>(i)]) - sol.x(fm[static_cast<std::size_t>(i)]);
  coef /= coef.lpNorm<1>();
  out.margin = ks > 0 ? coef.segment(kn, ks).minCoeff() : coef.head(kn).sum();
  if (ks > 0 && out.margin < tol.strict_margin_eps) return out;
  out.exists = true;
  out.coefficients = coef;
  return out;
}

/// Solver-independent check of a witness against the query's sign classes.
/// Returns an empty optional when the witness is valid, else the reason.
inline std::optional<std::string> verify_witness(const SignedCombinationQuery& q, const CombinationWitness& w,
                                                 double slack, double strict_eps) {
  if (!w.exists) return std::string("witness does not claim existence");
  const Index kn = q.nonneg_rows.rows();
  const Index ks = q.strict_pos_rows.rows();
  const Index kz = q.zero_rows.rows();
  if (w.coefficients.size() != q.total_rows()) return std::string("coefficient count mismatch");
  if (!w.coefficients.allFinite()) return std::string("non-finite coefficient");
  if (std::abs(w.coefficients.lpNorm<1>() - 1.0) > 1e-9) return std::string("coefficients not 1-norm normalised");
  for (Index i = 0; i < kn; ++i)
    if (w.coefficients(i) < -slack) return std::string("negative coefficient on nonneg row");
  for (Index i = 0; i < ks; ++i)
    if (w.coefficients(kn + i) < strict_eps) return std::string("strict coefficient below margin");
  for (Index i = 0; i < kz; ++i)
    if (w.coefficients(kn + ks + i) != 0.0) return std::string("nonzero coefficient on zero row");
  const Vector combo = q.stacked().transpose() * w.coefficients;
  if (combo.size() > 0 && combo.cwiseAbs().maxCoeff() > slack) return std::string("combination does not vanish");
  return std::nullopt;
}

}  // namespace mpeccq::numeric
