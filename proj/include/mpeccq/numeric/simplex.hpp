#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mpeccq/core.hpp"

namespace mpeccq::numeric {

enum class LpStatus { optimal, infeasible, unbounded };

struct StandardLpResult {
  LpStatus status = LpStatus::infeasible;
  Vector x;
  double objective = 0.0;
};

namespace detail {

// Dense simplex tableau for  min cᵀx  s.t.  Ax = b, x >= 0.
// Rows 0..m-1 hold B⁻¹[A | I | b]; row m holds reduced costs and -objective.
// The tableau is rebuilt from the original data every kRefactorEvery pivots
// and before any terminal verdict is accepted.
class Tableau {
 public:
  Tableau(const Matrix& a, const Vector& b, double tol)
      : m_(a.rows()), n_(a.cols()), tol_(tol), orig_(Matrix::Zero(a.rows(), a.cols() + a.rows() + 1)),
        t_(Matrix::Zero(a.rows() + 1, a.cols() + a.rows() + 1)), cost_(Vector::Zero(a.cols() + a.rows())),
        basis_(static_cast<std::size_t>(a.rows())), row_of_(static_cast<std::size_t>(a.rows())) {
    for (Index i = 0; i < m_; ++i) {
      const double sign = b(i) < 0 ? -1.0 : 1.0;
      orig_.row(i).head(n_) = sign * a.row(i);
      orig_(i, n_ + i) = 1.0;
      orig_(i, rhs()) = sign * b(i);
      basis_[static_cast<std::size_t>(i)] = n_ + i;
      row_of_[static_cast<std::size_t>(i)] = i;
    }
    t_.topRows(m_) = orig_;
  }

  Index rhs() const { return n_ + m_; }

  // Phase 1: minimise the sum of artificials. Returns false when infeasible.
  bool phase_one(double feas_tol) {
    cost_.setZero();
    cost_.tail(m_).setOnes();
    price();
    phase_one_ = true;
    const LpStatus st = iterate(n_ + m_);
    phase_one_ = false;
    if (st == LpStatus::unbounded) throw std::logic_error("simplex: phase one cannot be unbounded");
    if (-t_(m_, rhs()) > feas_tol) return false;
    drive_out_artificials();
    return true;
  }

  LpStatus phase_two(const Vector& c) {
    cost_.setZero();
    cost_.head(n_) = c;
    price();
    return iterate(n_);
  }

  Vector solution() const {
    Vector x = Vector::Zero(n_);
    for (Index i = 0; i < active_rows(); ++i) {
      const Index bj = basis_[static_cast<std::size_t>(i)];
      if (bj < n_) x(bj) = std::max(0.0, t_(i, rhs()));
    }
    return x;
  }

 private:
  Index active_rows() const { return static_cast<Index>(basis_.size()); }

  // Cost row from cost_ and the current tableau: d = c - c_Bᵀ B⁻¹[A | I].
  void price() {
    t_.row(m_).setZero();
    t_.row(m_).head(n_ + m_) = cost_.transpose();
    for (Index i = 0; i < active_rows(); ++i) {
      const double cb = cost_(basis_[static_cast<std::size_t>(i)]);
      if (cb != 0.0) t_.row(m_) -= cb * t_.row(i);
    }
    for (Index i = 0; i < active_rows(); ++i) t_(m_, basis_[static_cast<std::size_t>(i)]) = 0.0;
    for (Index j = 0; j < n_ + m_; ++j)
      if (std::abs(t_(m_, j)) < 1e-14) t_(m_, j) = 0.0;
  }

  // Rebuilds B⁻¹[A | I | b] for the current basis from the original rows.
  void refactor() {
    const Index r = active_rows();
    if (r == 0) {
      price();
      return;
    }
    Matrix B(r, r), rows(r, orig_.cols());
    for (Index i = 0; i < r; ++i) rows.row(i) = orig_.row(row_of_[static_cast<std::size_t>(i)]);
    for (Index k = 0; k < r; ++k) B.col(k) = rows.col(basis_[static_cast<std::size_t>(k)]);
    const Eigen::FullPivLU<Matrix> lu(B);
    if (!lu.isInvertible()) {
      price();
      return;
    }
    t_.topRows(r) = lu.solve(rows);
    for (Index k = 0; k < r; ++k) {
      t_.row(k) = t_.row(k).unaryExpr([](double x) { return std::abs(x) < 1e-14 ? 0.0 : x; });
      t_.col(basis_[static_cast<std::size_t>(k)]).head(r).setZero();
      t_(k, basis_[static_cast<std::size_t>(k)]) = 1.0;
      if (std::abs(t_(k, rhs())) <= tol_ && t_(k, rhs()) < 0.0) t_(k, rhs()) = 0.0;
    }
    price();
  }

  Index entering(Index allowed_cols, const std::vector<bool>& blocked) const {
    for (Index j = 0; j < allowed_cols; ++j)
      if (t_(m_, j) < -tol_ && !blocked[static_cast<std::size_t>(j)]) return j;
    return -1;
  }

  // Bland's rule: lowest-index entering column, lowest-index basic variable on ratio ties.
  Index leaving(Index enter) const {
    Index leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < active_rows(); ++i) {
      const double piv = t_(i, enter);
      if (piv <= tol_) continue;
      const double ratio = std::max(0.0, t_(i, rhs())) / piv;
      if (leave < 0) {
        leave = i;
        best = ratio;
        continue;
      }
      const double slack = 1e-12 * std::max(1.0, std::abs(best));
      if (ratio < best - slack) {
        leave = i;
        best = ratio;
      } else if (ratio <= best + slack &&
                 basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)]) {
        leave = i;
      }
    }
    return leave;
  }

  LpStatus iterate(Index allowed_cols) {
    bool fresh = false;  // tableau rebuilt since the last pivot
    // Phase one is bounded below, so a ray there is a column whose entries
    // all sit under the pivot tolerance; it is skipped until the next pivot.
    std::vector<bool> blocked(static_cast<std::size_t>(allowed_cols), false);
    for (int iter = 0; iter < kMaxIterations; ++iter) {
      if (!fresh && iter > 0 && iter % kRefactorEvery == 0) {
        refactor();
        fresh = true;
      }
      const Index enter = entering(allowed_cols, blocked);
      const Index leave = enter < 0 ? -1 : leaving(enter);
      if (enter < 0 || leave < 0) {
        // Terminal verdicts are only accepted on a rebuilt tableau.
        if (!fresh) {
          refactor();
          fresh = true;
          continue;
        }
        if (enter >= 0 && phase_one_) {
          blocked[static_cast<std::size_t>(enter)] = true;
          continue;
        }
        return enter < 0 ? LpStatus::optimal : LpStatus::unbounded;
      }
      pivot(leave, enter);
      fresh = false;
      std::fill(blocked.begin(), blocked.end(), false);
    }
    throw std::runtime_error("simplex: iteration limit exceeded");
  }

  void pivot(Index row, Index col) {
    const Index rows = active_rows();
    t_.row(row) /= t_(row, col);
    for (Index i = 0; i <= m_; ++i) {
      if (i == row || (i < m_ && i >= rows)) continue;
      const double f = t_(i, col);
      if (f != 0.0) t_.row(i) -= f * t_.row(row);
    }
    // Flush round-off so degenerate pivots stay degenerate.
    for (Index j = 0; j < t_.cols(); ++j)
      for (Index i = 0; i <= m_; ++i)
        if (std::abs(t_(i, j)) < 1e-14) t_(i, j) = 0.0;
    basis_[static_cast<std::size_t>(row)] = col;
  }

  void drive_out_artificials() {
    Index i = 0;
    while (i < active_rows()) {
      if (basis_[static_cast<std::size_t>(i)] < n_) {
        ++i;
        continue;
      }
      Index col = -1;
      double best = tol_;
      for (Index j = 0; j < n_; ++j) {
        if (std::abs(t_(i, j)) > best) {
          col = j;
          best = std::abs(t_(i, j));
        }
      }
      if (col >= 0) {
        pivot(i, col);
        ++i;
      } else {
        remove_row(i);  // redundant equality
      }
    }
    refactor();
  }

  void remove_row(Index i) {
    const Index last = active_rows() - 1;
    if (i != last) {
      t_.row(i).swap(t_.row(last));
      std::swap(basis_[static_cast<std::size_t>(i)], basis_[static_cast<std::size_t>(last)]);
      std::swap(row_of_[static_cast<std::size_t>(i)], row_of_[static_cast<std::size_t>(last)]);
    }
    t_.row(last).setZero();
    basis_.pop_back();
    row_of_.pop_back();
  }

  static constexpr int kMaxIterations = 200000;
  static constexpr int kRefactorEvery = 50;
  bool phase_one_ = false;

  Index m_;
  Index n_;
  double tol_;
  Matrix orig_;
  Matrix t_;
  Vector cost_;
  std::vector<Index> basis_;
  std::vector<Index> row_of_;  // original row behind each active row
};

}  // namespace detail

/// min cᵀx s.t. Ax = b, x >= 0 by two-phase dense simplex with Bland's rule.
inline StandardLpResult solve_standard_form(const Matrix& a, const Vector& b, const Vector& c,
                                            double tol = 1e-10) {
  if (a.rows() != b.size() || a.cols() != c.size())
    throw StructuralError("solve_standard_form: dimension mismatch");
  if (!a.allFinite() || !b.allFinite() || !c.allFinite())
    throw StructuralError("solve_standard_form: non-finite data");
  StandardLpResult out;
  if (a.cols() == 0) {
    out.x = Vector(0);
    out.status = (b.size() == 0 || b.cwiseAbs().maxCoeff() <= tol) ? LpStatus::optimal : LpStatus::infeasible;
    return out;
  }
  const double scale = std::max(1.0, b.size() > 0 ? b.cwiseAbs().maxCoeff() : 0.0);
  detail::Tableau tab(a, b, tol);
  if (!tab.phase_one(1e-9 * scale)) {
    out.status = LpStatus::infeasible;
    return out;
  }
  out.status = tab.phase_two(c);
  out.x = tab.solution();
  out.objective = c.dot(out.x);
  return out;
}

enum class Sense { le, ge, eq };

struct LpSolution {
  LpStatus status = LpStatus::infeasible;
  Vector x;  // values of the user variables
  double objective = 0.0;

  bool feasible() const { return status != LpStatus::infeasible; }
};

/// Small LP model with bounded variables and mixed-sense rows; solved by
/// conversion to standard form.
class LinearProgram {
 public:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  Index add_variable(double lower = 0.0, double upper = kInf) {
    if (lower > upper) throw StructuralError("LinearProgram: empty variable bounds");
    lower_.push_back(lower);
    upper_.push_back(upper);
    objective_.push_back(0.0);
    return static_cast<Index>(lower_.size()) - 1;
  }

  Index add_free_variable() { return add_variable(-kInf, kInf); }

  Index num_variables() const { return static_cast<Index>(lower_.size()); }

  void add_constraint(std::vector<std::pair<Index, double>> terms, Sense sense, double rhs) {
    for (const auto& [var, coef] : terms) {
      if (var < 0 || var >= num_variables()) throw StructuralError("LinearProgram: unknown variable");
      (void)coef;
    }
    rows_.push_back(Row{std::move(terms), sense, rhs});
  }

  void set_objective(Index var, double coef) { objective_.at(static_cast<std::size_t>(var)) = coef; }
  void set_maximize(bool maximize) { maximize_ = maximize; }

  LpSolution solve(double tol = 1e-10) const {
    // Map each user variable to standard-form columns: x = offset + Σ coef·col.
    struct Map {
      double offset = 0.0;
      std::vector<std::pair<Index, double>> cols;
    };
    std::vector<Map> maps(lower_.size());
    Index ncols = 0;
    std::vector<std::pair<Index, double>> bound_rows;  // (col, ub - lb) rows: col + slack = width
    for (std::size_t v = 0; v < lower_.size(); ++v) {
      const double lo = lower_[v];
      const double up = upper_[v];
      if (std::isfinite(lo)) {
        maps[v].offset = lo;
        maps[v].cols.push_back({ncols, 1.0});
        if (std::isfinite(up)) bound_rows.push_back({ncols, up - lo});
        ++ncols;
      } else if (std::isfinite(up)) {
        maps[v].offset = up;
        maps[v].cols.push_back({ncols++, -1.0});
      } else {
        maps[v].cols.push_back({ncols++, 1.0});
        maps[v].cols.push_back({ncols++, -1.0});
      }
    }
    Index slacks = static_cast<Index>(bound_rows.size());
    for (const auto& r : rows_)
      if (r.sense != Sense::eq) ++slacks;
    const Index total = ncols + slacks;
    const Index nrows = static_cast<Index>(rows_.size() + bound_rows.size());

    Matrix a = Matrix::Zero(nrows, total);
    Vector b = Vector::Zero(nrows);
    Vector c = Vector::Zero(total);
    Index slack_col = ncols;
    Index row = 0;
    for (const auto& r : rows_) {
      double rhs = r.rhs;
      for (const auto& [var, coef] : r.terms) {
        const auto& mp = maps[static_cast<std::size_t>(var)];
        rhs -= coef * mp.offset;
        for (const auto& [col, s] : mp.cols) a(row, col) += coef * s;
      }
      if (r.sense == Sense::le) a(row, slack_col++) = 1.0;
      if (r.sense == Sense::ge) a(row, slack_col++) = -1.0;
      b(row) = rhs;
      ++row;
    }
    for (const auto& [col, width] : bound_rows) {
      a(row, col) = 1.0;
      a(row, slack_col++) = 1.0;
      b(row) = width;
      ++row;
    }
    double const_term = 0.0;
    const double dir = maximize_ ? -1.0 : 1.0;
    for (std::size_t v = 0; v < lower_.size(); ++v) {
      const double cv = objective_[v];
      if (cv == 0.0) continue;
      const_term += cv * maps[v].offset;
      for (const auto& [col, s] : maps[v].cols) c(col) += dir * cv * s;
    }

    const StandardLpResult std_res = solve_standard_form(a, b, c, tol);
    LpSolution out;
    out.status = std_res.status;
    if (std_res.status == LpStatus::infeasible) return out;
    out.x = Vector::Zero(num_variables());
    for (std::size_t v = 0; v < lower_.size(); ++v) {
      double x = maps[v].offset;
      for (const auto& [col, s] : maps[v].cols) x += s * std_res.x(col);
      out.x(static_cast<Index>(v)) = x;
    }
    if (std_res.status == LpStatus::unbounded) {
      out.objective = maximize_ ? kInf : -kInf;
    } else {
      out.objective = const_term + dir * std_res.objective;
    }
    return out;
  }

 private:
  struct Row {
    std::vector<std::pair<Index, double>> terms;
    Sense sense;
    double rhs;
  };

  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<double> objective_;
  std::vector<Row> rows_;
  bool maximize_ = false;
};

/// Result of an LP feasibility query; `margin` is the optimal objective when
/// one was requested (+inf when unbounded).
struct FeasibilityCertificate {
  bool feasible = false;
  Vector x;
  std::optional<double> margin;
};

/// Decides {A x = b, x_j >= 0 for j in nonneg}, optionally maximising objᵀx.
inline FeasibilityCertificate lp_feasible(const Matrix& a, const Vector& b, const IndexList& nonneg,
                                          const std::optional<Vector>& maximize = std::nullopt,
                                          double tol = 1e-10) {
  if (a.rows() != b.size()) throw StructuralError("lp_feasible: rhs length mismatch");
  if (maximize && maximize->size() != a.cols()) throw StructuralError("lp_feasible: objective length mismatch");
  LinearProgram lp;
  std::vector<bool> is_nonneg(static_cast<std::size_t>(a.cols()), false);
  for (Index j : nonneg) {
    if (j < 0 || j >= a.cols()) throw StructuralError("lp_feasible: nonneg index out of range");
    is_nonneg[static_cast<std::size_t>(j)] = true;
  }
  for (Index j = 0; j < a.cols(); ++j)
    is_nonneg[static_cast<std::size_t>(j)] ? lp.add_variable() : lp.add_free_variable();
  for (Index i = 0; i < a.rows(); ++i) {
    std::vector<std::pair<Index, double>> terms;
    for (Index j = 0; j < a.cols(); ++j)
      if (a(i, j) != 0.0) terms.push_back({j, a(i, j)});
    lp.add_constraint(std::move(terms), Sense::eq, b(i));
  }
  if (maximize) {
    lp.set_maximize(true);
    for (Index j = 0; j < a.cols(); ++j) lp.set_objective(j, (*maximize)(j));
  }
  const LpSolution sol = lp.solve(tol);
  FeasibilityCertificate cert;
  cert.feasible = sol.feasible();
  if (cert.feasible) {
    cert.x = sol.x;
    if (maximize) cert.margin = sol.objective;
  }
  return cert;
}

}  // namespace mpeccq::numeric
