#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mpeccq/bho/dataset.hpp"
#include "mpeccq/core.hpp"
#include "mpeccq/mpec_model.hpp"

namespace mpeccq::bho {

/// Column offsets of the stacked variable v = [C, zeta, z, alpha, xi].
struct VarLayout {
  Index v_count = 0, u_count = 0;  // T*m1 validation and T*m2 training entries

  Index n() const { return 2 * (v_count + u_count) + 1; }
  Index C() const { return 0; }
  Index zeta(Index i) const { return 1 + i; }
  Index z(Index i) const { return 1 + v_count + i; }
  Index alpha(Index j) const { return 1 + 2 * v_count + j; }
  Index xi(Index j) const { return 1 + 2 * v_count + u_count + j; }

  // Complementarity pair blocks, each a range of pair indices.
  Index pair1(Index i) const { return i; }                            // A B^T alpha + z  _|_ zeta
  Index pair2(Index i) const { return v_count + i; }                  // 1 - zeta         _|_ z
  Index pair3(Index j) const { return 2 * v_count + j; }              // B B^T alpha - 1 + xi _|_ alpha
  Index pair4(Index j) const { return 2 * v_count + u_count + j; }    // C - alpha        _|_ xi
};

/// The single-level MPEC of the cross-validated SVC hyperparameter problem:
/// min c^T v  s.t.  0 <= Q v  _|_  P v + a >= 0.
struct BhoInstance {
  Index T = 0, m1 = 0, m2 = 0, p = 0;
  Matrix A, B;          // block diagonal, rows y_k x_k^T
  Matrix K_AB, K_BB;    // A B^T and B B^T
  Matrix P, Q;
  Vector c, a;
  Vector val_labels, train_labels;  // labels of the rows of A and B

  Index n() const { return 2 * T * (m1 + m2) + 1; }
  VarLayout layout() const { return {T * m1, T * m2}; }

  Index fold_of_train(Index j) const { return j / m2; }
  Index fold_of_val(Index i) const { return i / m1; }

  /// Builds every derived matrix from per-fold blocks A^t (m1 x p), B^t (m2 x p).
  static BhoInstance from_blocks(const std::vector<Matrix>& A_blocks, const std::vector<Matrix>& B_blocks) {
    if (A_blocks.empty() || A_blocks.size() != B_blocks.size())
      throw StructuralError("bho instance: need matching nonempty fold block lists");
    BhoInstance I;
    I.T = static_cast<Index>(A_blocks.size());
    I.m1 = A_blocks[0].rows();
    I.m2 = B_blocks[0].rows();
    I.p = A_blocks[0].cols();
    if (I.m1 < 1 || I.m2 < 1 || I.p < 1) throw StructuralError("bho instance: empty fold block");
    for (std::size_t t = 0; t < A_blocks.size(); ++t) {
      if (A_blocks[t].rows() != I.m1 || A_blocks[t].cols() != I.p || B_blocks[t].rows() != I.m2 ||
          B_blocks[t].cols() != I.p)
        throw StructuralError("bho instance: fold " + std::to_string(t) + " block shape mismatch");
      if (!A_blocks[t].allFinite() || !B_blocks[t].allFinite())
        throw StructuralError("bho instance: non-finite block entry");
    }
    I.A = Matrix::Zero(I.T * I.m1, I.T * I.p);
    I.B = Matrix::Zero(I.T * I.m2, I.T * I.p);
    for (Index t = 0; t < I.T; ++t) {
      I.A.block(t * I.m1, t * I.p, I.m1, I.p) = A_blocks[static_cast<std::size_t>(t)];
      I.B.block(t * I.m2, t * I.p, I.m2, I.p) = B_blocks[static_cast<std::size_t>(t)];
    }
    I.val_labels = Vector::Ones(I.T * I.m1);
    I.train_labels = Vector::Ones(I.T * I.m2);
    I.finish();
    return I;
  }

  /// Recomputes K_AB, K_BB, P, Q, c, a from A and B.
  void finish() {
    K_AB = A * B.transpose();
    K_BB = B * B.transpose();
    const VarLayout L = layout();
    const Index nv = L.v_count, nu = L.u_count, N = n();
    P = Matrix::Zero(N - 1, N);
    Q = Matrix::Zero(N - 1, N);
    a = Vector::Zero(N - 1);
    c = Vector::Zero(N);
    Q.rightCols(N - 1) = Matrix::Identity(N - 1, N - 1);
    for (Index i = 0; i < nv; ++i) {
      c(L.zeta(i)) = 1.0 / static_cast<double>(nv);
      P(L.pair1(i), L.z(i)) = 1.0;
      P.block(L.pair1(i), L.alpha(0), 1, nu) = K_AB.row(i);
      P(L.pair2(i), L.zeta(i)) = -1.0;
      a(L.pair2(i)) = 1.0;
    }
    for (Index j = 0; j < nu; ++j) {
      P.block(L.pair3(j), L.alpha(0), 1, nu) = K_BB.row(j);
      P(L.pair3(j), L.xi(j)) = 1.0;
      a(L.pair3(j)) = -1.0;
      P(L.pair4(j), L.C()) = 1.0;
      P(L.pair4(j), L.alpha(j)) = -1.0;
    }
  }
};

/// Assembles the instance for a fold split: A^t rows are y_k x_k^T over fold
/// t's validation samples, B^t rows over its training samples.
inline BhoInstance build_instance(const Dataset& ds, const FoldSplit& fs) {
  ds.validate();
  std::vector<Matrix> As, Bs;
  std::vector<double> vy, ty;
  for (Index t = 0; t < fs.T; ++t) {
    const auto& vi = fs.validation_indices[static_cast<std::size_t>(t)];
    const auto& ti = fs.training_indices[static_cast<std::size_t>(t)];
    if (static_cast<Index>(vi.size()) != fs.m1 || static_cast<Index>(ti.size()) != fs.m2)
      throw StructuralError("build_instance: fold sizes disagree with split");
    Matrix At(fs.m1, ds.dim()), Bt(fs.m2, ds.dim());
    for (Index k = 0; k < fs.m1; ++k) {
      const Index s = vi[static_cast<std::size_t>(k)];
      At.row(k) = ds.labels(s) * ds.features.row(s);
      vy.push_back(ds.labels(s));
    }
    for (Index k = 0; k < fs.m2; ++k) {
      const Index s = ti[static_cast<std::size_t>(k)];
      Bt.row(k) = ds.labels(s) * ds.features.row(s);
      ty.push_back(ds.labels(s));
    }
    As.push_back(std::move(At));
    Bs.push_back(std::move(Bt));
  }
  BhoInstance I = BhoInstance::from_blocks(As, Bs);
  I.val_labels = Eigen::Map<Vector>(vy.data(), static_cast<Index>(vy.size()));
  I.train_labels = Eigen::Map<Vector>(ty.data(), static_cast<Index>(ty.size()));
  return I;
}

/// A point of the single-level problem.
struct BhoPoint {
  double C = 0.0;
  Vector zeta, z, alpha, xi;

  Vector stacked() const {
    Vector v(1 + zeta.size() + z.size() + alpha.size() + xi.size());
    v << C, zeta, z, alpha, xi;
    return v;
  }
};

/// Affine evaluation record of the instance at `pt`: no g, no h, G = P v + a, H = Q v.
inline PointEvaluation to_evaluation(const BhoInstance& I, const BhoPoint& pt) {
  const Vector v = pt.stacked();
  if (v.size() != I.n()) throw StructuralError("bho point: length does not match instance");
  PointEvaluation e;
  e.point = v;
  e.g_vals = Vector(0);
  e.h_vals = Vector(0);
  e.G_vals = I.P * v + I.a;
  e.H_vals = I.Q * v;
  e.g_grads = Matrix(0, I.n());
  e.h_grads = Matrix(0, I.n());
  e.G_grads = I.P;
  e.H_grads = I.Q;
  e.affine = true;
  return e;
}

/// c^T v, summed as 1^T zeta / (T m1) so that 0/1 indicators give the exact ratio.
inline double validation_error(const BhoInstance& I, const BhoPoint& pt) {
  return pt.zeta.sum() / static_cast<double>(I.T * I.m1);
}

// ---------------------------------------------------------------------------
// Lower-level training problem, per fold: min 1/2 a^T K a - 1^T a, 0 <= a <= C.

struct LowerLevelOptions {
  long budget = 100000;
  double tol = 1e-9;
};

class NonconvergenceError : public std::runtime_error {
 public:
  NonconvergenceError(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Natural residual ||a - clip(a - (K a - 1), 0, C)||_inf of the box QP.
inline double box_qp_residual(const Matrix& K, const Vector& alpha, double C) {
  if (alpha.size() == 0) return 0.0;
  const Vector grad = K * alpha - Vector::Ones(alpha.size());
  const Vector proj = (alpha - grad).cwiseMax(0.0).cwiseMin(C);
  return (alpha - proj).cwiseAbs().maxCoeff();
}

namespace detail {

inline double power_iteration(const Matrix& K, int iters = 200) {
  const Index m = K.rows();
  Vector x = Vector::LinSpaced(m, 1.0, 2.0);
  double lam = 0.0;
  for (int k = 0; k < iters; ++k) {
    const Vector y = K * x;
    const double ny = y.norm();
    if (ny == 0.0) return 0.0;
    lam = x.dot(y) / x.squaredNorm();
    x = y / ny;
  }
  return lam;
}

// Primal active-set refinement warm-started from `alpha` (clipped into the
// box). Each pass solves the free block with the bound entries fixed, steps
// towards that solution until a bound blocks, and releases the bound entry
// with the most violated multiplier once the free block is optimal. A
// singular free block with inconsistent right-hand side is followed along
// its null-space descent ray. Accepts the result only if its KKT residual is
// within `tol` and no worse than the input.
inline bool polish(const Matrix& K, double C, Vector& alpha, double tol) {
  const Index m = alpha.size();
  const double edge = 1e-7 * std::max(1.0, C);
  Vector x = alpha.cwiseMax(0.0).cwiseMin(C);
  std::vector<int> state(static_cast<std::size_t>(m), 0);  // -1 at 0, +1 at C, 0 free
  for (Index j = 0; j < m; ++j) {
    if (x(j) <= edge) state[static_cast<std::size_t>(j)] = -1, x(j) = 0.0;
    else if (x(j) >= C - edge) state[static_cast<std::size_t>(j)] = 1, x(j) = C;
  }
  const Vector ones = Vector::Ones(m);
  for (Index pass = 0; pass < 10 * m + 10; ++pass) {
    IndexList F;
    for (Index j = 0; j < m; ++j)
      if (state[static_cast<std::size_t>(j)] == 0) F.push_back(j);
    Vector dir = Vector::Zero(m);
    bool ray = false;
    if (!F.empty()) {
      const Vector grad = K * x - ones;
      const Matrix KFF = select(K, F, F);
      Vector gF(static_cast<Index>(F.size()));
      for (std::size_t r = 0; r < F.size(); ++r) gF(static_cast<Index>(r)) = grad(F[r]);
      const auto cod = KFF.completeOrthogonalDecomposition();
      const Vector step = cod.solve(-gF);
      const Vector miss = -gF - KFF * step;
      ray = miss.norm() > 1e-10 * std::max(1.0, gF.norm());
      const Vector& d = ray ? miss : step;
      for (std::size_t r = 0; r < F.size(); ++r) dir(F[r]) = d(static_cast<Index>(r));
    }
    if (!ray && dir.cwiseAbs().maxCoeff() <= 1e-15 * std::max(1.0, C)) {
      // Free block optimal: release the worst bound multiplier, if any.
      const Vector grad = K * x - ones;
      Index worst = -1;
      double viol = 1e-14;
      for (Index j = 0; j < m; ++j) {
        const int st = state[static_cast<std::size_t>(j)];
        const double v = st == -1 ? -grad(j) : st == 1 ? grad(j) : 0.0;
        if (v > viol) viol = v, worst = j;
      }
      if (worst < 0) break;
      state[static_cast<std::size_t>(worst)] = 0;
      continue;
    }
    double t = ray ? std::numeric_limits<double>::infinity() : 1.0;
    Index block = -1;
    for (Index j : F) {
      if (dir(j) < 0.0 && -x(j) / dir(j) < t) t = -x(j) / dir(j), block = j;
      if (dir(j) > 0.0 && (C - x(j)) / dir(j) < t) t = (C - x(j)) / dir(j), block = j;
    }
    if (!std::isfinite(t)) return false;
    x += t * dir;
    x = x.cwiseMax(0.0).cwiseMin(C);
    if (block >= 0) {
      state[static_cast<std::size_t>(block)] = dir(block) < 0.0 ? -1 : 1;
      x(block) = dir(block) < 0.0 ? 0.0 : C;
    }
  }
  if (!x.allFinite()) return false;
  if (box_qp_residual(K, x, C) > std::min(tol, box_qp_residual(K, alpha, C))) return false;
  alpha = x;
  return true;
}

}  // namespace detail

/// Projected gradient with step 1/L, L from power iteration on K. Every 50
/// iterations the iterate seeds an active-set refinement; the first result
/// with KKT residual within `tol` is returned.
inline Vector solve_box_qp(const Matrix& K, double C, const LowerLevelOptions& opt = {}) {
  if (C < 0.0 || !std::isfinite(C)) throw StructuralError("lower-level solve: C must be finite and >= 0");
  const Index m = K.rows();
  Vector alpha = Vector::Zero(m);
  if (C == 0.0 || m == 0) return alpha;
  const double L = detail::power_iteration(K) * 1.01;
  if (L <= 1e-300) return Vector::Constant(m, C);  // linear objective
  const double step = 1.0 / L;
  const Vector ones = Vector::Ones(m);
  for (long it = 1; it <= opt.budget; ++it) {
    alpha = (alpha - step * (K * alpha - ones)).cwiseMax(0.0).cwiseMin(C);
    if (it % 50 == 0) {
      Vector trial = alpha;
      if (detail::polish(K, C, trial, opt.tol)) return trial;
      if (box_qp_residual(K, alpha, C) <= opt.tol) return alpha;
    }
  }
  const double res = box_qp_residual(K, alpha, C);
  if (res <= opt.tol) return alpha;
  throw NonconvergenceError("lower-level solve: KKT residual " + std::to_string(res) + " after " +
                                std::to_string(opt.budget) + " iterations",
                            res);
}

/// Solves fold t's training QP; returns alpha^t (length m2).
inline Vector lower_level_solve(const BhoInstance& I, Index t, double C, const LowerLevelOptions& opt = {}) {
  if (t < 0 || t >= I.T) throw StructuralError("lower-level solve: fold out of range");
  const Matrix K = I.K_BB.block(t * I.m2, t * I.m2, I.m2, I.m2);
  return solve_box_qp(K, C, opt);
}

/// Solves every fold and concatenates the multipliers.
inline Vector lower_level_solve_all(const BhoInstance& I, double C, const LowerLevelOptions& opt = {}) {
  Vector alpha(I.T * I.m2);
  for (Index t = 0; t < I.T; ++t) alpha.segment(t * I.m2, I.m2) = lower_level_solve(I, t, C, opt);
  return alpha;
}

struct AssembledPoint {
  BhoPoint point;
  IndexList boundary_validation;  // |(A B^T alpha)_i| <= activity_eps
  bool distinct_classification_violated() const { return !boundary_validation.empty(); }
};

class InfeasibleConstructionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Completes (C, alpha) to a feasible point: slacks xi, z and the 0/1
/// misclassification indicators zeta.
inline AssembledPoint assemble_feasible_point(const BhoInstance& I, double C, const Vector& alpha,
                                              const Tolerances& tol) {
  if (alpha.size() != I.T * I.m2) throw StructuralError("assemble_feasible_point: alpha length mismatch");
  AssembledPoint out;
  BhoPoint& pt = out.point;
  pt.C = C;
  pt.alpha = alpha;
  const Vector r = I.K_AB * alpha;
  const Vector s = I.K_BB * alpha;
  pt.xi = (Vector::Ones(s.size()) - s).cwiseMax(0.0);
  pt.z = (-r).cwiseMax(0.0);
  pt.zeta = Vector::Zero(r.size());
  for (Index i = 0; i < r.size(); ++i) {
    if (r(i) < -tol.activity_eps) pt.zeta(i) = 1.0;
    if (std::abs(r(i)) <= tol.activity_eps) out.boundary_validation.push_back(i);
  }
  const auto rep = check_feasibility(to_evaluation(I, pt), tol);
  if (!rep.feasible)
    throw InfeasibleConstructionError("assemble_feasible_point: residual " + std::to_string(rep.max_violation) +
                                      " exceeds feas_eps");
  return out;
}

}  // namespace mpeccq::bho
