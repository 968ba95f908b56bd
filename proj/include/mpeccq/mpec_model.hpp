#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mpeccq/core.hpp"

namespace mpeccq {

/// Problem sizes: n variables, m inequalities g <= 0, p equalities h = 0,
/// l complementarity pairs 0 <= G ⊥ H >= 0.
struct MpecDimensions {
  Index n = 0;
  Index m = 0;
  Index p = 0;
  Index l = 0;

  friend bool operator==(const MpecDimensions&, const MpecDimensions&) = default;
};

/// Constraint values and gradient rows at one candidate point.
struct PointEvaluation {
  Vector point;
  Vector g_vals, h_vals, G_vals, H_vals;
  Matrix g_grads, h_grads, G_grads, H_grads;  // row i = gradient of constraint i
  bool affine = false;                        // all constraint functions affine

  MpecDimensions dims() const { return {point.size(), g_vals.size(), h_vals.size(), G_vals.size()}; }

  /// Throws StructuralError on any shape or finiteness violation.
  void validate() const {
    const auto d = dims();
    if (d.n < 1) throw StructuralError("evaluation: n must be >= 1");
    auto check = [&](const Matrix& grads, Index rows, const char* name) {
      if (grads.rows() != rows || grads.cols() != d.n)
        throw StructuralError(std::string("evaluation: ") + name + " has shape " + std::to_string(grads.rows()) +
                              "x" + std::to_string(grads.cols()) + ", expected " + std::to_string(rows) + "x" +
                              std::to_string(d.n));
      if (!grads.allFinite()) throw StructuralError(std::string("evaluation: non-finite entry in ") + name);
    };
    if (H_vals.size() != d.l) throw StructuralError("evaluation: G_vals and H_vals differ in length");
    check(g_grads, d.m, "g_grads");
    check(h_grads, d.p, "h_grads");
    check(G_grads, d.l, "G_grads");
    check(H_grads, d.l, "H_grads");
    if (!point.allFinite() || !g_vals.allFinite() || !h_vals.allFinite() || !G_vals.allFinite() ||
        !H_vals.allFinite())
      throw StructuralError("evaluation: non-finite value");
  }
};

/// Index sets of active constraints at a feasible point (0-based).
struct ActivePattern {
  IndexList I_g, I_G, I_H, I_GH;

  friend bool operator==(const ActivePattern&, const ActivePattern&) = default;
};

enum class Family { g, h, G, H };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::g: return "g";
    case Family::h: return "h";
    case Family::G: return "G";
    case Family::H: return "H";
  }
  return "?";
}

struct Violation {
  std::string family;  // "g", "h", "G", "H" or "GH" (complementarity product)
  Index index = 0;
  double residual = 0.0;
};

struct FeasibilityReport {
  bool feasible = true;
  double max_violation = 0.0;
  std::vector<Violation> violating_constraints;
};

inline FeasibilityReport check_feasibility(const PointEvaluation& eval, const Tolerances& tol) {
  eval.validate();
  FeasibilityReport rep;
  auto record = [&](const char* fam, Index i, double r) {
    rep.max_violation = std::max(rep.max_violation, r);
    if (r > tol.feas_eps) rep.violating_constraints.push_back({fam, i, r});
  };
  for (Index i = 0; i < eval.g_vals.size(); ++i) record("g", i, std::max(eval.g_vals(i), 0.0));
  for (Index i = 0; i < eval.h_vals.size(); ++i) record("h", i, std::abs(eval.h_vals(i)));
  for (Index i = 0; i < eval.G_vals.size(); ++i) {
    record("G", i, std::max(-eval.G_vals(i), 0.0));
    record("H", i, std::max(-eval.H_vals(i), 0.0));
    record("GH", i, std::abs(eval.G_vals(i) * eval.H_vals(i)));
  }
  rep.feasible = rep.max_violation <= tol.feas_eps;
  return rep;
}

/// Splits constraints into active sets using the absolute activity threshold.
/// Throws ClassificationError when a pair has both sides above the threshold.
inline ActivePattern classify_active(const PointEvaluation& eval, const Tolerances& tol) {
  eval.validate();
  const double eps = tol.activity_eps;
  ActivePattern pat;
  for (Index i = 0; i < eval.g_vals.size(); ++i)
    if (std::abs(eval.g_vals(i)) <= eps) pat.I_g.push_back(i);
  for (Index i = 0; i < eval.G_vals.size(); ++i) {
    const bool g0 = std::abs(eval.G_vals(i)) <= eps;
    const bool h0 = std::abs(eval.H_vals(i)) <= eps;
    if (g0 && h0) {
      pat.I_GH.push_back(i);
    } else if (g0 && eval.H_vals(i) > eps) {
      pat.I_G.push_back(i);
    } else if (h0 && eval.G_vals(i) > eps) {
      pat.I_H.push_back(i);
    } else {
      throw ClassificationError("pair " + std::to_string(i) + " has G=" + std::to_string(eval.G_vals(i)) +
                                ", H=" + std::to_string(eval.H_vals(i)) +
                                ": not complementary under the activity threshold");
    }
  }
  return pat;
}

/// Provenance of one gradient row. `orientation` is the sign under which the
/// row enters a sign-constrained combination: constraints G >= 0, H >= 0 are
/// written as -G <= 0, -H <= 0 there.
struct RowTag {
  Family family = Family::g;
  Index index = 0;
  double orientation = 1.0;

  friend bool operator==(const RowTag&, const RowTag&) = default;
};

/// Raw gradient rows split into sign-constrained and free groups.
struct GradientBundle {
  Matrix signed_rows;
  Matrix free_rows;
  std::vector<RowTag> signed_tags;
  std::vector<RowTag> free_tags;

  Matrix oriented_signed() const {
    Matrix out = signed_rows;
    for (Index i = 0; i < out.rows(); ++i) out.row(i) *= signed_tags[static_cast<std::size_t>(i)].orientation;
    return out;
  }
  Matrix stacked() const { return vstack({signed_rows, free_rows}, signed_rows.cols()); }
};

namespace detail {

struct BundleBuilder {
  const PointEvaluation& eval;
  std::vector<Vector> signed_rows, free_rows;
  std::vector<RowTag> signed_tags, free_tags;

  const Matrix& grads(Family f) const {
    switch (f) {
      case Family::g: return eval.g_grads;
      case Family::h: return eval.h_grads;
      case Family::G: return eval.G_grads;
      case Family::H: return eval.H_grads;
    }
    return eval.g_grads;
  }
  void add(bool is_signed, Family f, const IndexList& idx, double orientation = 1.0) {
    for (Index i : idx) {
      (is_signed ? signed_rows : free_rows).push_back(grads(f).row(i).transpose());
      (is_signed ? signed_tags : free_tags).push_back({f, i, orientation});
    }
  }
  GradientBundle finish() const {
    const Index n = eval.point.size();
    auto to_matrix = [n](const std::vector<Vector>& rows) {
      Matrix m(static_cast<Index>(rows.size()), n);
      for (std::size_t k = 0; k < rows.size(); ++k) m.row(static_cast<Index>(k)) = rows[k].transpose();
      return m;
    };
    return {to_matrix(signed_rows), to_matrix(free_rows), signed_tags, free_tags};
  }
};

inline IndexList merged(IndexList a, const IndexList& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  return a;
}

inline IndexList iota(Index k) {
  IndexList out(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = i;
  return out;
}

}  // namespace detail

/// Active gradients of the tightened NLP: g rows sign-constrained, every
/// active equality-type row free.
inline GradientBundle gradient_bundle_tnlp(const PointEvaluation& eval, const ActivePattern& pat) {
  detail::BundleBuilder b{eval, {}, {}, {}, {}};
  b.add(true, Family::g, pat.I_g);
  b.add(false, Family::h, detail::iota(eval.h_vals.size()));
  b.add(false, Family::G, detail::merged(pat.I_G, pat.I_GH));
  b.add(false, Family::H, detail::merged(pat.I_H, pat.I_GH));
  return b.finish();
}

/// Active gradients of the relaxed NLP: biactive G/H rows join the
/// sign-constrained group (oriented as -G <= 0, -H <= 0).
inline GradientBundle gradient_bundle_rnlp(const PointEvaluation& eval, const ActivePattern& pat) {
  detail::BundleBuilder b{eval, {}, {}, {}, {}};
  b.add(true, Family::g, pat.I_g);
  b.add(true, Family::G, pat.I_GH, -1.0);
  b.add(true, Family::H, pat.I_GH, -1.0);
  b.add(false, Family::h, detail::iota(eval.h_vals.size()));
  b.add(false, Family::G, pat.I_G);
  b.add(false, Family::H, pat.I_H);
  return b.finish();
}

}  // namespace mpeccq
