#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mpeccq/core.hpp"
#include "mpeccq/mpec_model.hpp"
#include "mpeccq/numeric/rank.hpp"
#include "mpeccq/numeric/signed_combination.hpp"
#include "mpeccq/numeric/simplex.hpp"

namespace mpeccq::cq {

enum class CqName { mpec_licq, mpec_mfcq_t, mpec_mfcq_r, nnamcq, mpec_gmfcq, mpec_acq_affine };

inline const char* cq_name(CqName c) {
  switch (c) {
    case CqName::mpec_licq: return "MPEC_LICQ";
    case CqName::mpec_mfcq_t: return "MPEC_MFCQ_T";
    case CqName::mpec_mfcq_r: return "MPEC_MFCQ_R";
    case CqName::nnamcq: return "NNAMCQ";
    case CqName::mpec_gmfcq: return "MPEC_GMFCQ";
    case CqName::mpec_acq_affine: return "MPEC_ACQ_AFFINE";
  }
  return "?";
}

enum class TriState { holds, fails, undecided };

inline const char* tri_state_name(TriState s) {
  switch (s) {
    case TriState::holds: return "holds";
    case TriState::fails: return "fails";
    case TriState::undecided: return "undecided";
  }
  return "?";
}

/// Nonzero multiplier combination; `tags[k]` names the row of coefficient k.
/// Coefficients use the same orientation as the tags (G/H rows enter as -∇G,
/// -∇H in NNAMCQ and the relaxed bundle).
struct MultiplierCertificate {
  numeric::CombinationWitness witness;
  std::vector<RowTag> tags;
};

/// Biactive partition on which a direction condition could not be met.
struct PartitionFailure {
  std::string condition;
  IndexList P, Q, R;
  double best_margin = 0.0;
};

using Certificate = std::variant<std::monostate, numeric::RankResult, MultiplierCertificate, PartitionFailure>;

struct CqVerdict {
  CqName name = CqName::mpec_licq;
  TriState status = TriState::undecided;
  Certificate certificate;
  std::vector<std::string> notes;

  bool holds() const { return status == TriState::holds; }
  bool fails() const { return status == TriState::fails; }
  bool decided() const { return status != TriState::undecided; }
};

struct ImplicationViolation {
  CqName premise;
  CqName conclusion;
  std::string description;
};

struct CqReport {
  std::vector<CqVerdict> verdicts;
  std::vector<ImplicationViolation> implication_violations;
  ActivePattern pattern;

  const CqVerdict* find(CqName n) const {
    for (const auto& v : verdicts)
      if (v.name == n) return &v;
    return nullptr;
  }
};

namespace detail {

using mpeccq::detail::merged;

// Query rows and their provenance, appended block by block.
struct TaggedQuery {
  numeric::SignedCombinationQuery query;
  std::vector<RowTag> nonneg_tags, strict_tags, zero_tags, free_tags;

  explicit TaggedQuery(Index n) : query(n) {}

  static void append(Matrix& block, std::vector<RowTag>& tags, const Matrix& grads, Family f, Index i,
                     double orientation) {
    block.conservativeResize(block.rows() + 1, Eigen::NoChange);
    block.row(block.rows() - 1) = orientation * grads.row(i);
    tags.push_back({f, i, orientation});
  }

  std::vector<RowTag> witness_tags() const {
    std::vector<RowTag> out = nonneg_tags;
    out.insert(out.end(), strict_tags.begin(), strict_tags.end());
    out.insert(out.end(), zero_tags.begin(), zero_tags.end());
    out.insert(out.end(), free_tags.begin(), free_tags.end());
    return out;
  }
};

inline TaggedQuery query_from_bundle(const GradientBundle& b, Index n) {
  TaggedQuery tq(n);
  tq.query.nonneg_rows = b.oriented_signed();
  tq.query.free_rows = b.free_rows;
  tq.nonneg_tags = b.signed_tags;
  tq.free_tags = b.free_tags;
  return tq;
}

inline CqVerdict verdict_from_query(CqName name, const TaggedQuery& tq, const Tolerances& tol) {
  CqVerdict v;
  v.name = name;
  const auto w = numeric::signed_combination_exists(tq.query, tol);
  if (w.exists) {
    v.status = TriState::fails;
    v.certificate = MultiplierCertificate{w, tq.witness_tags()};
  } else {
    v.status = TriState::holds;
  }
  return v;
}

// Mixed-radix enumeration over the biactive set. Returns false when done.
inline bool next_assignment(std::vector<int>& digits, int radix) {
  for (auto& d : digits) {
    if (++d < radix) return true;
    d = 0;
  }
  return false;
}

// Orthonormal basis (columns) of {d : eq d = 0}.
inline Matrix null_space_basis(const Matrix& eq, Index n, double rank_rel_tol) {
  if (eq.rows() == 0) return Matrix::Identity(n, n);
  Eigen::JacobiSVD<Matrix> svd(eq, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  Index rank = 0;
  const double cutoff = sv.size() > 0 ? rank_rel_tol * sv(0) * static_cast<double>(std::max(eq.rows(), n)) : 0.0;
  for (Index k = 0; k < sv.size(); ++k)
    if (sv(k) > cutoff) ++rank;
  return svd.matrixV().rightCols(n - rank);
}

// max t over directions d = N z, |z|_inf <= 1, subject to
//   le0 d <= 0, ge0 d >= 0, strict_ge d >= t, strict_le d <= -t.
// Returns +inf when no strict rows are present (the system is satisfied by d = 0).
inline double max_direction_margin(const Matrix& eq, const Matrix& le0, const Matrix& ge0, const Matrix& strict_ge,
                                   const Matrix& strict_le, Index n, const Tolerances& tol) {
  if (strict_ge.rows() == 0 && strict_le.rows() == 0) return std::numeric_limits<double>::infinity();
  const Matrix basis = null_space_basis(eq, n, tol.rank_rel_tol);
  const Index k = basis.cols();
  if (k == 0) return 0.0;
  numeric::LinearProgram lp;
  std::vector<Index> z(static_cast<std::size_t>(k));
  for (auto& v : z) v = lp.add_variable(-1.0, 1.0);
  const Index t = lp.add_variable(0.0);
  auto add_rows = [&](const Matrix& rows, numeric::Sense sense, double t_coef) {
    const Matrix proj = rows * basis;
    for (Index i = 0; i < proj.rows(); ++i) {
      std::vector<std::pair<Index, double>> terms;
      for (Index j = 0; j < k; ++j)
        if (proj(i, j) != 0.0) terms.push_back({z[static_cast<std::size_t>(j)], proj(i, j)});
      if (t_coef != 0.0) terms.push_back({t, t_coef});
      lp.add_constraint(std::move(terms), sense, 0.0);
    }
  };
  add_rows(le0, numeric::Sense::le, 0.0);
  add_rows(ge0, numeric::Sense::ge, 0.0);
  add_rows(strict_ge, numeric::Sense::ge, -1.0);  // row·d - t >= 0
  add_rows(strict_le, numeric::Sense::le, 1.0);   // row·d + t <= 0
  lp.set_objective(t, 1.0);
  lp.set_maximize(true);
  const auto sol = lp.solve();
  if (!sol.feasible()) return 0.0;
  return sol.objective;
}

inline Matrix rows_of(const Matrix& grads, const IndexList& idx) { return select_rows(grads, idx); }

}  // namespace detail

inline CqVerdict check_mpec_licq(const PointEvaluation& eval, const ActivePattern& pat, const Tolerances& tol) {
  const GradientBundle b = gradient_bundle_tnlp(eval, pat);
  const Matrix stacked = b.stacked();
  CqVerdict v;
  v.name = CqName::mpec_licq;
  auto rr = numeric::numerical_rank(stacked, tol.rank_rel_tol);
  v.status = rr.rank == stacked.rows() ? TriState::holds : TriState::fails;
  v.notes.push_back("rank " + std::to_string(rr.rank) + " of " + std::to_string(stacked.rows()) + " active rows");
  v.certificate = std::move(rr);
  return v;
}

inline CqVerdict check_mpec_mfcq_t(const PointEvaluation& eval, const ActivePattern& pat, const Tolerances& tol) {
  const auto tq = detail::query_from_bundle(gradient_bundle_tnlp(eval, pat), eval.point.size());
  return detail::verdict_from_query(CqName::mpec_mfcq_t, tq, tol);
}

inline CqVerdict check_mpec_mfcq_r(const PointEvaluation& eval, const ActivePattern& pat, const Tolerances& tol) {
  const auto tq = detail::query_from_bundle(gradient_bundle_rnlp(eval, pat), eval.point.size());
  return detail::verdict_from_query(CqName::mpec_mfcq_r, tq, tol);
}

/// Searches every biactive branch (both multipliers positive, λG = 0, or
/// λH = 0) for a nonzero abnormal multiplier.
inline CqVerdict check_nnamcq(const PointEvaluation& eval, const ActivePattern& pat, const Tolerances& tol,
                              std::size_t cap = kDefaultBiactiveCap) {
  CqVerdict v;
  v.name = CqName::nnamcq;
  const std::size_t k = pat.I_GH.size();
  if (k > cap) {
    v.notes.push_back("biactive set of size " + std::to_string(k) + " exceeds enumeration cap " +
                      std::to_string(cap));
    return v;
  }
  const Index n = eval.point.size();
  std::vector<int> branch(k, 0);
  do {
    detail::TaggedQuery tq(n);
    auto& q = tq.query;
    for (Index i : pat.I_g) tq.append(q.nonneg_rows, tq.nonneg_tags, eval.g_grads, Family::g, i, 1.0);
    for (std::size_t b = 0; b < k; ++b) {
      const Index i = pat.I_GH[b];
      if (branch[b] == 0) {
        tq.append(q.strict_pos_rows, tq.strict_tags, eval.G_grads, Family::G, i, -1.0);
        tq.append(q.strict_pos_rows, tq.strict_tags, eval.H_grads, Family::H, i, -1.0);
      } else if (branch[b] == 1) {
        tq.append(q.zero_rows, tq.zero_tags, eval.G_grads, Family::G, i, -1.0);
      } else {
        tq.append(q.zero_rows, tq.zero_tags, eval.H_grads, Family::H, i, -1.0);
      }
    }
    for (Index i = 0; i < eval.h_vals.size(); ++i)
      tq.append(q.free_rows, tq.free_tags, eval.h_grads, Family::h, i, 1.0);
    for (Index i : pat.I_G) tq.append(q.free_rows, tq.free_tags, eval.G_grads, Family::G, i, -1.0);
    for (Index i : pat.I_H) tq.append(q.free_rows, tq.free_tags, eval.H_grads, Family::H, i, -1.0);
    for (std::size_t b = 0; b < k; ++b) {
      const Index i = pat.I_GH[b];
      if (branch[b] == 1) tq.append(q.free_rows, tq.free_tags, eval.H_grads, Family::H, i, -1.0);
      if (branch[b] == 2) tq.append(q.free_rows, tq.free_tags, eval.G_grads, Family::G, i, -1.0);
    }
    const auto w = numeric::signed_combination_exists(q, tol);
    if (w.exists) {
      v.status = TriState::fails;
      v.certificate = MultiplierCertificate{w, tq.witness_tags()};
      std::string desc = "branch";
      for (std::size_t b = 0; b < k; ++b)
        desc += std::string(" ") + std::to_string(pat.I_GH[b]) + ":" +
                (branch[b] == 0 ? "both>0" : branch[b] == 1 ? "G=0" : "H=0");
      v.notes.push_back(desc);
      return v;
    }
  } while (detail::next_assignment(branch, 3));
  v.status = TriState::holds;
  return v;
}

/// Direct primal check of the generalized MFCQ: direction systems for every
/// three-way partition (P, Q, R) with R nonempty, plus linear independence and
/// a strictly feasible direction for every two-way partition (P, Q).
inline CqVerdict check_mpec_gmfcq_direct(const PointEvaluation& eval, const ActivePattern& pat,
                                         const Tolerances& tol, std::size_t cap = kDefaultBiactiveCap) {
  CqVerdict v;
  v.name = CqName::mpec_gmfcq;
  const std::size_t k = pat.I_GH.size();
  if (k > cap) {
    v.notes.push_back("biactive set of size " + std::to_string(k) + " exceeds enumeration cap " +
                      std::to_string(cap));
    return v;
  }
  const Index n = eval.point.size();
  const Matrix g_act = detail::rows_of(eval.g_grads, pat.I_g);
  const Matrix empty(0, n);

  // (i): digits 0 -> P, 1 -> Q, 2 -> R.
  std::vector<int> part(k, 0);
  do {
    IndexList P, Q, R;
    for (std::size_t b = 0; b < k; ++b) (part[b] == 0 ? P : part[b] == 1 ? Q : R).push_back(pat.I_GH[b]);
    if (R.empty()) continue;
    const Matrix eq = vstack({eval.h_grads, detail::rows_of(eval.G_grads, detail::merged(pat.I_G, Q)),
                              detail::rows_of(eval.H_grads, detail::merged(pat.I_H, P))},
                             n);
    const Matrix ge0 = vstack({detail::rows_of(eval.G_grads, R), detail::rows_of(eval.H_grads, R)}, n);
    double best = 0.0;
    bool found = false;
    for (Index r = 0; r < ge0.rows() && !found; ++r) {
      const double t = detail::max_direction_margin(eq, g_act, ge0, ge0.row(r), empty, n, tol);
      best = std::max(best, t);
      found = t >= tol.strict_margin_eps;
    }
    if (!found) {
      v.status = TriState::fails;
      v.certificate = PartitionFailure{"no direction with a strict biactive increase", P, Q, R, best};
      return v;
    }
  } while (detail::next_assignment(part, 3));

  // (ii): digits 0 -> P (H equality), 1 -> Q (G equality).
  std::vector<int> two(k, 0);
  do {
    IndexList P, Q;
    for (std::size_t b = 0; b < k; ++b) (two[b] == 0 ? P : Q).push_back(pat.I_GH[b]);
    const Matrix eq = vstack({eval.h_grads, detail::rows_of(eval.G_grads, detail::merged(pat.I_G, Q)),
                              detail::rows_of(eval.H_grads, detail::merged(pat.I_H, P))},
                             n);
    auto rr = numeric::numerical_rank(eq, tol.rank_rel_tol);
    if (rr.rank < eq.rows()) {
      v.status = TriState::fails;
      v.notes.push_back("equality gradients dependent on a two-way partition");
      v.certificate = std::move(rr);
      return v;
    }
    const double t = detail::max_direction_margin(eq, empty, empty, empty, g_act, n, tol);
    if (t < tol.strict_margin_eps) {
      v.status = TriState::fails;
      v.certificate = PartitionFailure{"no direction strictly decreasing every active g", P, Q, {}, t};
      return v;
    }
  } while (detail::next_assignment(two, 2));

  v.status = TriState::holds;
  return v;
}

/// Affine constraint data: the MPEC Abadie condition holds at every feasible
/// point. Nonlinear data is outside what this check can decide.
inline CqVerdict check_acq_affine(bool instance_is_affine) {
  CqVerdict v;
  v.name = CqName::mpec_acq_affine;
  if (instance_is_affine) {
    v.status = TriState::holds;
    v.notes.push_back("all constraint functions affine");
  } else {
    v.notes.push_back("nonlinear constraint data; tangent cone not computed");
  }
  return v;
}

/// Every decided pair that contradicts LICQ ⇒ MFCQ-T ⇒ GMFCQ ⇔ NNAMCQ ⇒ MFCQ-R.
inline std::vector<ImplicationViolation> audit_implications(const CqReport& report) {
  std::vector<ImplicationViolation> out;
  auto edge = [&](CqName a, CqName b) {
    const CqVerdict* va = report.find(a);
    const CqVerdict* vb = report.find(b);
    if (va && vb && va->holds() && vb->fails())
      out.push_back({a, b, std::string(cq_name(a)) + " holds but " + cq_name(b) + " fails"});
  };
  edge(CqName::mpec_licq, CqName::mpec_mfcq_t);
  edge(CqName::mpec_mfcq_t, CqName::mpec_gmfcq);
  edge(CqName::mpec_gmfcq, CqName::nnamcq);
  edge(CqName::nnamcq, CqName::mpec_gmfcq);
  edge(CqName::mpec_gmfcq, CqName::mpec_mfcq_r);
  edge(CqName::mpec_mfcq_t, CqName::mpec_mfcq_r);
  return out;
}

/// Runs every checker and the implication audit at a feasible point.
inline CqReport check_all(const PointEvaluation& eval, const ActivePattern& pat, const Tolerances& tol,
                          std::size_t cap = kDefaultBiactiveCap) {
  CqReport rep;
  rep.pattern = pat;
  rep.verdicts.push_back(check_mpec_licq(eval, pat, tol));
  rep.verdicts.push_back(check_mpec_mfcq_t(eval, pat, tol));
  rep.verdicts.push_back(check_mpec_mfcq_r(eval, pat, tol));
  rep.verdicts.push_back(check_nnamcq(eval, pat, tol, cap));
  rep.verdicts.push_back(check_mpec_gmfcq_direct(eval, pat, tol, cap));
  rep.verdicts.push_back(check_acq_affine(eval.affine));
  rep.implication_violations = audit_implications(rep);
  return rep;
}

}  // namespace mpeccq::cq
