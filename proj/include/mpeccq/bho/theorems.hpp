#pragma once

#include <optional>
#include <string>

#include <Eigen/Cholesky>

#include "mpeccq/bho/instance.hpp"
#include "mpeccq/bho/patterns.hpp"
#include "mpeccq/cq/checkers.hpp"
#include "mpeccq/numeric/rank.hpp"

namespace mpeccq::bho {

/// Sufficient condition for MPEC-MFCQ-R: the training Gram block over
/// Lambda1 u Lambda3 is positive definite. Otherwise undecided.
inline cq::CqVerdict check_mfcq_r_theorem(const BhoInstance& I, const LambdaPsiPattern& pat, const Tolerances& tol) {
  cq::CqVerdict v;
  v.name = cq::CqName::mpec_mfcq_r;
  const IndexList S = detail::sorted_union({&pat.Lambda1, &pat.Lambda3_plus, &pat.Lambda3_c});
  if (numeric::is_positive_definite(select(I.K_BB, S, S), tol.pd_eps)) {
    v.status = cq::TriState::holds;
    v.notes.push_back("Gram block over Lambda1 u Lambda3 (" + std::to_string(S.size()) + " entries) is PD");
  } else {
    v.status = cq::TriState::undecided;
    v.notes.push_back("Gram block over Lambda1 u Lambda3 is not PD; sufficient condition unmet");
  }
  return v;
}

/// Closed-form MPEC-LICQ verdict. `branch` is 1..5 for the decisive case
/// that applied, 0 when the verdict is undecided.
struct LicqTheoremResult {
  cq::CqVerdict verdict;
  int branch = 0;
  std::optional<double> a_hat;
};

namespace detail {

// a = K(i, cols) 1 - K(i, F) K(F, F)^{-1} K(F, cols) 1, with F = Lambda3+.
inline double a_hat(const Matrix& K, Index i, const IndexList& F, const IndexList& cols) {
  const Vector ones = Vector::Ones(static_cast<Index>(cols.size()));
  const IndexList row{i};
  double val = cols.empty() ? 0.0 : (select(K, row, cols) * ones)(0);
  if (!F.empty() && !cols.empty()) {
    const Matrix KFF = select(K, F, F);
    const Vector rhs = select(K, F, cols) * ones;
    val -= (select(K, row, F) * KFF.llt().solve(rhs))(0);
  }
  return val;
}

}  // namespace detail

inline LicqTheoremResult check_licq_theorem(const BhoInstance& I, const LambdaPsiPattern& pat, const Tolerances& tol) {
  LicqTheoremResult out;
  out.verdict.name = cq::CqName::mpec_licq;
  auto& v = out.verdict;
  if (pat.flagged()) {
    v.status = cq::TriState::undecided;
    v.notes.push_back("distinct-classification assumption violated");
    v.notes.insert(v.notes.end(), pat.assumption_flags.begin(), pat.assumption_flags.end());
    return out;
  }
  const std::size_t k3 = pat.I_GH3.size(), k4 = pat.I_GH4.size();
  if (k3 + k4 > 1) {
    v.status = cq::TriState::fails;
    out.branch = 1;
    v.notes.push_back("biactive set has " + std::to_string(k3 + k4) + " entries");
    return out;
  }
  const bool pd = numeric::is_positive_definite(select(I.K_BB, pat.Lambda3_plus, pat.Lambda3_plus), tol.pd_eps);
  if (!pd) {
    v.status = cq::TriState::undecided;
    v.notes.push_back("Gram block over Lambda3+ is not PD; theorem hypotheses unmet");
    return out;
  }
  if (k3 + k4 == 0) {
    v.status = cq::TriState::holds;
    out.branch = 2;
    v.notes.push_back("strict complementarity");
    return out;
  }
  IndexList cols;
  Index i = 0;
  int branch = 0;
  if (k3 == 1) {
    i = pat.I_GH3[0];
    cols = pat.Lambda_u;
    branch = 3;
  } else {
    i = pat.I_GH4[0];
    cols = detail::sorted_union({&pat.Lambda3_c, &pat.Lambda_u});
    branch = 4;
  }
  const double a = detail::a_hat(I.K_BB, i, pat.Lambda3_plus, cols);
  out.a_hat = a;
  if (std::abs(a) > tol.activity_eps) {
    v.status = cq::TriState::holds;
    out.branch = branch;
    v.notes.push_back("single biactive training entry " + std::to_string(i) + ", a_hat=" + std::to_string(a));
  } else {
    v.status = cq::TriState::fails;
    out.branch = 5;
    v.notes.push_back("single biactive training entry " + std::to_string(i) + " with vanishing a_hat");
  }
  return out;
}

}  // namespace mpeccq::bho
