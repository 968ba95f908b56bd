#pragma once

#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mpeccq/bho/instance.hpp"
#include "mpeccq/bho/patterns.hpp"
#include "mpeccq/bho/theorems.hpp"
#include "mpeccq/core.hpp"
#include "mpeccq/cq/checkers.hpp"
#include "mpeccq/io/json.hpp"
#include "mpeccq/mpec_model.hpp"
#include "mpeccq/numeric/rank.hpp"
#include "mpeccq/numeric/signed_combination.hpp"
#include "mpeccq/stationarity.hpp"

namespace mpeccq::report {

struct CheckOptions {
  Tolerances tol;
  std::size_t cap = kDefaultBiactiveCap;
  std::optional<Vector> grad_f;  // BHO inputs default to the instance objective
  bool timing = false;           // timing makes reports run-dependent; off by default
};

/// One cross-check between two independently computed quantities.
struct AgreementRecord {
  std::string claim;
  std::string expected;
  std::string observed;
  bool agrees = true;
};

/// BHO-specific pieces of an analysis.
struct BhoAnalysis {
  bho::LambdaPsiPattern lambda_psi;
  bho::BlockIndexSets blocks;
  std::vector<std::string> relation_mismatches;
  bho::GammaMatrix gamma;
  std::optional<std::string> gamma_mismatch;
  Index gamma_rank = 0;
  bho::LicqTheoremResult licq_theorem;
  cq::CqVerdict mfcq_r_theorem;
  double validation_error = 0.0;
  double misclassified_fraction = 0.0;
};

struct AnalysisReport {
  std::string kind;  // "evaluation" or "bho"
  std::string instance_digest, point_digest;
  FeasibilityReport feasibility;
  std::optional<ActivePattern> pattern;
  std::optional<cq::CqReport> cq;
  std::optional<stationarity::StationarityVerdict> stationarity;
  std::optional<BhoAnalysis> bho;
  std::vector<AgreementRecord> agreement;
  std::optional<double> timing_ms;

  std::size_t mismatches() const {
    std::size_t k = 0;
    for (const auto& a : agreement) k += a.agrees ? 0 : 1;
    return k;
  }
  bool ok() const {
    return feasibility.feasible && cq && cq->implication_violations.empty() && mismatches() == 0;
  }
};

namespace detail {

inline const cq::CqVerdict& verdict(const cq::CqReport& r, cq::CqName n) {
  for (const auto& v : r.verdicts)
    if (v.name == n) return v;
  throw std::logic_error("verdict missing from report");
}

inline std::string status(const cq::CqVerdict& v) { return cq::tri_state_name(v.status); }

inline void agree(std::vector<AgreementRecord>& out, std::string claim, std::string expected, std::string observed) {
  const bool ok = expected == observed;
  out.push_back({std::move(claim), std::move(expected), std::move(observed), ok});
}

/// Rechecks a multiplier certificate from the raw gradients: unit 1-norm,
/// vanishing combination, and the sign rules of the CQ that produced it.
inline std::optional<std::string> verify_certificate(const PointEvaluation& eval, const ActivePattern& pat,
                                                     const cq::CqVerdict& v, double slack) {
  const auto* mc = std::get_if<cq::MultiplierCertificate>(&v.certificate);
  if (!mc) return std::string("no multiplier certificate");
  const Vector& c = mc->witness.coefficients;
  if (static_cast<std::size_t>(c.size()) != mc->tags.size()) return std::string("coefficient/tag count mismatch");
  if (std::abs(c.lpNorm<1>() - 1.0) > 1e-9) return std::string("coefficients not normalised");
  const Index n = eval.dims().n;
  Vector combo = Vector::Zero(n);
  std::map<std::pair<int, Index>, double> coef;
  for (std::size_t k = 0; k < mc->tags.size(); ++k) {
    const auto& t = mc->tags[k];
    const Matrix& src = t.family == Family::g   ? eval.g_grads
                        : t.family == Family::h ? eval.h_grads
                        : t.family == Family::G ? eval.G_grads
                                                : eval.H_grads;
    combo += c(static_cast<Index>(k)) * t.orientation * src.row(t.index).transpose();
    coef[{static_cast<int>(t.family), t.index}] += c(static_cast<Index>(k));
    if (t.family == Family::g && c(static_cast<Index>(k)) < -slack) return std::string("negative g multiplier");
  }
  if (n > 0 && combo.cwiseAbs().maxCoeff() > slack) return std::string("combination does not vanish");
  auto get = [&](Family f, Index i) {
    const auto it = coef.find({static_cast<int>(f), i});
    return it == coef.end() ? 0.0 : it->second;
  };
  for (Index i : pat.I_GH) {
    const double g = get(Family::G, i), h = get(Family::H, i);
    if (v.name == cq::CqName::mpec_mfcq_r && (g < -slack || h < -slack))
      return std::string("negative biactive multiplier");
    if (v.name == cq::CqName::nnamcq && !((g > slack && h > slack) || std::abs(g) <= slack || std::abs(h) <= slack))
      return std::string("biactive multipliers violate the branch rule");
  }
  return std::nullopt;
}

// Lattice-independent cross-checks valid for every evaluation record.
inline void generic_agreements(const PointEvaluation& eval, const ActivePattern& pat, const cq::CqReport& rep,
                               const std::optional<stationarity::StationarityVerdict>& st, const Vector* grad_f,
                               const CheckOptions& opt, std::vector<AgreementRecord>& out) {
  using cq::CqName;
  const auto& nn = verdict(rep, CqName::nnamcq);
  const auto& gm = verdict(rep, CqName::mpec_gmfcq);
  if (nn.decided() && gm.decided()) agree(out, "NNAMCQ equals direct GMFCQ", status(nn), status(gm));
  if (pat.I_GH.empty())
    agree(out, "MFCQ-T equals MFCQ-R under strict complementarity", status(verdict(rep, CqName::mpec_mfcq_t)),
          status(verdict(rep, CqName::mpec_mfcq_r)));
  if (eval.dims().m == 0)
    agree(out, "MFCQ-T equals LICQ without inequalities", status(verdict(rep, CqName::mpec_licq)),
          status(verdict(rep, CqName::mpec_mfcq_t)));
  for (const auto& v : rep.verdicts) {
    if (!v.fails() || !std::holds_alternative<cq::MultiplierCertificate>(v.certificate)) continue;
    const auto problem = verify_certificate(eval, pat, v, 1e-7);
    agree(out, std::string(cq::cq_name(v.name)) + " witness verified", "valid", problem ? *problem : "valid");
  }
  if (st && grad_f) {
    if (st->witness)
      agree(out, "stationarity witness certifies its class", "true",
            stationarity::satisfies_class(st->strongest_class, *st->witness, eval, pat, *grad_f, 1e-6) ? "true"
                                                                                                        : "false");
    agree(out, "strong stationarity equals NLP KKT", "true",
          stationarity::verify_kkt_equivalence(eval, pat, *grad_f, opt.tol) ? "true" : "false");
  }
}

}  // namespace detail

/// Full analysis of a pointwise evaluation record.
inline AnalysisReport analyze_evaluation(const PointEvaluation& eval, const CheckOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  opt.tol.validate();
  AnalysisReport r;
  r.kind = "evaluation";
  r.instance_digest = io::digest(eval);
  r.point_digest = io::point_digest(eval);
  r.feasibility = check_feasibility(eval, opt.tol);
  if (r.feasibility.feasible) {
    const ActivePattern pat = classify_active(eval, opt.tol);
    r.pattern = pat;
    r.cq = cq::check_all(eval, pat, opt.tol, opt.cap);
    if (opt.grad_f) {
      if (opt.grad_f->size() != eval.dims().n) throw StructuralError("objective gradient length mismatch");
      r.stationarity = stationarity::classify_stationarity(eval, pat, *opt.grad_f, opt.tol, opt.cap);
    }
    detail::generic_agreements(eval, pat, *r.cq, r.stationarity, opt.grad_f ? &*opt.grad_f : nullptr, opt,
                               r.agreement);
  }
  if (opt.timing)
    r.timing_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

/// Evaluation-record analysis plus the structured index sets, Gamma and the
/// closed-form theorems, each cross-checked against the generic machinery.
inline AnalysisReport analyze_bho(const bho::BhoInstance& I, const bho::BhoPoint& pt, const CheckOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  const PointEvaluation eval = to_evaluation(I, pt);
  CheckOptions o = opt;
  if (!o.grad_f) o.grad_f = I.c;
  o.timing = false;
  AnalysisReport r = analyze_evaluation(eval, o);
  r.kind = "bho";
  r.instance_digest = io::digest(I);
  r.point_digest = io::digest(pt);
  if (!r.feasibility.feasible) return r;

  BhoAnalysis b;
  b.lambda_psi = bho::classify_lambda_psi(I, pt, opt.tol);
  b.blocks = bho::block_index_sets(I, pt, opt.tol);
  b.relation_mismatches = bho::check_index_relations(b.blocks, b.lambda_psi);
  b.gamma = bho::assemble_gamma(I, b.blocks);
  b.gamma_mismatch = bho::compare_gamma_to_bundle(b.gamma, gradient_bundle_tnlp(eval, *r.pattern));
  b.gamma_rank = numeric::numerical_rank(b.gamma.rows, opt.tol.rank_rel_tol).rank;
  b.licq_theorem = bho::check_licq_theorem(I, b.lambda_psi, opt.tol);
  b.mfcq_r_theorem = bho::check_mfcq_r_theorem(I, b.lambda_psi, opt.tol);
  b.validation_error = bho::validation_error(I, pt);
  const Vector margins = I.K_AB * pt.alpha;
  Index wrong = 0;
  for (Index i = 0; i < margins.size(); ++i) wrong += margins(i) < 0.0 ? 1 : 0;
  b.misclassified_fraction = static_cast<double>(wrong) / static_cast<double>(margins.size());

  auto& A = r.agreement;
  using detail::agree;
  agree(A, "Gamma matches the active gradient bundle", "match", b.gamma_mismatch ? *b.gamma_mismatch : "match");
  agree(A, "Gamma row count equals n-1+|I_GH|", std::to_string(I.n() - 1 + static_cast<Index>(r.pattern->I_GH.size())),
        std::to_string(b.gamma.rows.rows()));
  agree(A, "Gamma row count equals |I_G|+|I_H|+2|I_GH| from block sets",
        std::to_string(b.blocks.total_G() + b.blocks.total_H() + 2 * b.blocks.total_GH()),
        std::to_string(b.gamma.rows.rows()));
  if (b.licq_theorem.verdict.decided()) {
    const bool full = b.gamma_rank == b.gamma.rows.rows();
    agree(A, "closed-form LICQ equals rank test on Gamma", detail::status(b.licq_theorem.verdict),
          full ? "holds" : "fails");
    agree(A, "closed-form LICQ equals generic LICQ", detail::status(b.licq_theorem.verdict),
          detail::status(detail::verdict(*r.cq, cq::CqName::mpec_licq)));
  }
  if (b.mfcq_r_theorem.holds())
    agree(A, "PD Gram block implies generic MFCQ-R", "holds",
          detail::status(detail::verdict(*r.cq, cq::CqName::mpec_mfcq_r)));
  if (!b.lambda_psi.flagged()) {
    agree(A, "block index sets match Lambda/Psi relations", "none",
          b.relation_mismatches.empty() ? "none" : b.relation_mismatches.front());
    agree(A, "objective equals misclassified fraction", "equal",
          b.misclassified_fraction == b.validation_error ? "equal"
                                                          : std::to_string(b.validation_error) + " vs " +
                                                                std::to_string(b.misclassified_fraction));
  }
  r.bho = std::move(b);
  if (opt.timing)
    r.timing_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline io::json to_json(const AgreementRecord& a) {
  return io::json{{"claim", a.claim}, {"expected", a.expected}, {"observed", a.observed}, {"agrees", a.agrees}};
}

inline io::json to_json(const BhoAnalysis& b) {
  io::json mfcqr = io::to_json(b.mfcq_r_theorem);
  return io::json{{"lambda_psi", io::to_json(b.lambda_psi)},
                  {"relation_mismatches", b.relation_mismatches},
                  {"gamma", io::json{{"rows", b.gamma.rows.rows()}, {"cols", b.gamma.rows.cols()}, {"rank", b.gamma_rank}}},
                  {"licq_theorem", io::to_json(b.licq_theorem)},
                  {"mfcq_r_theorem", mfcqr},
                  {"validation_error", b.validation_error}};
}

inline io::json to_json(const AnalysisReport& r) {
  io::json j{{"kind", r.kind},
             {"instance_digest", r.instance_digest},
             {"point_digest", r.point_digest},
             {"feasibility", io::to_json(r.feasibility)},
             {"ok", r.ok()}};
  if (r.pattern) j["pattern"] = io::to_json(*r.pattern);
  if (r.cq) j["cq"] = io::to_json(*r.cq);
  if (r.stationarity) j["stationarity"] = io::to_json(*r.stationarity);
  if (r.bho) j["bho"] = to_json(*r.bho);
  io::json recs = io::json::array();
  for (const auto& a : r.agreement) recs.push_back(to_json(a));
  j["agreement"] = io::json{{"records", recs}, {"mismatches", r.mismatches()}};
  if (r.timing_ms) j["timing_ms"] = *r.timing_ms;
  return j;
}

/// Input document for `check`: an evaluation record, or an object with an
/// "instance" and either a "point" or a "C" from which a point is generated.
inline AnalysisReport run_check(const io::json& doc, const CheckOptions& opt) {
  if (doc.is_object() && doc.contains("instance")) {
    const bho::BhoInstance I = io::instance_from_json(doc["instance"]);
    bho::BhoPoint pt;
    if (doc.contains("point")) {
      pt = io::point_from_json(doc["point"], I);
    } else {
      const double C = io::as_double(io::require(doc, "C"), "C");
      pt = bho::assemble_feasible_point(I, C, bho::lower_level_solve_all(I, C), opt.tol).point;
    }
    return analyze_bho(I, pt, opt);
  }
  return analyze_evaluation(io::evaluation_from_json(doc), opt);
}

}  // namespace mpeccq::report
