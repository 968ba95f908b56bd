#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "mpeccq/bho/generator.hpp"
#include "mpeccq/bho/instance.hpp"
#include "mpeccq/bho/patterns.hpp"
#include "mpeccq/bho/theorems.hpp"
#include "mpeccq/core.hpp"
#include "mpeccq/io/json.hpp"
#include "mpeccq/mpec_model.hpp"
#include "mpeccq/report/analysis.hpp"
#include "mpeccq/stationarity.hpp"

namespace mpeccq::report {

/// An affine evaluation record with an objective gradient.
struct AffineSample {
  PointEvaluation eval;
  Vector grad_f;
};

/// A generated BHO point and how it was obtained.
struct BhoSample {
  bho::BhoInstance instance;
  bho::BhoPoint point;
  std::string recipe;  // "random", "forced-N", "duplicate"
};

struct FuzzConfig {
  std::size_t n = 200;
  std::uint64_t seed = 42;
  Tolerances tol;
  std::size_t cap = kDefaultBiactiveCap;
  unsigned threads = 1;
  std::size_t affine_per_iteration = 3;
  std::size_t forcing_attempts = 80;
  // Called in iteration order after all workers finish.
  std::function<void(const AffineSample&, const AnalysisReport&)> on_affine;
  std::function<void(const BhoSample&, const AnalysisReport&)> on_bho;
};

struct FuzzSummary {
  std::size_t iterations = 0, affine_points = 0, bho_points = 0, forced_points = 0, degenerate_points = 0;
  std::size_t lattice_checked = 0, lattice_violations = 0;
  std::size_t strict_comp_checked = 0, strict_comp_mismatches = 0;
  std::size_t mfcqt_licq_checked = 0, mfcqt_licq_mismatches = 0;
  std::array<std::size_t, 6> licq_branch_hits{};  // [0] = undecided
  std::size_t licq_decisive = 0, licq_mismatches = 0;
  std::size_t gamma_checked = 0, gamma_mismatches = 0;
  std::size_t mfcqr_pd = 0, mfcqr_undecided = 0, mfcqr_counterexamples = 0;
  std::size_t index_checked = 0, index_mismatches = 0, flagged_points = 0;
  std::size_t nnamcq_gmfcq_checked = 0, nnamcq_gmfcq_mismatches = 0;
  std::size_t stationarity_checked = 0, monotonicity_violations = 0;
  std::array<std::size_t, 5> stationarity_classes{};
  std::size_t kkt_checked = 0, kkt_mismatches = 0;
  std::size_t witness_checked = 0, witness_failures = 0;
  std::size_t objective_checked = 0, objective_mismatches = 0;
  std::size_t feasibility_failures = 0;
  std::vector<std::string> failures;

  bool ok() const { return failures.empty(); }
};

namespace detail {

inline Matrix random_int_rows(std::mt19937_64& rng, Index rows, Index cols) {
  std::uniform_int_distribution<int> e(-2, 2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = e(rng);
  // Degeneracies: copied, negated and zero rows.
  for (Index i = 1; i < rows; ++i) {
    const double x = u(rng);
    std::uniform_int_distribution<Index> pick(0, i - 1);
    if (x < 0.2) m.row(i) = m.row(pick(rng));
    else if (x < 0.3) m.row(i) = -m.row(pick(rng));
    else if (x < 0.35) m.row(i).setZero();
  }
  return m;
}

/// Feasible affine record with integer gradients and a gradient of f built
/// from random multipliers, so that every stationarity class occurs.
inline AffineSample random_affine_sample(std::mt19937_64& rng) {
  std::uniform_int_distribution<Index> dn(1, 5), dm(0, 3), dp(0, 2), dl(1, 3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> mult(-2, 2);
  const Index n = dn(rng), m = dm(rng), p = dp(rng), l = dl(rng);
  AffineSample s;
  auto& e = s.eval;
  e.point = Vector::Zero(n);
  e.affine = true;
  // One stacked draw so that degeneracies can cross constraint families.
  const Matrix all = random_int_rows(rng, m + p + 2 * l, n);
  e.g_grads = all.topRows(m);
  e.h_grads = all.middleRows(m, p);
  e.G_grads = all.middleRows(m + p, l);
  e.H_grads = all.bottomRows(l);
  e.g_vals = Vector::Zero(m);
  e.h_vals = Vector::Zero(p);
  e.G_vals = Vector::Zero(l);
  e.H_vals = Vector::Zero(l);
  for (Index i = 0; i < m; ++i)
    if (u(rng) < 0.3) e.g_vals(i) = -1.0;
  for (Index i = 0; i < l; ++i) {
    const double x = u(rng);
    if (x < 0.3) e.H_vals(i) = 1.0;
    else if (x < 0.6) e.G_vals(i) = 1.0;
  }
  Vector gf = Vector::Zero(n);
  for (Index i = 0; i < m; ++i)
    if (e.g_vals(i) == 0.0) gf -= std::abs(mult(rng)) * e.g_grads.row(i).transpose();
  for (Index i = 0; i < p; ++i) gf -= mult(rng) * e.h_grads.row(i).transpose();
  for (Index i = 0; i < l; ++i) {
    double g = mult(rng), h = mult(rng);
    if (e.H_vals(i) > 0.0) h = 0.0;
    if (e.G_vals(i) > 0.0) g = 0.0;
    gf += g * e.G_grads.row(i).transpose() + h * e.H_grads.row(i).transpose();
  }
  if (u(rng) < 0.15)
    for (Index j = 0; j < n; ++j) gf(j) += mult(rng);
  s.grad_f = gf;
  return s;
}

inline std::optional<BhoSample> make_sample(bho::GeneratedPoint g, const Tolerances& tol) {
  try {
    auto ap = bho::assemble_feasible_point(g.instance, g.C, g.alpha, tol);
    return BhoSample{std::move(g.instance), std::move(ap.point), std::move(g.recipe)};
  } catch (const bho::InfeasibleConstructionError&) {
    return std::nullopt;
  }
}

inline std::optional<bho::GeneratedPoint> solved(bho::BhoInstance I, double C, std::string recipe) {
  try {
    Vector alpha = bho::lower_level_solve_all(I, C);
    return bho::GeneratedPoint{std::move(I), C, std::move(alpha), std::move(recipe)};
  } catch (const bho::NonconvergenceError&) {
    return std::nullopt;
  }
}

// Tries to produce a point on which the closed-form LICQ verdict lands in
// `target` (1, 3, 4 or 5). Falls back to the last feasible attempt.
inline std::optional<BhoSample> forced_sample(std::mt19937_64& rng, int target, const Tolerances& tol,
                                              std::size_t attempts) {
  std::optional<BhoSample> last;
  for (std::size_t a = 0; a < attempts; ++a) {
    const auto shape = bho::random_shape(rng);
    const bool planted = target == 5;
    auto g = solved(bho::random_instance(rng, shape, planted),
                    planted ? 1e6 : bho::random_C(rng, target == 3 ? -1.5 : -1.0, 1.0),
                    "forced-" + std::to_string(target));
    if (!g) continue;
    if (planted) {
      if (g->alpha.maxCoeff() >= 0.5 * g->C) continue;
      g->C = 2.0 * g->alpha.maxCoeff() + 1.0;  // every alpha stays strictly inside the box
    }
    bool ok = false;
    switch (target) {
      case 1: ok = bho::force_lower_biactive(*g, 2, rng); break;
      case 3:
      case 5: ok = bho::force_lower_biactive(*g, 1, rng); break;
      default: ok = bho::force_upper_biactive(*g, rng); break;
    }
    if (!ok) continue;
    auto s = make_sample(std::move(*g), tol);
    if (!s) continue;
    try {
      const auto pat = bho::classify_lambda_psi(s->instance, s->point, tol);
      const auto th = bho::check_licq_theorem(s->instance, pat, tol);
      last = std::move(s);
      if (th.branch == target) return last;
    } catch (const ClassificationError&) {
      continue;
    }
  }
  return last;
}

struct IterationOutput {
  std::uint64_t seed = 0;
  std::vector<AffineSample> affine;
  std::vector<BhoSample> bho;
  std::vector<AnalysisReport> affine_reports, bho_reports;
  std::vector<std::string> errors;
};

inline IterationOutput run_iteration(std::uint64_t seed, const FuzzConfig& cfg) {
  IterationOutput out;
  out.seed = seed;
  std::mt19937_64 rng(seed);
  CheckOptions opt;
  opt.tol = cfg.tol;
  opt.cap = cfg.cap;
  try {
    for (std::size_t k = 0; k < cfg.affine_per_iteration; ++k) out.affine.push_back(random_affine_sample(rng));

    if (auto g = solved(bho::random_instance(rng, bho::random_shape(rng), false), bho::random_C(rng), "random"))
      if (auto s = make_sample(std::move(*g), cfg.tol)) out.bho.push_back(std::move(*s));

    static constexpr int kTargets[4] = {1, 3, 4, 5};
    if (auto s = forced_sample(rng, kTargets[seed % 4], cfg.tol, cfg.forcing_attempts)) out.bho.push_back(std::move(*s));

    if (seed % 5 == 0) {
      auto shape = bho::random_shape(rng);
      shape.m2 = std::max<Index>(shape.m2, 3);
      auto I = bho::random_instance(rng, shape, false);
      bho::duplicate_training_row(I, rng);
      if (auto g = solved(std::move(I), bho::random_C(rng), "duplicate"))
        if (auto s = make_sample(std::move(*g), cfg.tol)) out.bho.push_back(std::move(*s));
    }

    for (const auto& a : out.affine) {
      CheckOptions o = opt;
      o.grad_f = a.grad_f;
      out.affine_reports.push_back(analyze_evaluation(a.eval, o));
    }
    for (const auto& b : out.bho) out.bho_reports.push_back(analyze_bho(b.instance, b.point, opt));
  } catch (const std::exception& e) {
    out.errors.push_back(e.what());
  }
  return out;
}

inline bool same_status(const cq::CqReport& r, cq::CqName a, cq::CqName b) {
  return verdict(r, a).status == verdict(r, b).status;
}

// Folds one analysed point into the summary; returns failure descriptions.
inline std::vector<std::string> tally(FuzzSummary& s, const AnalysisReport& r, const PointEvaluation& eval,
                                      const Vector& grad_f) {
  using cq::CqName;
  std::vector<std::string> bad;
  if (!r.feasibility.feasible || !r.cq) {
    ++s.feasibility_failures;
    bad.push_back("generated point infeasible");
    return bad;
  }
  const auto& rep = *r.cq;
  const auto& pat = *r.pattern;
  ++s.lattice_checked;
  if (!rep.implication_violations.empty()) {
    ++s.lattice_violations;
    bad.push_back("implication violated: " + rep.implication_violations.front().description);
  }
  if (pat.I_GH.empty()) {
    ++s.strict_comp_checked;
    if (!same_status(rep, CqName::mpec_mfcq_t, CqName::mpec_mfcq_r)) {
      ++s.strict_comp_mismatches;
      bad.push_back("MFCQ-T differs from MFCQ-R with empty biactive set");
    }
  }
  if (verdict(rep, CqName::nnamcq).decided() && verdict(rep, CqName::mpec_gmfcq).decided()) {
    ++s.nnamcq_gmfcq_checked;
    if (!same_status(rep, CqName::nnamcq, CqName::mpec_gmfcq)) {
      ++s.nnamcq_gmfcq_mismatches;
      bad.push_back("NNAMCQ differs from direct GMFCQ");
    }
  }
  for (const auto& v : rep.verdicts) {
    if (!v.fails() || !std::holds_alternative<cq::MultiplierCertificate>(v.certificate)) continue;
    ++s.witness_checked;
    if (auto why = verify_certificate(eval, pat, v, 1e-7)) {
      ++s.witness_failures;
      bad.push_back(std::string(cq::cq_name(v.name)) + " witness rejected: " + *why);
    }
  }
  if (r.stationarity) {
    const auto& st = *r.stationarity;
    ++s.stationarity_checked;
    ++s.stationarity_classes[static_cast<std::size_t>(st.strongest_class)];
    if (st.witness) {
      ++s.witness_checked;
      using stationarity::StationarityClass;
      for (auto c : {StationarityClass::weak, StationarityClass::C, StationarityClass::M, StationarityClass::strong}) {
        if (c > st.strongest_class) break;
        if (!stationarity::satisfies_class(c, *st.witness, eval, pat, grad_f, 1e-6)) {
          ++s.monotonicity_violations;
          ++s.witness_failures;
          bad.push_back(std::string("stationarity witness fails class ") + stationarity::class_name(c));
          break;
        }
      }
    }
    ++s.kkt_checked;
    if (!stationarity::verify_kkt_equivalence(eval, pat, grad_f, Tolerances{})) {
      ++s.kkt_mismatches;
      bad.push_back("strong stationarity disagrees with NLP KKT");
    }
  }
  return bad;
}

inline std::vector<std::string> tally_bho(FuzzSummary& s, const BhoSample& b, const AnalysisReport& r) {
  using cq::CqName;
  std::vector<std::string> bad;
  const auto& rep = *r.cq;
  ++s.mfcqt_licq_checked;
  if (!same_status(rep, CqName::mpec_mfcq_t, CqName::mpec_licq)) {
    ++s.mfcqt_licq_mismatches;
    bad.push_back("MFCQ-T differs from LICQ on a BHO point");
  }
  const auto& ba = *r.bho;
  ++s.gamma_checked;
  if (ba.gamma_mismatch || ba.gamma.rows.rows() != b.instance.n() - 1 + static_cast<Index>(r.pattern->I_GH.size())) {
    ++s.gamma_mismatches;
    bad.push_back("Gamma disagrees with the bundle: " + ba.gamma_mismatch.value_or("row count"));
  }
  ++s.licq_branch_hits[static_cast<std::size_t>(ba.licq_theorem.branch)];
  if (ba.licq_theorem.verdict.decided()) {
    ++s.licq_decisive;
    const bool full = ba.gamma_rank == ba.gamma.rows.rows();
    const auto th = ba.licq_theorem.verdict.status;
    if (th != verdict(rep, CqName::mpec_licq).status || (th == cq::TriState::holds) != full) {
      ++s.licq_mismatches;
      bad.push_back("closed-form LICQ (branch " + std::to_string(ba.licq_theorem.branch) +
                    ") disagrees with the rank test");
    }
  }
  if (ba.mfcq_r_theorem.holds()) {
    ++s.mfcqr_pd;
    if (!verdict(rep, CqName::mpec_mfcq_r).holds()) {
      ++s.mfcqr_counterexamples;
      bad.push_back("PD Gram block but generic MFCQ-R does not hold");
    }
  } else {
    ++s.mfcqr_undecided;
  }
  if (ba.lambda_psi.flagged()) {
    ++s.flagged_points;
  } else {
    ++s.index_checked;
    if (!ba.relation_mismatches.empty()) {
      ++s.index_mismatches;
      bad.push_back("index relation violated: " + ba.relation_mismatches.front());
    }
    ++s.objective_checked;
    if (ba.validation_error != ba.misclassified_fraction) {
      ++s.objective_mismatches;
      bad.push_back("objective differs from misclassified fraction");
    }
  }
  return bad;
}

}  // namespace detail

/// Iteration i uses seed + i, so `fuzz --n 1 --seed <seed+i>` replays it.
inline FuzzSummary run_fuzz(const FuzzConfig& cfg) {
  cfg.tol.validate();
  std::vector<detail::IterationOutput> outs(cfg.n);
  const unsigned workers = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(std::max<std::size_t>(cfg.n, 1))));
  auto work = [&](unsigned w) {
    for (std::size_t i = w; i < cfg.n; i += workers) outs[i] = detail::run_iteration(cfg.seed + i, cfg);
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }

  FuzzSummary s;
  s.iterations = cfg.n;
  for (const auto& o : outs) {
    auto fail = [&](const std::string& digest, const std::string& what) {
      s.failures.push_back("seed=" + std::to_string(o.seed) + " digest=" + digest + ": " + what +
                           " (replay: mpeccq fuzz --n 1 --seed " + std::to_string(o.seed) + ")");
    };
    for (const auto& e : o.errors) fail("-", "exception: " + e);
    for (std::size_t k = 0; k < o.affine_reports.size(); ++k) {
      ++s.affine_points;
      const auto& r = o.affine_reports[k];
      for (const auto& b : detail::tally(s, r, o.affine[k].eval, o.affine[k].grad_f)) fail(r.instance_digest, b);
      if (cfg.on_affine) cfg.on_affine(o.affine[k], r);
    }
    for (std::size_t k = 0; k < o.bho_reports.size(); ++k) {
      const auto& b = o.bho[k];
      const auto& r = o.bho_reports[k];
      ++s.bho_points;
      if (b.recipe.rfind("forced", 0) == 0) ++s.forced_points;
      if (b.recipe == "duplicate") ++s.degenerate_points;
      auto bad = detail::tally(s, r, to_evaluation(b.instance, b.point), b.instance.c);
      if (r.feasibility.feasible) {
        auto more = detail::tally_bho(s, b, r);
        bad.insert(bad.end(), more.begin(), more.end());
      }
      for (const auto& x : bad) fail(r.instance_digest, b.recipe + ": " + x);
      if (cfg.on_bho) cfg.on_bho(b, r);
    }
  }
  if (cfg.n >= 200)
    for (std::size_t br = 1; br <= 5; ++br)
      if (s.licq_branch_hits[br] < 10)
        s.failures.push_back("LICQ theorem branch " + std::to_string(br) + " hit only " +
                             std::to_string(s.licq_branch_hits[br]) + " times (seed=" + std::to_string(cfg.seed) + ")");
  return s;
}

inline io::json to_json(const FuzzSummary& s) {
  using io::json;
  json branches = json::object();
  const char* names[6] = {"undecided", "i", "ii", "iii", "iv", "v"};
  for (std::size_t b = 0; b < 6; ++b) branches[names[b]] = s.licq_branch_hits[b];
  json classes = json::object();
  for (std::size_t c = 0; c < 5; ++c)
    classes[stationarity::class_name(static_cast<stationarity::StationarityClass>(c))] = s.stationarity_classes[c];
  auto pair = [](std::size_t checked, std::size_t bad) { return json{{"checked", checked}, {"mismatches", bad}}; };
  return json{{"iterations", s.iterations},
              {"points", json{{"affine", s.affine_points},
                              {"bho", s.bho_points},
                              {"forced", s.forced_points},
                              {"degenerate", s.degenerate_points}}},
              {"implication_lattice", pair(s.lattice_checked, s.lattice_violations)},
              {"strict_complementarity_t_equals_r", pair(s.strict_comp_checked, s.strict_comp_mismatches)},
              {"bho_mfcq_t_equals_licq", pair(s.mfcqt_licq_checked, s.mfcqt_licq_mismatches)},
              {"licq_theorem", json{{"branches", branches}, {"decisive", s.licq_decisive}, {"mismatches", s.licq_mismatches}}},
              {"gamma_vs_bundle", pair(s.gamma_checked, s.gamma_mismatches)},
              {"mfcq_r_theorem", json{{"pd", s.mfcqr_pd}, {"undecided", s.mfcqr_undecided}, {"counterexamples", s.mfcqr_counterexamples}}},
              {"index_relations", json{{"checked", s.index_checked}, {"mismatches", s.index_mismatches}, {"flagged", s.flagged_points}}},
              {"nnamcq_equals_gmfcq", pair(s.nnamcq_gmfcq_checked, s.nnamcq_gmfcq_mismatches)},
              {"stationarity", json{{"checked", s.stationarity_checked},
                                    {"classes", classes},
                                    {"monotonicity_violations", s.monotonicity_violations}}},
              {"kkt_equivalence", pair(s.kkt_checked, s.kkt_mismatches)},
              {"witnesses", json{{"checked", s.witness_checked}, {"failures", s.witness_failures}}},
              {"objective", pair(s.objective_checked, s.objective_mismatches)},
              {"feasibility_failures", s.feasibility_failures},
              {"failures", s.failures},
              {"ok", s.ok()}};
}

}  // namespace mpeccq::report
