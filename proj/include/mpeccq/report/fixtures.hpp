#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mpeccq/core.hpp"
#include "mpeccq/cq/checkers.hpp"
#include "mpeccq/io/json.hpp"
#include "mpeccq/mpec_model.hpp"
#include "mpeccq/report/analysis.hpp"

namespace mpeccq::report {

namespace detail {

inline Matrix rows(std::initializer_list<std::initializer_list<double>> r, Index cols) {
  Matrix m(static_cast<Index>(r.size()), cols);
  Index i = 0;
  for (const auto& row : r) {
    Index j = 0;
    for (double x : row) m(i, j++) = x;
    ++i;
  }
  return m;
}

inline PointEvaluation record(Index n, Matrix g, Matrix G, Matrix H, bool affine) {
  PointEvaluation e;
  e.point = Vector::Zero(n);
  e.g_vals = Vector::Zero(g.rows());
  e.h_vals = Vector(0);
  e.G_vals = Vector::Zero(G.rows());
  e.H_vals = Vector::Zero(H.rows());
  e.g_grads = std::move(g);
  e.h_grads = Matrix(0, n);
  e.G_grads = std::move(G);
  e.H_grads = std::move(H);
  e.affine = affine;
  return e;
}

}  // namespace detail

/// g1 = v1 <= 0, g2 = v1 + v2 <= 0, 0 <= v2 _|_ v3 >= 0 at the origin; f = v2 + v3.
inline PointEvaluation fixture_e1() {
  return detail::record(3, detail::rows({{1, 0, 0}, {1, 1, 0}}, 3), detail::rows({{0, 1, 0}}, 3),
                        detail::rows({{0, 0, 1}}, 3), true);
}

/// g1 = -v1 - v2 <= 0, 0 <= v1 _|_ v2 >= 0 at the origin; f = v1 + v2.
inline PointEvaluation fixture_e2() {
  return detail::record(2, detail::rows({{-1, -1}}, 2), detail::rows({{1, 0}}, 2), detail::rows({{0, 1}}, 2), true);
}

/// G = (v1, v1 - v2^2), H = (v2, v3) at the origin; f = v1 + v2 + v3.
inline PointEvaluation fixture_e3() {
  return detail::record(3, Matrix(0, 3), detail::rows({{1, 0, 0}, {1, 0, 0}}, 3),
                        detail::rows({{0, 1, 0}, {0, 0, 1}}, 3), false);
}

struct Fixture {
  std::string name;
  PointEvaluation eval;
  Vector grad_f;
  std::map<std::string, std::string> expected;  // CQ name -> status
};

inline std::vector<Fixture> fixtures() {
  return {
      {"E1", fixture_e1(), Vector::Ones(3) - Vector::Unit(3, 0), {{"MPEC_MFCQ_T", "holds"}, {"MPEC_LICQ", "fails"}}},
      {"E2", fixture_e2(), Vector::Ones(2), {{"NNAMCQ", "holds"}, {"MPEC_GMFCQ", "holds"}, {"MPEC_MFCQ_T", "fails"}}},
      {"E3", fixture_e3(), Vector::Ones(3), {{"MPEC_MFCQ_R", "holds"}, {"NNAMCQ", "fails"}}},
  };
}

struct FixtureResult {
  std::string name;
  std::map<std::string, std::string> expected, actual;
  bool pass = false;
  AnalysisReport report;
};

struct FixtureSummary {
  std::vector<FixtureResult> results;
  std::size_t passed = 0;
  bool ok() const { return passed == results.size(); }
};

/// `tamper` may edit each record before analysis (mutation testing).
inline FixtureSummary run_fixtures(const std::function<void(const std::string&, PointEvaluation&)>& tamper = {},
                                   const Tolerances& tol = {}) {
  FixtureSummary s;
  for (auto& f : fixtures()) {
    if (tamper) tamper(f.name, f.eval);
    FixtureResult r;
    r.name = f.name;
    r.expected = f.expected;
    CheckOptions opt;
    opt.tol = tol;
    opt.grad_f = f.grad_f;
    r.report = analyze_evaluation(f.eval, opt);
    r.pass = r.report.cq.has_value();
    for (const auto& [cq_name, want] : f.expected) {
      std::string got = "missing";
      if (r.report.cq)
        for (const auto& v : r.report.cq->verdicts)
          if (cq_name == cq::cq_name(v.name)) got = cq::tri_state_name(v.status);
      r.actual[cq_name] = got;
      r.pass = r.pass && got == want;
    }
    s.passed += r.pass ? 1 : 0;
    s.results.push_back(std::move(r));
  }
  return s;
}

inline io::json to_json(const FixtureSummary& s) {
  io::json res = io::json::array();
  for (const auto& r : s.results) {
    io::json diff = io::json::object();
    for (const auto& [k, want] : r.expected)
      if (r.actual.at(k) != want) diff[k] = io::json{{"expected", want}, {"actual", r.actual.at(k)}};
    res.push_back(io::json{{"name", r.name},
                           {"pass", r.pass},
                           {"expected", r.expected},
                           {"actual", r.actual},
                           {"diff", diff},
                           {"report", to_json(r.report)}});
  }
  return io::json{{"fixtures", res}, {"passed", s.passed}, {"total", s.results.size()}, {"ok", s.ok()}};
}

}  // namespace mpeccq::report
