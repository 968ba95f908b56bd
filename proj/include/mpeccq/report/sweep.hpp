#pragma once

#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include "mpeccq/bho/instance.hpp"
#include "mpeccq/core.hpp"
#include "mpeccq/io/json.hpp"
#include "mpeccq/report/analysis.hpp"

namespace mpeccq::report {

/// Log-spaced grid of `count` values from c_min to c_max inclusive.
inline std::vector<double> log_grid(double c_min, double c_max, std::size_t count) {
  if (!(c_min > 0 && c_max >= c_min) || count == 0)
    throw StructuralError("C grid needs 0 < c-min <= c-max and a positive count");
  std::vector<double> g(count);
  const double a = std::log10(c_min), b = std::log10(c_max);
  for (std::size_t k = 0; k < count; ++k)
    g[k] = count == 1 ? c_min : std::pow(10.0, a + (b - a) * static_cast<double>(k) / static_cast<double>(count - 1));
  return g;
}

struct SweepEntry {
  double C = 0;
  std::optional<AnalysisReport> report;
  std::string error;  // set when the lower-level solve or construction failed
};

/// Analyses the lower-level solution at each grid value of C.
inline std::vector<SweepEntry> run_sweep(const bho::BhoInstance& I, const std::vector<double>& grid,
                                         const CheckOptions& opt, unsigned threads = 1) {
  std::vector<SweepEntry> out(grid.size());
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(grid.size(), 1))));
  auto work = [&](unsigned w) {
    for (std::size_t k = w; k < grid.size(); k += workers) {
      out[k].C = grid[k];
      try {
        const auto ap = bho::assemble_feasible_point(I, grid[k], bho::lower_level_solve_all(I, grid[k]), opt.tol);
        out[k].report = analyze_bho(I, ap.point, opt);
      } catch (const std::runtime_error& e) {
        out[k].error = e.what();
      }
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  return out;
}

inline bool sweep_ok(const std::vector<SweepEntry>& s) {
  for (const auto& e : s)
    if (!e.report || !e.report->ok()) return false;
  return true;
}

inline io::json to_json(const std::vector<SweepEntry>& s) {
  io::json rows = io::json::array();
  for (const auto& e : s) {
    io::json r{{"C", e.C}};
    if (!e.report) {
      r["error"] = e.error;
    } else {
      const auto& rep = *e.report;
      const auto& b = *rep.bho;
      io::json cqs = io::json::object();
      for (const auto& v : rep.cq->verdicts) cqs[cq::cq_name(v.name)] = cq::tri_state_name(v.status);
      r["validation_error"] = b.validation_error;
      r["cq"] = cqs;
      r["licq_theorem"] = io::to_json(b.licq_theorem);
      r["mfcq_r_theorem"] = cq::tri_state_name(b.mfcq_r_theorem.status);
      r["lambda_psi"] = io::to_json(b.lambda_psi);
      r["stationarity"] = rep.stationarity ? stationarity::class_name(rep.stationarity->strongest_class) : "n/a";
      r["agreement_mismatches"] = rep.mismatches();
      r["point_digest"] = rep.point_digest;
    }
    rows.push_back(std::move(r));
  }
  return io::json{{"grid", rows}, {"ok", sweep_ok(s)}};
}

}  // namespace mpeccq::report
