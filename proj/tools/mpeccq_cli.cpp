#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>

#include "mpeccq/bho/dataset.hpp"
#include "mpeccq/bho/instance.hpp"
#include "mpeccq/io/json.hpp"
#include "mpeccq/report/analysis.hpp"
#include "mpeccq/report/fixtures.hpp"
#include "mpeccq/report/fuzz.hpp"
#include "mpeccq/report/sweep.hpp"

namespace {

using mpeccq::io::json;

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kInputError = 2;

struct Common {
  mpeccq::Tolerances tol;
  std::size_t cap = mpeccq::kDefaultBiactiveCap;
  bool timing = false;

  mpeccq::report::CheckOptions options() const {
    tol.validate();
    mpeccq::report::CheckOptions o;
    o.tol = tol;
    o.cap = cap;
    o.timing = timing;
    return o;
  }
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--tol-activity", c.tol.activity_eps, "Activity threshold")->envname("MPECCQ_TOL_ACTIVITY");
  app->add_option("--tol-rank", c.tol.rank_rel_tol, "Relative singular value cutoff")->envname("MPECCQ_TOL_RANK");
  app->add_option("--tol-pd", c.tol.pd_eps, "Minimum eigenvalue for positive definiteness")->envname("MPECCQ_TOL_PD");
  app->add_option("--tol-margin", c.tol.strict_margin_eps, "LP margin counted as strict")->envname("MPECCQ_TOL_MARGIN");
  app->add_option("--tol-feas", c.tol.feas_eps, "Feasibility residual bound")->envname("MPECCQ_TOL_FEAS");
  app->add_option("--cap-gh", c.cap, "Largest biactive set enumerated")->envname("MPECCQ_CAP_GH");
  app->add_flag("--timing", c.timing, "Include wall-clock timing in reports")->envname("MPECCQ_TIMING");
}

void emit(const json& j, const std::string& out_path = {}) {
  const std::string text = mpeccq::io::dump(j);
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out_path);
  if (!f) throw mpeccq::ParseError("cannot write " + out_path);
  f << text;
}

// Inline JSON array or a path to a file holding one.
mpeccq::Vector parse_gradf(const std::string& arg) {
  const auto first = arg.find_first_not_of(" \t\n");
  const json j = first != std::string::npos && arg[first] == '['
                     ? mpeccq::io::parse_text(arg, "--gradf")
                     : mpeccq::io::read_file(arg);
  return mpeccq::io::vector_from_json(j, "gradf");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constraint qualification and stationarity checker for complementarity-constrained programs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "mpeccq 1.0.0");

  Common common;
  std::string input, gradf, data, out;
  mpeccq::Index folds = 1, m1 = 1, m2 = 1;
  std::uint64_t seed = 0;
  double C = 1.0, c_min = 1e-2, c_max = 1e2;
  std::size_t c_count = 9, fuzz_n = 200;
  unsigned threads = 1;

  auto* check = app.add_subcommand("check", "Analyse an evaluation record or a BHO instance/point");
  check->add_option("--input", input, "JSON input file")->required()->envname("MPECCQ_INPUT");
  add_common(check, common);

  auto* stat = app.add_subcommand("stationarity", "Classify stationarity for a given objective gradient");
  stat->add_option("--input", input, "JSON input file")->required()->envname("MPECCQ_INPUT");
  stat->add_option("--gradf", gradf, "Objective gradient: JSON array or file")->required()->envname("MPECCQ_GRADF");
  add_common(stat, common);

  auto* bho = app.add_subcommand("bho", "Bilevel SVM hyperparameter instances");
  bho->require_subcommand(1);
  auto add_data = [&](CLI::App* a) {
    a->add_option("--data", data, "CSV dataset")->required()->envname("MPECCQ_DATA");
    a->add_option("--folds", folds, "Number of folds T")->required()->envname("MPECCQ_FOLDS");
    a->add_option("--m1", m1, "Validation samples per fold")->required()->envname("MPECCQ_M1");
    a->add_option("--m2", m2, "Training samples per fold")->required()->envname("MPECCQ_M2");
    a->add_option("--seed", seed, "Shuffle seed")->envname("MPECCQ_SEED");
    add_common(a, common);
  };
  auto* build = bho->add_subcommand("build", "Build an instance and the lower-level point at C");
  add_data(build);
  build->add_option("--C", C, "Regularization parameter")->envname("MPECCQ_C");
  build->add_option("--out", out, "Output JSON file")->required()->envname("MPECCQ_OUT");
  auto* sweep = bho->add_subcommand("sweep", "Analyse lower-level points over a log-spaced C grid");
  add_data(sweep);
  sweep->add_option("--c-min", c_min, "Smallest C")->envname("MPECCQ_C_MIN");
  sweep->add_option("--c-max", c_max, "Largest C")->envname("MPECCQ_C_MAX");
  sweep->add_option("--c-count", c_count, "Number of grid values")->envname("MPECCQ_C_COUNT");
  sweep->add_option("--threads", threads, "Worker threads")->envname("MPECCQ_THREADS");
  sweep->add_option("--out", out, "Output JSON file (default stdout)")->envname("MPECCQ_OUT");

  auto* fix = app.add_subcommand("fixtures", "Run the built-in counterexample fixtures");

  auto* fuzz = app.add_subcommand("fuzz", "Randomized invariant checks");
  fuzz->add_option("--n", fuzz_n, "Iterations")->envname("MPECCQ_N");
  fuzz->add_option("--seed", seed, "Base seed; iteration i uses seed + i")->envname("MPECCQ_SEED");
  fuzz->add_option("--threads", threads, "Worker threads")->envname("MPECCQ_THREADS");
  add_common(fuzz, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInputError;
  }

  try {
    if (*check) {
      const auto report = mpeccq::report::run_check(mpeccq::io::read_file(input), common.options());
      emit(to_json(report));
      return report.ok() ? kOk : kFailure;
    }
    if (*stat) {
      auto opt = common.options();
      opt.grad_f = parse_gradf(gradf);
      const auto report = mpeccq::report::run_check(mpeccq::io::read_file(input), opt);
      emit(to_json(report));
      return report.ok() && report.stationarity ? kOk : kFailure;
    }
    if (*build || *sweep) {
      const auto ds = mpeccq::bho::load_csv(data);
      const auto fs = mpeccq::bho::split_folds(ds, folds, m1, m2, seed);
      const auto I = mpeccq::bho::build_instance(ds, fs);
      const auto opt = common.options();
      if (*build) {
        const auto ap = mpeccq::bho::assemble_feasible_point(I, C, mpeccq::bho::lower_level_solve_all(I, C), opt.tol);
        emit(json{{"instance", mpeccq::io::to_json(I)},
                  {"point", mpeccq::io::to_json(ap.point)},
                  {"split", mpeccq::io::to_json(fs)},
                  {"C", C}},
             out);
        return kOk;
      }
      const auto entries = mpeccq::report::run_sweep(I, mpeccq::report::log_grid(c_min, c_max, c_count), opt, threads);
      emit(mpeccq::report::to_json(entries), out);
      return mpeccq::report::sweep_ok(entries) ? kOk : kFailure;
    }
    if (*fix) {
      const auto s = mpeccq::report::run_fixtures();
      emit(to_json(s));
      return s.ok() ? kOk : kFailure;
    }
    if (*fuzz) {
      mpeccq::report::FuzzConfig cfg;
      cfg.n = fuzz_n;
      cfg.seed = seed;
      cfg.tol = common.tol;
      cfg.cap = common.cap;
      cfg.threads = threads;
      const auto s = mpeccq::report::run_fuzz(cfg);
      emit(to_json(s));
      for (const auto& f : s.failures) std::cerr << "FAIL " << f << "\n";
      return s.ok() ? kOk : kFailure;
    }
  } catch (const mpeccq::ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const mpeccq::StructuralError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const mpeccq::ClassificationError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}
