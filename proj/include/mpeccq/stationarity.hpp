#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mpeccq/core.hpp"
#include "mpeccq/mpec_model.hpp"
#include "mpeccq/numeric/simplex.hpp"

namespace mpeccq::stationarity {

enum class StationarityClass { not_stationary, weak, C, M, strong };

inline const char* class_name(StationarityClass c) {
  switch (c) {
    case StationarityClass::not_stationary: return "not_stationary";
    case StationarityClass::weak: return "weak";
    case StationarityClass::C: return "C";
    case StationarityClass::M: return "M";
    case StationarityClass::strong: return "strong";
  }
  return "?";
}

/// Multipliers of ∇f + Σλ∇g + Σμ∇h − Σγ∇G − Σν∇H = 0.
struct MultiplierVector {
  Vector lambda, mu, gamma, nu;
};

struct StationarityVerdict {
  StationarityClass strongest_class = StationarityClass::not_stationary;
  std::optional<MultiplierVector> witness;  // certifies strongest_class and every weaker class
  bool c_undecided = false;
  bool m_undecided = false;
  std::vector<std::string> notes;
};

/// ‖∇f + Σλ∇g + Σμ∇h − Σγ∇G − Σν∇H‖∞.
inline double stationarity_residual(const PointEvaluation& eval, const Vector& grad_f, const MultiplierVector& w) {
  const Vector r = grad_f + eval.g_grads.transpose() * w.lambda + eval.h_grads.transpose() * w.mu -
                   eval.G_grads.transpose() * w.gamma - eval.H_grads.transpose() * w.nu;
  return r.size() == 0 ? 0.0 : r.cwiseAbs().maxCoeff();
}

/// Independent check that `w` certifies class `c` at the point: residual and
/// every sign rule, with `slack` as the zero tolerance on multipliers.
inline bool satisfies_class(StationarityClass c, const MultiplierVector& w, const PointEvaluation& eval,
                            const ActivePattern& pat, const Vector& grad_f, double slack) {
  if (c == StationarityClass::not_stationary) return true;
  const auto d = eval.dims();
  if (w.lambda.size() != d.m || w.mu.size() != d.p || w.gamma.size() != d.l || w.nu.size() != d.l) return false;
  if (stationarity_residual(eval, grad_f, w) > slack) return false;
  std::vector<bool> in_Ig(static_cast<std::size_t>(d.m), false);
  for (Index i : pat.I_g) in_Ig[static_cast<std::size_t>(i)] = true;
  for (Index i = 0; i < d.m; ++i) {
    if (w.lambda(i) < -slack) return false;
    if (!in_Ig[static_cast<std::size_t>(i)] && std::abs(w.lambda(i)) > slack) return false;
  }
  for (Index i : pat.I_H)
    if (std::abs(w.gamma(i)) > slack) return false;
  for (Index i : pat.I_G)
    if (std::abs(w.nu(i)) > slack) return false;
  for (Index i : pat.I_GH) {
    const double g = w.gamma(i), v = w.nu(i);
    const bool g0 = std::abs(g) <= slack, v0 = std::abs(v) <= slack;
    switch (c) {
      case StationarityClass::strong:
        if (g < -slack || v < -slack) return false;
        break;
      case StationarityClass::M:
        if (!((g > slack && v > slack) || g0 || v0)) return false;
        break;
      case StationarityClass::C:
        if (!(g0 || v0 || (g > 0) == (v > 0))) return false;
        break;
      default:
        break;
    }
  }
  return true;
}

namespace detail {

enum class Sign { zero, nonneg, nonpos, free, strict_pos };

// Solves the multiplier system for fixed sign rules on γ and ν. Strictly
// positive entries are handled by maximising a common lower bound t <= 1.
inline std::optional<MultiplierVector> solve_multipliers(const PointEvaluation& eval, const ActivePattern& pat,
                                                         const Vector& grad_f, const std::vector<Sign>& gamma_sign,
                                                         const std::vector<Sign>& nu_sign, const Tolerances& tol) {
  const auto d = eval.dims();
  numeric::LinearProgram lp;
  std::vector<Index> lam(static_cast<std::size_t>(d.m), -1), mu(static_cast<std::size_t>(d.p), -1);
  std::vector<Index> gam(static_cast<std::size_t>(d.l), -1), nu(static_cast<std::size_t>(d.l), -1);
  for (Index i : pat.I_g) lam[static_cast<std::size_t>(i)] = lp.add_variable();
  for (auto& v : mu) v = lp.add_free_variable();
  bool any_strict = false;
  auto make = [&](Sign s) -> Index {
    switch (s) {
      case Sign::zero: return -1;
      case Sign::nonneg: return lp.add_variable(0.0);
      case Sign::nonpos: return lp.add_variable(-numeric::LinearProgram::kInf, 0.0);
      case Sign::free: return lp.add_free_variable();
      case Sign::strict_pos: any_strict = true; return lp.add_variable(0.0);
    }
    return -1;
  };
  for (Index i = 0; i < d.l; ++i) {
    gam[static_cast<std::size_t>(i)] = make(gamma_sign[static_cast<std::size_t>(i)]);
    nu[static_cast<std::size_t>(i)] = make(nu_sign[static_cast<std::size_t>(i)]);
  }
  const Index t = any_strict ? lp.add_variable(0.0, 1.0) : -1;

  for (Index j = 0; j < d.n; ++j) {
    std::vector<std::pair<Index, double>> terms;
    auto put = [&](Index var, double coef) {
      if (var >= 0 && coef != 0.0) terms.push_back({var, coef});
    };
    for (Index i = 0; i < d.m; ++i) put(lam[static_cast<std::size_t>(i)], eval.g_grads(i, j));
    for (Index i = 0; i < d.p; ++i) put(mu[static_cast<std::size_t>(i)], eval.h_grads(i, j));
    for (Index i = 0; i < d.l; ++i) {
      put(gam[static_cast<std::size_t>(i)], -eval.G_grads(i, j));
      put(nu[static_cast<std::size_t>(i)], -eval.H_grads(i, j));
    }
    if (terms.empty()) {
      if (std::abs(grad_f(j)) > tol.feas_eps) return std::nullopt;
      continue;
    }
    lp.add_constraint(std::move(terms), numeric::Sense::eq, -grad_f(j));
  }
  if (any_strict) {
    for (Index i = 0; i < d.l; ++i) {
      if (gamma_sign[static_cast<std::size_t>(i)] == Sign::strict_pos)
        lp.add_constraint({{gam[static_cast<std::size_t>(i)], 1.0}, {t, -1.0}}, numeric::Sense::ge, 0.0);
      if (nu_sign[static_cast<std::size_t>(i)] == Sign::strict_pos)
        lp.add_constraint({{nu[static_cast<std::size_t>(i)], 1.0}, {t, -1.0}}, numeric::Sense::ge, 0.0);
    }
    lp.set_objective(t, 1.0);
    lp.set_maximize(true);
  }
  const auto sol = lp.solve();
  if (!sol.feasible()) return std::nullopt;
  if (any_strict && sol.objective < tol.strict_margin_eps) return std::nullopt;

  MultiplierVector w{Vector::Zero(d.m), Vector::Zero(d.p), Vector::Zero(d.l), Vector::Zero(d.l)};
  auto val = [&](Index var) { return var >= 0 ? sol.x(var) : 0.0; };
  for (Index i = 0; i < d.m; ++i) w.lambda(i) = val(lam[static_cast<std::size_t>(i)]);
  for (Index i = 0; i < d.p; ++i) w.mu(i) = val(mu[static_cast<std::size_t>(i)]);
  for (Index i = 0; i < d.l; ++i) {
    w.gamma(i) = val(gam[static_cast<std::size_t>(i)]);
    w.nu(i) = val(nu[static_cast<std::size_t>(i)]);
  }
  return w;
}

struct SignRules {
  std::vector<Sign> gamma, nu;
};

// γ free on I_G, zero on I_H; ν free on I_H, zero on I_G; biactive left to the caller.
inline SignRules base_rules(const ActivePattern& pat, Index l) {
  SignRules r{std::vector<Sign>(static_cast<std::size_t>(l), Sign::zero),
              std::vector<Sign>(static_cast<std::size_t>(l), Sign::zero)};
  for (Index i : pat.I_G) r.gamma[static_cast<std::size_t>(i)] = Sign::free;
  for (Index i : pat.I_H) r.nu[static_cast<std::size_t>(i)] = Sign::free;
  return r;
}

inline bool next_assignment(std::vector<int>& digits, int radix) {
  for (auto& d : digits) {
    if (++d < radix) return true;
    d = 0;
  }
  return false;
}

inline MultiplierVector scaled(MultiplierVector w, double s) {
  w.lambda *= s;
  w.mu *= s;
  w.gamma *= s;
  w.nu *= s;
  return w;
}

}  // namespace detail

/// Strongest of weak / C / M / strong stationarity attained at a feasible
/// point for the supplied objective gradient.
inline StationarityVerdict classify_stationarity(const PointEvaluation& eval, const ActivePattern& pat,
                                                 const Vector& grad_f, const Tolerances& tol,
                                                 std::size_t cap = kDefaultBiactiveCap) {
  using detail::Sign;
  const auto d = eval.dims();
  if (grad_f.size() != d.n) throw StructuralError("classify_stationarity: gradient length mismatch");
  StationarityVerdict out;
  const double scale = grad_f.size() > 0 ? grad_f.cwiseAbs().maxCoeff() : 0.0;
  if (scale == 0.0) {
    out.strongest_class = StationarityClass::strong;
    out.witness = MultiplierVector{Vector::Zero(d.m), Vector::Zero(d.p), Vector::Zero(d.l), Vector::Zero(d.l)};
    return out;
  }
  // Multipliers scale with ∇f; solving on the normalised gradient makes the
  // strict margins independent of that scale.
  const Vector gf = grad_f / scale;
  const std::size_t k = pat.I_GH.size();

  auto rules_with = [&](auto&& assign) {
    auto r = detail::base_rules(pat, d.l);
    for (std::size_t b = 0; b < k; ++b) {
      const auto i = static_cast<std::size_t>(pat.I_GH[b]);
      assign(b, r.gamma[i], r.nu[i]);
    }
    return r;
  };
  auto solve = [&](const detail::SignRules& r) { return detail::solve_multipliers(eval, pat, gf, r.gamma, r.nu, tol); };

  const auto weak = solve(rules_with([](std::size_t, Sign& g, Sign& v) { g = v = Sign::free; }));
  if (!weak) return out;

  if (auto strong = solve(rules_with([](std::size_t, Sign& g, Sign& v) { g = v = Sign::nonneg; }))) {
    out.strongest_class = StationarityClass::strong;
    out.witness = detail::scaled(*strong, scale);
    return out;
  }

  if (k > cap) {
    out.m_undecided = out.c_undecided = true;
    out.notes.push_back("biactive set of size " + std::to_string(k) + " exceeds cap; C and M undecided");
    out.strongest_class = StationarityClass::weak;
    out.witness = detail::scaled(*weak, scale);
    return out;
  }

  std::vector<int> branch(k, 0);
  do {
    auto r = rules_with([&](std::size_t b, Sign& g, Sign& v) {
      switch (branch[b]) {
        case 0: g = v = Sign::strict_pos; break;
        case 1: g = Sign::zero; v = Sign::free; break;
        default: g = Sign::free; v = Sign::zero; break;
      }
    });
    if (auto m = solve(r)) {
      out.strongest_class = StationarityClass::M;
      out.witness = detail::scaled(*m, scale);
      return out;
    }
  } while (detail::next_assignment(branch, 3));

  std::vector<int> cb(k, 0);
  do {
    auto r = rules_with([&](std::size_t b, Sign& g, Sign& v) { g = v = cb[b] == 0 ? Sign::nonneg : Sign::nonpos; });
    if (auto c = solve(r)) {
      out.strongest_class = StationarityClass::C;
      out.witness = detail::scaled(*c, scale);
      return out;
    }
  } while (detail::next_assignment(cb, 2));

  out.strongest_class = StationarityClass::weak;
  out.witness = detail::scaled(*weak, scale);
  return out;
}

/// Self-test: the strong-stationarity system is solvable iff the KKT system of
/// the MPEC read as a standard NLP (G >= 0, H >= 0, G∘H = 0) is solvable.
inline bool verify_kkt_equivalence(const PointEvaluation& eval, const ActivePattern& pat, const Vector& grad_f,
                                   const Tolerances& tol) {
  using detail::Sign;
  const auto d = eval.dims();
  const double scale = grad_f.size() > 0 ? grad_f.cwiseAbs().maxCoeff() : 0.0;
  const Vector gf = scale > 0 ? Vector(grad_f / scale) : grad_f;

  auto rules = detail::base_rules(pat, d.l);
  for (Index i : pat.I_GH) {
    rules.gamma[static_cast<std::size_t>(i)] = Sign::nonneg;
    rules.nu[static_cast<std::size_t>(i)] = Sign::nonneg;
  }
  const bool strong = detail::solve_multipliers(eval, pat, gf, rules.gamma, rules.nu, tol).has_value();

  // NLP KKT: ∇f + Σλ∇g + Σμ∇h − Σκ∇G − Σρ∇H + Ση(H_i∇G_i + G_i∇H_i) = 0 with κ, ρ >= 0
  // supported on the active sides. Values on active sides are taken as exactly zero.
  Vector Gv = eval.G_vals, Hv = eval.H_vals;
  for (Index i : pat.I_G) Gv(i) = 0.0;
  for (Index i : pat.I_H) Hv(i) = 0.0;
  for (Index i : pat.I_GH) Gv(i) = Hv(i) = 0.0;
  numeric::LinearProgram lp;
  std::vector<std::pair<Index, Vector>> columns;  // (variable, gradient column)
  for (Index i : pat.I_g) columns.push_back({lp.add_variable(), eval.g_grads.row(i).transpose()});
  for (Index i = 0; i < d.p; ++i) columns.push_back({lp.add_free_variable(), eval.h_grads.row(i).transpose()});
  for (Index i : mpeccq::detail::merged(pat.I_G, pat.I_GH))
    columns.push_back({lp.add_variable(), -eval.G_grads.row(i).transpose()});
  for (Index i : mpeccq::detail::merged(pat.I_H, pat.I_GH))
    columns.push_back({lp.add_variable(), -eval.H_grads.row(i).transpose()});
  for (Index i = 0; i < d.l; ++i) {
    const Vector prod = Hv(i) * eval.G_grads.row(i).transpose() + Gv(i) * eval.H_grads.row(i).transpose();
    if (prod.cwiseAbs().maxCoeff() > 0.0) columns.push_back({lp.add_free_variable(), prod});
  }
  bool kkt = true;
  for (Index j = 0; j < d.n && kkt; ++j) {
    std::vector<std::pair<Index, double>> terms;
    for (const auto& [var, col] : columns)
      if (col(j) != 0.0) terms.push_back({var, col(j)});
    if (terms.empty()) {
      kkt = std::abs(gf(j)) <= tol.feas_eps;
      continue;
    }
    lp.add_constraint(std::move(terms), numeric::Sense::eq, -gf(j));
  }
  if (kkt) kkt = lp.solve().feasible();
  return kkt == strong;
}

}  // namespace mpeccq::stationarity
