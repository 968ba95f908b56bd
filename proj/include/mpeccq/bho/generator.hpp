#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mpeccq/bho/dataset.hpp"
#include "mpeccq/bho/instance.hpp"
#include "mpeccq/core.hpp"

namespace mpeccq::bho {

struct InstanceShape {
  Index T = 1, m1 = 1, m2 = 1, p = 2;
};

/// Gaussian features. With `planted` the labels follow the sign of a random
/// hyperplane through the origin, so every fold is separable without bias.
inline Dataset random_dataset(std::mt19937_64& rng, Index N, Index p, bool planted) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  Dataset ds;
  ds.features.resize(N, p);
  ds.labels.resize(N);
  Vector w(p);
  for (Index k = 0; k < p; ++k) w(k) = gauss(rng);
  for (Index r = 0; r < N; ++r) {
    for (Index k = 0; k < p; ++k) ds.features(r, k) = gauss(rng);
    if (planted) {
      double m = ds.features.row(r).dot(w);
      if (std::abs(m) < 0.1) {  // keep clear of the separating plane
        ds.features.row(r) += (0.1 - m + (m < 0 ? -0.2 : 0.0)) * w.transpose() / w.squaredNorm();
        m = ds.features.row(r).dot(w);
      }
      ds.labels(r) = m > 0 ? 1.0 : -1.0;
    } else {
      ds.labels(r) = coin(rng) ? 1.0 : -1.0;
    }
  }
  return ds;
}

inline InstanceShape random_shape(std::mt19937_64& rng) {
  std::uniform_int_distribution<Index> T(1, 3), m(1, 5), p(2, 5);
  InstanceShape s;
  s.T = T(rng);
  s.m1 = m(rng);
  s.m2 = m(rng);
  s.p = p(rng);
  return s;
}

/// C drawn log-uniformly from [10^lo, 10^hi].
inline double random_C(std::mt19937_64& rng, double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  return std::pow(10.0, u(rng));
}

/// Random instance through the dataset / fold-split path.
inline BhoInstance random_instance(std::mt19937_64& rng, const InstanceShape& s, bool planted) {
  std::uniform_int_distribution<Index> extra(0, 3);
  const Index N = s.T * s.m1 + s.m2 + extra(rng);
  const Dataset ds = random_dataset(rng, N, s.p, planted);
  const FoldSplit fs = split_folds(ds, s.T, s.m1, s.m2, rng());
  return build_instance(ds, fs);
}

/// A feasible (instance, C, alpha) triple and how it was produced.
struct GeneratedPoint {
  BhoInstance instance;
  double C = 0.0;
  Vector alpha;
  std::string recipe;
};

/// Rescales training rows at lower bound with margin > 1 so that their margin
/// becomes exactly 1. Alpha stays optimal and validation margins are unchanged.
/// Returns false if fewer than `count` such rows exist.
inline bool force_lower_biactive(GeneratedPoint& g, std::size_t count, std::mt19937_64& rng) {
  const Vector s = g.instance.K_BB * g.alpha;
  IndexList cand;
  for (Index j = 0; j < g.alpha.size(); ++j)
    if (g.alpha(j) == 0.0 && s(j) > 1.0 + 1e-6) cand.push_back(j);
  if (cand.size() < count) return false;
  std::shuffle(cand.begin(), cand.end(), rng);
  for (std::size_t k = 0; k < count; ++k) g.instance.B.row(cand[k]) /= s(cand[k]);
  g.instance.finish();
  g.recipe += "+rescale" + std::to_string(count);
  return true;
}

/// Moves C along the piecewise-affine solution path of one fold to the
/// nearest breakpoint where a training entry sits at alpha = C with margin
/// exactly 1. Other folds are re-solved at the new C.
inline bool force_upper_biactive(GeneratedPoint& g, std::mt19937_64& rng) {
  const BhoInstance& I = g.instance;
  const double edge = 1e-9 * std::max(1.0, g.C);
  struct Candidate {
    Index fold;
    double C;
  };
  std::vector<Candidate> cands;
  for (Index t = 0; t < I.T; ++t) {
    const Index off = t * I.m2;
    const Matrix K = I.K_BB.block(off, off, I.m2, I.m2);
    const Vector al = g.alpha.segment(off, I.m2);
    IndexList F, U;
    for (Index j = 0; j < I.m2; ++j) {
      if (al(j) <= edge) continue;
      (al(j) >= g.C - edge ? U : F).push_back(j);
    }
    Vector u = Vector::Zero(static_cast<Index>(F.size())), v = u;
    if (!F.empty()) {
      const Matrix KFF = select(K, F, F);
      auto llt = KFF.llt();
      if (llt.info() != Eigen::Success) continue;
      u = llt.solve(Vector::Ones(static_cast<Index>(F.size())));
      Vector kfu = Vector::Zero(static_cast<Index>(F.size()));
      for (std::size_t r = 0; r < F.size(); ++r)
        for (Index j : U) kfu(static_cast<Index>(r)) += K(F[r], j);
      v = llt.solve(kfu);
    }
    for (std::size_t r = 0; r < F.size(); ++r) {
      const double den = 1.0 + v(static_cast<Index>(r));
      if (den != 0.0) cands.push_back({t, u(static_cast<Index>(r)) / den});
    }
    for (Index k : U) {
      double kfu = 0.0, kfv = 0.0, kuu = 0.0;
      for (std::size_t r = 0; r < F.size(); ++r) {
        kfu += K(k, F[r]) * u(static_cast<Index>(r));
        kfv += K(k, F[r]) * v(static_cast<Index>(r));
      }
      for (Index j : U) kuu += K(k, j);
      const double den = kuu - kfv;
      if (den != 0.0) cands.push_back({t, (1.0 - kfu) / den});
    }
  }
  std::erase_if(cands, [](const Candidate& c) { return !(c.C > 1e-3 && c.C < 1e5); });
  std::shuffle(cands.begin(), cands.end(), rng);
  std::stable_sort(cands.begin(), cands.end(), [&](const Candidate& a, const Candidate& b) {
    return std::abs(std::log(a.C / g.C)) < std::abs(std::log(b.C / g.C));
  });
  for (const auto& cand : cands) {
    const Index off = cand.fold * I.m2;
    const Matrix K = I.K_BB.block(off, off, I.m2, I.m2);
    // Re-derive the fold's solution on the same piece at the breakpoint.
    const Vector al = g.alpha.segment(off, I.m2);
    IndexList F, U;
    for (Index j = 0; j < I.m2; ++j) {
      if (al(j) <= edge) continue;
      (al(j) >= g.C - edge ? U : F).push_back(j);
    }
    Vector fold = Vector::Zero(I.m2);
    for (Index j : U) fold(j) = cand.C;
    if (!F.empty()) {
      Vector rhs = Vector::Ones(static_cast<Index>(F.size()));
      for (std::size_t r = 0; r < F.size(); ++r)
        for (Index j : U) rhs(static_cast<Index>(r)) -= K(F[r], j) * cand.C;
      const Vector aF = select(K, F, F).llt().solve(rhs);
      for (std::size_t r = 0; r < F.size(); ++r) fold(F[r]) = aF(static_cast<Index>(r));
    }
    bool hit = false;
    for (Index j = 0; j < I.m2; ++j) {
      if (std::abs(fold(j) - cand.C) <= 1e-12 * std::max(1.0, cand.C)) {
        fold(j) = cand.C;
        hit = hit || std::abs((K.row(j) * fold)(0) - 1.0) <= 1e-11;
      }
    }
    if (!hit || box_qp_residual(K, fold, cand.C) > 1e-9) continue;
    Vector alpha(I.T * I.m2);
    try {
      for (Index t = 0; t < I.T; ++t)
        alpha.segment(t * I.m2, I.m2) = t == cand.fold ? fold : lower_level_solve(I, t, cand.C);
    } catch (const NonconvergenceError&) {
      continue;
    }
    g.alpha = alpha;
    g.C = cand.C;
    g.recipe += "+breakpoint";
    return true;
  }
  return false;
}

/// Copies one training row of a random fold over another, making that
/// fold's Gram matrix singular.
inline void duplicate_training_row(BhoInstance& I, std::mt19937_64& rng) {
  if (I.m2 < 2) return;
  std::uniform_int_distribution<Index> fold(0, I.T - 1), row(0, I.m2 - 1);
  const Index t = fold(rng);
  const Index a = row(rng);
  Index b = row(rng);
  if (b == a) b = (a + 1) % I.m2;
  I.B.row(t * I.m2 + b) = I.B.row(t * I.m2 + a);
  I.finish();
}

}  // namespace mpeccq::bho
