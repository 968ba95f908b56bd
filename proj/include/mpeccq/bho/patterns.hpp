#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mpeccq/bho/instance.hpp"
#include "mpeccq/core.hpp"
#include "mpeccq/mpec_model.hpp"

namespace mpeccq::bho {

/// Activity sets split by complementarity block k = 1..4 (stored at k-1).
/// Blocks 1, 2 index validation entries; blocks 3, 4 training entries.
struct BlockIndexSets {
  std::array<IndexList, 4> I_G, I_H, I_GH;

  std::size_t total_G() const { return I_G[0].size() + I_G[1].size() + I_G[2].size() + I_G[3].size(); }
  std::size_t total_H() const { return I_H[0].size() + I_H[1].size() + I_H[2].size() + I_H[3].size(); }
  std::size_t total_GH() const { return I_GH[0].size() + I_GH[1].size() + I_GH[2].size() + I_GH[3].size(); }
};

namespace detail {

inline void classify_pair(double g, double h, Index i, std::size_t block, BlockIndexSets& out, double eps) {
  const bool g0 = std::abs(g) <= eps, h0 = std::abs(h) <= eps;
  if (g0 && h0) {
    out.I_GH[block].push_back(i);
  } else if (g0 && h > eps) {
    out.I_G[block].push_back(i);
  } else if (h0 && g > eps) {
    out.I_H[block].push_back(i);
  } else {
    throw ClassificationError("block " + std::to_string(block + 1) + " entry " + std::to_string(i) +
                              " is not complementary under the activity threshold");
  }
}

inline IndexList sorted_union(std::initializer_list<const IndexList*> parts) {
  IndexList out;
  for (const auto* p : parts) out.insert(out.end(), p->begin(), p->end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

/// Evaluates each complementarity block directly from the point's components.
inline BlockIndexSets block_index_sets(const BhoInstance& I, const BhoPoint& pt, const Tolerances& tol) {
  const Vector r = I.K_AB * pt.alpha;
  const Vector s = I.K_BB * pt.alpha;
  BlockIndexSets out;
  const double eps = tol.activity_eps;
  for (Index i = 0; i < r.size(); ++i) {
    detail::classify_pair(r(i) + pt.z(i), pt.zeta(i), i, 0, out, eps);
    detail::classify_pair(1.0 - pt.zeta(i), pt.z(i), i, 1, out, eps);
  }
  for (Index j = 0; j < s.size(); ++j) {
    detail::classify_pair(s(j) - 1.0 + pt.xi(j), pt.alpha(j), j, 2, out, eps);
    detail::classify_pair(pt.C - pt.alpha(j), pt.xi(j), j, 3, out, eps);
  }
  return out;
}

/// Refined partition of training (Lambda) and validation (Psi) entries.
struct LambdaPsiPattern {
  IndexList Lambda1, Lambda2, Lambda3_plus, Lambda3_c, Lambda_u;
  IndexList Psi2, Psi3;
  IndexList I_GH3, I_GH4;
  IndexList boundary_validation;             // validation entries in neither Psi set
  std::vector<std::string> assumption_flags;  // empty iff every validation entry is classified

  bool flagged() const { return !assumption_flags.empty(); }
  IndexList Lambda3() const { return detail::sorted_union({&Lambda3_plus, &Lambda3_c}); }
};

/// Throws ClassificationError if a training entry fits no Lambda class.
inline LambdaPsiPattern classify_lambda_psi(const BhoInstance& I, const BhoPoint& pt, const Tolerances& tol) {
  const double eps = tol.activity_eps;
  const Vector r = I.K_AB * pt.alpha;
  const Vector s = I.K_BB * pt.alpha;
  LambdaPsiPattern pat;
  for (Index j = 0; j < s.size(); ++j) {
    const double al = pt.alpha(j), xi = pt.xi(j), res = s(j) - 1.0 + xi;
    const bool a0 = std::abs(al) <= eps, aC = std::abs(al - pt.C) <= eps;
    const bool r0 = std::abs(res) <= eps, x0 = std::abs(xi) <= eps;
    if (a0 && aC) {
      throw ClassificationError("training entry " + std::to_string(j) + ": C within the activity threshold of 0");
    } else if (a0 && x0 && r0) {
      pat.Lambda1.push_back(j);
    } else if (a0 && x0 && res > eps) {
      pat.Lambda2.push_back(j);
    } else if (!a0 && !aC && al > 0.0 && al < pt.C && r0 && x0) {
      pat.Lambda3_plus.push_back(j);
    } else if (aC && r0 && x0) {
      pat.Lambda3_c.push_back(j);
    } else if (aC && r0 && xi > eps) {
      pat.Lambda_u.push_back(j);
    } else {
      throw ClassificationError("training entry " + std::to_string(j) + " (alpha=" + std::to_string(al) +
                                ", residual=" + std::to_string(res) + ", xi=" + std::to_string(xi) +
                                ") fits no Lambda class");
    }
  }
  for (Index i = 0; i < r.size(); ++i) {
    const double ze = pt.zeta(i), zz = pt.z(i), g1 = r(i) + zz;
    const bool ze0 = std::abs(ze) <= eps, ze1 = std::abs(ze - 1.0) <= eps, z0 = std::abs(zz) <= eps;
    if (ze0 && g1 > eps && z0) {
      pat.Psi2.push_back(i);
    } else if (ze1 && std::abs(g1) <= eps && zz > eps) {
      pat.Psi3.push_back(i);
    } else {
      pat.boundary_validation.push_back(i);
      if (ze0 && std::abs(g1) <= eps) pat.assumption_flags.push_back("I_GH1 contains validation entry " + std::to_string(i));
      else if (z0 && ze1) pat.assumption_flags.push_back("I_GH2 contains validation entry " + std::to_string(i));
      else pat.assumption_flags.push_back("validation entry " + std::to_string(i) + " lies on the decision boundary");
    }
  }
  pat.I_GH3 = pat.Lambda1;
  pat.I_GH4 = pat.Lambda3_c;
  return pat;
}

/// Compares block activity sets against their Lambda/Psi expressions.
/// Returns one message per unequal pair.
inline std::vector<std::string> check_index_relations(const BlockIndexSets& b, const LambdaPsiPattern& p) {
  const IndexList none;
  const std::vector<std::pair<std::string, std::pair<IndexList, IndexList>>> rel = {
      {"I_H1 = Psi2", {b.I_H[0], p.Psi2}},
      {"I_G1 = Psi3", {b.I_G[0], p.Psi3}},
      {"I_GH1 = {}", {b.I_GH[0], none}},
      {"I_H2 = Psi2", {b.I_H[1], p.Psi2}},
      {"I_G2 = Psi3", {b.I_G[1], p.Psi3}},
      {"I_GH2 = {}", {b.I_GH[1], none}},
      {"I_H3 = Lambda2", {b.I_H[2], p.Lambda2}},
      {"I_G3 = Lambda3 u Lambda_u", {b.I_G[2], detail::sorted_union({&p.Lambda3_plus, &p.Lambda3_c, &p.Lambda_u})}},
      {"I_GH3 = Lambda1", {b.I_GH[2], p.Lambda1}},
      {"I_H4 = Lambda1 u Lambda2 u Lambda3+", {b.I_H[3], detail::sorted_union({&p.Lambda1, &p.Lambda2, &p.Lambda3_plus})}},
      {"I_G4 = Lambda_u", {b.I_G[3], p.Lambda_u}},
      {"I_GH4 = Lambda3c", {b.I_GH[3], p.Lambda3_c}},
  };
  std::vector<std::string> bad;
  for (const auto& [name, sets] : rel) {
    IndexList lhs = sets.first, rhs = sets.second;
    std::sort(lhs.begin(), lhs.end());
    std::sort(rhs.begin(), rhs.end());
    if (lhs != rhs) bad.push_back(name);
  }
  return bad;
}

/// Active gradient rows of G on I_G u I_GH and of H on I_H u I_GH, with
/// pair-level provenance (global pair index).
struct GammaMatrix {
  Matrix rows;
  std::vector<RowTag> tags;
};

/// Writes the active gradient rows blockwise from A B^T, B B^T and identity
/// pieces, without going through the generic evaluation record.
inline GammaMatrix assemble_gamma(const BhoInstance& I, const BlockIndexSets& b) {
  const VarLayout L = I.layout();
  const Index n = I.n(), nu = L.u_count;
  std::vector<Vector> rows;
  std::vector<RowTag> tags;
  auto unit = [n](Index k, double v) {
    Vector e = Vector::Zero(n);
    e(k) = v;
    return e;
  };
  auto G_row = [&](std::size_t blk, Index i) {
    switch (blk) {
      case 0: {
        Vector r = unit(L.z(i), 1.0);
        r.segment(L.alpha(0), nu) = I.K_AB.row(i).transpose();
        return r;
      }
      case 1: return unit(L.zeta(i), -1.0);
      case 2: {
        Vector r = unit(L.xi(i), 1.0);
        r.segment(L.alpha(0), nu) = I.K_BB.row(i).transpose();
        return r;
      }
      default: {
        Vector r = unit(L.C(), 1.0);
        r(L.alpha(i)) = -1.0;
        return r;
      }
    }
  };
  auto H_row = [&](std::size_t blk, Index i) {
    switch (blk) {
      case 0: return unit(L.zeta(i), 1.0);
      case 1: return unit(L.z(i), 1.0);
      case 2: return unit(L.alpha(i), 1.0);
      default: return unit(L.xi(i), 1.0);
    }
  };
  auto pair_index = [&](std::size_t blk, Index i) {
    switch (blk) {
      case 0: return L.pair1(i);
      case 1: return L.pair2(i);
      case 2: return L.pair3(i);
      default: return L.pair4(i);
    }
  };
  for (std::size_t blk = 0; blk < 4; ++blk) {
    for (Index i : b.I_G[blk]) {
      rows.push_back(G_row(blk, i));
      tags.push_back({Family::G, pair_index(blk, i), 1.0});
    }
    for (Index i : b.I_H[blk]) {
      rows.push_back(H_row(blk, i));
      tags.push_back({Family::H, pair_index(blk, i), 1.0});
    }
    for (Index i : b.I_GH[blk]) {
      rows.push_back(G_row(blk, i));
      tags.push_back({Family::G, pair_index(blk, i), 1.0});
      rows.push_back(H_row(blk, i));
      tags.push_back({Family::H, pair_index(blk, i), 1.0});
    }
  }
  GammaMatrix out;
  out.rows.resize(static_cast<Index>(rows.size()), n);
  for (std::size_t k = 0; k < rows.size(); ++k) out.rows.row(static_cast<Index>(k)) = rows[k].transpose();
  out.tags = std::move(tags);
  return out;
}

/// Matches Gamma rows to the rows of a gradient bundle by provenance and
/// compares them entrywise. Returns the first discrepancy, if any.
inline std::optional<std::string> compare_gamma_to_bundle(const GammaMatrix& gamma, const GradientBundle& bundle,
                                                          double slack = 0.0) {
  const Matrix stacked = bundle.stacked();
  std::vector<RowTag> tags = bundle.signed_tags;
  tags.insert(tags.end(), bundle.free_tags.begin(), bundle.free_tags.end());
  if (static_cast<Index>(tags.size()) != gamma.rows.rows())
    return "row count " + std::to_string(gamma.rows.rows()) + " vs bundle " + std::to_string(tags.size());
  std::map<std::pair<int, Index>, Index> where;
  for (std::size_t k = 0; k < tags.size(); ++k)
    where[{static_cast<int>(tags[k].family), tags[k].index}] = static_cast<Index>(k);
  for (std::size_t k = 0; k < gamma.tags.size(); ++k) {
    const auto& t = gamma.tags[k];
    const auto it = where.find({static_cast<int>(t.family), t.index});
    if (it == where.end())
      return std::string("Gamma row ") + family_name(t.family) + "[" + std::to_string(t.index) + "] missing in bundle";
    const double diff = (gamma.rows.row(static_cast<Index>(k)) - stacked.row(it->second)).cwiseAbs().maxCoeff();
    if (diff > slack)
      return std::string("Gamma row ") + family_name(t.family) + "[" + std::to_string(t.index) + "] differs by " +
             std::to_string(diff);
    where.erase(it);
  }
  return std::nullopt;
}

}  // namespace mpeccq::bho
