#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "mpeccq/bho/dataset.hpp"
#include "mpeccq/bho/generator.hpp"
#include "mpeccq/bho/instance.hpp"
#include "mpeccq/bho/patterns.hpp"
#include "mpeccq/bho/theorems.hpp"
#include "mpeccq/cq/checkers.hpp"
#include "oracles.hpp"

using namespace mpeccq;
using namespace mpeccq::bho;
using cq::TriState;

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
  Matrix m(static_cast<Index>(r.size()), static_cast<Index>(r.begin()->size()));
  Index i = 0;
  for (const auto& row : r) {
    Index j = 0;
    for (double x : row) m(i, j++) = x;
    ++i;
  }
  return m;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Dataset dataset(Index N, Index p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_dataset(rng, N, p, false);
}

struct Analysed {
  LambdaPsiPattern pat;
  BlockIndexSets blocks;
  cq::CqReport generic;
  GammaMatrix gamma;
};

Analysed analyse(const BhoInstance& I, const BhoPoint& pt) {
  const Tolerances tol;
  Analysed a;
  a.pat = classify_lambda_psi(I, pt, tol);
  a.blocks = block_index_sets(I, pt, tol);
  const auto e = to_evaluation(I, pt);
  const auto ap = classify_active(e, tol);
  a.generic = cq::check_all(e, ap, tol);
  a.gamma = assemble_gamma(I, a.blocks);
  return a;
}

TriState generic(const Analysed& a, cq::CqName n) { return a.generic.find(n)->status; }

}  // namespace

// ---------------------------------------------------------------------------
// Data and folds

TEST(Csv, HeaderAutodetectAndLabelMapping) {
  std::istringstream with("f1,f2,y\n1.5,2,1\n-1,0.25,0\n");
  const auto a = parse_csv(with);
  EXPECT_EQ(a.size(), 2);
  EXPECT_EQ(a.dim(), 2);
  EXPECT_EQ(a.labels(1), -1.0);
  EXPECT_EQ(a.features(0, 0), 1.5);
  std::istringstream without("1.5,2,1\n-1,0.25,-1\n");
  const auto b = parse_csv(without);
  EXPECT_EQ(b.features, a.features);
  EXPECT_EQ(b.labels, a.labels);
}

TEST(Csv, MalformedInputIsAParseError) {
  std::istringstream bad_label("1,2,3\n");
  EXPECT_THROW(parse_csv(bad_label), ParseError);
  std::istringstream ragged("1,2,1\n1,1\n");
  EXPECT_THROW(parse_csv(ragged), ParseError);
  std::istringstream junk("1,2,1\n2,x,1\n");
  EXPECT_THROW(parse_csv(junk), ParseError);
  std::istringstream empty("");
  EXPECT_THROW(parse_csv(empty), ParseError);
}

TEST(Split, TwoFoldsDisjointAndDeterministic) {
  const auto ds = dataset(6, 2, 1);
  const auto a = split_folds(ds, 2, 1, 2, 99);
  const auto b = split_folds(ds, 2, 1, 2, 99);
  ASSERT_EQ(a.validation_indices.size(), 2u);
  for (Index t = 0; t < 2; ++t) {
    const auto& v = a.validation_indices[static_cast<std::size_t>(t)];
    const auto& tr = a.training_indices[static_cast<std::size_t>(t)];
    EXPECT_EQ(v.size(), 1u);
    EXPECT_EQ(tr.size(), 2u);
    std::set<Index> s(v.begin(), v.end());
    for (Index j : tr) EXPECT_FALSE(s.count(j));
  }
  EXPECT_EQ(a.validation_indices, b.validation_indices);
  EXPECT_EQ(a.training_indices, b.training_indices);
}

TEST(Split, SingleFoldPartitionAndInsufficientData) {
  const auto ds = dataset(7, 2, 2);
  const auto s = split_folds(ds, 1, 4, 3, 5);
  std::set<Index> all(s.validation_indices[0].begin(), s.validation_indices[0].end());
  all.insert(s.training_indices[0].begin(), s.training_indices[0].end());
  EXPECT_EQ(all.size(), 7u);
  EXPECT_THROW(split_folds(ds, 1, 5, 3, 5), StructuralError);
  EXPECT_THROW(split_folds(ds, 3, 3, 1, 5), StructuralError);
}

// ---------------------------------------------------------------------------
// Instance construction

TEST(Instance, SmallestLayout) {
  const auto ds = dataset(3, 2, 3);
  const auto I = build_instance(ds, split_folds(ds, 1, 1, 2, 4));
  EXPECT_EQ(I.n(), 7);
  EXPECT_EQ(I.P.rows(), 6);
  EXPECT_EQ(I.P.cols(), 7);
  Vector c = Vector::Zero(7);
  c(1) = 1.0;
  EXPECT_EQ(I.c, c);
}

TEST(Instance, ZeroFeaturesGiveZeroGramBlocks) {
  Dataset ds;
  ds.features = Matrix::Zero(5, 3);
  ds.labels = vec({1, -1, 1, -1, 1});
  const auto I = build_instance(ds, split_folds(ds, 1, 2, 3, 0));
  EXPECT_EQ(I.K_AB.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(I.K_BB.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Instance, MatchesHandBuiltConstructor) {
  std::mt19937_64 rng(8);
  for (int k = 0; k < 20; ++k) {
    InstanceShape s{3, 1 + k % 3, 1 + (k / 3) % 4, 2 + k % 3};
    const auto I = random_instance(rng, s, false);
    std::vector<Matrix> As, Bs;
    for (Index t = 0; t < I.T; ++t) {
      As.push_back(I.A.block(t * I.m1, t * I.p, I.m1, I.p));
      Bs.push_back(I.B.block(t * I.m2, t * I.p, I.m2, I.p));
    }
    const auto h = oracle::hand_built(As, Bs);
    ASSERT_TRUE(I.P.isApprox(h.P, 1e-14) || (I.P - h.P).cwiseAbs().maxCoeff() < 1e-14);
    ASSERT_EQ(I.Q, h.Q);
    ASSERT_EQ(I.a, h.a);
    ASSERT_EQ(I.c, h.c);
  }
}

// ---------------------------------------------------------------------------
// Lower level

TEST(LowerLevel, ZeroBoxGivesZero) {
  const auto I = BhoInstance::from_blocks({rows({{1, 0}})}, {rows({{1, 2}, {0, 1}})});
  EXPECT_EQ(lower_level_solve(I, 0, 0.0), Vector::Zero(2));
}

TEST(LowerLevel, OneDimensionalMinimiser) {
  const auto I = BhoInstance::from_blocks({rows({{1}})}, {rows({{2}})});
  EXPECT_NEAR(lower_level_solve(I, 0, 100.0)(0), 0.25, 1e-10);
}

TEST(LowerLevel, ResidualOracle) {
  std::mt19937_64 rng(31);
  for (int k = 0; k < 30; ++k) {
    const auto I = random_instance(rng, random_shape(rng), false);
    const double C = random_C(rng);
    const Vector al = lower_level_solve_all(I, C);
    for (Index t = 0; t < I.T; ++t) {
      const Matrix K = I.K_BB.block(t * I.m2, t * I.m2, I.m2, I.m2);
      const Vector a = al.segment(t * I.m2, I.m2);
      // Projected-gradient fixed point: a = clamp(a - (K a - 1), 0, C).
      const Vector step = (a - (K * a - Vector::Ones(I.m2))).cwiseMax(0.0).cwiseMin(C);
      ASSERT_LE((step - a).cwiseAbs().maxCoeff(), 1e-8) << "draw " << k;
    }
  }
}

TEST(LowerLevel, NegativeCIsRejected) {
  const auto I = BhoInstance::from_blocks({rows({{1}})}, {rows({{2}})});
  EXPECT_THROW(lower_level_solve(I, 0, -1.0), StructuralError);
}

// ---------------------------------------------------------------------------
// Point assembly and objective

TEST(Assemble, PerfectClassification) {
  const auto I = BhoInstance::from_blocks({rows({{1}, {2}})}, {rows({{2}})});
  const auto ap = assemble_feasible_point(I, 1.0, vec({0.25}), Tolerances{});
  EXPECT_EQ(ap.point.zeta, Vector::Zero(2));
  EXPECT_EQ(ap.point.z, Vector::Zero(2));
  EXPECT_EQ(validation_error(I, ap.point), 0.0);
}

TEST(Assemble, HalfMisclassified) {
  const auto I = BhoInstance::from_blocks({rows({{1}, {-1}})}, {rows({{2}})});
  const auto ap = assemble_feasible_point(I, 100.0, lower_level_solve_all(I, 100.0), Tolerances{});
  EXPECT_EQ(validation_error(I, ap.point), 0.5);
  EXPECT_EQ(validation_error(I, ap.point), oracle::misclassification_ratio(I, ap.point.alpha));
  EXPECT_TRUE(check_feasibility(to_evaluation(I, ap.point), Tolerances{}).feasible);
}

TEST(Assemble, ZeroCFlagsEveryValidationPoint) {
  const auto I = BhoInstance::from_blocks({rows({{1}, {-1}})}, {rows({{2}})});
  const auto ap = assemble_feasible_point(I, 0.0, lower_level_solve_all(I, 0.0), Tolerances{});
  EXPECT_EQ(ap.point.alpha, Vector::Zero(1));
  EXPECT_EQ(ap.point.xi, Vector::Ones(1));
  EXPECT_EQ(ap.boundary_validation.size(), 2u);
  EXPECT_TRUE(ap.distinct_classification_violated());
}

TEST(Assemble, InfeasibleAlphaIsRejected) {
  const auto I = BhoInstance::from_blocks({rows({{1}})}, {rows({{2}})});
  // alpha above C breaks the box pair.
  EXPECT_THROW(assemble_feasible_point(I, 0.1, vec({0.25}), Tolerances{}), InfeasibleConstructionError);
}

TEST(ValidationError, Examples) {
  const auto good = BhoInstance::from_blocks({rows({{1}, {3}})}, {rows({{2}})});
  const auto bad = BhoInstance::from_blocks({rows({{-1}, {-3}})}, {rows({{2}})});
  EXPECT_EQ(validation_error(good, assemble_feasible_point(good, 1.0, vec({0.25}), Tolerances{}).point), 0.0);
  EXPECT_EQ(validation_error(bad, assemble_feasible_point(bad, 1.0, vec({0.25}), Tolerances{}).point), 1.0);
  const auto two = BhoInstance::from_blocks({rows({{1}, {1}}), rows({{1}, {-1}})}, {rows({{2}}), rows({{2}})});
  const auto pt = assemble_feasible_point(two, 1.0, vec({0.25, 0.25}), Tolerances{}).point;
  EXPECT_EQ(validation_error(two, pt), 0.25);
}

TEST(ValidationError, MatchesRawSampleCount) {
  std::mt19937_64 rng(41);
  for (int k = 0; k < 50; ++k) {
    const auto s = random_shape(rng);
    const auto ds = random_dataset(rng, s.T * s.m1 + s.m2 + 2, s.p, false);
    const auto fs = split_folds(ds, s.T, s.m1, s.m2, rng());
    const auto I = build_instance(ds, fs);
    const double C = random_C(rng);
    const auto ap = assemble_feasible_point(I, C, lower_level_solve_all(I, C), Tolerances{});
    if (ap.distinct_classification_violated()) continue;
    ASSERT_EQ(validation_error(I, ap.point), oracle::misclassification_ratio(ds, fs, ap.point.alpha));
  }
}

// ---------------------------------------------------------------------------
// Lambda/Psi classes

TEST(LambdaPsi, AllInteriorIsLambda3Plus) {
  // K = I, alpha = 1 solves the box QP with C = 2 and no slack.
  const auto I = BhoInstance::from_blocks({rows({{1, 1}})}, {rows({{1, 0}, {0, 1}})});
  const auto pt = assemble_feasible_point(I, 2.0, vec({1, 1}), Tolerances{}).point;
  const auto p = classify_lambda_psi(I, pt, Tolerances{});
  EXPECT_EQ(p.Lambda3_plus, (IndexList{0, 1}));
  EXPECT_TRUE(p.I_GH3.empty() && p.I_GH4.empty());
}

TEST(LambdaPsi, CraftedLowerBiactive) {
  // Rows b1 = b2 = (1, 0): alpha = (0, 1) gives (B B^T alpha)_1 = 1 with alpha_1 = 0.
  const auto I = BhoInstance::from_blocks({rows({{1, 0}})}, {rows({{1, 0}, {1, 0}})});
  const auto pt = assemble_feasible_point(I, 2.0, vec({0, 1}), Tolerances{}).point;
  EXPECT_EQ(pt.xi(0), 0.0);
  const auto p = classify_lambda_psi(I, pt, Tolerances{});
  EXPECT_EQ(p.Lambda1, IndexList{0});
  EXPECT_EQ(p.I_GH3, IndexList{0});
}

TEST(LambdaPsi, IndexRelationsOnGenericPoints) {
  std::mt19937_64 rng(43);
  int checked = 0;
  for (int k = 0; k < 60; ++k) {
    const auto I = random_instance(rng, random_shape(rng), false);
    const double C = random_C(rng);
    const auto ap = assemble_feasible_point(I, C, lower_level_solve_all(I, C), Tolerances{});
    const auto a = analyse(I, ap.point);
    if (a.pat.flagged()) continue;
    ++checked;
    ASSERT_TRUE(check_index_relations(a.blocks, a.pat).empty()) << "draw " << k;
  }
  EXPECT_GT(checked, 30);
}

TEST(LambdaPsi, ZeroCIsAClassificationError) {
  const auto I = BhoInstance::from_blocks({rows({{1}})}, {rows({{2}})});
  const auto pt = assemble_feasible_point(I, 0.0, vec({0}), Tolerances{}).point;
  EXPECT_THROW(classify_lambda_psi(I, pt, Tolerances{}), ClassificationError);
}

// ---------------------------------------------------------------------------
// Gamma

TEST(Gamma, StrictComplementarityRowCount) {
  const auto I = BhoInstance::from_blocks({rows({{1, 1}})}, {rows({{1, 0}, {0, 1}})});
  const auto pt = assemble_feasible_point(I, 2.0, vec({1, 1}), Tolerances{}).point;
  const auto a = analyse(I, pt);
  ASSERT_EQ(a.blocks.total_GH(), 0u);
  EXPECT_EQ(a.gamma.rows.rows(), I.n() - 1);
}

TEST(Gamma, MatchesGenericBundleOnRandomAndForcedPoints) {
  std::mt19937_64 rng(47);
  for (int k = 0; k < 60; ++k) {
    auto I = random_instance(rng, random_shape(rng), false);
    GeneratedPoint g{I, random_C(rng), lower_level_solve_all(I, 1.0), "t"};
    g.alpha = lower_level_solve_all(g.instance, g.C);
    if (k % 2) force_lower_biactive(g, 1, rng);
    const auto pt = assemble_feasible_point(g.instance, g.C, g.alpha, Tolerances{}).point;
    const auto blocks = block_index_sets(g.instance, pt, Tolerances{});
    const auto gamma = assemble_gamma(g.instance, blocks);
    const auto e = to_evaluation(g.instance, pt);
    const auto bundle = gradient_bundle_tnlp(e, classify_active(e, Tolerances{}));
    ASSERT_FALSE(compare_gamma_to_bundle(gamma, bundle).has_value()) << "draw " << k;
    ASSERT_EQ(gamma.rows.rows(), static_cast<Index>(blocks.total_G() + blocks.total_H() + 2 * blocks.total_GH()));
  }
}

TEST(Gamma, ZeroFeaturesLeaveOnlyUnitEntries) {
  const auto I = BhoInstance::from_blocks({rows({{0, 0}})}, {rows({{0, 0}, {0, 0}})});
  const auto pt = assemble_feasible_point(I, 1.0, lower_level_solve_all(I, 1.0), Tolerances{}).point;
  const auto g = assemble_gamma(I, block_index_sets(I, pt, Tolerances{}));
  for (Index i = 0; i < g.rows.rows(); ++i)
    for (Index j = 0; j < g.rows.cols(); ++j) {
      const double x = g.rows(i, j);
      ASSERT_TRUE(x == 0.0 || x == 1.0 || x == -1.0);
    }
}

// ---------------------------------------------------------------------------
// Theorem checks

TEST(MfcqRTheorem, Examples) {
  const auto indep = BhoInstance::from_blocks({rows({{1, 1}})}, {rows({{1, 0}, {0, 1}})});
  const auto pi = assemble_feasible_point(indep, 2.0, vec({1, 1}), Tolerances{}).point;
  const auto ai = analyse(indep, pi);
  EXPECT_EQ(check_mfcq_r_theorem(indep, ai.pat, Tolerances{}).status, TriState::holds);
  EXPECT_EQ(generic(ai, cq::CqName::mpec_mfcq_r), TriState::holds);

  // Duplicate rows (1, 0) with alpha = (0.5, 0.5): both in Lambda3+.
  const auto dup = BhoInstance::from_blocks({rows({{1, 0}})}, {rows({{1, 0}, {1, 0}})});
  const auto pd = assemble_feasible_point(dup, 2.0, vec({0.5, 0.5}), Tolerances{}).point;
  const auto ad = analyse(dup, pd);
  ASSERT_EQ(ad.pat.Lambda3_plus.size(), 2u);
  EXPECT_EQ(check_mfcq_r_theorem(dup, ad.pat, Tolerances{}).status, TriState::undecided);
  EXPECT_NE(generic(ad, cq::CqName::mpec_mfcq_r), TriState::undecided);

  // Everything in Lambda2: the rank condition is vacuous.
  LambdaPsiPattern pat;
  pat.Lambda2 = {0, 1};
  EXPECT_EQ(check_mfcq_r_theorem(indep, pat, Tolerances{}).status, TriState::holds);
}

TEST(LicqTheorem, StrictComplementarityHolds) {
  const auto I = BhoInstance::from_blocks({rows({{1, 1}})}, {rows({{1, 0}, {0, 1}})});
  const auto a = analyse(I, assemble_feasible_point(I, 2.0, vec({1, 1}), Tolerances{}).point);
  const auto r = check_licq_theorem(I, a.pat, Tolerances{});
  EXPECT_EQ(r.verdict.status, TriState::holds);
  EXPECT_EQ(r.branch, 2);
  EXPECT_EQ(generic(a, cq::CqName::mpec_licq), TriState::holds);
}

TEST(LicqTheorem, TwoBiactiveEntriesFail) {
  // b1 = b2 = (1, 0), alpha = (0, 1), C = 1: entry 0 in Lambda1, entry 1 in Lambda3c.
  const auto I = BhoInstance::from_blocks({rows({{1, 0}})}, {rows({{1, 0}, {1, 0}})});
  const auto a = analyse(I, assemble_feasible_point(I, 1.0, vec({0, 1}), Tolerances{}).point);
  ASSERT_EQ(a.pat.I_GH3, IndexList{0});
  ASSERT_EQ(a.pat.I_GH4, IndexList{1});
  const auto r = check_licq_theorem(I, a.pat, Tolerances{});
  EXPECT_EQ(r.verdict.status, TriState::fails);
  EXPECT_EQ(r.branch, 1);
  EXPECT_EQ(generic(a, cq::CqName::mpec_licq), TriState::fails);
}

TEST(LicqTheorem, SingleLowerBiactiveWithNonzeroAHat) {
  // b1 = (2, 0), b2 = (0.5, 0), alpha = (0, 1), C = 1: s = (1, 0.25), so
  // entry 0 is in Lambda1 and entry 1 in Lambda_u; a_hat = K(0,1) = 1.
  const auto I = BhoInstance::from_blocks({rows({{1, 0}})}, {rows({{2, 0}, {0.5, 0}})});
  const auto a = analyse(I, assemble_feasible_point(I, 1.0, vec({0, 1}), Tolerances{}).point);
  ASSERT_EQ(a.pat.Lambda1, IndexList{0});
  ASSERT_EQ(a.pat.Lambda_u, IndexList{1});
  const auto r = check_licq_theorem(I, a.pat, Tolerances{});
  EXPECT_EQ(r.verdict.status, TriState::holds);
  EXPECT_EQ(r.branch, 3);
  ASSERT_TRUE(r.a_hat.has_value());
  EXPECT_NEAR(*r.a_hat, 1.0, 1e-12);
  EXPECT_EQ(generic(a, cq::CqName::mpec_licq), TriState::holds);
  const auto rank = numeric::numerical_rank(a.gamma.rows, Tolerances{}.rank_rel_tol);
  EXPECT_EQ(rank.rank, a.gamma.rows.rows());
}

TEST(LicqTheorem, EmptyLambdaUGivesVanishingAHat) {
  // The crafted lower-biactive point with C = 2: Lambda_u is empty, a_hat = 0.
  const auto I = BhoInstance::from_blocks({rows({{1, 0}})}, {rows({{1, 0}, {1, 0}})});
  const auto a = analyse(I, assemble_feasible_point(I, 2.0, vec({0, 1}), Tolerances{}).point);
  ASSERT_EQ(a.pat.Lambda1, IndexList{0});
  ASSERT_TRUE(a.pat.Lambda_u.empty());
  const auto r = check_licq_theorem(I, a.pat, Tolerances{});
  EXPECT_EQ(r.verdict.status, TriState::fails);
  EXPECT_EQ(r.branch, 5);
  EXPECT_EQ(generic(a, cq::CqName::mpec_licq), TriState::fails);
}

TEST(LicqTheorem, FlaggedPointIsUndecided) {
  // Validation sample (1, -1) against alpha = (1, 1) sits on the margin.
  const auto I = BhoInstance::from_blocks({rows({{1, -1}})}, {rows({{1, 0}, {0, 1}})});
  const auto a = analyse(I, assemble_feasible_point(I, 2.0, vec({1, 1}), Tolerances{}).point);
  EXPECT_TRUE(a.pat.flagged());
  const auto r = check_licq_theorem(I, a.pat, Tolerances{});
  EXPECT_EQ(r.verdict.status, TriState::undecided);
  EXPECT_EQ(r.branch, 0);
}

TEST(BhoProperties, TightenedEqualsLicqAndAffineAcqHolds) {
  std::mt19937_64 rng(53);
  for (int k = 0; k < 40; ++k) {
    const auto I = random_instance(rng, random_shape(rng), false);
    const double C = random_C(rng);
    const auto ap = assemble_feasible_point(I, C, lower_level_solve_all(I, C), Tolerances{});
    const auto a = analyse(I, ap.point);
    ASSERT_EQ(generic(a, cq::CqName::mpec_mfcq_t), generic(a, cq::CqName::mpec_licq)) << "draw " << k;
    ASSERT_EQ(generic(a, cq::CqName::mpec_acq_affine), TriState::holds);
  }
}

TEST(BhoProperties, DuplicateRowsLeaveTheoremUndecidedButGenericDecides) {
  std::mt19937_64 rng(59);
  int undecided = 0;
  for (int k = 0; k < 40; ++k) {
    auto shape = random_shape(rng);
    shape.m2 = std::max<Index>(shape.m2, 3);
    auto I = random_instance(rng, shape, false);
    duplicate_training_row(I, rng);
    const double C = random_C(rng, 0.0, 2.0);
    const auto ap = assemble_feasible_point(I, C, lower_level_solve_all(I, C), Tolerances{});
    const auto a = analyse(I, ap.point);
    const auto th = check_mfcq_r_theorem(I, a.pat, Tolerances{});
    if (th.status == TriState::undecided) {
      ++undecided;
      EXPECT_NE(generic(a, cq::CqName::mpec_mfcq_r), TriState::undecided);
    }
  }
  EXPECT_GT(undecided, 0);
}
