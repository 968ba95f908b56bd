#include <gtest/gtest.h>

#include <random>

#include "mpeccq/cq/checkers.hpp"
#include "mpeccq/report/fixtures.hpp"

using namespace mpeccq;
using cq::CqName;
using cq::TriState;

namespace {

struct At {
  PointEvaluation eval;
  ActivePattern pat;
};

At at(PointEvaluation e) {
  auto p = classify_active(e, Tolerances{});
  return {std::move(e), std::move(p)};
}

const Matrix& grads(const PointEvaluation& e, Family f) {
  switch (f) {
    case Family::g: return e.g_grads;
    case Family::h: return e.h_grads;
    case Family::G: return e.G_grads;
    default: return e.H_grads;
  }
}

// Recomputes Σ coef_k · orientation_k · ∇(row k) from the raw record.
Vector combination(const PointEvaluation& e, const cq::MultiplierCertificate& c) {
  Vector s = Vector::Zero(e.point.size());
  for (std::size_t k = 0; k < c.tags.size(); ++k) {
    const auto& t = c.tags[k];
    s += c.witness.coefficients(static_cast<Index>(k)) * t.orientation * grads(e, t.family).row(t.index).transpose();
  }
  return s;
}

double coef(const cq::MultiplierCertificate& c, Family f, Index i) {
  double v = 0.0;
  for (std::size_t k = 0; k < c.tags.size(); ++k)
    if (c.tags[k].family == f && c.tags[k].index == i) v += c.witness.coefficients(static_cast<Index>(k));
  return v;
}

PointEvaluation pair_record(const Matrix& G, const Matrix& H, Vector Gv, Vector Hv) {
  PointEvaluation e;
  e.point = Vector::Zero(G.cols());
  e.g_vals = Vector(0);
  e.h_vals = Vector(0);
  e.g_grads = Matrix(0, G.cols());
  e.h_grads = Matrix(0, G.cols());
  e.G_grads = G;
  e.H_grads = H;
  e.G_vals = std::move(Gv);
  e.H_vals = std::move(Hv);
  e.affine = true;
  return e;
}

}  // namespace

TEST(Licq, Examples) {
  auto e1 = at(report::fixture_e1());
  const auto v1 = cq::check_mpec_licq(e1.eval, e1.pat, Tolerances{});
  EXPECT_EQ(v1.status, TriState::fails);
  ASSERT_TRUE(std::holds_alternative<numeric::RankResult>(v1.certificate));
  EXPECT_EQ(std::get<numeric::RankResult>(v1.certificate).rank, 3);

  Matrix G(1, 2), H(1, 2);
  G << 1, 0;
  H << 0, 1;
  auto single = at(pair_record(G, H, Vector::Constant(1, 3.0), Vector::Zero(1)));
  EXPECT_EQ(single.pat.I_H, IndexList{0});
  EXPECT_EQ(cq::check_mpec_licq(single.eval, single.pat, Tolerances{}).status, TriState::holds);

  auto e3 = at(report::fixture_e3());
  EXPECT_EQ(cq::check_mpec_licq(e3.eval, e3.pat, Tolerances{}).status, TriState::fails);
}

TEST(MfcqT, Examples) {
  auto e1 = at(report::fixture_e1());
  EXPECT_EQ(cq::check_mpec_mfcq_t(e1.eval, e1.pat, Tolerances{}).status, TriState::holds);

  auto e2 = at(report::fixture_e2());
  const auto v2 = cq::check_mpec_mfcq_t(e2.eval, e2.pat, Tolerances{});
  ASSERT_EQ(v2.status, TriState::fails);
  const auto& c = std::get<cq::MultiplierCertificate>(v2.certificate);
  EXPECT_LT(combination(e2.eval, c).cwiseAbs().maxCoeff(), 1e-9);
  const double d = coef(c, Family::g, 0);
  EXPECT_GT(d, 0.0);
  EXPECT_NEAR(coef(c, Family::G, 0), d, 1e-12);
  EXPECT_NEAR(coef(c, Family::H, 0), d, 1e-12);

  // Interior point: nothing active.
  auto bare = at(pair_record(Matrix::Identity(1, 1), Matrix::Identity(1, 1), Vector::Ones(1), Vector::Zero(1)));
  bare.pat = ActivePattern{};
  EXPECT_EQ(cq::check_mpec_mfcq_t(bare.eval, bare.pat, Tolerances{}).status, TriState::holds);
}

TEST(MfcqR, Examples) {
  auto e3 = at(report::fixture_e3());
  EXPECT_EQ(cq::check_mpec_mfcq_r(e3.eval, e3.pat, Tolerances{}).status, TriState::holds);

  // At the second counterexample NNAMCQ holds, so the weaker relaxed condition
  // must hold too; the relaxed rows g, -G, -H all point into the negative orthant.
  auto e2 = at(report::fixture_e2());
  EXPECT_EQ(cq::check_mpec_mfcq_r(e2.eval, e2.pat, Tolerances{}).status, TriState::holds);
}

TEST(MfcqR, EqualsTightenedUnderStrictComplementarity) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> val(-2, 2), coin(0, 1);
  for (int k = 0; k < 200; ++k) {
    const Index n = 3, l = 3;
    Matrix G(l, n), H(l, n);
    for (Index i = 0; i < l; ++i)
      for (Index j = 0; j < n; ++j) {
        G(i, j) = val(rng);
        H(i, j) = val(rng);
      }
    Vector Gv = Vector::Zero(l), Hv = Vector::Zero(l);
    for (Index i = 0; i < l; ++i) (coin(rng) ? Gv : Hv)(i) = 1.0;
    auto p = at(pair_record(G, H, Gv, Hv));
    ASSERT_TRUE(p.pat.I_GH.empty());
    ASSERT_EQ(cq::check_mpec_mfcq_t(p.eval, p.pat, Tolerances{}).status,
              cq::check_mpec_mfcq_r(p.eval, p.pat, Tolerances{}).status);
  }
}

TEST(Nnamcq, Examples) {
  auto e2 = at(report::fixture_e2());
  EXPECT_EQ(cq::check_nnamcq(e2.eval, e2.pat, Tolerances{}).status, TriState::holds);

  auto e3 = at(report::fixture_e3());
  const auto v3 = cq::check_nnamcq(e3.eval, e3.pat, Tolerances{});
  ASSERT_EQ(v3.status, TriState::fails);
  const auto& c = std::get<cq::MultiplierCertificate>(v3.certificate);
  EXPECT_LT(combination(e3.eval, c).cwiseAbs().maxCoeff(), 1e-9);
  const double g1 = coef(c, Family::G, 0), g2 = coef(c, Family::G, 1);
  EXPECT_GT(std::abs(g1), 0.0);
  EXPECT_NEAR(g1, -g2, 1e-12);
  EXPECT_NEAR(coef(c, Family::H, 0), 0.0, 1e-12);
  EXPECT_NEAR(coef(c, Family::H, 1), 0.0, 1e-12);

  auto indep = at(pair_record(Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                              Vector::Unit(2, 0), Vector::Unit(2, 1)));
  ASSERT_TRUE(indep.pat.I_GH.empty());
  EXPECT_EQ(cq::check_nnamcq(indep.eval, indep.pat, Tolerances{}).status, TriState::holds);
}

TEST(Nnamcq, CapGivesUndecided) {
  auto e3 = at(report::fixture_e3());
  EXPECT_EQ(cq::check_nnamcq(e3.eval, e3.pat, Tolerances{}, 1).status, TriState::undecided);
  EXPECT_EQ(cq::check_mpec_gmfcq_direct(e3.eval, e3.pat, Tolerances{}, 1).status, TriState::undecided);
}

TEST(Gmfcq, Examples) {
  auto e1 = at(report::fixture_e1());
  auto e2 = at(report::fixture_e2());
  auto e3 = at(report::fixture_e3());
  EXPECT_EQ(cq::check_mpec_gmfcq_direct(e1.eval, e1.pat, Tolerances{}).status, TriState::holds);
  EXPECT_EQ(cq::check_mpec_gmfcq_direct(e2.eval, e2.pat, Tolerances{}).status, TriState::holds);
  EXPECT_EQ(cq::check_mpec_gmfcq_direct(e3.eval, e3.pat, Tolerances{}).status, TriState::fails);
}

TEST(AcqAffine, Examples) {
  EXPECT_EQ(cq::check_acq_affine(report::fixture_e1().affine).status, TriState::holds);
  EXPECT_EQ(cq::check_acq_affine(report::fixture_e3().affine).status, TriState::undecided);
}

TEST(Audit, FixturesAreConsistentAndContradictionIsFlagged) {
  for (const auto& f : report::fixtures()) {
    auto p = at(f.eval);
    EXPECT_TRUE(cq::check_all(p.eval, p.pat, Tolerances{}).implication_violations.empty()) << f.name;
  }
  cq::CqReport synthetic;
  cq::CqVerdict licq, mfcqt;
  licq.name = CqName::mpec_licq;
  licq.status = TriState::holds;
  mfcqt.name = CqName::mpec_mfcq_t;
  mfcqt.status = TriState::fails;
  synthetic.verdicts = {licq, mfcqt};
  const auto v = cq::audit_implications(synthetic);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].premise, CqName::mpec_licq);
  EXPECT_EQ(v[0].conclusion, CqName::mpec_mfcq_t);
}

namespace {

PointEvaluation random_affine(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dim(1, 4), val(-2, 2), coin(0, 2);
  const Index n = dim(rng), m = dim(rng) - 1, l = dim(rng);
  PointEvaluation e;
  e.point = Vector::Zero(n);
  auto mat = [&](Index r) {
    Matrix x(r, n);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < n; ++j) x(i, j) = val(rng);
    return x;
  };
  e.g_grads = mat(m);
  e.h_grads = Matrix(0, n);
  e.G_grads = mat(l);
  e.H_grads = mat(l);
  e.g_vals = Vector::Zero(m);
  e.h_vals = Vector(0);
  e.G_vals = Vector::Zero(l);
  e.H_vals = Vector::Zero(l);
  for (Index i = 0; i < l; ++i) {
    const int c = coin(rng);
    if (c == 1) e.G_vals(i) = 1.0;
    if (c == 2) e.H_vals(i) = 1.0;
  }
  e.affine = true;
  return e;
}

std::vector<TriState> statuses(const PointEvaluation& e) {
  const auto p = classify_active(e, Tolerances{});
  std::vector<TriState> out;
  for (const auto& v : cq::check_all(e, p, Tolerances{}).verdicts) out.push_back(v.status);
  return out;
}

}  // namespace

TEST(CqProperties, RescalingAndPermutationInvariance) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> scale(0.2, 5.0);
  for (int k = 0; k < 200; ++k) {
    const auto e = random_affine(rng);
    const auto base = statuses(e);
    auto s = e;
    for (Index i = 0; i < s.g_grads.rows(); ++i) s.g_grads.row(i) *= scale(rng);
    for (Index i = 0; i < s.G_grads.rows(); ++i) s.G_grads.row(i) *= scale(rng);
    for (Index i = 0; i < s.H_grads.rows(); ++i) s.H_grads.row(i) *= scale(rng);
    ASSERT_EQ(statuses(s), base) << "rescale draw " << k;
    auto r = e;
    r.g_grads = e.g_grads.colwise().reverse();
    r.G_grads = e.G_grads.colwise().reverse();
    r.H_grads = e.H_grads.colwise().reverse();
    r.G_vals = e.G_vals.reverse();
    r.H_vals = e.H_vals.reverse();
    ASSERT_EQ(statuses(r), base) << "permutation draw " << k;
  }
}
