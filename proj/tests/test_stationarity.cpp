#include <gtest/gtest.h>

#include <random>

#include "mpeccq/report/fixtures.hpp"
#include "mpeccq/stationarity.hpp"

using namespace mpeccq;
using stationarity::StationarityClass;

namespace {

ActivePattern pattern(const PointEvaluation& e) { return classify_active(e, Tolerances{}); }

// Hand evaluation of ‖∇f + Σλ∇g − Σγ∇G − Σν∇H‖∞ for the second counterexample.
double e2_residual(const stationarity::MultiplierVector& w) {
  const double r1 = 1.0 - w.lambda(0) - w.gamma(0);
  const double r2 = 1.0 - w.lambda(0) - w.nu(0);
  return std::max(std::abs(r1), std::abs(r2));
}

}  // namespace

TEST(Stationarity, SecondCounterexampleIsStrong) {
  const auto e = report::fixture_e2();
  const auto p = pattern(e);
  const auto v = stationarity::classify_stationarity(e, p, Vector::Ones(2), Tolerances{});
  ASSERT_EQ(v.strongest_class, StationarityClass::strong);
  ASSERT_TRUE(v.witness.has_value());
  const auto& w = *v.witness;
  EXPECT_LE(e2_residual(w), 1e-6);
  EXPECT_GE(w.lambda(0), -1e-12);
  EXPECT_GE(w.gamma(0), -1e-12);
  EXPECT_GE(w.nu(0), -1e-12);
  // The hand solution λ=0, γ=ν=1 is a valid strong witness as well.
  stationarity::MultiplierVector hand{Vector::Zero(1), Vector(0), Vector::Ones(1), Vector::Ones(1)};
  EXPECT_EQ(e2_residual(hand), 0.0);
  EXPECT_TRUE(stationarity::satisfies_class(StationarityClass::strong, hand, e, p, Vector::Ones(2), 1e-12));
}

TEST(Stationarity, InteriorPointIsNotStationary) {
  PointEvaluation e = report::fixture_e2();
  e.g_vals(0) = -1.0;
  e.G_vals(0) = 1.0;
  const auto p = pattern(e);
  ASSERT_TRUE(p.I_g.empty());
  ASSERT_EQ(p.I_H, IndexList{0});
  // Only ∇H = (0,1) is active; ∇f = (1,0) cannot be cancelled.
  const auto v = stationarity::classify_stationarity(e, p, Vector::Unit(2, 0), Tolerances{});
  EXPECT_EQ(v.strongest_class, StationarityClass::not_stationary);
  EXPECT_FALSE(v.witness.has_value());
}

TEST(Stationarity, ZeroGradientIsStrongWithZeroMultipliers) {
  for (const auto& f : report::fixtures()) {
    const auto p = pattern(f.eval);
    const auto v = stationarity::classify_stationarity(f.eval, p, Vector::Zero(f.eval.point.size()), Tolerances{});
    ASSERT_EQ(v.strongest_class, StationarityClass::strong) << f.name;
    const auto& w = *v.witness;
    EXPECT_EQ(w.lambda.cwiseAbs().sum() + w.gamma.cwiseAbs().sum() + w.nu.cwiseAbs().sum(), 0.0) << f.name;
  }
}

TEST(Stationarity, ClassesAreNested) {
  // min -v1 - v2 over 0 <= v1 _|_ v2 >= 0: gamma = nu = -1 is the only
  // multiplier, so the point is C-stationary but not M- or strong.
  PointEvaluation e = report::fixture_e2();
  e.g_grads = Matrix(0, 2);
  e.g_vals = Vector(0);
  const auto p = pattern(e);
  const auto v = stationarity::classify_stationarity(e, p, -Vector::Ones(2), Tolerances{});
  EXPECT_EQ(v.strongest_class, StationarityClass::C);
  ASSERT_TRUE(v.witness.has_value());
  EXPECT_TRUE(stationarity::satisfies_class(StationarityClass::weak, *v.witness, e, p, -Vector::Ones(2), 1e-9));
  EXPECT_FALSE(stationarity::satisfies_class(StationarityClass::M, *v.witness, e, p, -Vector::Ones(2), 1e-9));

  // ∇f = (-1, 1): the unique multiplier gamma = -1, nu = 1 has mixed signs.
  const auto w = stationarity::classify_stationarity(e, p, Vector(Vector::Unit(2, 1) - Vector::Unit(2, 0)),
                                                     Tolerances{});
  EXPECT_EQ(w.strongest_class, StationarityClass::weak);

  // ∇f = (-1, 0): gamma = -1, nu = 0 satisfies the M rule but not strong.
  const auto m = stationarity::classify_stationarity(e, p, Vector(-Vector::Unit(2, 0)), Tolerances{});
  EXPECT_EQ(m.strongest_class, StationarityClass::M);
}

TEST(Stationarity, PositiveScalingKeepsClass) {
  for (const auto& f : report::fixtures()) {
    const auto p = pattern(f.eval);
    const auto a = stationarity::classify_stationarity(f.eval, p, f.grad_f, Tolerances{});
    const auto b = stationarity::classify_stationarity(f.eval, p, 37.5 * f.grad_f, Tolerances{});
    EXPECT_EQ(a.strongest_class, b.strongest_class) << f.name;
  }
}

TEST(Stationarity, CapMarksMAndCUndecided) {
  const auto e = report::fixture_e3();
  const auto p = pattern(e);
  const auto v = stationarity::classify_stationarity(e, p, Vector(-Vector::Ones(3)), Tolerances{}, 1);
  EXPECT_TRUE(v.m_undecided);
  EXPECT_TRUE(v.c_undecided);
}

TEST(KktEquivalence, Examples) {
  const auto e2 = report::fixture_e2();
  EXPECT_TRUE(stationarity::verify_kkt_equivalence(e2, pattern(e2), Vector::Ones(2), Tolerances{}));
  const auto e1 = report::fixture_e1();
  Vector gf(3);
  gf << 0, 1, 1;
  EXPECT_TRUE(stationarity::verify_kkt_equivalence(e1, pattern(e1), gf, Tolerances{}));
  PointEvaluation interior = e2;
  interior.g_vals(0) = -1.0;
  interior.G_vals(0) = 1.0;
  EXPECT_TRUE(stationarity::verify_kkt_equivalence(interior, pattern(interior), Vector::Unit(2, 0), Tolerances{}));
}

TEST(Stationarity, RandomWitnessesSatisfyTheirClass) {
  std::mt19937_64 rng(29);
  std::uniform_int_distribution<int> val(-2, 2), coin(0, 2);
  for (int k = 0; k < 300; ++k) {
    const Index n = 3, l = 2;
    PointEvaluation e;
    e.point = Vector::Zero(n);
    e.g_grads = Matrix(1, n);
    e.h_grads = Matrix(0, n);
    e.G_grads = Matrix(l, n);
    e.H_grads = Matrix(l, n);
    for (Index j = 0; j < n; ++j) {
      e.g_grads(0, j) = val(rng);
      for (Index i = 0; i < l; ++i) {
        e.G_grads(i, j) = val(rng);
        e.H_grads(i, j) = val(rng);
      }
    }
    e.g_vals = Vector::Zero(1);
    e.h_vals = Vector(0);
    e.G_vals = Vector::Zero(l);
    e.H_vals = Vector::Zero(l);
    if (coin(rng) == 0) e.G_vals(1) = 1.0;
    Vector gf(n);
    for (Index j = 0; j < n; ++j) gf(j) = val(rng);
    const auto p = pattern(e);
    const auto v = stationarity::classify_stationarity(e, p, gf, Tolerances{});
    if (v.witness) {
      for (auto c : {StationarityClass::weak, StationarityClass::C, StationarityClass::M, StationarityClass::strong}) {
        if (c > v.strongest_class) break;
        ASSERT_TRUE(stationarity::satisfies_class(c, *v.witness, e, p, gf, 1e-6)) << "draw " << k;
      }
      ASSERT_LE(stationarity::stationarity_residual(e, gf, *v.witness), 1e-6);
    }
    ASSERT_TRUE(stationarity::verify_kkt_equivalence(e, p, gf, Tolerances{})) << "draw " << k;
  }
}
