#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "eccbo/williams_otto.hpp"

using namespace eccbo;
using namespace eccbo::wo;

namespace {

WoState make_state(std::initializer_list<double> x, double w = kDefaultHoldup) {
  WoState s;
  int i = 0;
  for (double v : x) s.x[i++] = v;
  s.holdup_w = w;
  return s;
}

// Unclamped RK4, written out against the balance equations directly.
Composition rhs(const Composition& x, double w, double fa, double fb, double t) {
  const double k1 = 1.6599e6 * std::exp(-6666.7 / t);
  const double k2 = 7.2177e8 * std::exp(-8333.3 / t);
  const double k3 = 2.6745e12 * std::exp(-11111.0 / t);
  const double r1 = k1 * x[0] * x[1] * w, r2 = k2 * x[1] * x[2] * w, r3 = k3 * x[2] * x[5] * w;
  const double f = fa + fb;
  Composition d;
  d[0] = (fa - f * x[0] - r1) / w;
  d[1] = (fb - f * x[1] - r1 - r2) / w;
  d[2] = (-f * x[2] + 2 * r1 - 2 * r2 - r3) / w;
  d[3] = (-f * x[3] + 2 * r2) / w;
  d[4] = (-f * x[4] + 1.5 * r3) / w;
  d[5] = (-f * x[5] + r2 - 0.5 * r3) / w;
  return d;
}

Composition rk4_raw(Composition x, double w, const WoInputs& u, double dt, int n) {
  const double h = dt / n;
  for (int i = 0; i < n; ++i) {
    const Composition a = rhs(x, w, u.f_a, u.f_b, u.t_r);
    const Composition b = rhs(x + 0.5 * h * a, w, u.f_a, u.f_b, u.t_r);
    const Composition c = rhs(x + 0.5 * h * b, w, u.f_a, u.f_b, u.t_r);
    const Composition d = rhs(x + h * c, w, u.f_a, u.f_b, u.t_r);
    x += h / 6.0 * (a + 2 * b + 2 * c + d);
  }
  return x;
}

}  // namespace

TEST(Rates, ArrheniusAt373K) {
  const auto k = rate_constants(373.0);
  EXPECT_NEAR(k[0], 0.028698155373825158, 1e-15);
  EXPECT_NEAR(k[1], 0.14312029526550027, 1e-14);
  EXPECT_NEAR(k[2], 0.30930724044440816, 1e-14);
}

TEST(Rates, ColdLimitVanishes) {
  const auto k = rate_constants(1.0);
  for (double v : k) EXPECT_LT(v, 1e-300);
}

TEST(Rates, NoBMeansNoFirstTwoReactions) {
  const auto s = make_state({0.5, 0.0, 0.2, 0.1, 0.1, 0.1});
  const Rates r = wo_rates(s, 360.0);
  EXPECT_EQ(r.r1, 0.0);
  EXPECT_EQ(r.r2, 0.0);
  EXPECT_GT(r.r3, 0.0);
}

TEST(Stoichiometry, ColumnsSumToZero) {
  const auto s = stoichiometry();
  for (int j = 0; j < 3; ++j) EXPECT_EQ(s.col(j).sum(), 0.0);
}

TEST(Derivatives, MatchHandEvaluation) {
  const auto s = make_state({0.3, 0.2, 0.1, 0.15, 0.05, 0.2});
  const WoInputs u{1.2, 2.5, 360.0};
  const Composition got = wo_derivatives(s, u);
  const Composition want = rhs(s.x, s.holdup_w, u.f_a, u.f_b, u.t_r);
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(got[i], want[i], 1e-15);
  // first component written out numerically: r1 = k1 * 0.3 * 0.2 * 2105
  const double k1 = 1.6599e6 * std::exp(-6666.7 / 360.0);
  EXPECT_NEAR(got[0], (1.2 - 3.7 * 0.3 - k1 * 0.06 * 2105.0) / 2105.0, 1e-15);
}

TEST(Derivatives, SumToZeroOnSimplex) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    WoState s;
    for (int i = 0; i < 6; ++i) s.x[i] = u(rng);
    s.x /= s.x.sum();
    const WoInputs in{0.5 + 2 * u(rng), 1 + 6 * u(rng), 320 + 100 * u(rng)};
    ASSERT_NEAR(wo_derivatives(s, in).sum(), 0.0, 1e-16);
  }
}

TEST(Derivatives, NoReactionMeansPureDilution) {
  // x_b = x_c = 0 switches off all three reactions
  const auto s = make_state({0.3, 0.0, 0.0, 0.2, 0.2, 0.3});
  const WoInputs u{1.0, 3.0, 400.0};
  Composition dil;
  dil << (1.0 - 4.0 * 0.3), 3.0, 0.0, -0.8, -0.8, -1.2;
  dil /= s.holdup_w;
  EXPECT_LT((wo_derivatives(s, u) - dil).cwiseAbs().maxCoeff(), 1e-18);
}

TEST(Cost, ProfitExpression) {
  auto s = make_state({0.5, 0.5, 0, 0, 0, 0});
  EXPECT_DOUBLE_EQ(wo_cost(s, {1.0, 2.0, 350.0}), -79.23 - 2 * 118.34);
  s = make_state({0.1, 0.1, 0.1, 0.2, 0.1, 0.4});
  EXPECT_DOUBLE_EQ(wo_cost(s, {1.5, 2.5, 350.0}), 1043.38 * 0.4 * 4.0 + 20.92 * 0.2 * 4.0 - 79.23 * 1.5 - 118.34 * 2.5);
}

TEST(Integrate, TinyStepIsAnEulerStep) {
  const WoState s0;
  const WoInputs u{1.0, 2.6, 350.0};
  const double dt = 1e-6;
  const WoState s1 = integrate_step(s0, u, dt);
  const Composition rate = (s1.x - s0.x) / dt;
  const Composition f = wo_derivatives(s0, u);
  EXPECT_LT((rate - f).cwiseAbs().maxCoeff(), 1e-4 * f.cwiseAbs().maxCoeff());
}

TEST(Integrate, RejectsBadArguments) {
  EXPECT_THROW(integrate_step(WoState{}, {1.0, 2.6, 350.0}, 0.0), ContractViolation);
  EXPECT_THROW(integrate_step(WoState{}, {1.0, 2.6, 450.0}, 1.0), ContractViolation);
  WoState bad;
  bad.x[0] = NAN;
  EXPECT_THROW(integrate_step(bad, {1.0, 2.6, 350.0}, 1.0), IntegrationBlowup);
}

TEST(Integrate, MatchesIndependentRk4) {
  WoState s;
  const WoInputs u{1.0, 2.6, 350.0};
  Composition ref = s.x;
  for (int k = 0; k < 600; ++k) {
    s = integrate_step(s, u, 1.0);
    ref = rk4_raw(ref, s.holdup_w, u, 1.0, 4);
  }
  EXPECT_LT((s.x - ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Integrate, MassDriftOverHundredThousandSteps) {
  WoState s;
  const WoInputs u{1.3, 3.1, 355.0};
  for (int k = 0; k < 100000; ++k) s = integrate_step(s, u, 1.0);
  EXPECT_LT(std::abs(s.x.sum() - 1.0), 1e-8);
}

TEST(Integrate, StepHalvingAgreesOverOneHour) {
  WoState a, b;
  const WoInputs u{1.0, 2.6, 350.0};
  for (int k = 0; k < 3600; ++k) {
    a = integrate_step(a, u, 1.0, 0.25);
    b = integrate_step(b, u, 1.0, 0.125);
  }
  EXPECT_LT((a.x - b.x).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Integrate, PositivityUnderRandomInputs) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Composition x = WoState{}.x;
  for (int k = 0; k < 20000; ++k) {
    const WoInputs in{0.5 + 2 * u(rng), 0.5 + 9 * u(rng), 320 + 100 * u(rng)};
    x = rk4_raw(x, kDefaultHoldup, in, 1.0, 4);
    ASSERT_GE(x.minCoeff(), -1e-12) << "step " << k;
  }
}

TEST(SteadyState, ConvergesAndConserves) {
  const WoState s = wo_steady_state(1.0, 2.6, 350.0);
  EXPECT_LT(wo_derivatives(s, {1.0, 2.6, 350.0}).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(s.x.sum(), 1.0, 1e-8);
}

TEST(SteadyState, LongIntegrationReachesSameState) {
  WoState s;
  const WoInputs u{1.0, 2.6, 350.0};
  for (int k = 0; k < 40000; ++k) s = integrate_step(s, u, 1.0);
  const WoState ss = wo_steady_state(1.0, 2.6, 350.0);
  EXPECT_LT((s.x - ss.x).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(SteadyState, PairingGainSigns) {
  const double h = 1e-3;
  const WoState base = wo_steady_state(1.0, 2.6, 350.0);
  const WoState hot = wo_steady_state(1.0, 2.6, 350.0 + h, base);
  const WoState more_b = wo_steady_state(1.0, 2.6 + h, 350.0, base);
  EXPECT_GT((hot[G] - base[G]) / h, 0.0);
  EXPECT_LT((more_b[A] - base[A]) / h, 0.0);
}

TEST(SteadyState, SetpointSolveHitsTargets) {
  const auto r = steady_state_at_setpoints(1.0, 0.078, 0.095);
  ASSERT_TRUE(r.has_value());
  EXPECT_NEAR(r->state[G], 0.078, 1e-10);
  EXPECT_NEAR(r->state[A], 0.095, 1e-10);
  EXPECT_LT(wo_derivatives(r->state, {1.0, r->f_b, r->t_r}).cwiseAbs().maxCoeff(), 1e-10);
  const WoState direct = wo_steady_state(1.0, r->f_b, r->t_r, r->state);
  EXPECT_NEAR(direct[G], 0.078, 1e-8);
}

TEST(Oracle, HighFeedPushesXaToLimit) {
  const auto r = wo_true_optimum(1.9, 101);
  EXPECT_NEAR(r.z_a, 0.12, 1e-9);
  EXPECT_NEAR(r.z_g, 0.08, 1e-9);
  EXPECT_NEAR(r.cost, -r.profit, 0.0);
}

TEST(Oracle, NominalFeedHasInteriorXa) {
  const auto r = wo_true_optimum(1.0, 101);
  EXPECT_GT(r.z_a, 0.07 + 1e-3);
  EXPECT_LT(r.z_a, 0.12 - 1e-3);
  // no grid point beats the polished optimum
  for (double za = 0.07; za <= 0.12 + 1e-12; za += 0.005) {
    const auto s = steady_state_at_setpoints(1.0, 0.08, za);
    ASSERT_TRUE(s.has_value());
    EXPECT_LE(s->profit, r.profit + 1e-9);
  }
}

TEST(Oracle, GridDoublingMovesOptimumLittle) {
  for (double fa : {1.0, 1.9}) {
    const auto a = wo_true_optimum(fa, 101);
    const auto b = wo_true_optimum(fa, 201);
    EXPECT_LT(std::abs(a.profit - b.profit), 1e-3 * std::abs(b.profit)) << "F_A " << fa;
  }
}

TEST(Oracle, RejectsCoarseGrid) { EXPECT_THROW(wo_true_optimum(1.0, 50), ContractViolation); }
