#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "eccbo/regulatory.hpp"

using namespace eccbo;
using namespace eccbo::regulatory;

namespace {

// scalar test plant 2 e^{-s} / (10 s + 1), sampled at 0.1 s
constexpr double kK = 2.0, kTau1 = 10.0, kTheta = 1.0, kTauC = 1.0, kDt = 0.1;

struct StepResult {
  std::vector<double> y;
  std::vector<double> u;
};

StepResult simulate(PiLoop& loop, FoptdPlant& plant, int steps, const std::function<double(int)>& sp) {
  StepResult r;
  for (int i = 0; i < steps; ++i) {
    loop.set_setpoint(sp(i));
    const double u = loop.step(plant.output(), kDt);
    r.u.push_back(u);
    r.y.push_back(plant.step(u));
  }
  return r;
}

// First time after `from` at which y stays within band of target to the end.
double settling_time(const std::vector<double>& y, int from, double target, double band) {
  int last_out = from - 1;
  for (int i = from; i < int(y.size()); ++i)
    if (std::abs(y[i] - target) > band) last_out = i;
  return (last_out + 1 - from) * kDt;
}

PiLoop tuned_loop(double u_min, double u_max) {
  return PiLoop::from_tuning("y", "u", simc_tune(kK, kTau1, kTheta, kTauC), u_min, u_max, 0.0, 0.0);
}

}  // namespace

TEST(Simc, HandEvaluatedExample) {
  const auto t = simc_tune(2.0, 10.0, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(t.kc, 2.5);
  EXPECT_DOUBLE_EQ(t.tau_i, 8.0);
}

TEST(Simc, MinBranchSwitchPoint) {
  const auto t = simc_tune(1.5, 20.0, 0.0, 5.0);
  EXPECT_DOUBLE_EQ(t.tau_i, 20.0);
}

TEST(Simc, NegativeGainFlipsOnlyKc) {
  const auto p = simc_tune(3.0, 7.0, 2.0, 4.0);
  const auto n = simc_tune(-3.0, 7.0, 2.0, 4.0);
  EXPECT_DOUBLE_EQ(n.kc, -p.kc);
  EXPECT_DOUBLE_EQ(n.tau_i, p.tau_i);
}

TEST(Simc, ZeroGainIsUncontrollable) {
  EXPECT_THROW(simc_tune(0.0, 1.0, 0.0, 1.0), UncontrollablePairing);
  EXPECT_THROW(simc_tune(1.0, 0.0, 0.0, 1.0), ContractViolation);
}

TEST(PiLoop, ZeroErrorGivesBias) {
  PiLoop loop("y", "u", 3.0, 5.0, -10.0, 10.0, 1, 1.7, 4.0);
  EXPECT_DOUBLE_EQ(loop.step(4.0, 1.0), 1.7);
}

TEST(PiLoop, ProportionalOnly) {
  PiLoop loop("y", "u", 1.0, std::numeric_limits<double>::infinity(), -10.0, 10.0, 1, 0.0, 1.0);
  EXPECT_DOUBLE_EQ(loop.step(0.5, 1.0), 0.5);
}

TEST(PiLoop, DirectionFlipsErrorSign) {
  PiLoop loop("y", "u", 2.0, std::numeric_limits<double>::infinity(), -10.0, 10.0, -1, 0.0, 1.0);
  EXPECT_DOUBLE_EQ(loop.step(0.0, 1.0), -2.0);
}

TEST(PiLoop, RejectsBadConfig) {
  EXPECT_THROW(PiLoop("y", "u", 1.0, 0.0, 0.0, 1.0, 1, 0.0, 0.0), ContractViolation);
  EXPECT_THROW(PiLoop("y", "u", 1.0, 1.0, 1.0, 1.0, 1, 0.0, 0.0), ContractViolation);
  PiLoop ok("y", "u", 1.0, 1.0, 0.0, 1.0, 1, 0.0, 0.0);
  EXPECT_THROW(ok.step(0.0, 0.0), ContractViolation);
}

TEST(PiLoop, NonFiniteMeasurementHoldsOutput) {
  PiLoop loop("y", "u", 1.0, 10.0, -5.0, 5.0, 1, 0.0, 1.0);
  const double u1 = loop.step(0.2, 1.0);
  EXPECT_FALSE(loop.faulted());
  EXPECT_EQ(loop.step(std::nan(""), 1.0), u1);
  EXPECT_TRUE(loop.faulted());
  EXPECT_EQ(loop.step(INFINITY, 1.0), u1);
}

TEST(PiLoop, SetpointStepSettlesWithoutOffset) {
  auto loop = tuned_loop(-100.0, 100.0);
  FoptdPlant plant(kK, kTau1, kTheta, kDt);
  const int steps = int(200.0 / kDt);
  const auto r = simulate(loop, plant, steps, [](int) { return 1.0; });
  const double ts = settling_time(r.y, 0, 1.0, 0.05);
  EXPECT_LE(ts, 4.0 * (kTauC + kTheta) * 5.0);
  EXPECT_LT(std::abs(1.0 - r.y.back()), 1e-4);
}

TEST(PiLoop, OutputAlwaysWithinLimits) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 50.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double lo = -u(rng) * 3.0, hi = u(rng) * 3.0 + 0.01;
    PiLoop loop("y", "u", 10.0 * u(rng) + 0.1, 0.5 + 20.0 * u(rng), lo, hi, trial % 2 ? 1 : -1, 0.0, n(rng));
    for (int k = 0; k < 2000; ++k) {
      const double out = loop.step(n(rng), 0.1 + u(rng));
      ASSERT_GE(out, lo);
      ASSERT_LE(out, hi);
    }
  }
}

TEST(PiLoop, AntiWindupRecovery) {
  const int steps = int(200.0 / kDt);
  auto free_loop = tuned_loop(0.0, 1.2);
  FoptdPlant free_plant(kK, kTau1, kTheta, kDt);
  const double ts_free = settling_time(simulate(free_loop, free_plant, steps, [](int) { return 1.0; }).y, 0, 1.0, 0.05);

  // Unreachable setpoint for 500 s holds the output at u_max, then back to 1.
  auto loop = tuned_loop(0.0, 1.2);
  FoptdPlant plant(kK, kTau1, kTheta, kDt);
  const int sat_steps = int(500.0 / kDt);
  const auto r = simulate(loop, plant, sat_steps + steps,
                          [&](int i) { return i < sat_steps ? 10.0 : 1.0; });
  ASSERT_DOUBLE_EQ(r.u[sat_steps - 1], 1.2);
  const double ts_recover = settling_time(r.y, sat_steps, 1.0, 0.05);
  EXPECT_LE(ts_recover, 3.0 * ts_free);
}

TEST(Selector, ExamplesAndFold) {
  EXPECT_EQ(selector_step({SelectorMode::min, {3.0, 2.0, 2.5}}), 2.0);
  EXPECT_EQ(selector_step({SelectorMode::max, {3.0, 2.0, 2.5}}), 3.0);
  EXPECT_EQ(selector_step({SelectorMode::min, {-4.25}}), -4.25);
  EXPECT_THROW(selector_step({SelectorMode::min, {}}), ContractViolation);

  std::mt19937_64 rng(13);
  std::normal_distribution<double> n(0.0, 10.0);
  for (int k = 0; k < 500; ++k) {
    std::vector<double> in(1 + k % 7);
    for (auto& v : in) v = n(rng);
    const double lo = std::accumulate(in.begin(), in.end(), double(INFINITY), [](double a, double b) { return std::min(a, b); });
    const double hi = std::accumulate(in.begin(), in.end(), -double(INFINITY), [](double a, double b) { return std::max(a, b); });
    ASSERT_EQ(selector_step({SelectorMode::min, in}), lo);
    ASSERT_EQ(selector_step({SelectorMode::max, in}), hi);
  }
}

TEST(Selector, OneMvTwoConstraintsSettlesOnTighterOne) {
  // y1 = 1.0 u (tau 10), limit 3 -> wants u = 3
  // y2 = 2.0 u (tau 5),  limit 4 -> wants u = 2, the binding constraint
  const double dt = 0.1;
  FoptdPlant p1(1.0, 10.0, 0.5, dt), p2(2.0, 5.0, 0.5, dt);
  std::vector<PiLoop> loops = {
      PiLoop::from_tuning("y1", "u", simc_tune(1.0, 10.0, 0.5, 2.0), 0.0, 10.0, 0.0, 3.0),
      PiLoop::from_tuning("y2", "u", simc_tune(2.0, 5.0, 0.5, 2.0), 0.0, 10.0, 0.0, 4.0),
  };
  double u = 0.0;
  for (int k = 0; k < int(600.0 / dt); ++k) {
    const std::array<double, 2> meas = {p1.output(), p2.output()};
    u = override_step(SelectorMode::min, loops, meas, dt);
    p1.step(u);
    p2.step(u);
  }
  EXPECT_NEAR(p2.output(), 4.0, 1e-6);
  EXPECT_LT(p1.output(), 3.0 - 0.5);
  EXPECT_NEAR(u, 2.0, 1e-6);
}

TEST(FoptdPlant, DelayAndGain) {
  FoptdPlant p(3.0, 5.0, 1.0, 0.5);
  EXPECT_EQ(p.step(1.0), 0.0);
  EXPECT_EQ(p.step(1.0), 0.0);
  EXPECT_GT(p.step(1.0), 0.0);
  for (int k = 0; k < 1000; ++k) p.step(1.0);
  EXPECT_NEAR(p.output(), 3.0, 1e-9);
}
