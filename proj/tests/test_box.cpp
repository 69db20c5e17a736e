#include <random>

#include <gtest/gtest.h>

#include "eccbo/box.hpp"
#include "eccbo/detail/box_minimizer.hpp"

using eccbo::Box;
using Eigen::VectorXd;

TEST(Box, RejectsInvertedOrNonFiniteBounds) {
  EXPECT_THROW(Box(VectorXd::Constant(1, 1.0), VectorXd::Constant(1, 0.0)), eccbo::ContractViolation);
  EXPECT_THROW(Box(VectorXd::Constant(1, 0.0), VectorXd::Constant(1, INFINITY)), eccbo::ContractViolation);
  EXPECT_THROW(Box(VectorXd::Zero(1), VectorXd::Zero(2)), eccbo::ContractViolation);
  EXPECT_NO_THROW(Box(VectorXd::Zero(2), VectorXd::Zero(2)));
}

TEST(Box, FromUnitAlwaysInside) {
  const Box b((VectorXd(2) << 0.07, 0.07).finished(), (VectorXd(2) << 0.08, 0.12).finished());
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.5, 1.5);
  for (int k = 0; k < 10000; ++k) {
    const VectorXd p = b.from_unit((VectorXd(2) << u(rng), u(rng)).finished());
    ASSERT_TRUE(b.contains(p));
  }
  EXPECT_TRUE(b.contains(b.from_unit(VectorXd::Ones(2))));
  EXPECT_EQ(b.from_unit(VectorXd::Ones(2)), b.upper);
}

TEST(BoxMinimizer, QuadraticWithActiveBound) {
  // min (x0-2)^2 + (x1-0.3)^2 on [0,1]^2 -> (1, 0.3)
  auto f = [](const VectorXd& x, VectorXd& g) {
    g.resize(2);
    g << 2 * (x[0] - 2), 2 * (x[1] - 0.3);
    return (x[0] - 2) * (x[0] - 2) + (x[1] - 0.3) * (x[1] - 0.3);
  };
  const auto r = eccbo::detail::minimize_in_box(f, VectorXd::Zero(2), VectorXd::Zero(2), VectorXd::Ones(2));
  EXPECT_DOUBLE_EQ(r.x[0], 1.0);
  EXPECT_NEAR(r.x[1], 0.3, 1e-8);
  EXPECT_NEAR(r.value, 1.0, 1e-12);
}

TEST(BoxMinimizer, RosenbrockInterior) {
  auto f = [](const VectorXd& x, VectorXd& g) {
    const double a = 1 - x[0], b = x[1] - x[0] * x[0];
    g.resize(2);
    g << -2 * a - 400 * x[0] * b, 200 * b;
    return a * a + 100 * b * b;
  };
  eccbo::detail::MinimizeOptions opt;
  opt.max_iterations = 500;
  const auto r = eccbo::detail::minimize_in_box(f, VectorXd::Constant(2, -1.0), VectorXd::Constant(2, -2.0),
                                                VectorXd::Constant(2, 2.0), opt);
  EXPECT_NEAR(r.x[0], 1.0, 1e-4);
  EXPECT_NEAR(r.x[1], 1.0, 1e-4);
}

TEST(BoxMinimizer, NeverWorseThanStart) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const double c = 10 * u(rng);
    auto f = [c](const VectorXd& x, VectorXd& g) {
      g.resize(1);
      g[0] = c * std::cos(c * x[0]) + 1.0;
      return std::sin(c * x[0]) + x[0];
    };
    const VectorXd x0 = VectorXd::Constant(1, u(rng));
    VectorXd g;
    const double f0 = f(x0, g);
    const auto r = eccbo::detail::minimize_in_box(f, x0, VectorXd::Zero(1), VectorXd::Ones(1));
    ASSERT_LE(r.value, f0);
    ASSERT_GE(r.x[0], 0.0);
    ASSERT_LE(r.x[0], 1.0);
  }
}
