#include <gtest/gtest.h>

#include <cmath>

#include "crfmm/lbfgs.hpp"

using namespace crfmm;

TEST(Lbfgs, Quadratic) {
  // f = sum_i (i+1) (x_i - i)^2
  auto f = [](std::span<const double> x, std::span<double> g) {
    double v = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - static_cast<double>(i);
      v += static_cast<double>(i + 1) * d * d;
      g[i] = 2.0 * static_cast<double>(i + 1) * d;
    }
    return v;
  };
  const auto r = lbfgs_minimize(f, std::vector<double>(5, 10.0));
  EXPECT_TRUE(r.converged);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(r.x[i], static_cast<double>(i), 1e-6);
}

TEST(Lbfgs, Rosenbrock) {
  auto f = [](std::span<const double> x, std::span<double> g) {
    const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
    g[0] = -2.0 * a - 400.0 * x[0] * b;
    g[1] = 200.0 * b;
    return a * a + 100.0 * b * b;
  };
  LbfgsOptions opt;
  opt.max_iters = 500;
  const auto r = lbfgs_minimize(f, {-1.2, 1.0}, opt);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x[0], 1.0, 1e-5);
  EXPECT_NEAR(r.x[1], 1.0, 1e-5);
}

TEST(Lbfgs, TraceIsNonIncreasing) {
  auto f = [](std::span<const double> x, std::span<double> g) {
    g[0] = 4.0 * x[0] * x[0] * x[0] + 1.0;
    g[1] = 2.0 * (x[1] - 3.0);
    return std::pow(x[0], 4) + x[0] + (x[1] - 3.0) * (x[1] - 3.0);
  };
  const auto r = lbfgs_minimize(f, {2.0, -4.0});
  ASSERT_GE(r.trace.size(), 2u);
  for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i], r.trace[i - 1]);
}

TEST(Lbfgs, InfiniteToleranceReturnsStart) {
  auto f = [](std::span<const double> x, std::span<double> g) {
    g[0] = 2.0 * x[0];
    return x[0] * x[0];
  };
  LbfgsOptions opt;
  opt.tol = INFINITY;
  const auto r = lbfgs_minimize(f, {7.0}, opt);
  EXPECT_EQ(r.x, std::vector<double>{7.0});
  EXPECT_EQ(r.iterations, 0u);
  EXPECT_TRUE(r.converged);
}

// A log-likelihood summed over thousands of examples has |f| in the
// thousands; the stopping test scales with it instead of grinding through
// backtracks at round-off level.
TEST(Lbfgs, LargeObjectiveStopsAtRoundOff) {
  int evals = 0;
  auto f = [&](std::span<const double> x, std::span<double> g) {
    ++evals;
    g[0] = 2e3 * (x[0] - 1.5);
    g[1] = 6e3 * (x[1] + 0.5);
    return 5e3 + 1e3 * (x[0] - 1.5) * (x[0] - 1.5) + 3e3 * (x[1] + 0.5) * (x[1] + 0.5);
  };
  const auto r = lbfgs_minimize(f, {10.0, 10.0});
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x[0], 1.5, 1e-3);
  EXPECT_NEAR(r.x[1], -0.5, 1e-3);
  EXPECT_LT(evals, 60);
}
