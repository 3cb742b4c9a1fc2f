// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include <gtest/gtest.h>

using namespace specguard;

TEST(Var, NoiselessIdentityCopiesStates) {
  VarSpec s;
  s.A = RMat::Identity(3, 3);
  s.sigma_x = RMat::Identity(3, 3);
  s.sigma_xi = RMat::Zero(3, 3);
  s.seed = 9;
  const auto [x, y] = gen_var(s, 50);
  EXPECT_TRUE((x.array() == y.array()).all());
}

TEST(Var, IndependentXAndY) {
  const auto [x, y] = gen_var(VarSpec::scalar(0.0, 1.0, 1.0, 21), 100000);
  const double mx = x.mean(), my = y.mean();
  const double cov = ((x.array() - mx) * (y.array() - my)).mean();
  const double corr = cov / std::sqrt((x.array() - mx).square().mean() * (y.array() - my).square().mean());
  EXPECT_LT(std::abs(corr), 0.01);
}

TEST(Var, EmpiricalCovarianceMatchesSigmaX) {
  VarSpec s = VarSpec::paper_preset(4);
  s.sigma_x = RMat::Identity(7, 7);
  s.sigma_x(0, 1) = s.sigma_x(1, 0) = 0.4;
  const Eigen::Index m = 100000;
  const auto [x, y] = gen_var(s, m);
  const RMat cov = x.transpose() * x / static_cast<double>(m);
  EXPECT_LT((cov - s.sigma_x).cwiseAbs().maxCoeff(), 5.0 / std::sqrt(static_cast<double>(m)));
}

TEST(Var, PresetAndDeterminism) {
  const VarSpec p = VarSpec::paper_preset();
  EXPECT_EQ(p.N(), 7);
  EXPECT_DOUBLE_EQ(p.A(0, 0), -0.9);
  EXPECT_DOUBLE_EQ(p.A(5, 4), 0.9);
  EXPECT_TRUE(p.sigma_xi.isApprox(0.1 * RMat::Identity(7, 7)));
  const auto a = gen_var(VarSpec::paper_preset(3), 20);
  const auto b = gen_var(VarSpec::paper_preset(3), 20);
  EXPECT_TRUE((a.first.array() == b.first.array()).all());
  const auto c = gen_var(VarSpec::paper_preset(4), 20);
  EXPECT_FALSE((a.first.array() == c.first.array()).all());
}

TEST(Var, NonSpdCovarianceIsRejected) {
  VarSpec s = VarSpec::scalar(0.5, -1.0, 1.0);
  try {
    gen_var(s, 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::not_spd);
  }
}

TEST(ExpandingMap, FixedPointAndRange) {
  EXPECT_NEAR(expanding_map(0.0), 0.0, 1e-15);
  const auto [x, y] = gen_expanding_map(5000, SamplingKind::iid, 2);
  EXPECT_GE(x.minCoeff(), 0.0);
  EXPECT_LT(x.maxCoeff(), 2 * M_PI);
  EXPECT_GE(y.minCoeff(), 0.0);
  EXPECT_LT(y.maxCoeff(), 2 * M_PI);
  for (Eigen::Index m = 0; m < 5000; ++m) EXPECT_EQ(y(m, 0), expanding_map(x(m, 0)));
}

TEST(ExpandingMap, TrajectoryShift) {
  const auto [x, y] = gen_expanding_map(1000, SamplingKind::trajectory, 7);
  for (Eigen::Index m = 0; m + 1 < 1000; ++m) EXPECT_EQ(x(m + 1, 0), y(m, 0));
}

TEST(Lorenz, EquilibriumStaysAtZero) {
  Lorenz63Spec s;
  s.initial = {0, 0, 0};
  s.jitter = 0.0;
  s.burn_in = 5;
  const RMat t = gen_lorenz63(s, 50);
  EXPECT_EQ(t.rows(), 51);
  EXPECT_EQ(t.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Lorenz, AttractorConfinement) {
  Lorenz63Spec s;
  s.seed = 3;
  const RMat t = gen_lorenz63(s, 10000);
  // absorbing ball x^2 + y^2 + (z - rho - sigma)^2 <= beta^2 (rho + sigma)^2 / (4 (beta - 1))
  const double bound = s.beta * s.beta * (s.rho + s.sigma) * (s.rho + s.sigma) / (4.0 * (s.beta - 1.0));
  double worst = 0.0;
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    const double z = t(i, 2) - s.rho - s.sigma;
    worst = std::max(worst, t(i, 0) * t(i, 0) + t(i, 1) * t(i, 1) + z * z);
  }
  EXPECT_LE(worst, bound);
}

TEST(Lorenz, Rk4SelfConvergence) {
  Lorenz63Spec coarse;
  coarse.dt_sample = 0.01;
  coarse.substeps = 2;
  coarse.burn_in = 10;
  coarse.seed = 1;
  Lorenz63Spec fine = coarse;
  fine.substeps = 4;
  const RMat a = gen_lorenz63(coarse, 100);
  const RMat b = gen_lorenz63(fine, 100);
  EXPECT_LT((a - b).norm() / b.norm(), 1e-6);
}

TEST(Lorenz, StepGuardAndDeterminism) {
  Lorenz63Spec s;
  s.substeps = 10;  // h = 0.02
  EXPECT_THROW(gen_lorenz63(s, 10), Error);
  Lorenz63Spec d;
  d.burn_in = 20;
  d.seed = 5;
  EXPECT_TRUE((gen_lorenz63(d, 30).array() == gen_lorenz63(d, 30).array()).all());
}

TEST(Rng, StreamsAreReproducible) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.normal(), b.normal());
  Rng c(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = c.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
}
