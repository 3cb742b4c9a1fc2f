// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace specguard;

TEST(Window, ClosedFormValues) {
  EXPECT_DOUBLE_EQ(kappa_w(0.0), 1.0);
  EXPECT_NEAR(kappa_w(1.0), 0.0, 1e-16);
  EXPECT_NEAR(kappa_w(-1.0), 0.0, 1e-16);
  EXPECT_NEAR(kappa_w(0.5), 1.0 / M_PI, 1e-15);
  EXPECT_EQ(kappa_w(0.3), kappa_w(-0.3));
  EXPECT_EQ(kappa_w(1.7), 0.0);
  // curvature at the origin is -pi^2
  const double h = 1e-4;
  EXPECT_NEAR((kappa_w(h) - 2 * kappa_w(0) + kappa_w(-h)) / (h * h), -M_PI * M_PI, 1e-3);
}

TEST(Metastability, SingleFactorValues) {
  EXPECT_EQ(metastability_kernel({}), std::vector<double>{1.0});
  const auto d = metastability_kernel({-1.0});
  ASSERT_EQ(d.size(), 3u);
  EXPECT_NEAR(d[0], 0.25, 1e-15);
  EXPECT_NEAR(d[1], 0.5, 1e-15);
  EXPECT_NEAR(d[2], 0.25, 1e-15);
}

TEST(Metastability, WeightsSumToOneAndAreReal) {
  const std::vector<std::vector<cplx>> cases = {
      {0.5}, {-0.3, 0.7}, {std::polar(0.9, 0.4), std::polar(0.9, -0.4)}, {0.2, std::polar(0.6, 2.0), std::polar(0.6, -2.0)}};
  for (const auto& mu : cases) {
    const auto k = metastability_kernel(mu);
    double sum = 0;
    for (double w : k) sum += w;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_EQ(k.size(), 2 * mu.size() + 1);
  }
  EXPECT_THROW(metastability_kernel({std::polar(0.9, 0.4)}), Error);
}

TEST(Metastability, NearUnitFactorIsUnstable) {
  try {
    metastability_kernel({0.97});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::unstable_kernel);
  }
  EXPECT_NO_THROW(metastability_kernel({0.9}));
}

TEST(Metastability, CancelsGeometricAutocovariance) {
  Rng rng(1);
  for (const double mu : {-0.8, 0.3, 0.6}) {
    const CMat w = random_hermitian(rng, 3);
    const auto d = metastability_kernel({mu});
    for (int l = 2; l < 12; ++l) {
      CMat acc = CMat::Zero(3, 3);
      for (int j = -1; j <= 1; ++j) acc += d[static_cast<std::size_t>(j + 1)] * std::pow(mu, l - j) * w;
      EXPECT_LT(acc.norm(), 1e-12 * w.norm()) << "mu=" << mu << " l=" << l;
    }
  }
}

TEST(Kernel, IidAndWindowedStructure) {
  const KernelSpec iid = iid_kernel();
  EXPECT_EQ(iid.mode, KernelMode::iid);
  EXPECT_EQ(iid.max_lag(), 0);
  EXPECT_EQ(iid.weight(0), 1.0);
  EXPECT_EQ(windowed_kernel(0).mode, KernelMode::iid);

  const KernelSpec k = windowed_kernel(5, {-0.5});
  EXPECT_EQ(k.mode, KernelMode::windowed);
  EXPECT_EQ(k.max_lag(), 6);
  for (int l = -6; l <= 6; ++l) EXPECT_EQ(k.weight(l), k.weight(-l));
  // kappa_M = kappa_p * kappa_w(./L_M)
  for (int l = -6; l <= 6; ++l) {
    double want = 0.0;
    for (int j = -1; j <= 1; ++j) want += k.kappa_p[static_cast<std::size_t>(j + 1)] * kappa_w((l - j) / 5.0);
    EXPECT_NEAR(k.weight(l), want, 1e-15);
  }
  const KernelSpec back = kernel_from_json(kernel_to_json(k));
  EXPECT_EQ(back.kappa_m, k.kappa_m);
}

TEST(Kernel, MuSelectionKeepsPairsAndSkipsUnit) {
  const std::vector<cplx> eigs = {1.0, std::polar(0.9, 0.5), std::polar(0.9, -0.5), -0.8, 0.7, std::polar(0.5, 2.0),
                                  std::polar(0.5, -2.0)};
  const MuSelection a = select_mu(eigs, 1);
  ASSERT_EQ(a.mu.size(), 2u);
  EXPECT_EQ(a.mu[1], std::conj(a.mu[0]));
  EXPECT_EQ(a.warnings.size(), 1u);
  const MuSelection b = select_mu(eigs, 4);
  EXPECT_EQ(b.mu.size(), 4u);
  EXPECT_EQ(b.mu[2], cplx(-0.8));
  EXPECT_EQ(b.mu[3], cplx(0.7));
  EXPECT_NO_THROW(windowed_kernel(5, b.mu));
  EXPECT_EQ(select_mu(eigs, 0).mu.size(), 0u);
  EXPECT_EQ(select_mu(eigs, 20).mu.size(), 6u);
}

TEST(Kernel, WindowLengthRule) {
  const Eigen::Index m = 1558;
  const double direct = std::pow(16.0 * m / std::pow(M_PI, 4), 0.2);
  EXPECT_EQ(window_length(1.0, m), static_cast<int>(std::lround(direct)));
  EXPECT_EQ(window_length(1e6, 100), 10);
  EXPECT_EQ(window_length(1e-9, 1000), 1);
  EXPECT_THROW(window_length(0.0, 100), Error);
}

TEST(Kernel, TauEstimateTracksCorrelation) {
  const auto traj = [](double a, std::uint64_t seed) {
    Rng rng(seed);
    SnapshotSeries s;
    const Eigen::Index m = 20000;
    s.x.resize(1, m);
    s.y.resize(1, m);
    double x = rng.normal();
    for (Eigen::Index k = 0; k < m; ++k) {
      const double y = a * x + std::sqrt(1 - a * a) * rng.normal();
      s.x(0, k) = x;
      s.y(0, k) = y;
      x = y;
    }
    s.kind = SamplingKind::trajectory;
    return s;
  };
  const double slow = estimate_tau(traj(0.9, 1));
  const double fast = estimate_tau(traj(0.0, 2));
  EXPECT_GT(slow, 2.0);
  EXPECT_LT(slow, 10.0);
  EXPECT_LT(fast, slow);
  EXPECT_LE(fast, 1.0);
}

TEST(Variance, IidReducesToSampleCovariance) {
  Rng rng(3);
  const SnapshotSeries s = sgtest::random_series(rng, 4, 60);
  const cplx lam(0.2, 0.5);
  const SnapshotFactors f = snapshot_factors(s, lam);
  const CMat q = random_psd(rng, 4);
  const CMat c = f.mean();
  CMat want = CMat::Zero(4, 4);
  for (Eigen::Index m = 0; m < f.M(); ++m) want += (f.snapshot(m) - c).adjoint() * q * (f.snapshot(m) - c);
  want /= static_cast<double>(f.M());
  EXPECT_LT(sgtest::rel_frob(variance_apply_naive(q, f, iid_kernel()).result, want), 1e-13);
  EXPECT_LT(sgtest::rel_frob(variance_apply(q, f, iid_kernel()).result, want), 1e-12);
}

TEST(Variance, ZeroInputsGiveZero) {
  Rng rng(4);
  const SnapshotSeries s = sgtest::random_series(rng, 3, 50, SamplingKind::trajectory);
  const SnapshotFactors f = snapshot_factors(s, 0.4);
  const KernelSpec k = windowed_kernel(4);
  EXPECT_EQ(variance_apply(CMat::Zero(3, 3), f, k).result.norm(), 0.0);
  EXPECT_EQ(variance_apply_naive(CMat::Zero(3, 3), f, k).result.norm(), 0.0);

  SnapshotSeries c = s;
  for (Eigen::Index m = 0; m < c.M(); ++m) {
    c.x.col(m) = s.x.col(0);
    c.y.col(m) = s.y.col(0);
  }
  const SnapshotFactors fc = snapshot_factors(c, 0.4);
  const CMat q = random_psd(rng, 3);
  EXPECT_LT(variance_apply_naive(q, fc, k).result.norm(), 1e-13);
  EXPECT_LT(variance_apply(q, fc, k).result.norm(), 1e-12);
}

TEST(Variance, FastMatchesNaive) {
  Rng rng(5);
  {
    const SnapshotSeries s = sgtest::random_series(rng, 8, 500, SamplingKind::trajectory);
    const SnapshotFactors f = snapshot_factors(s, cplx(0.3, -0.2));
    const CMat q = random_psd(rng, 8);
    const KernelSpec k = windowed_kernel(20);
    EXPECT_LT(sgtest::rel_frob(variance_apply(q, f, k).result, variance_apply_naive(q, f, k).result), 1e-10);
  }
  for (int t = 0; t < 12; ++t) {
    const Eigen::Index n = 1 + t % 6;
    const SnapshotSeries s = sgtest::random_series(rng, n, 40 + 13 * t, SamplingKind::trajectory);
    const SnapshotFactors f = snapshot_factors(s, cplx(rng.uniform(-1, 1), rng.uniform(-1, 1)));
    const CMat q = t % 3 == 0 ? random_hermitian(rng, n) : random_psd(rng, n);
    std::vector<cplx> mu;
    if (t % 2) mu = {rng.uniform(-0.9, 0.9)};
    if (t % 5 == 4) mu = {std::polar(0.7, 1.2), std::polar(0.7, -1.2)};
    const KernelSpec k = windowed_kernel(t % 9, mu);
    EXPECT_LT(sgtest::rel_frob(variance_apply(q, f, k).result, variance_apply_naive(q, f, k).result), 1e-10)
        << "t=" << t;
  }
}

TEST(Variance, HermitianAndPsd) {
  Rng rng(6);
  for (int t = 0; t < 200; ++t) {
    const Eigen::Index n = 1 + t % 5;
    const SnapshotSeries s = sgtest::random_series(rng, n, 120, SamplingKind::trajectory);
    const SnapshotFactors f = snapshot_factors(s, cplx(rng.uniform(-1, 1), rng.uniform(-1, 1)));
    const KernelSpec k = windowed_kernel(t % 12, t % 3 ? std::vector<cplx>{} : std::vector<cplx>{-0.6});
    const CMat v = variance_apply(random_psd(rng, n, 1 + t % n), f, k).result;
    EXPECT_EQ(v, CMat(v.adjoint()));
    EXPECT_GE(min_eigenvalue(v), -1e-10 * v.norm());
  }
}

TEST(Variance, LinearInQ) {
  Rng rng(7);
  const SnapshotSeries s = sgtest::random_series(rng, 5, 300, SamplingKind::trajectory);
  const SnapshotFactors f = snapshot_factors(s, cplx(-0.5, 0.1));
  const KernelSpec k = windowed_kernel(7, {0.4});
  const CMat a = random_hermitian(rng, 5), b = random_hermitian(rng, 5);
  const CMat lhs = variance_apply(2.5 * a - 0.75 * b, f, k).result;
  const CMat rhs = 2.5 * variance_apply(a, f, k).result - 0.75 * variance_apply(b, f, k).result;
  EXPECT_LT(sgtest::rel_frob(lhs, rhs), 1e-10);
}

TEST(Variance, PsdRepairAndHardFailure) {
  Rng rng(8);
  const SnapshotSeries s = sgtest::random_series(rng, 3, 100);
  const SnapshotFactors f = snapshot_factors(s, 0.1);
  const VarianceApplication ok = variance_apply(random_psd(rng, 3), f, iid_kernel(), true);
  EXPECT_GE(min_eigenvalue(ok.result), 0.0);
  // an indefinite input declared PSD is a hard error, not a silent clip
  const CMat indefinite = (CMat(3, 3) << 1, 0, 0, 0, -1, 0, 0, 0, 0).finished();
  EXPECT_THROW(variance_apply(indefinite, f, iid_kernel(), true), Error);
  EXPECT_NO_THROW(variance_apply(indefinite, f, iid_kernel(), false));
}

TEST(Variance, WindowTooLarge) {
  Rng rng(9);
  const SnapshotSeries s = sgtest::random_series(rng, 2, 10, SamplingKind::trajectory);
  const SnapshotFactors f = snapshot_factors(s, 0.0);
  try {
    variance_apply(CMat::Identity(2, 2), f, windowed_kernel(10));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::window_too_large);
  }
  EXPECT_THROW(variance_apply_naive(CMat::Identity(2, 2), f, windowed_kernel(12)), Error);
}

TEST(Variance, LinearScalingInM) {
  Rng rng(10);
  const SnapshotSeries big = sgtest::random_series(rng, 8, 80000, SamplingKind::trajectory);
  SnapshotSeries half = big;
  half.x = big.x.leftCols(40000);
  half.y = big.y.leftCols(40000);
  const KernelSpec k = windowed_kernel(10);
  const CMat q = random_psd(rng, 8);
  const auto best_of = [&](const SnapshotSeries& s) {
    const SnapshotFactors f = snapshot_factors(s, 0.3);
    double best = 1e9;
    for (int r = 0; r < 5; ++r) {
      sgtest::Stopwatch sw;
      const CMat v = variance_apply(q, f, k).result;
      best = std::min(best, sw.seconds());
      EXPECT_TRUE(v.allFinite());
    }
    return best;
  };
  const double t1 = best_of(half), t2 = best_of(big);
  EXPECT_LT(t2 / t1, 2.5) << t1 << " " << t2;
}

namespace {

class ConstantMoments : public ExactMoments {
 public:
  explicit ConstantMoments(CMat c) : c_(std::move(c)) {}
  Eigen::Index dimension() const override { return c_.rows(); }
  CMat char_matrix(cplx) const override { return c_; }
  CMat second_moment(cplx, const CMat& q) const override { return c_.adjoint() * q * c_; }
  CMat adjoint_second_moment(cplx, const CMat& q) const override { return c_ * q * c_.adjoint(); }

 private:
  CMat c_;
};

}  // namespace

TEST(VarianceExact, ZeroCases) {
  const VarMoments var(VarSpec::paper_preset());
  EXPECT_EQ(variance_exact_iid(CMat::Zero(7, 7), 1.2, var).norm(), 0.0);
  Rng rng(11);
  CMat c(3, 3);
  for (Eigen::Index i = 0; i < 9; ++i) c(i) = cplx(rng.normal(), rng.normal());
  const ConstantMoments det(c);
  EXPECT_LT(variance_exact_iid(random_psd(rng, 3), 0.5, det).norm(), 1e-14);
}

TEST(VarianceExact, VarClosedForm) {
  Rng rng(12);
  const VarSpec spec = VarSpec::paper_preset();
  const VarMoments var(spec);
  for (int t = 0; t < 10; ++t) {
    const cplx lam = std::polar(rng.uniform(0.9, 1.5), rng.uniform(0, 2 * M_PI));
    const CMat q = t % 2 ? random_psd(rng, 7) : random_hermitian(rng, 7);
    EXPECT_LT(sgtest::rel_frob(variance_exact_iid(q, lam, var), var_v_exact(spec, lam, q)), 1e-10);
  }
}
