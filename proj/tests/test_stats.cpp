// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include <gtest/gtest.h>

using namespace specguard;

namespace {

// Synthetic sweep with lower = upper = f(point).
template <class F>
SweepResult make_sweep(const GridSpec& g, F f) {
  SweepResult r;
  r.grid = g;
  r.cells.resize(g.size());
  for (int i = 0; i < g.n_im; ++i)
    for (int j = 0; j < g.n_re; ++j) {
      PEstimate& e = r.at(i, j).estimate;
      e.lower = e.upper = f(g.point(i, j));
      e.status = e.lower == 0.0 ? PStatus::at_eigenvalue : PStatus::converged;
    }
  return r;
}

GridSpec square(double half, int n) {
  GridSpec g;
  g.re_min = g.im_min = -half;
  g.re_max = g.im_max = half;
  g.n_re = g.n_im = n;
  return g;
}

}  // namespace

TEST(PValue, ChiSquareValues) {
  EXPECT_NEAR(chi2_cdf(1, 3.841458820694124), 0.95, 1e-12);
  EXPECT_NEAR(chi2_cdf(2, 5.991464547107979), 0.95, 1e-12);
  EXPECT_EQ(chi2_cdf(1, 0.0), 0.0);
  EXPECT_THROW(chi2_cdf(3, 1.0), Error);
  EXPECT_THROW(chi2_cdf(1, -1.0), Error);
}

TEST(PValue, ExamplesAndLargerTail) {
  EXPECT_NEAR(p_value(3.84), 0.05, 5e-4);
  EXPECT_NEAR(p_value(0.5), std::exp(-0.5), 1e-12);
  EXPECT_EQ(p_value(0.0), 1.0);
  EXPECT_EQ(p_value(-1.0), 1.0);
  for (double x = 0.01; x < 60; x *= 1.3) {
    EXPECT_GE(p_value(x), 1.0 - chi2_cdf(1, x) - 1e-15);
    EXPECT_GE(p_value(x), 1.0 - chi2_cdf(2, 2 * x) - 1e-15);
    EXPECT_LE(p_value(x * 1.3), p_value(x));
  }
}

TEST(EigTest, StatusHandling) {
  PEstimate at;
  at.status = PStatus::at_eigenvalue;
  const EigTestResult r0 = eig_test(1.0, at, 1000);
  EXPECT_EQ(r0.p_value, 1.0);
  EXPECT_TRUE(r0.testable);
  EXPECT_FALSE(r0.reject_at[0].second);

  PEstimate deg;
  deg.status = PStatus::degenerate_s;
  const EigTestResult r1 = eig_test(1.0, deg, 1000);
  EXPECT_FALSE(r1.testable);
  EXPECT_TRUE(eig_test_to_json(r1)["p_value"].is_null());

  PEstimate ok;
  ok.status = PStatus::converged;
  ok.lower = 0.01;
  ok.upper = 0.011;
  const EigTestResult r2 = eig_test(cplx(0.5, 0.5), ok, 1000, 2);
  EXPECT_DOUBLE_EQ(r2.m_p_hat, 10.0);
  EXPECT_NEAR(r2.p_value, std::erfc(std::sqrt(5.0)), 1e-15);
  EXPECT_TRUE(r2.reject_at[0].second);
  EXPECT_TRUE(r2.reject_at[1].second);
  EXPECT_TRUE(r2.conjectured_bound);
}

TEST(ConfidenceRegion, ExtremeLevels) {
  const SweepResult r = make_sweep(square(1.0, 9), [](cplx z) { return std::norm(z); });
  const ConfidenceRegion none = confidence_region(r, 100, 1.0);
  EXPECT_TRUE(none.empty);
  EXPECT_EQ(none.count, 0u);
  const ConfidenceRegion all = confidence_region(r, 100, 0.0);
  EXPECT_EQ(all.count, r.cells.size());
  EXPECT_DOUBLE_EQ(all.re_lo, -1.0);
  EXPECT_DOUBLE_EQ(all.im_hi, 1.0);
}

TEST(ConfidenceRegion, DiscAroundZero) {
  const SweepResult r = make_sweep(square(1.0, 21), [](cplx z) { return std::norm(z); });
  const ConfidenceRegion c = confidence_region(r, 100, 0.05, {0.0, cplx(0.9, 0.9), cplx(3.0, 0.0)});
  ASSERT_EQ(c.contains.size(), 3u);
  EXPECT_TRUE(c.contains[0]);
  EXPECT_FALSE(c.contains[1]);
  EXPECT_FALSE(c.contains[2]);
  // M |z|^2 <= ~3.8 gives a disc of radius ~0.2
  EXPECT_NEAR(c.re_hi, 0.1, 1e-12);
  EXPECT_EQ(c.count, 9u);
}

TEST(Clusters, InfiniteAndSmallLevels) {
  const std::vector<cplx> eigs = {cplx(-0.5, 0.0), cplx(0.5, 0.0), cplx(0.7, 0.0)};
  const SweepResult r = make_sweep(square(1.0, 21), [&](cplx z) {
    double d = 1e9;
    for (const cplx e : eigs) d = std::min(d, std::norm(z - e));
    return d;
  });
  const ClusterReport all = cluster_eigenvalues(r, eigs, std::numeric_limits<double>::infinity(), 100);
  ASSERT_EQ(all.clusters.size(), 1u);
  EXPECT_EQ(all.clusters[0].members.size(), 3u);
  EXPECT_EQ(all.clusters[0].cells.size(), r.cells.size());

  const ClusterReport tiny = cluster_eigenvalues(r, eigs, 1e-12, 100);
  EXPECT_EQ(tiny.clusters.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(tiny.cluster_of[k], static_cast<int>(k));

  const ClusterReport mid = cluster_eigenvalues(r, eigs, 2.0, 100);
  ASSERT_EQ(mid.clusters.size(), 2u);
  EXPECT_EQ(mid.cluster_of[1], mid.cluster_of[2]);
  EXPECT_NE(mid.cluster_of[0], mid.cluster_of[1]);
  EXPECT_EQ(mid.bulk, mid.cluster_of[1]);
  EXPECT_EQ(mid.unresolved, (std::vector<int>{1, 2}));
  EXPECT_EQ(cluster_report_to_json(mid)["schema"], "specguard/v1/clusters");
}

TEST(Clusters, MonotoneInLevel) {
  Rng rng(2);
  std::vector<cplx> eigs;
  for (int k = 0; k < 6; ++k) eigs.emplace_back(rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9));
  const SweepResult r = make_sweep(square(1.0, 25), [&](cplx z) {
    double d = 1e9;
    for (const cplx e : eigs) d = std::min(d, std::norm(z - e));
    return d;
  });
  std::size_t prev = eigs.size() + 1;
  for (double level : {0.01, 0.1, 0.5, 1.0, 3.0, 10.0, 100.0}) {
    const ClusterReport rep = cluster_eigenvalues(r, eigs, level, 100);
    EXPECT_LE(rep.clusters.size(), prev);
    prev = rep.clusters.size();
    // coarser level only merges
    const ClusterReport finer = cluster_eigenvalues(r, eigs, level / 2, 100);
    for (std::size_t a = 0; a < eigs.size(); ++a)
      for (std::size_t b = 0; b < eigs.size(); ++b)
        if (finer.cluster_of[a] == finer.cluster_of[b]) EXPECT_EQ(rep.cluster_of[a], rep.cluster_of[b]);
  }
}

TEST(Clusters, OutsideGridAndResolutionWarning) {
  const SweepResult r = make_sweep(square(1.0, 5), [](cplx z) { return std::norm(z) + 1e-6; });
  const ClusterReport rep = cluster_eigenvalues(r, {cplx(0.0, 0.0), cplx(5.0, 0.0)}, 1.0, 10);
  EXPECT_EQ(rep.cluster_of[1], -1);
  ASSERT_FALSE(rep.warnings.empty());
  bool outside = false, resolution = false;
  for (const auto& w : rep.warnings) {
    outside |= w.find("outside") != std::string::npos;
    resolution |= w.find("under-resolve") != std::string::npos;
  }
  EXPECT_TRUE(outside);
  EXPECT_TRUE(resolution);
  EXPECT_NE(std::find(rep.unresolved.begin(), rep.unresolved.end(), 1), rep.unresolved.end());
}

TEST(Advice, SampleSizeFloors) {
  const SampleSizeAdvice a = sample_size_advice(0.01, 4);
  EXPECT_DOUBLE_EQ(a.m_floor_1, 200.0);
  EXPECT_DOUBLE_EQ(a.m_floor_2, 40.0);
  EXPECT_NE(a.text.find("200"), std::string::npos);
  EXPECT_THROW(sample_size_advice(0.0, 4), Error);
}

TEST(Advice, CountingExponent) {
  EXPECT_DOUBLE_EQ(counting_exponent(0.1, 0.0, 100).exponent, 5.0);
  EXPECT_DOUBLE_EQ(counting_exponent(0.5, 0.0, 50).exponent, 12.5);
  EXPECT_DOUBLE_EQ(counting_exponent(0.3, 10.0, 100).exponent, 7.5);
  EXPECT_NEAR(counting_exponent(0.1, 0.0, 100).bound, std::exp(-5.0), 1e-15);
}

TEST(Advice, REstimateMatchesDenseSvd) {
  Rng rng(3);
  const SnapshotSeries s = sgtest::random_series(rng, 6, 50);
  const cplx lam(0.2, -0.4);
  const CharContext ctx = char_context(gram_matrices(s), lam);
  const SnapshotFactors f = snapshot_factors(s, lam);
  for (const bool identity : {true, false}) {
    const CMat q = identity ? CMat(CMat::Identity(6, 6)) : CMat(random_psd(rng, 6) + 0.1 * CMat::Identity(6, 6));
    Eigen::SelfAdjointEigenSolver<CMat> es(q);
    const CMat half = es.operatorSqrt(), inv_half = es.operatorInverseSqrt();
    const CMat ci = ctx.c_hat().inverse();
    double want = 0.0;
    for (Eigen::Index m = 0; m < f.M(); ++m) {
      const CMat t = half * (ci * f.snapshot(m) - CMat::Identity(6, 6)) * inv_half;
      want = std::max(want, Eigen::JacobiSVD<CMat>(t).singularValues()(0));
    }
    EXPECT_NEAR(r_estimate(ctx, f, q), want, 1e-9 * want);
  }
}
