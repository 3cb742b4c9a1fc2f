// SPDX-License-Identifier: Apache-2.0
#pragma once

// Chi-square tail test for true eigenvalues, confidence regions, sublevel-set
// clustering of sample eigenvalues and the eigenvalue-counting diagnostics.

#include "specguard/charmatrix.hpp"
#include "specguard/core.hpp"
#include "specguard/pseudospec.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>
#include <vector>

namespace specguard {

/// Closed-form CDFs for 1 and 2 degrees of freedom.
inline double chi2_cdf(int k, double x) {
  if (!(x >= 0.0)) throw Error(ErrorKind::usage, "chi2_cdf needs x >= 0");
  if (k == 1) return std::erf(std::sqrt(0.5 * x));
  if (k == 2) return -std::expm1(-0.5 * x);
  throw Error(ErrorKind::usage, "chi2_cdf supports k = 1 or 2");
}

/// p = max{1 - F_1(x), 1 - F_2(2x)} for x = M * P-hat; the larger tail is the valid bound.
inline double p_value(double m_p_hat) {
  if (!(m_p_hat > 0.0)) return 1.0;
  if (std::isinf(m_p_hat)) return 0.0;
  const double t1 = std::erfc(std::sqrt(0.5 * m_p_hat));
  const double t2 = std::exp(-m_p_hat);
  return std::min(1.0, std::max(t1, t2));
}

struct EigTestResult {
  cplx lambda;
  double m_p_hat = 0.0;
  double p_value = 1.0;
  std::vector<std::pair<double, bool>> reject_at;
  bool testable = true;
  bool conjectured_bound = false;  // multiple eigenvalue: bound is conjectural
  PStatus status = PStatus::converged;
};

/// Uses the certified lower bracket, so the p-value never overstates evidence against H0.
inline EigTestResult eig_test(cplx lambda, const PEstimate& est, Eigen::Index m_count, int multiplicity = 1) {
  EigTestResult r;
  r.lambda = lambda;
  r.status = est.status;
  r.conjectured_bound = multiplicity > 1;
  if (est.status == PStatus::at_eigenvalue) {
    r.m_p_hat = 0.0;
    r.p_value = 1.0;
  } else if (est.status == PStatus::degenerate_s || !std::isfinite(est.lower)) {
    r.testable = false;
    r.m_p_hat = std::numeric_limits<double>::quiet_NaN();
    r.p_value = std::numeric_limits<double>::quiet_NaN();
  } else {
    r.m_p_hat = static_cast<double>(m_count) * est.lower;
    r.p_value = p_value(r.m_p_hat);
  }
  for (const double alpha : {0.05, 0.01}) r.reject_at.emplace_back(alpha, r.testable && r.p_value <= alpha);
  return r;
}

inline nlohmann::json eig_test_to_json(const EigTestResult& r) {
  nlohmann::json rej = nlohmann::json::object();
  for (const auto& [a, b] : r.reject_at) rej[detail::format_double(a)] = b;
  return {{"lambda", {r.lambda.real(), r.lambda.imag()}},
          {"m_p_hat", detail::finite_or_null(r.m_p_hat)},
          {"p_value", detail::finite_or_null(r.p_value)},
          {"reject_at", rej},
          {"testable", r.testable},
          {"conjectured_bound", r.conjectured_bound},
          {"status", to_string(r.status)}};
}

namespace detail {

inline bool cell_valid(const GridCell& c) {
  return c.ok() && c.estimate.status != PStatus::degenerate_s && std::isfinite(c.estimate.lower);
}

/// Nearest grid cell to z, or false if z lies outside the grid by more than half a cell.
inline bool nearest_cell(const GridSpec& g, cplx z, int& i, int& j) {
  const double hr = 0.5 * g.d_re() + 1e-12, hi = 0.5 * g.d_im() + 1e-12;
  if (z.real() < g.re_min - hr || z.real() > g.re_max + hr || z.imag() < g.im_min - hi || z.imag() > g.im_max + hi)
    return false;
  j = g.n_re == 1 ? 0 : static_cast<int>(std::lround((z.real() - g.re_min) / g.d_re()));
  i = g.n_im == 1 ? 0 : static_cast<int>(std::lround((z.imag() - g.im_min) / g.d_im()));
  j = std::clamp(j, 0, g.n_re - 1);
  i = std::clamp(i, 0, g.n_im - 1);
  return true;
}

}  // namespace detail

struct ConfidenceRegion {
  std::vector<std::uint8_t> mask;  // row-major like SweepResult
  std::size_t count = 0;
  bool empty = true;
  double re_lo = 0.0, re_hi = 0.0, im_lo = 0.0, im_hi = 0.0;
  std::vector<bool> contains;  // per queried eigenvalue
};

/// Cells whose p-value at M * P-hat_lower exceeds alpha.
inline ConfidenceRegion confidence_region(const SweepResult& r, Eigen::Index m_count, double alpha,
                                          const std::vector<cplx>& query = {}) {
  ConfidenceRegion out;
  out.mask.assign(r.cells.size(), 0);
  for (int i = 0; i < r.grid.n_im; ++i)
    for (int j = 0; j < r.grid.n_re; ++j) {
      const GridCell& c = r.at(i, j);
      if (!detail::cell_valid(c)) continue;
      const double p = p_value(static_cast<double>(m_count) * c.estimate.lower);
      if (!(alpha <= 0.0 || p > alpha)) continue;
      out.mask[static_cast<std::size_t>(i) * r.grid.n_re + j] = 1;
      const double re = r.grid.re(j), im = r.grid.im(i);
      if (out.empty) {
        out.re_lo = out.re_hi = re;
        out.im_lo = out.im_hi = im;
        out.empty = false;
      }
      out.re_lo = std::min(out.re_lo, re);
      out.re_hi = std::max(out.re_hi, re);
      out.im_lo = std::min(out.im_lo, im);
      out.im_hi = std::max(out.im_hi, im);
      ++out.count;
    }
  for (const cplx z : query) {
    int i = 0, j = 0;
    out.contains.push_back(detail::nearest_cell(r.grid, z, i, j) &&
                           out.mask[static_cast<std::size_t>(i) * r.grid.n_re + j] != 0);
  }
  return out;
}

struct Cluster {
  int id = 0;
  std::vector<int> members;  // eigenvalue indices
  std::vector<std::pair<int, int>> cells;
};

struct ClusterReport {
  double level = 0.0;
  std::vector<Cluster> clusters;
  std::vector<int> cluster_of;  // per eigenvalue, -1 if outside the grid
  int bulk = -1;                // index into clusters
  std::vector<int> unresolved;  // eigenvalues in the bulk component or outside the grid
  std::vector<std::string> warnings;
};

/// 4-connected components of {M * P-hat_lower < level}; the cell nearest each eigenvalue
/// is always included since P-hat vanishes on the sample spectrum.
inline ClusterReport cluster_eigenvalues(const SweepResult& r, const std::vector<cplx>& eigs, double level,
                                         Eigen::Index m_count) {
  const GridSpec& g = r.grid;
  const std::size_t ncell = r.cells.size();
  const bool everything = std::isinf(level) && level > 0.0;
  std::vector<std::uint8_t> in(ncell, 0);
  for (std::size_t k = 0; k < ncell; ++k) {
    const GridCell& c = r.cells[k];
    if (everything || (detail::cell_valid(c) && static_cast<double>(m_count) * c.estimate.lower < level)) in[k] = 1;
  }
  ClusterReport rep;
  rep.level = level;
  std::vector<std::pair<int, int>> eig_cell(eigs.size(), {-1, -1});
  for (std::size_t e = 0; e < eigs.size(); ++e) {
    int i = 0, j = 0;
    if (detail::nearest_cell(g, eigs[e], i, j)) {
      eig_cell[e] = {i, j};
      in[static_cast<std::size_t>(i) * g.n_re + j] = 1;
    } else {
      rep.warnings.push_back("eigenvalue " + std::to_string(e) + " lies outside the grid");
    }
  }

  std::vector<int> label(ncell, -1);
  int n_comp = 0;
  std::vector<std::vector<std::pair<int, int>>> comp_cells;
  for (int i0 = 0; i0 < g.n_im; ++i0)
    for (int j0 = 0; j0 < g.n_re; ++j0) {
      const std::size_t k0 = static_cast<std::size_t>(i0) * g.n_re + j0;
      if (!in[k0] || label[k0] >= 0) continue;
      comp_cells.emplace_back();
      std::deque<std::pair<int, int>> queue{{i0, j0}};
      label[k0] = n_comp;
      while (!queue.empty()) {
        const auto [i, j] = queue.front();
        queue.pop_front();
        comp_cells.back().emplace_back(i, j);
        const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
        for (int d = 0; d < 4; ++d) {
          const int ni = i + di[d], nj = j + dj[d];
          if (ni < 0 || nj < 0 || ni >= g.n_im || nj >= g.n_re) continue;
          const std::size_t nk = static_cast<std::size_t>(ni) * g.n_re + nj;
          if (in[nk] && label[nk] < 0) {
            label[nk] = n_comp;
            queue.emplace_back(ni, nj);
          }
        }
      }
      ++n_comp;
    }

  // Keep only components holding eigenvalues, numbered by first member.
  std::vector<int> comp_to_cluster(static_cast<std::size_t>(n_comp), -1);
  rep.cluster_of.assign(eigs.size(), -1);
  for (std::size_t e = 0; e < eigs.size(); ++e) {
    if (eig_cell[e].first < 0) continue;
    const int comp = label[static_cast<std::size_t>(eig_cell[e].first) * g.n_re + eig_cell[e].second];
    int& cid = comp_to_cluster[static_cast<std::size_t>(comp)];
    if (cid < 0) {
      cid = static_cast<int>(rep.clusters.size());
      Cluster c;
      c.id = cid;
      c.cells = comp_cells[static_cast<std::size_t>(comp)];
      rep.clusters.push_back(std::move(c));
    }
    rep.clusters[static_cast<std::size_t>(cid)].members.push_back(static_cast<int>(e));
    rep.cluster_of[e] = cid;
  }
  std::size_t best = 0;
  for (const Cluster& c : rep.clusters)
    if (c.members.size() > best) {
      best = c.members.size();
      rep.bulk = c.id;
    }
  for (std::size_t e = 0; e < eigs.size(); ++e)
    if (rep.cluster_of[e] < 0 || rep.cluster_of[e] == rep.bulk) rep.unresolved.push_back(static_cast<int>(e));

  // Under-resolution: P-hat varies by more than 10x across an eigenvalue's neighbourhood.
  for (std::size_t e = 0; e < eigs.size(); ++e) {
    if (eig_cell[e].first < 0) continue;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    const int di[5] = {0, 1, -1, 0, 0}, dj[5] = {0, 0, 0, 1, -1};
    for (int d = 0; d < 5; ++d) {
      const int ni = eig_cell[e].first + di[d], nj = eig_cell[e].second + dj[d];
      if (ni < 0 || nj < 0 || ni >= g.n_im || nj >= g.n_re) continue;
      const GridCell& c = r.at(ni, nj);
      if (!detail::cell_valid(c) || c.estimate.status != PStatus::converged || !(c.estimate.lower > 0.0)) continue;
      lo = std::min(lo, c.estimate.lower);
      hi = std::max(hi, c.estimate.lower);
    }
    if (hi > 10.0 * lo)
      rep.warnings.push_back("grid may under-resolve eigenvalue " + std::to_string(e) +
                             " (neighbouring P-hat values differ by more than 10x)");
  }
  return rep;
}

inline nlohmann::json cluster_report_to_json(const ClusterReport& rep) {
  nlohmann::json clusters = nlohmann::json::array();
  for (const Cluster& c : rep.clusters)
    clusters.push_back({{"id", c.id}, {"members", c.members}, {"n_cells", c.cells.size()}, {"bulk", c.id == rep.bulk}});
  return {{"schema", "specguard/v1/clusters"},
          {"level", detail::finite_or_null(rep.level)},
          {"clusters", clusters},
          {"cluster_of", rep.cluster_of},
          {"bulk", rep.bulk},
          {"unresolved", rep.unresolved},
          {"warnings", rep.warnings}};
}

struct SampleSizeAdvice {
  double m_floor_1 = 0.0;  // 2 / P*
  double m_floor_2 = 0.0;  // 2 sqrt(N / P*)
  std::string text;
};

inline SampleSizeAdvice sample_size_advice(double p_star, Eigen::Index n) {
  if (!(p_star > 0.0)) throw Error(ErrorKind::usage, "p_star must be > 0");
  SampleSizeAdvice a;
  a.m_floor_1 = 2.0 / p_star;
  a.m_floor_2 = 2.0 * std::sqrt(static_cast<double>(n) / p_star);
  a.text = "reliable eigenvalue counts need M much larger than both " + detail::format_double(a.m_floor_1) + " and " +
           detail::format_double(a.m_floor_2);
  return a;
}

namespace detail {

/// ||p q* - I||_2 using the 2-dimensional span of p and q.
inline double rank_one_minus_identity_norm(const CVec& p, const CVec& q) {
  const Eigen::Index n = p.size();
  const double pn = p.norm();
  if (pn == 0.0) return 1.0;
  const CVec e1 = p / pn;
  const cplx q1 = e1.dot(q);
  const CVec rest = q - q1 * e1;
  const double q2 = rest.norm();
  const bool two_d = q2 > 1e-14 * std::max(1.0, q.norm());
  Eigen::Matrix2cd t = Eigen::Matrix2cd::Zero();
  t(0, 0) = pn * std::conj(q1);
  if (two_d) t(0, 1) = pn * q2;
  const Eigen::Index dim = two_d ? 2 : 1;
  t -= Eigen::Matrix2cd::Identity();
  double s = 0.0;
  if (dim == 2) {
    Eigen::JacobiSVD<Eigen::Matrix2cd> svd(t);
    s = svd.singularValues()(0);
  } else {
    s = std::abs(t(0, 0));
  }
  if (n > dim) s = std::max(s, 1.0);
  return s;
}

}  // namespace detail

/// max_m || Q^{1/2} (C^{-1} C_m - I) Q^{-1/2} ||_2 over the snapshots.
inline double r_estimate(const CharContext& ctx, const SnapshotFactors& f, const CMat& q) {
  if (ctx.singular()) throw Error(ErrorKind::at_eigenvalue, "C-hat(lambda) is singular");
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(q));
  if (es.eigenvalues().minCoeff() <= 0.0) throw Error(ErrorKind::not_spd, "Q must be positive definite");
  const RVec sq = es.eigenvalues().cwiseSqrt();
  const CMat half = es.eigenvectors() * sq.asDiagonal() * es.eigenvectors().adjoint();
  const CMat inv_half = es.eigenvectors() * sq.cwiseInverse().asDiagonal() * es.eigenvectors().adjoint();
  const CMat p = half * ctx.solve(f.u);
  const CMat w = inv_half * f.v;
  double r = 0.0;
  for (Eigen::Index m = 0; m < f.M(); ++m) r = std::max(r, detail::rank_one_minus_identity_norm(p.col(m), w.col(m)));
  return r;
}

struct CountingBound {
  double exponent = 0.0;
  double bound = 1.0;  // exp(-exponent); the constant prefactor is unknown
};

/// (1 / (1 + P* R / 3)) (P* / 2) M
inline CountingBound counting_exponent(double p_star, double r, Eigen::Index m_count) {
  if (p_star < 0.0 || r < 0.0) throw Error(ErrorKind::usage, "counting_exponent needs non-negative inputs");
  CountingBound c;
  c.exponent = (1.0 / (1.0 + p_star * r / 3.0)) * 0.5 * p_star * static_cast<double>(m_count);
  c.bound = std::exp(-c.exponent);
  return c;
}

struct SpectralEntry {
  int index = 0;
  double residual = 0.0;
  EigTestResult test;
  int cluster_id = -1;
};

struct SpectralReport {
  std::vector<SpectralEntry> eigen;  // tested sample eigenvalues
  std::vector<EigTestResult> points;  // user-supplied lambdas
  nlohmann::json grid_summary = nullptr;
  nlohmann::json kernel = nullptr;
  nlohmann::json provenance = nullptr;
};

inline nlohmann::json spectral_report_to_json(const SpectralReport& rep) {
  nlohmann::json eig = nlohmann::json::array();
  for (const SpectralEntry& e : rep.eigen) {
    nlohmann::json j = eig_test_to_json(e.test);
    j["index"] = e.index;
    j["residual"] = e.residual;
    j["cluster_id"] = e.cluster_id;
    eig.push_back(std::move(j));
  }
  nlohmann::json pts = nlohmann::json::array();
  for (const EigTestResult& t : rep.points) pts.push_back(eig_test_to_json(t));
  return {{"schema", "specguard/v1/report"}, {"eigenvalues", eig},     {"points", pts},
          {"grid", rep.grid_summary},        {"kernel", rep.kernel}, {"provenance", rep.provenance}};
}

}  // namespace specguard
