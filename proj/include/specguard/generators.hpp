// SPDX-License-Identifier: Apache-2.0
#pragma once

// Sampling processes: Gaussian VAR(1) pairs, the expanding circle map, Lorenz-63.

#include "specguard/core.hpp"
#include "specguard/ingest.hpp"

#include <array>
#include <utility>

namespace specguard {

struct VarSpec {
  RMat A;
  RMat sigma_x;
  RMat sigma_xi;
  std::uint64_t seed = 0;

  Eigen::Index N() const { return A.rows(); }

  /// 7x7 system with Sigma_X = I and Sigma_xi = 0.1 I.
  static VarSpec paper_preset(std::uint64_t seed = 0) {
    VarSpec s;
    s.A.resize(7, 7);
    // clang-format off
    s.A << -0.9, 0.0,  0.0, 0.0, 0.0, 0.0, 0.0,
            0.1, -0.3, -0.4, 0.0, 0.0, 0.0, 0.1,
            0.1, 0.4, -0.3, 0.1, 0.0, 0.0, 0.0,
            0.1, 0.0,  0.0, 0.5, 0.0, 0.1, 0.0,
            0.0, 0.0,  0.0, 1.0, 0.5, 0.0, 0.1,
            0.1, 0.0,  0.0, 0.0, 0.9, 0.5, 0.1,
            0.0, 0.0,  0.0, 0.1, 0.1, 0.9, 0.5;
    // clang-format on
    s.sigma_x = RMat::Identity(7, 7);
    s.sigma_xi = 0.1 * RMat::Identity(7, 7);
    s.seed = seed;
    return s;
  }

  static VarSpec scalar(double a, double sigma_x, double sigma_xi, std::uint64_t seed = 0) {
    VarSpec s;
    s.A = RMat::Constant(1, 1, a);
    s.sigma_x = RMat::Constant(1, 1, sigma_x);
    s.sigma_xi = RMat::Constant(1, 1, sigma_xi);
    s.seed = seed;
    return s;
  }
};

namespace detail {

inline RMat psd_sqrt(const RMat& s, const char* name) {
  Eigen::SelfAdjointEigenSolver<RMat> es(s);
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < -1e-12 * scale)
    throw Error(ErrorKind::not_spd, std::string(name) + " is not positive semi-definite");
  const RVec root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// X ~ N(0, Sigma_X) i.i.d., Y = A X + xi with xi ~ N(0, Sigma_xi). Rows are samples.
inline std::pair<RMat, RMat> gen_var(const VarSpec& spec, Eigen::Index m_count) {
  const Eigen::Index n = spec.N();
  if (spec.A.cols() != n || spec.sigma_x.rows() != n || spec.sigma_x.cols() != n || spec.sigma_xi.rows() != n ||
      spec.sigma_xi.cols() != n)
    throw Error(ErrorKind::shape, "VarSpec matrices must all be N x N");
  if (m_count < 2) throw Error(ErrorKind::insufficient_data, "need M >= 2");
  if ((spec.sigma_x - spec.sigma_x.transpose()).norm() > 1e-12 * std::max(1.0, spec.sigma_x.norm()))
    throw Error(ErrorKind::not_spd, "Sigma_X is not symmetric");
  Eigen::LLT<RMat> llt(spec.sigma_x);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::not_spd, "Cholesky of Sigma_X failed");
  const RMat lx = llt.matrixL();
  const RMat sxi = detail::psd_sqrt(spec.sigma_xi, "Sigma_xi");

  Rng rng(spec.seed);
  RMat xs(m_count, n), ys(m_count, n);
  for (Eigen::Index m = 0; m < m_count; ++m) {
    const RVec x = lx * rng.normal_vector(n);
    const RVec xi = sxi * rng.normal_vector(n);
    xs.row(m) = x.transpose();
    ys.row(m) = (spec.A * x + xi).transpose();
  }
  return {xs, ys};
}

inline double wrap_two_pi(double v) {
  constexpr double two_pi = 2.0 * M_PI;
  double r = std::fmod(v, two_pi);
  if (r < 0.0) r += two_pi;
  if (r >= two_pi) r = 0.0;
  return r;
}

/// f(x) = 2x + 2 pi (-0.03 + 0.04 sin x + 0.03 cos 3x - 0.03 sin 3x) mod 2 pi
inline double expanding_map(double x) {
  return wrap_two_pi(2.0 * x +
                     2.0 * M_PI * (-0.03 + 0.04 * std::sin(x) + 0.03 * std::cos(3.0 * x) - 0.03 * std::sin(3.0 * x)));
}

/// i.i.d. mode draws X ~ U(0, 2 pi); trajectory mode chains x_{m+1} = y_m.
inline std::pair<RMat, RMat> gen_expanding_map(Eigen::Index m_count, SamplingKind mode, std::uint64_t seed) {
  if (m_count < 2) throw Error(ErrorKind::insufficient_data, "need M >= 2");
  Rng rng(seed);
  RMat xs(m_count, 1), ys(m_count, 1);
  double x = rng.uniform(0.0, 2.0 * M_PI);
  for (Eigen::Index m = 0; m < m_count; ++m) {
    if (mode == SamplingKind::iid && m > 0) x = rng.uniform(0.0, 2.0 * M_PI);
    const double y = expanding_map(x);
    xs(m, 0) = x;
    ys(m, 0) = y;
    x = y;
  }
  return {xs, ys};
}

struct Lorenz63Spec {
  double sigma = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;
  double dt_sample = 0.2;
  int substeps = 20;
  int burn_in = 500;
  std::uint64_t seed = 0;
  std::array<double, 3> initial{1.0, 1.0, 1.0};
  double jitter = 1e-3;

  void validate() const {
    if (substeps < 1 || burn_in < 0 || !(dt_sample > 0.0))
      throw Error(ErrorKind::usage, "Lorenz63Spec needs dt_sample > 0 and substeps >= 1");
    if (dt_sample / substeps > 0.01 + 1e-15)
      throw Error(ErrorKind::usage, "integrator step dt_sample/substeps must be <= 0.01");
  }
};

namespace detail {

inline Eigen::Vector3d lorenz_rhs(const Lorenz63Spec& p, const Eigen::Vector3d& s) {
  return {p.sigma * (s(1) - s(0)), s(0) * (p.rho - s(2)) - s(1), s(0) * s(1) - p.beta * s(2)};
}

inline Eigen::Vector3d rk4_step(const Lorenz63Spec& p, const Eigen::Vector3d& s, double h) {
  const Eigen::Vector3d k1 = lorenz_rhs(p, s);
  const Eigen::Vector3d k2 = lorenz_rhs(p, s + 0.5 * h * k1);
  const Eigen::Vector3d k3 = lorenz_rhs(p, s + 0.5 * h * k2);
  const Eigen::Vector3d k4 = lorenz_rhs(p, s + h * k3);
  return s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detail

/// Classical RK4 trajectory sampled every dt_sample; returns (M + 1) x 3 states after burn-in.
inline RMat gen_lorenz63(const Lorenz63Spec& spec, Eigen::Index m_count) {
  spec.validate();
  if (m_count < 2) throw Error(ErrorKind::insufficient_data, "need M >= 2");
  Rng rng(spec.seed);
  Eigen::Vector3d s(spec.initial[0], spec.initial[1], spec.initial[2]);
  if (spec.jitter > 0.0)
    for (int k = 0; k < 3; ++k) s(k) += spec.jitter * rng.uniform(-1.0, 1.0);
  const double h = spec.dt_sample / spec.substeps;
  RMat out(m_count + 1, 3);
  const long total = static_cast<long>(spec.burn_in) + static_cast<long>(m_count) + 1;
  for (long k = 0; k < total; ++k) {
    if (k > 0) {
      for (int j = 0; j < spec.substeps; ++j) s = detail::rk4_step(spec, s, h);
      if (!s.allFinite()) throw Error(ErrorKind::integrator, "state diverged at sample " + std::to_string(k));
    }
    if (k >= spec.burn_in) out.row(k - spec.burn_in) = s.transpose();
  }
  return out;
}

}  // namespace specguard
