// SPDX-License-Identifier: Apache-2.0
#pragma once

// Lag-window estimators of the variance operator V[Q] for snapshot characteristic
// matrices, plus the exact i.i.d. form E[C* Q C] - C* Q C from supplied moments.

#include "specguard/charmatrix.hpp"
#include "specguard/core.hpp"
#include "specguard/ingest.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace specguard {

/// Window with non-negative Fourier transform and kappa_w(0) = 1, supported on (-1, 1).
inline double kappa_w(double x) {
  const double ax = std::abs(x);
  if (ax >= 1.0) return 0.0;
  return std::sin(M_PI * ax) / M_PI + (1.0 - ax) * std::cos(M_PI * ax);
}

enum class KernelMode { iid, windowed };

/// Lag weights kappa_M = kappa_p * kappa_w(./L_M); both weight vectors are stored
/// centred, index i <-> lag i - (size-1)/2.
struct KernelSpec {
  KernelMode mode = KernelMode::iid;
  int window = 0;  // L_M
  std::vector<cplx> mu;
  double mu_guard = 0.05;
  std::vector<double> kappa_p{1.0};
  std::vector<double> kappa_m{1.0};

  int max_lag() const { return (static_cast<int>(kappa_m.size()) - 1) / 2; }
  int metastability_order() const { return (static_cast<int>(kappa_p.size()) - 1) / 2; }

  double weight(int lag) const {
    const int l = max_lag();
    if (lag < -l || lag > l) return 0.0;
    return kappa_m[static_cast<std::size_t>(lag + l)];
  }
};

inline std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

/// kappa_p = d_{mu_1} * ... * d_{mu_K} with d_mu(0) = (1 + mu^2)/(1 - mu)^2, d_mu(+-1) = -mu/(1 - mu)^2.
inline std::vector<double> metastability_kernel(const std::vector<cplx>& mu_list, double mu_guard = 0.05) {
  std::vector<cplx> acc{1.0};
  for (const cplx mu : mu_list) {
    if (std::abs(1.0 - mu) < mu_guard)
      throw Error(ErrorKind::unstable_kernel, "metastability eigenvalue too close to 1 (|1 - mu| = " +
                                                  std::to_string(std::abs(1.0 - mu)) + ")");
    const cplx den = (1.0 - mu) * (1.0 - mu);
    const cplx side = -mu / den;
    const cplx centre = (1.0 + mu * mu) / den;
    std::vector<cplx> next(acc.size() + 2, 0.0);
    for (std::size_t i = 0; i < acc.size(); ++i) {
      next[i] += acc[i] * side;
      next[i + 1] += acc[i] * centre;
      next[i + 2] += acc[i] * side;
    }
    acc = std::move(next);
  }
  double scale = 0.0;
  for (const cplx c : acc) scale = std::max(scale, std::abs(c));
  std::vector<double> out(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) {
    if (std::abs(acc[i].imag()) > 1e-10 * std::max(1.0, scale))
      throw Error(ErrorKind::usage, "metastability eigenvalues must be real or come in conjugate pairs");
    out[i] = acc[i].real();
  }
  return out;
}

inline KernelSpec iid_kernel() { return KernelSpec{}; }

/// Windowed kernel with window L_M and resonance-cancelling factors for `mu`.
/// L_M = 0 with an empty mu list reduces to the i.i.d. kernel.
inline KernelSpec windowed_kernel(int window, std::vector<cplx> mu = {}, double mu_guard = 0.05) {
  if (window < 0) throw Error(ErrorKind::usage, "window L_M must be >= 0");
  KernelSpec k;
  k.window = window;
  k.mu_guard = mu_guard;
  k.kappa_p = metastability_kernel(mu, mu_guard);
  k.mu = std::move(mu);
  std::vector<double> w{1.0};
  if (window > 0) {
    w.assign(static_cast<std::size_t>(2 * window + 1), 0.0);
    for (int l = -window; l <= window; ++l) w[static_cast<std::size_t>(l + window)] = kappa_w(static_cast<double>(l) / window);
  }
  k.kappa_m = convolve(k.kappa_p, w);
  k.mode = (window == 0 && k.mu.empty()) ? KernelMode::iid : KernelMode::windowed;
  return k;
}

struct MuSelection {
  std::vector<cplx> mu;
  std::vector<std::string> warnings;
};

/// Top `k` eigenvalues by modulus, skipping those within `guard` of 1; a conjugate
/// partner is pulled in when the cut would split a pair.
inline MuSelection select_mu(const std::vector<cplx>& eigs_by_modulus, int k, double guard = 0.05) {
  if (k < 0) throw Error(ErrorKind::usage, "mu count must be >= 0");
  MuSelection sel;
  std::vector<bool> used(eigs_by_modulus.size(), false);
  const double pair_tol = 1e-8;
  for (std::size_t i = 0; i < eigs_by_modulus.size() && static_cast<int>(sel.mu.size()) < k; ++i) {
    if (used[i]) continue;
    const cplx z = eigs_by_modulus[i];
    used[i] = true;
    if (std::abs(1.0 - z) < guard) {
      sel.warnings.push_back("skipped eigenvalue " + std::to_string(i) + " within mu_guard of 1");
      continue;
    }
    if (std::abs(z.imag()) <= pair_tol * std::max(1.0, std::abs(z))) {
      sel.mu.emplace_back(z.real(), 0.0);
      continue;
    }
    std::size_t best = eigs_by_modulus.size();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < eigs_by_modulus.size(); ++j) {
      if (used[j]) continue;
      const double d = std::abs(eigs_by_modulus[j] - std::conj(z));
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    if (best == eigs_by_modulus.size() || best_d > 1e-6 * std::max(1.0, std::abs(z))) {
      sel.warnings.push_back("eigenvalue " + std::to_string(i) + " has no conjugate partner; skipped");
      continue;
    }
    used[best] = true;
    sel.mu.push_back(z);
    sel.mu.push_back(std::conj(z));
  }
  return sel;
}

inline nlohmann::json kernel_to_json(const KernelSpec& k) {
  nlohmann::json mu = nlohmann::json::array();
  for (const cplx m : k.mu) mu.push_back({m.real(), m.imag()});
  return {{"schema", "specguard/v1/kernel"},
          {"mode", k.mode == KernelMode::iid ? "iid" : "windowed"},
          {"L_M", k.window},
          {"mu", mu},
          {"mu_guard", k.mu_guard},
          {"kappa_p", k.kappa_p},
          {"kappa_M", k.kappa_m}};
}

inline KernelSpec kernel_from_json(const nlohmann::json& j) {
  std::vector<cplx> mu;
  for (const auto& m : j.at("mu")) mu.emplace_back(m.at(0).get<double>(), m.at(1).get<double>());
  return windowed_kernel(j.at("L_M").get<int>(), mu, j.value("mu_guard", 0.05));
}

/// L_M ~ tau (16 M / (pi^4 tau))^{1/5}, rounded, clamped to [1, floor(sqrt(M))].
inline int window_length(double tau, Eigen::Index m_count) {
  if (!(tau > 0.0) || m_count < 2) throw Error(ErrorKind::usage, "window_length needs tau > 0 and M >= 2");
  const double raw = tau * std::pow(16.0 * static_cast<double>(m_count) / (std::pow(M_PI, 4) * tau), 0.2);
  const int cap = static_cast<int>(std::floor(std::sqrt(static_cast<double>(m_count))));
  const double rounded = std::round(raw);
  if (!(rounded < cap)) return std::max(1, cap);
  return std::max(1, static_cast<int>(rounded));
}

/// Decorrelation time from an exponential fit to Re tr Gamma_l (Q = I, lambda = 0).
inline double estimate_tau(const SnapshotSeries& series) {
  const SnapshotFactors f = snapshot_factors(series, 0.0);
  const Eigen::Index m_count = f.M();
  const int max_lag = static_cast<int>(std::min<Eigen::Index>(50, m_count / 10));
  if (max_lag < 1) return 1.0;
  const CMat c_hat = f.mean();
  // tr(D_j* D_k), D = C - C_hat, expanded through the rank-one factors.
  const Eigen::RowVectorXcd uc = (f.u.adjoint() * c_hat * f.v).diagonal().transpose();  // u_k* C v_k
  const double cc = c_hat.squaredNorm();
  std::vector<double> tr(static_cast<std::size_t>(max_lag + 1), 0.0);
  for (int l = 0; l <= max_lag; ++l) {
    cplx acc = 0.0;
    for (Eigen::Index m = 0; m + l < m_count; ++m) {
      const Eigen::Index j = m + l;
      // tr(C_j^* C_m) = (u_j^* u_m)(v_m^* v_j)
      const cplx cjcm = f.u.col(j).dot(f.u.col(m)) * f.v.col(m).dot(f.v.col(j));
      acc += cjcm - std::conj(uc(j)) - uc(m) + cc;
    }
    tr[static_cast<std::size_t>(l)] = acc.real() / static_cast<double>(m_count);
  }
  if (!(tr[0] > 0.0)) return 1.0;
  double num = 0.0, den = 0.0;
  for (int l = 1; l <= max_lag; ++l) {
    const double r = tr[static_cast<std::size_t>(l)] / tr[0];
    if (!(r > 0.05)) break;
    num += l * std::log(r);
    den += static_cast<double>(l) * l;
  }
  if (den == 0.0) return 0.5;
  const double slope = num / den;
  if (!(slope < 0.0)) return static_cast<double>(max_lag);
  return std::min(-1.0 / slope, static_cast<double>(max_lag));
}

struct VarianceApplication {
  CMat result;
  bool psd_repair_applied = false;
};

namespace detail {

/// Symmetrize; when the input was PSD, clip round-off negative eigenvalues.
inline VarianceApplication finalize_variance(CMat v, bool psd_input) {
  VarianceApplication out;
  out.result = hermitian_part(v);
  if (!psd_input) return out;
  Eigen::SelfAdjointEigenSolver<CMat> es(out.result);
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig >= 0.0) return out;
  const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
  if (min_eig < -1e-10 * scale)
    throw Error(ErrorKind::numeric, "variance estimate lost positive semi-definiteness (min eigenvalue " +
                                        std::to_string(min_eig) + ", scale " + std::to_string(scale) + ")");
  const RVec clipped = es.eigenvalues().cwiseMax(0.0);
  out.result = hermitian_part(es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().adjoint());
  out.psd_repair_applied = true;
  return out;
}

inline void check_window(const KernelSpec& k, Eigen::Index m_count) {
  if (k.max_lag() >= m_count)
    throw Error(ErrorKind::window_too_large, "kernel lag " + std::to_string(k.max_lag()) + " needs more than " +
                                                 std::to_string(m_count) + " samples");
}

}  // namespace detail

/// Direct lag sum: Gamma_l = (1/M) sum_{m} (C_{m+l} - C)* Q (C_m - C), V = sum_l kappa(l) Gamma_l.
inline VarianceApplication variance_apply_naive(const CMat& q, const SnapshotFactors& f, const KernelSpec& k,
                                                bool psd_input = false) {
  const Eigen::Index m_count = f.M();
  detail::check_window(k, m_count);
  const CMat c_hat = f.mean();
  std::vector<CMat> d(static_cast<std::size_t>(m_count));
  std::vector<CMat> qd(static_cast<std::size_t>(m_count));
  for (Eigen::Index m = 0; m < m_count; ++m) {
    d[static_cast<std::size_t>(m)] = f.snapshot(m) - c_hat;
    qd[static_cast<std::size_t>(m)] = q * d[static_cast<std::size_t>(m)];
  }
  const Eigen::Index n = f.N();
  CMat v = CMat::Zero(n, n);
  for (int l = 0; l <= k.max_lag(); ++l) {
    const double w = k.weight(l);
    if (w == 0.0) continue;
    CMat gamma = CMat::Zero(n, n);
    for (Eigen::Index m = 0; m + l < m_count; ++m)
      gamma += d[static_cast<std::size_t>(m + l)].adjoint() * qd[static_cast<std::size_t>(m)];
    gamma /= static_cast<double>(m_count);
    if (l == 0)
      v += w * gamma;
    else
      v += w * (gamma + gamma.adjoint());
  }
  return detail::finalize_variance(std::move(v), psd_input);
}

/// Rank-one fast path, O(N^3 + M N^2 + M L N). Builds the half-sum
/// Vt = sum_{l>=0} kt(l) Gamma_l (kt(0) = kappa(0)/2) and returns Vt + Vt*.
inline VarianceApplication variance_apply(const CMat& q, const SnapshotFactors& f, const KernelSpec& k,
                                          bool psd_input = false) {
  const Eigen::Index m_count = f.M();
  const Eigen::Index n = f.N();
  detail::check_window(k, m_count);
  const int lag_max = k.max_lag();
  const double inv_m = 1.0 / static_cast<double>(m_count);
  std::vector<double> kt(static_cast<std::size_t>(lag_max + 1));
  for (int l = 0; l <= lag_max; ++l) kt[static_cast<std::size_t>(l)] = (l == 0 ? 0.5 : 1.0) * k.weight(l);

  const CMat c_hat = f.mean();
  const CMat g = q * f.u;  // Q u_m
  // Z_m = sum_l kt(l) (u_{m+l}* Q u_m) v_{m+l}
  CMat z = CMat::Zero(n, m_count);
  for (int l = 0; l <= lag_max; ++l) {
    const double w = kt[static_cast<std::size_t>(l)];
    if (w == 0.0) continue;
    const Eigen::Index len = m_count - l;
    const Eigen::RowVectorXcd s =
        (f.u.middleCols(l, len).conjugate().cwiseProduct(g.leftCols(len))).colwise().sum() * w;
    z.leftCols(len) += f.v.middleCols(l, len) * s.asDiagonal();
  }
  CMat vt = z * f.v.adjoint() * inv_m;

  if (lag_max > 0) {
    // sum_l kt(l) sum_{m<l} C_m  and the matching suffix sum over the last l snapshots.
    RVec alpha(lag_max);
    double run = 0.0;
    for (int j = lag_max - 1; j >= 0; --j) {
      run += kt[static_cast<std::size_t>(j + 1)];
      alpha(j) = run;
    }
    const CMat prefix = f.u.leftCols(lag_max) * alpha.asDiagonal() * f.v.leftCols(lag_max).adjoint();
    const CMat suffix = f.u.rightCols(lag_max) * alpha.reverse().asDiagonal() * f.v.rightCols(lag_max).adjoint();
    vt += (prefix.adjoint() * q * c_hat + c_hat.adjoint() * q * suffix) * inv_m;
  }
  double coef = 0.0;
  for (int l = 0; l <= lag_max; ++l)
    coef += kt[static_cast<std::size_t>(l)] * static_cast<double>(m_count + l) * inv_m;
  vt -= coef * (c_hat.adjoint() * q * c_hat);

  CMat v = vt + vt.adjoint();
  return detail::finalize_variance(std::move(v), psd_input);
}

inline VarianceApplication variance_apply_naive(const CMat& q, cplx lambda, const SnapshotSeries& series,
                                                const KernelSpec& k, bool psd_input = false) {
  return variance_apply_naive(q, snapshot_factors(series, lambda), k, psd_input);
}

inline VarianceApplication variance_apply(const CMat& q, cplx lambda, const SnapshotSeries& series,
                                          const KernelSpec& k, bool psd_input = false) {
  return variance_apply(q, snapshot_factors(series, lambda), k, psd_input);
}

/// Exact expectations of the snapshot characteristic matrices (closed forms or quadrature).
class ExactMoments {
 public:
  virtual ~ExactMoments() = default;
  virtual Eigen::Index dimension() const = 0;
  /// C(lambda) = E[C_lambda(omega)]
  virtual CMat char_matrix(cplx lambda) const = 0;
  /// E[C_lambda(omega)* Q C_lambda(omega)]
  virtual CMat second_moment(cplx lambda, const CMat& q) const = 0;
  /// E[C_lambda(omega) Q C_lambda(omega)*]
  virtual CMat adjoint_second_moment(cplx lambda, const CMat& q) const = 0;
};

/// V[Q] = E[C* Q C] - C* Q C for independent samples.
inline CMat variance_exact_iid(const CMat& q, cplx lambda, const ExactMoments& moments) {
  const CMat c = moments.char_matrix(lambda);
  return hermitian_part(moments.second_moment(lambda, q) - c.adjoint() * q * c);
}

}  // namespace specguard
