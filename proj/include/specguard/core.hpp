// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace specguard {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

inline constexpr const char* kVersion = "0.1.0";

enum class ErrorKind {
  format,
  shape,
  insufficient_data,
  not_spd,
  integrator,
  ill_conditioned,
  numeric,
  unstable_kernel,
  window_too_large,
  unsupported_mode,
  degenerate,
  cost_guard,
  at_eigenvalue,
  usage,
  resource,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::format: return "format";
    case ErrorKind::shape: return "shape";
    case ErrorKind::insufficient_data: return "insufficient-data";
    case ErrorKind::not_spd: return "not-spd";
    case ErrorKind::integrator: return "integrator";
    case ErrorKind::ill_conditioned: return "ill-conditioned-gram";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::unstable_kernel: return "unstable-kernel";
    case ErrorKind::window_too_large: return "window-too-large";
    case ErrorKind::unsupported_mode: return "unsupported-mode";
    case ErrorKind::degenerate: return "degenerate-s";
    case ErrorKind::cost_guard: return "cost-guard";
    case ErrorKind::at_eigenvalue: return "at-eigenvalue";
    case ErrorKind::usage: return "usage";
    case ErrorKind::resource: return "resource";
  }
  return "unknown";
}

/// Library-wide exception; the kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// (Q + Q*) / 2
inline CMat hermitian_part(const CMat& q) {
  CMat h = (q + q.adjoint()) * 0.5;
  return h;
}

inline bool all_finite(const CMat& m) { return m.allFinite(); }

inline double min_eigenvalue(const CMat& h) {
  Eigen::SelfAdjointEigenSolver<CMat> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline double max_abs_eigenvalue(const CMat& h) {
  Eigen::SelfAdjointEigenSolver<CMat> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline double real_trace(const CMat& m) { return m.trace().real(); }

/// Frobenius pairing <A, B> = Re tr(A* B).
inline double frobenius_inner(const CMat& a, const CMat& b) {
  return (a.adjoint() * b).trace().real();
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seed for the `stream`-th independent replication derived from `base`.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(base ^ splitmix64(stream + 0x632BE59BD9B4E019ull));
}

/// Portable random source: mt19937_64 words, 53-bit uniforms, Box-Muller normals.
/// The distributions are written out so streams are identical across platforms.
class Rng {
 public:
  static constexpr const char* kAlgorithm = "mt19937_64/u53/box-muller";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  RVec normal_vector(Eigen::Index n) {
    RVec z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = normal();
    return z;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Random Hermitian PSD matrix of rank `rank` (full rank by default), trace-normalised.
inline CMat random_psd(Rng& rng, Eigen::Index n, Eigen::Index rank = -1) {
  if (rank < 0) rank = n;
  CMat g(n, rank);
  for (Eigen::Index j = 0; j < rank; ++j)
    for (Eigen::Index i = 0; i < n; ++i) g(i, j) = cplx(rng.normal(), rng.normal());
  CMat q = g * g.adjoint();
  q = hermitian_part(q);
  return q / real_trace(q);
}

inline CMat random_hermitian(Rng& rng, Eigen::Index n) {
  CMat g(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) g(i, j) = cplx(rng.normal(), rng.normal());
  return hermitian_part(g);
}

}  // namespace specguard
