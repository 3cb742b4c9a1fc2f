// SPDX-License-Identifier: Apache-2.0
#pragma once

// Gram matrices, the EDMD matrix and per-lambda characteristic matrices
// C(lambda) = lambda Psi_XX - Psi_XY with their LU factorizations.

#include "specguard/core.hpp"
#include "specguard/ingest.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace specguard {

inline double default_rcond_floor(Eigen::Index n) { return 1e-10 * static_cast<double>(n); }

struct GramPair {
  CMat psi_xx;  // (1/M) sum a a*
  CMat psi_xy;  // (1/M) sum a b*
  Eigen::Index M = 0;

  Eigen::Index N() const { return psi_xx.rows(); }
};

inline GramPair gram_matrices(const SnapshotSeries& series) {
  if (series.M() < 2) throw Error(ErrorKind::insufficient_data, "need M >= 2");
  const double inv_m = 1.0 / static_cast<double>(series.M());
  GramPair g;
  g.M = series.M();
  g.psi_xx = hermitian_part(series.x * series.x.adjoint() * inv_m);
  g.psi_xy = series.x * series.y.adjoint() * inv_m;
  return g;
}

namespace detail {

inline double safe_rcond(const Eigen::PartialPivLU<CMat>& lu) {
  const double r = lu.rcond();
  return std::isfinite(r) ? r : 0.0;
}

}  // namespace detail

struct EdmdResult {
  CMat k_hat;
  double rcond = 0.0;  // of psi_xx
};

/// K = Psi_XX^{-1} Psi_XY by LU solve.
inline EdmdResult edmd_matrix(const GramPair& g, double rcond_floor = -1.0) {
  if (rcond_floor < 0.0) rcond_floor = default_rcond_floor(g.N());
  Eigen::PartialPivLU<CMat> lu(g.psi_xx);
  EdmdResult r;
  r.rcond = detail::safe_rcond(lu);
  if (r.rcond < rcond_floor) {
    throw Error(ErrorKind::ill_conditioned,
                "Psi_XX rcond " + detail::format_double(r.rcond) + " below floor " + detail::format_double(rcond_floor));
  }
  r.k_hat = lu.solve(g.psi_xy);
  return r;
}

/// Factorized characteristic matrix at a fixed lambda; reused for every solve at that point.
class CharContext {
 public:
  CharContext(cplx lambda, CMat c_hat, double rcond_floor)
      : lambda_(lambda), c_hat_(std::move(c_hat)), lu_(c_hat_), rcond_floor_(rcond_floor) {
    rcond_ = detail::safe_rcond(lu_);
    singular_ = !(rcond_ >= rcond_floor_);
  }

  cplx lambda() const { return lambda_; }
  const CMat& c_hat() const { return c_hat_; }
  double rcond() const { return rcond_; }
  double rcond_floor() const { return rcond_floor_; }
  bool singular() const { return singular_; }
  Eigen::Index N() const { return c_hat_.rows(); }
  const Eigen::PartialPivLU<CMat>& factorization() const { return lu_; }

  /// C^{-1} B
  CMat solve(const CMat& b) const { return lu_.solve(b); }

  /// C^{-*} B
  CMat solve_adjoint(const CMat& b) const { return lu_.adjoint().solve(b); }

  /// C^{-*} Q C^{-1}, Hermitian for Hermitian Q.
  CMat congruence(const CMat& q) const {
    const CMat left = solve_adjoint(q);                      // C^{-*} Q
    const CMat w = solve_adjoint(left.adjoint()).adjoint();  // (C^{-*} (C^{-*} Q)^*)^*
    return hermitian_part(w);
  }

  /// ||LU recomposition - C|| / ||C||
  double recomposition_error() const {
    const CMat rec = lu_.reconstructedMatrix();
    const double nrm = c_hat_.norm();
    return nrm > 0.0 ? (rec - c_hat_).norm() / nrm : (rec - c_hat_).norm();
  }

 private:
  cplx lambda_;
  CMat c_hat_;
  Eigen::PartialPivLU<CMat> lu_;
  double rcond_floor_;
  double rcond_ = 0.0;
  bool singular_ = false;
};

inline CharContext char_context(const GramPair& g, cplx lambda, double rcond_floor = -1.0) {
  if (rcond_floor < 0.0) rcond_floor = default_rcond_floor(g.N());
  return CharContext(lambda, lambda * g.psi_xx - g.psi_xy, rcond_floor);
}

struct EigenPair {
  cplx value;
  CVec vector;
  double residual = 0.0;  // ||K v - lambda v|| / ||v||
};

/// Eigenpairs sorted by descending modulus; ties keep solver order.
inline std::vector<EigenPair> eigensystem(const CMat& k_hat) {
  if (!k_hat.allFinite()) throw Error(ErrorKind::numeric, "EDMD matrix has non-finite entries");
  Eigen::ComplexEigenSolver<CMat> es(k_hat, true);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::numeric, "eigensolver did not converge");
  const Eigen::Index n = k_hat.rows();
  std::vector<EigenPair> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    EigenPair p;
    p.value = es.eigenvalues()(i);
    p.vector = es.eigenvectors().col(i);
    const double vn = p.vector.norm();
    p.residual = vn > 0.0 ? (k_hat * p.vector - p.value * p.vector).norm() / vn : 0.0;
    out.push_back(std::move(p));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const EigenPair& a, const EigenPair& b) { return std::abs(a.value) > std::abs(b.value); });
  return out;
}

inline std::vector<cplx> eigenvalues_of(const std::vector<EigenPair>& pairs) {
  std::vector<cplx> v;
  v.reserve(pairs.size());
  for (const auto& p : pairs) v.push_back(p.value);
  return v;
}

/// Rank-one snapshot factors: C_lambda(omega_m) = u_m v_m*, stored as columns.
struct SnapshotFactors {
  CMat u;
  CMat v;

  Eigen::Index M() const { return u.cols(); }
  Eigen::Index N() const { return u.rows(); }

  /// (1/M) sum u_m v_m*
  CMat mean() const { return u * v.adjoint() / static_cast<double>(u.cols()); }

  CMat snapshot(Eigen::Index m) const { return u.col(m) * v.col(m).adjoint(); }
};

/// u_m = psi(X_m), v_m = conj(lambda) psi(X_m) - psi(Y_m).
inline SnapshotFactors snapshot_factors(const SnapshotSeries& series, cplx lambda) {
  SnapshotFactors f;
  f.u = series.x;
  f.v = std::conj(lambda) * series.x - series.y;
  return f;
}

}  // namespace specguard
