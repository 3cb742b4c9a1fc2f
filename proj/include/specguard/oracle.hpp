// SPDX-License-Identifier: Apache-2.0
#pragma once

// Ground truth: closed forms for the Gaussian VAR(1) model with the identity dictionary,
// equispaced quadrature moments for circle maps, and a dense matrix for any
// real-linear operator on Hermitian matrices.

#include "specguard/charmatrix.hpp"
#include "specguard/core.hpp"
#include "specguard/generators.hpp"
#include "specguard/ingest.hpp"
#include "specguard/pseudospec.hpp"
#include "specguard/variance.hpp"

#include <functional>
#include <string>
#include <vector>

namespace specguard {

namespace detail {

/// (lambda I - A*)^{-1}; throws at_eigenvalue when the shifted matrix is singular.
inline CMat var_resolvent(const RMat& a, cplx lambda) {
  const Eigen::Index n = a.rows();
  const CMat shifted = lambda * CMat::Identity(n, n) - a.transpose().cast<cplx>();
  Eigen::PartialPivLU<CMat> lu(shifted);
  if (!(safe_rcond(lu) >= default_rcond_floor(n)))
    throw Error(ErrorKind::at_eigenvalue, "lambda is an eigenvalue of A*");
  return lu.inverse();
}

/// E[(x^T M x) x x^T] for real x ~ N(0, S): tr(M S) S + S M S + S M^T S.
inline CMat gaussian_quartic(const CMat& s, const CMat& m) {
  return (m * s).trace() * s + s * m * s + s * m.transpose() * s;
}

}  // namespace detail

/// P(lambda) = 1 / (N + 1 + tr Sigma_xi R Sigma_X^{-1} R*); 0 on the spectrum of A*.
inline double var_p_exact(const VarSpec& spec, cplx lambda) {
  CMat r;
  try {
    r = detail::var_resolvent(spec.A, lambda);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::at_eigenvalue) return 0.0;
    throw;
  }
  const CMat sx = spec.sigma_x.cast<cplx>();
  const CMat sxi = spec.sigma_xi.cast<cplx>();
  const CMat sx_inv_rs = sx.llt().solve(r.adjoint());
  const double t = (sxi * r * sx_inv_rs).trace().real();
  return 1.0 / (static_cast<double>(spec.N()) + 1.0 + t);
}

/// V[Q] = tr(Sigma_X Q)(R^{-*} Sigma_X R^{-1} + Sigma_xi) + R^{-*} Sigma_X Q^T Sigma_X R^{-1}.
/// Q^T is the plain transpose.
inline CMat var_v_exact(const VarSpec& spec, cplx lambda, const CMat& q) {
  const CMat r = detail::var_resolvent(spec.A, lambda);
  const Eigen::Index n = spec.N();
  const CMat r_inv = lambda * CMat::Identity(n, n) - spec.A.transpose().cast<cplx>();
  const CMat sx = spec.sigma_x.cast<cplx>();
  const CMat sxi = spec.sigma_xi.cast<cplx>();
  const cplx tq = (sx * q).trace();
  CMat v = tq * (r_inv.adjoint() * sx * r_inv + sxi) + r_inv.adjoint() * sx * q.transpose() * sx * r_inv;
  return hermitian_part(v);
}

/// Exact moments of the VAR model observed through psi(x) = x.
class VarMoments : public ExactMoments {
 public:
  explicit VarMoments(VarSpec spec) : spec_(std::move(spec)) {}

  const VarSpec& spec() const { return spec_; }
  Eigen::Index dimension() const override { return spec_.N(); }

  CMat psi_xx() const { return spec_.sigma_x.cast<cplx>(); }
  CMat psi_xy() const { return (spec_.sigma_x * spec_.A.transpose()).cast<cplx>(); }

  /// Sigma_X R^{-1}
  CMat char_matrix(cplx lambda) const override { return lambda * psi_xx() - psi_xy(); }

  // C_w = x v*, v = B x - xi, B = conj(lambda) I - A
  CMat second_moment(cplx lambda, const CMat& q) const override {
    const CMat b = shift(lambda);
    const CMat sx = psi_xx();
    const CMat sxi = spec_.sigma_xi.cast<cplx>();
    return hermitian_part(b * detail::gaussian_quartic(sx, q) * b.adjoint() + (q * sx).trace() * sxi);
  }

  CMat adjoint_second_moment(cplx lambda, const CMat& q) const override {
    const CMat b = shift(lambda);
    const CMat sx = psi_xx();
    const CMat sxi = spec_.sigma_xi.cast<cplx>();
    return hermitian_part(detail::gaussian_quartic(sx, b.adjoint() * q * b) + (q * sxi).trace() * sx);
  }

 private:
  CMat shift(cplx lambda) const {
    const Eigen::Index n = spec_.N();
    return std::conj(lambda) * CMat::Identity(n, n) - spec_.A.cast<cplx>();
  }

  VarSpec spec_;
};

using CircleMap = std::function<double(double)>;

/// E[g(X, f(X))] for X uniform on the circle, by the equispaced rule with weight 1/n.
class QuadratureMoments : public ExactMoments {
 public:
  QuadratureMoments(CircleMap map, const DictionarySpec& dict, int n_nodes = 4096) : dict_(dict) {
    if (dict.variant != DictionarySpec::Variant::trig)
      throw Error(ErrorKind::usage, "quadrature moments need a trigonometric dictionary");
    const Eigen::Index n = dict.size();
    if (n_nodes < 4 * n)
      throw Error(ErrorKind::usage, "quadrature needs at least 4N nodes (got " + std::to_string(n_nodes) + ")");
    w_ = 1.0 / n_nodes;
    u_.resize(n, n_nodes);
    y_.resize(n, n_nodes);
    for (int k = 0; k < n_nodes; ++k) {
      const double x = 2.0 * M_PI * k / n_nodes;
      u_.col(k) = trig_features(x, static_cast<int>(n));
      y_.col(k) = trig_features(map(x), static_cast<int>(n));
    }
    psi_xx_ = hermitian_part(u_ * u_.adjoint() * w_);
    psi_xy_ = u_ * y_.adjoint() * w_;
  }

  Eigen::Index dimension() const override { return u_.rows(); }
  int n_nodes() const { return static_cast<int>(u_.cols()); }
  const CMat& psi_xx() const { return psi_xx_; }
  const CMat& psi_xy() const { return psi_xy_; }
  GramPair gram() const { return {psi_xx_, psi_xy_, u_.cols()}; }

  CMat koopman_matrix() const { return psi_xx_.ldlt().solve(psi_xy_); }

  CMat char_matrix(cplx lambda) const override { return lambda * psi_xx_ - psi_xy_; }

  CMat second_moment(cplx lambda, const CMat& q) const override {
    const CMat v = std::conj(lambda) * u_ - y_;
    const Eigen::RowVectorXcd s = u_.conjugate().cwiseProduct(q * u_).colwise().sum() * w_;
    return hermitian_part(v * s.asDiagonal() * v.adjoint());
  }

  CMat adjoint_second_moment(cplx lambda, const CMat& q) const override {
    const CMat v = std::conj(lambda) * u_ - y_;
    const Eigen::RowVectorXcd s = v.conjugate().cwiseProduct(q * v).colwise().sum() * w_;
    return hermitian_part(u_ * s.asDiagonal() * u_.adjoint());
  }

 private:
  DictionarySpec dict_;
  double w_ = 0.0;
  CMat u_, y_;
  CMat psi_xx_, psi_xy_;
};

/// Orthonormal real basis of N x N Hermitian matrices under Re tr(A* B).
inline std::vector<CMat> hermitian_basis(Eigen::Index n) {
  std::vector<CMat> basis;
  basis.reserve(static_cast<std::size_t>(n * n));
  const double r = 1.0 / std::sqrt(2.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    CMat e = CMat::Zero(n, n);
    e(i, i) = 1.0;
    basis.push_back(e);
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      CMat s = CMat::Zero(n, n);
      s(i, j) = r;
      s(j, i) = r;
      basis.push_back(s);
      CMat a = CMat::Zero(n, n);
      a(i, j) = cplx(0.0, r);
      a(j, i) = cplx(0.0, -r);
      basis.push_back(a);
    }
  return basis;
}

struct DenseOperator {
  RMat matrix;  // N^2 x N^2
  double spectral_radius = 0.0;
  double leading_real = 0.0;  // largest real eigenvalue
};

inline DenseOperator s_matrix_bruteforce(const HermitianMap& s, Eigen::Index n) {
  if (n > 8) throw Error(ErrorKind::cost_guard, "dense operator limited to N <= 8");
  const std::vector<CMat> basis = hermitian_basis(n);
  const Eigen::Index d = static_cast<Eigen::Index>(basis.size());
  DenseOperator out;
  out.matrix.resize(d, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const CMat img = s(basis[static_cast<std::size_t>(k)]);
    for (Eigen::Index l = 0; l < d; ++l) out.matrix(l, k) = frobenius_inner(basis[static_cast<std::size_t>(l)], img);
  }
  Eigen::EigenSolver<RMat> es(out.matrix, false);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::numeric, "dense eigensolver did not converge");
  out.leading_real = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < d; ++i) {
    const cplx ev = es.eigenvalues()(i);
    out.spectral_radius = std::max(out.spectral_radius, std::abs(ev));
    if (std::abs(ev.imag()) <= 1e-10 * std::max(1.0, std::abs(ev))) out.leading_real = std::max(out.leading_real, ev.real());
  }
  return out;
}

struct OracleCheck {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct OracleOptions {
  double perturb = 0.0;  // relative error injected into the engine-side operator
  int seeds = 1;
  std::uint64_t base_seed = 1;
};

struct OracleReport {
  std::vector<OracleCheck> checks;

  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return !checks.empty();
  }
};

namespace detail {

inline cplx random_lambda_outside(Rng& rng, const RMat& a, double r_lo, double r_hi) {
  Eigen::EigenSolver<RMat> es(a, false);
  for (;;) {
    const double rad = rng.uniform(r_lo, r_hi);
    const double th = rng.uniform(0.0, 2.0 * M_PI);
    const cplx z = std::polar(rad, th);
    double dist = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) dist = std::min(dist, std::abs(z - es.eigenvalues()(i)));
    if (dist > 1e-3) return z;
  }
}

}  // namespace detail

/// The consistency suite behind `oracle-check`.
inline OracleReport run_oracle_checks(const OracleOptions& opt = {}) {
  OracleReport rep;
  const double scale = 1.0 + opt.perturb;
  for (int rep_i = 0; rep_i < std::max(1, opt.seeds); ++rep_i) {
    const std::uint64_t seed = derive_seed(opt.base_seed, static_cast<std::uint64_t>(rep_i));
    const std::string tag = " [seed " + std::to_string(rep_i) + "]";
    Rng rng(seed);

    // VAR: exact operator through the engine against the closed form.
    {
      const VarMoments var(VarSpec::paper_preset());
      double worst = 0.0;
      bool ok = true;
      for (int k = 0; k < 5; ++k) {
        const cplx lam = detail::random_lambda_outside(rng, var.spec().A, 0.9, 1.5);
        const ExactPseudospectrum ex(var, lam);
        PowerIterSettings st;
        st.rel_tol = 1e-6;
        st.max_iters = 20000;
        st.keep_history = false;
        const HermitianMap s = [&](const CMat& q) { return CMat(scale * ex.s(q)); };
        const PEstimate e = power_bracket(s, var.dimension(), st);
        const double p = var_p_exact(var.spec(), lam);
        const bool inside = e.status == PStatus::converged && e.lower <= p * (1 + 1e-12) && p <= e.upper * (1 + 1e-12);
        ok = ok && inside;
        worst = std::max(worst, std::abs(0.5 * (e.lower + e.upper) - p) / p);
      }
      rep.checks.push_back({"var-end-to-end" + tag, ok, worst, 1e-6, "power bracket vs closed-form P"});
    }

    // VAR: trace identity tr(Sigma_X S'[Q]) = tr(Sigma_X Q)(N + 1 + tr Sigma_xi R Sigma_X^{-1} R*),
    // S'[Q] = C^{-*} V[Q] C^{-1}, on a non-identity Sigma_X.
    {
      VarSpec spec = VarSpec::paper_preset();
      const CMat g = random_psd(rng, spec.N());
      spec.sigma_x = (g.real() + 0.5 * RMat::Identity(spec.N(), spec.N())).eval();
      const cplx lam = detail::random_lambda_outside(rng, spec.A, 0.9, 1.5);
      const CMat q = random_psd(rng, spec.N());
      const CMat sx = spec.sigma_x.cast<cplx>();
      const CMat c_inv = detail::var_resolvent(spec.A, lam) * sx.inverse();
      const CMat sp = scale * (c_inv.adjoint() * var_v_exact(spec, lam, q) * c_inv);
      const cplx lhs = (sx * sp).trace();
      const cplx rhs = (sx * q).trace() / var_p_exact(spec, lam);
      const double err = std::abs(lhs - rhs) / std::abs(rhs);
      rep.checks.push_back({"var-trace-identity" + tag, err <= 1e-10, err, 1e-10, "trace of C^-* V[Q] C^-1"});
    }

    // VAR: closed-form V against the Isserlis moment route.
    {
      const VarMoments var(VarSpec::paper_preset());
      const cplx lam = detail::random_lambda_outside(rng, var.spec().A, 0.9, 1.5);
      const CMat q = random_hermitian(rng, var.dimension());
      const CMat closed = var_v_exact(var.spec(), lam, q);
      const CMat moments = scale * variance_exact_iid(q, lam, var);
      const double err = (closed - moments).norm() / closed.norm();
      rep.checks.push_back({"var-variance-closed-form" + tag, err <= 1e-10, err, 1e-10, "closed-form V vs Gaussian moments"});
    }

    // Data engine vs dense operator on random i.i.d. data.
    {
      const Eigen::Index n = 3, m = 200;
      SnapshotSeries s;
      s.x.resize(n, m);
      s.y.resize(n, m);
      for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index i = 0; i < n; ++i) {
          s.x(i, j) = cplx(rng.normal(), rng.normal());
          s.y(i, j) = cplx(rng.normal(), rng.normal());
        }
      s.kind = SamplingKind::iid;
      s.dictionary = DictionarySpec::external(n);
      const DataPseudospectrum eng(s, iid_kernel());
      const cplx lam(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
      const CharContext ctx = eng.context(lam);
      const SnapshotFactors f = eng.factors(lam);
      const HermitianMap exact = [&](const CMat& q) { return s_apply(q, ctx, f, eng.kernel()); };
      const HermitianMap engine_side = [&](const CMat& q) { return CMat(scale * s_apply(q, ctx, f, eng.kernel(), true)); };
      const DenseOperator dense = s_matrix_bruteforce(exact, n);
      PowerIterSettings st;
      st.rel_tol = 1e-9;
      st.max_iters = 5000;
      st.keep_history = false;
      const PEstimate e = power_bracket(engine_side, n, st);
      const double p = 1.0 / dense.spectral_radius;
      const bool inside = e.lower <= p * (1 + 1e-9) && p <= e.upper * (1 + 1e-9);
      rep.checks.push_back({"bruteforce-radius" + tag, inside, std::abs(e.lower - p) / p, 1e-9,
                            "power bracket vs dense operator spectral radius"});
    }
  }

  // Quadrature self-convergence and the fixed constant function.
  {
    const DictionarySpec dict = DictionarySpec::trig(10);
    const QuadratureMoments a(expanding_map, dict, 2048);
    const QuadratureMoments b(expanding_map, dict, 4096);
    const double diff = std::max((scale * a.psi_xx() - b.psi_xx()).cwiseAbs().maxCoeff(),
                                 (scale * a.psi_xy() - b.psi_xy()).cwiseAbs().maxCoeff());
    rep.checks.push_back({"quadrature-self-convergence", diff < 1e-10, diff, 1e-10, "2048 vs 4096 nodes"});
    const std::vector<EigenPair> eig = eigensystem(b.koopman_matrix());
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : eig) best = std::min(best, std::abs(scale * p.value - 1.0));
    rep.checks.push_back({"quadrature-unit-eigenvalue", best < 1e-10, best, 1e-10, "eigenvalue 1 of K"});
  }
  return rep;
}

inline nlohmann::json oracle_report_to_json(const OracleReport& rep) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : rep.checks)
    checks.push_back({{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"tolerance", c.tolerance}, {"detail", c.detail}});
  return {{"schema", "specguard/v1/oracle-check"}, {"pass", rep.all_pass()}, {"checks", checks}};
}

}  // namespace specguard
