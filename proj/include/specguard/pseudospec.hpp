// SPDX-License-Identifier: Apache-2.0
#pragma once

// The operator S[Q] = V[C^{-*} Q C^{-1}], certified power iteration on the PSD cone,
// grid sweeps with row-wise warm starts, and fixed-Q lower bounds for P_sym.

#include "specguard/charmatrix.hpp"
#include "specguard/core.hpp"
#include "specguard/ingest.hpp"
#include "specguard/variance.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

namespace specguard {

using HermitianMap = std::function<CMat(const CMat&)>;

struct PowerIterSettings {
  double rel_tol = 0.1;
  int max_iters = 200;
  std::optional<CMat> warm_start;
  bool keep_history = true;

  void validate(Eigen::Index n) const {
    if (!(rel_tol > 0.0)) throw Error(ErrorKind::usage, "rel_tol must be > 0");
    if (max_iters < 1) throw Error(ErrorKind::usage, "max_iters must be >= 1");
    if (warm_start) {
      const CMat& w = *warm_start;
      if (w.rows() != n || w.cols() != n) throw Error(ErrorKind::shape, "warm start has wrong dimension");
      if ((w - w.adjoint()).norm() > 1e-8 * std::max(1.0, w.norm()))
        throw Error(ErrorKind::usage, "warm start is not Hermitian");
      if (std::abs(real_trace(w) - 1.0) > 1e-8) throw Error(ErrorKind::usage, "warm start must have trace 1");
      if (min_eigenvalue(w) < -1e-8) throw Error(ErrorKind::usage, "warm start must be PSD");
    }
  }
};

enum class PStatus { converged, max_iters, at_eigenvalue, degenerate_s };

inline const char* to_string(PStatus s) {
  switch (s) {
    case PStatus::converged: return "converged";
    case PStatus::max_iters: return "max_iters";
    case PStatus::at_eigenvalue: return "at_eigenvalue";
    case PStatus::degenerate_s: return "degenerate_s";
  }
  return "unknown";
}

struct PEstimate {
  double lower = 0.0;
  double upper = 0.0;
  int iterations = 0;
  CMat q_final;
  PStatus status = PStatus::max_iters;
  bool jittered = false;
  std::vector<std::pair<double, double>> history;  // per-iteration brackets

  double ratio() const { return lower > 0.0 ? upper / lower : std::numeric_limits<double>::infinity(); }
};

struct Bracket {
  double lo = 0.0;
  double hi = 0.0;
  bool jittered = false;
};

/// Extreme generalized eigenvalues of the pencil Q v = sigma S v.
inline Bracket bracket(const CMat& q, const CMat& s_of_q) {
  const Eigen::Index n = q.rows();
  if (s_of_q.rows() != n || s_of_q.cols() != n || q.cols() != n)
    throw Error(ErrorKind::shape, "bracket needs square matrices of equal size");
  CMat s = hermitian_part(s_of_q);
  Bracket b;
  Eigen::LLT<CMat> llt(s);
  if (llt.info() != Eigen::Success) {
    const double tr = real_trace(s);
    if (!(tr > 0.0) || !std::isfinite(tr)) throw Error(ErrorKind::degenerate, "S[Q] has non-positive trace");
    s += (1e-12 * tr / static_cast<double>(n)) * CMat::Identity(n, n);
    llt.compute(s);
    if (llt.info() != Eigen::Success) throw Error(ErrorKind::degenerate, "S[Q] not positive definite after jitter");
    b.jittered = true;
  }
  // L^{-1} Q L^{-*}
  const auto l = llt.matrixL();
  CMat t = l.solve(hermitian_part(q));
  t = l.solve(t.adjoint().eval());
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(t), Eigen::EigenvaluesOnly);
  b.lo = es.eigenvalues().minCoeff();
  b.hi = es.eigenvalues().maxCoeff();
  return b;
}

/// Power iteration Q <- S[Q] / tr S[Q] bracketing 1/rho(S).
inline PEstimate power_bracket(const HermitianMap& s, Eigen::Index n, const PowerIterSettings& settings) {
  settings.validate(n);
  CMat q = settings.warm_start ? hermitian_part(*settings.warm_start)
                               : CMat(CMat::Identity(n, n) / static_cast<double>(n));
  q /= real_trace(q);
  PEstimate est;
  est.q_final = q;
  for (int t = 1; t <= settings.max_iters; ++t) {
    const CMat sq = hermitian_part(s(q));
    if (!sq.allFinite()) {
      est.status = PStatus::degenerate_s;
      return est;
    }
    Bracket b;
    try {
      b = bracket(q, sq);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::degenerate) throw;
      est.status = PStatus::degenerate_s;
      return est;
    }
    est.jittered = est.jittered || b.jittered;
    est.lower = std::max(0.0, b.lo);
    est.upper = std::max(est.lower, b.hi);
    est.iterations = t;
    est.q_final = q;
    if (settings.keep_history) est.history.emplace_back(est.lower, est.upper);
    if (est.lower > 0.0 && est.upper <= (1.0 + settings.rel_tol) * est.lower) {
      est.status = PStatus::converged;
      return est;
    }
    q = sq / real_trace(sq);
  }
  est.status = PStatus::max_iters;
  return est;
}

/// S[Q] from data: congruence by the factorized C-hat, then the fast variance estimator.
inline CMat s_apply(const CMat& q, const CharContext& ctx, const SnapshotFactors& f, const KernelSpec& kernel,
                    bool psd_input = false) {
  if (ctx.singular()) throw Error(ErrorKind::at_eigenvalue, "C-hat(lambda) is singular");
  return variance_apply(ctx.congruence(q), f, kernel, psd_input).result;
}

/// S*[Q] = (1/M) sum B_m Q B_m*, B_m = C^{-1}(C_m - C). Independent samples only.
inline CMat s_star_apply(const CMat& q, const CharContext& ctx, const SnapshotFactors& f, const KernelSpec& kernel) {
  if (kernel.mode != KernelMode::iid)
    throw Error(ErrorKind::unsupported_mode, "adjoint operator is only defined for independent samples");
  if (ctx.singular()) throw Error(ErrorKind::at_eigenvalue, "C-hat(lambda) is singular");
  const double inv_m = 1.0 / static_cast<double>(f.M());
  const CMat p = ctx.solve(f.u);  // C^{-1} u_m
  const CMat qv = q * f.v;
  const Eigen::RowVectorXcd s = f.v.conjugate().cwiseProduct(qv).colwise().sum();  // v_m* Q v_m
  // sum (p v* - I) Q (v p* - I) = P diag(s) P* - P (QV)* - (QV) P* + M Q
  const CMat cross = p * qv.adjoint() * inv_m;
  CMat out = p * s.asDiagonal() * p.adjoint() * inv_m - cross - cross.adjoint() + q;
  return hermitian_part(out);
}

namespace detail {

/// lambda_max of the pencil A v = sigma B v for Hermitian A and B > 0.
inline double pencil_max(const CMat& a, const CMat& b) {
  Eigen::GeneralizedSelfAdjointEigenSolver<CMat> es(hermitian_part(a), hermitian_part(b), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::not_spd, "pencil reference matrix is not positive definite");
  return es.eigenvalues().maxCoeff();
}

inline CMat safe_inverse_pd(const CMat& q) {
  Eigen::LLT<CMat> llt(hermitian_part(q));
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::not_spd, "Q must be positive definite");
  return hermitian_part(llt.solve(CMat::Identity(q.rows(), q.cols())));
}

}  // namespace detail

/// min{1/lambda_max(S[Q], Q), 1/lambda_max(S*[Q^{-1}], Q^{-1})}; a lower bound for P_sym.
inline double p_sym_fixed_q(const CMat& q, const HermitianMap& s, const HermitianMap& s_star) {
  const CMat q_inv = detail::safe_inverse_pd(q);
  const double a = detail::pencil_max(s(hermitian_part(q)), q);
  const double b = detail::pencil_max(s_star(q_inv), q_inv);
  const double ra = a > 0.0 ? 1.0 / a : std::numeric_limits<double>::infinity();
  const double rb = b > 0.0 ? 1.0 / b : std::numeric_limits<double>::infinity();
  return std::min(ra, rb);
}

/// Sampling-pseudospectrum engine over one snapshot series and kernel.
class DataPseudospectrum {
 public:
  DataPseudospectrum(SnapshotSeries series, KernelSpec kernel, double rcond_floor = -1.0)
      : series_(std::move(series)), kernel_(std::move(kernel)) {
    series_.validate();
    gram_ = gram_matrices(series_);
    rcond_floor_ = rcond_floor < 0.0 ? default_rcond_floor(series_.N()) : rcond_floor;
    detail::check_window(kernel_, series_.M());
  }

  const SnapshotSeries& series() const { return series_; }
  const KernelSpec& kernel() const { return kernel_; }
  const GramPair& gram() const { return gram_; }
  double rcond_floor() const { return rcond_floor_; }
  Eigen::Index N() const { return series_.N(); }
  Eigen::Index M() const { return series_.M(); }

  CharContext context(cplx lambda) const { return char_context(gram_, lambda, rcond_floor_); }
  SnapshotFactors factors(cplx lambda) const { return snapshot_factors(series_, lambda); }

  HermitianMap s_map(const CharContext& ctx, const SnapshotFactors& f, bool psd_input = true) const {
    return [&ctx, &f, this, psd_input](const CMat& q) { return s_apply(q, ctx, f, kernel_, psd_input); };
  }

  PEstimate p_hat(cplx lambda, const PowerIterSettings& settings = {}) const {
    const CharContext ctx = context(lambda);
    if (ctx.singular()) return at_eigenvalue_estimate(settings);
    const SnapshotFactors f = factors(lambda);
    return power_bracket(s_map(ctx, f), N(), settings);
  }

  double p_sym_fixed_q(cplx lambda, const CMat& q) const {
    if (kernel_.mode != KernelMode::iid)
      throw Error(ErrorKind::unsupported_mode, "P_sym is only available for independent samples");
    const CharContext ctx = context(lambda);
    if (ctx.singular()) return 0.0;
    const SnapshotFactors f = factors(lambda);
    const HermitianMap s = s_map(ctx, f, false);
    const HermitianMap s_star = [&](const CMat& x) { return s_star_apply(x, ctx, f, kernel_); };
    return specguard::p_sym_fixed_q(q, s, s_star);
  }

  /// Best of the fixed-Q bounds at the power-iteration output and at I/N.
  double p_sym_lower_bound(cplx lambda, const PEstimate& est) const {
    if (est.status == PStatus::at_eigenvalue) return 0.0;
    const Eigen::Index n = N();
    double best = p_sym_fixed_q(lambda, CMat::Identity(n, n) / static_cast<double>(n));
    if (est.q_final.rows() == n && min_eigenvalue(est.q_final) > 1e-12 * real_trace(est.q_final))
      best = std::max(best, p_sym_fixed_q(lambda, est.q_final));
    return best;
  }

  PEstimate at_eigenvalue_estimate(const PowerIterSettings& settings) const {
    PEstimate e;
    e.status = PStatus::at_eigenvalue;
    const Eigen::Index n = N();
    e.q_final = settings.warm_start ? *settings.warm_start : CMat(CMat::Identity(n, n) / static_cast<double>(n));
    return e;
  }

 private:
  SnapshotSeries series_;
  KernelSpec kernel_;
  GramPair gram_;
  double rcond_floor_ = 0.0;
};

inline PEstimate p_hat(cplx lambda, const SnapshotSeries& series, const KernelSpec& kernel,
                       const PowerIterSettings& settings = {}) {
  return DataPseudospectrum(series, kernel).p_hat(lambda, settings);
}

/// Exact operators S and S* built from a moment oracle (independent samples).
class ExactPseudospectrum {
 public:
  ExactPseudospectrum(const ExactMoments& moments, cplx lambda, double rcond_floor = -1.0)
      : moments_(moments), lambda_(lambda) {
    const Eigen::Index n = moments.dimension();
    if (rcond_floor < 0.0) rcond_floor = default_rcond_floor(n);
    ctx_.emplace(lambda, moments.char_matrix(lambda), rcond_floor);
  }

  const CharContext& context() const { return *ctx_; }
  bool singular() const { return ctx_->singular(); }

  CMat s(const CMat& q) const {
    if (singular()) throw Error(ErrorKind::at_eigenvalue, "C(lambda) is singular");
    return variance_exact_iid(ctx_->congruence(q), lambda_, moments_);
  }

  /// C^{-1} E[C_w Q C_w*] C^{-*} - Q
  CMat s_star(const CMat& q) const {
    if (singular()) throw Error(ErrorKind::at_eigenvalue, "C(lambda) is singular");
    const CMat e = moments_.adjoint_second_moment(lambda_, q);
    const CMat left = ctx_->solve(e);
    const CMat w = ctx_->solve(left.adjoint()).adjoint();
    return hermitian_part(w - q);
  }

  HermitianMap s_map() const {
    return [this](const CMat& q) { return s(q); };
  }
  HermitianMap s_star_map() const {
    return [this](const CMat& q) { return s_star(q); };
  }

  PEstimate p(const PowerIterSettings& settings = {}) const {
    if (singular()) {
      PEstimate e;
      e.status = PStatus::at_eigenvalue;
      const Eigen::Index n = moments_.dimension();
      e.q_final = CMat::Identity(n, n) / static_cast<double>(n);
      return e;
    }
    return power_bracket(s_map(), moments_.dimension(), settings);
  }

  double p_sym_fixed_q(const CMat& q) const {
    if (singular()) return 0.0;
    return specguard::p_sym_fixed_q(q, s_map(), s_star_map());
  }

 private:
  const ExactMoments& moments_;
  cplx lambda_;
  std::optional<CharContext> ctx_;
};

struct GridSpec {
  double re_min = -1.0, re_max = 1.0;
  double im_min = -1.0, im_max = 1.0;
  int n_re = 21, n_im = 21;

  void validate() const {
    if (n_re < 1 || n_im < 1) throw Error(ErrorKind::usage, "grid must be non-empty");
    if (!(re_max >= re_min) || !(im_max >= im_min)) throw Error(ErrorKind::usage, "grid bounds are inverted");
  }
  std::size_t size() const { return static_cast<std::size_t>(n_re) * static_cast<std::size_t>(n_im); }
  double re(int j) const { return n_re == 1 ? re_min : re_min + (re_max - re_min) * j / (n_re - 1); }
  double im(int i) const { return n_im == 1 ? im_min : im_min + (im_max - im_min) * i / (n_im - 1); }
  cplx point(int i, int j) const { return {re(j), im(i)}; }
  double d_re() const { return n_re == 1 ? 0.0 : (re_max - re_min) / (n_re - 1); }
  double d_im() const { return n_im == 1 ? 0.0 : (im_max - im_min) / (n_im - 1); }
};

struct GridCell {
  PEstimate estimate;
  std::string error;  // non-empty if this point failed

  bool ok() const { return error.empty(); }
};

/// Row-major results: cells[i * n_re + j] sits at (re(j), im(i)).
struct SweepResult {
  GridSpec grid;
  std::vector<GridCell> cells;

  const GridCell& at(int i, int j) const { return cells[static_cast<std::size_t>(i) * grid.n_re + j]; }
  GridCell& at(int i, int j) { return cells[static_cast<std::size_t>(i) * grid.n_re + j]; }
};

inline unsigned default_thread_count() {
  if (const char* env = std::getenv("SPECGUARD_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

/// Rows are independent; each point warm-starts from its left neighbour.
inline SweepResult sweep(const DataPseudospectrum& engine, const GridSpec& grid, const PowerIterSettings& settings,
                         unsigned threads = 0) {
  grid.validate();
  SweepResult out;
  out.grid = grid;
  out.cells.resize(grid.size());
  std::atomic<int> next_row{0};
  auto worker = [&]() {
    for (int i = next_row.fetch_add(1); i < grid.n_im; i = next_row.fetch_add(1)) {
      std::optional<CMat> warm = settings.warm_start;
      for (int j = 0; j < grid.n_re; ++j) {
        GridCell& cell = out.at(i, j);
        PowerIterSettings local = settings;
        local.warm_start = warm;
        try {
          cell.estimate = engine.p_hat(grid.point(i, j), local);
          if (cell.estimate.status == PStatus::converged || cell.estimate.status == PStatus::max_iters)
            warm = cell.estimate.q_final;
        } catch (const std::exception& e) {
          cell.error = e.what();
          cell.estimate.status = PStatus::degenerate_s;
          cell.estimate.lower = std::numeric_limits<double>::quiet_NaN();
          cell.estimate.upper = std::numeric_limits<double>::quiet_NaN();
        }
      }
    }
  };
  if (threads == 0) threads = default_thread_count();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(grid.n_im)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return out;
}

namespace detail {

inline nlohmann::json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace detail

inline nlohmann::json sweep_to_json(const SweepResult& r) {
  nlohmann::json re_axis = nlohmann::json::array(), im_axis = nlohmann::json::array();
  for (int j = 0; j < r.grid.n_re; ++j) re_axis.push_back(r.grid.re(j));
  for (int i = 0; i < r.grid.n_im; ++i) im_axis.push_back(r.grid.im(i));
  nlohmann::json lower = nlohmann::json::array(), upper = nlohmann::json::array(), status = nlohmann::json::array(),
                 iters = nlohmann::json::array(), errors = nlohmann::json::array();
  for (int i = 0; i < r.grid.n_im; ++i) {
    nlohmann::json lo = nlohmann::json::array(), up = nlohmann::json::array(), st = nlohmann::json::array(),
                   it = nlohmann::json::array();
    for (int j = 0; j < r.grid.n_re; ++j) {
      const GridCell& c = r.at(i, j);
      lo.push_back(detail::finite_or_null(c.estimate.lower));
      up.push_back(detail::finite_or_null(c.estimate.upper));
      st.push_back(c.ok() ? to_string(c.estimate.status) : "error");
      it.push_back(c.estimate.iterations);
      if (!c.ok()) errors.push_back({{"i", i}, {"j", j}, {"message", c.error}});
    }
    lower.push_back(std::move(lo));
    upper.push_back(std::move(up));
    status.push_back(std::move(st));
    iters.push_back(std::move(it));
  }
  return {{"schema", "specguard/v1/sweep"}, {"re_axis", re_axis}, {"im_axis", im_axis}, {"lower", lower},
          {"upper", upper},                 {"status", status},   {"iterations", iters}, {"errors", errors}};
}

/// One row per grid point. `log_dt` > 0 adds continuous-time coordinates log(lambda)/dt.
inline std::string sweep_to_csv(const SweepResult& r, double log_dt = 0.0) {
  std::ostringstream os;
  os << "re,im";
  if (log_dt > 0.0) os << ",ct_re,ct_im";
  os << ",lower,upper,status,iterations\n";
  for (int i = 0; i < r.grid.n_im; ++i)
    for (int j = 0; j < r.grid.n_re; ++j) {
      const GridCell& c = r.at(i, j);
      const cplx z = r.grid.point(i, j);
      os << detail::format_double(z.real()) << ',' << detail::format_double(z.imag());
      if (log_dt > 0.0) {
        const cplx ct = std::log(z) / log_dt;
        os << ',' << detail::format_double(ct.real()) << ',' << detail::format_double(ct.imag());
      }
      os << ',' << detail::format_double(c.estimate.lower) << ',' << detail::format_double(c.estimate.upper) << ','
         << (c.ok() ? to_string(c.estimate.status) : "error") << ',' << c.estimate.iterations << '\n';
    }
  return os.str();
}

}  // namespace specguard
