// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "specguard/specguard.hpp"

#include <chrono>

namespace sgtest {

using namespace specguard;

/// Complex Gaussian snapshots with b = A a + noise for a random A of spectral radius 0.8.
inline SnapshotSeries random_series(Rng& rng, Eigen::Index n, Eigen::Index m,
                                    SamplingKind kind = SamplingKind::iid, double noise = 0.5) {
  CMat a(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) a(i, j) = cplx(rng.normal(), rng.normal());
  a *= 0.8 / Eigen::ComplexEigenSolver<CMat>(a, false).eigenvalues().cwiseAbs().maxCoeff();
  SnapshotSeries s;
  s.x.resize(n, m);
  s.y.resize(n, m);
  CVec state(n);
  for (Eigen::Index i = 0; i < n; ++i) state(i) = cplx(rng.normal(), rng.normal());
  for (Eigen::Index k = 0; k < m; ++k) {
    if (kind == SamplingKind::iid)
      for (Eigen::Index i = 0; i < n; ++i) state(i) = cplx(rng.normal(), rng.normal());
    CVec next = a * state;
    for (Eigen::Index i = 0; i < n; ++i) next(i) += noise * cplx(rng.normal(), rng.normal());
    s.x.col(k) = state;
    s.y.col(k) = next;
    state = next;
  }
  s.kind = kind;
  s.dictionary = DictionarySpec::external(static_cast<int>(n));
  return s;
}

inline SnapshotSeries var_series(const VarSpec& spec, Eigen::Index m) {
  const auto [xs, ys] = gen_var(spec, m);
  return evaluate_dictionary(xs, ys, DictionarySpec::identity(static_cast<int>(spec.N())), SamplingKind::iid);
}

inline SnapshotSeries map_series(Eigen::Index m, int n, SamplingKind mode, std::uint64_t seed) {
  const auto [xs, ys] = gen_expanding_map(m, mode, seed);
  return evaluate_dictionary(xs, ys, DictionarySpec::trig(n), mode);
}

inline double rel_frob(const CMat& a, const CMat& b) {
  const double d = (a - b).norm();
  const double s = std::max(a.norm(), b.norm());
  return s > 0.0 ? d / s : d;
}

class Stopwatch {
 public:
  Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

}  // namespace sgtest
