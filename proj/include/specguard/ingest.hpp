// SPDX-License-Identifier: Apache-2.0
#pragma once

// Snapshot observable pairs (psi(X_m), psi(Y_m)): file I/O and dictionaries.

#include "specguard/core.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace specguard {

struct ObservablePair {
  CVec a;  // psi(X_m)
  CVec b;  // psi(Y_m)
};

enum class SamplingKind { iid, trajectory };

inline const char* to_string(SamplingKind k) { return k == SamplingKind::iid ? "iid" : "trajectory"; }

inline SamplingKind parse_sampling_kind(std::string_view s) {
  if (s == "iid") return SamplingKind::iid;
  if (s == "trajectory") return SamplingKind::trajectory;
  throw Error(ErrorKind::format, "unknown sampling kind '" + std::string(s) + "'");
}

struct DictionarySpec {
  enum class Variant { trig, monomial_delay, identity, external };

  Variant variant = Variant::external;
  int trig_size = 0;
  int max_degree = 0;
  int n_delays = 0;
  int state_dim = 0;
  int external_size = 0;

  static DictionarySpec trig(int n) {
    if (n < 2 || n % 2 != 0) throw Error(ErrorKind::shape, "trig dictionary needs even N >= 2");
    DictionarySpec d;
    d.variant = Variant::trig;
    d.trig_size = n;
    d.state_dim = 1;
    return d;
  }

  static DictionarySpec monomial_delay(int max_degree, int n_delays, int state_dim) {
    if (max_degree < 1 || n_delays < 1 || state_dim < 1)
      throw Error(ErrorKind::shape, "monomial_delay parameters must be positive");
    DictionarySpec d;
    d.variant = Variant::monomial_delay;
    d.max_degree = max_degree;
    d.n_delays = n_delays;
    d.state_dim = state_dim;
    return d;
  }

  static DictionarySpec identity(int state_dim) {
    if (state_dim < 1) throw Error(ErrorKind::shape, "identity dictionary needs state_dim >= 1");
    DictionarySpec d;
    d.variant = Variant::identity;
    d.state_dim = state_dim;
    return d;
  }

  static DictionarySpec external(int n = 0) {
    DictionarySpec d;
    d.external_size = n;
    return d;
  }

  /// Count of monomials of total degree 1..max_degree in state_dim variables.
  static int monomials_per_state(int max_degree, int state_dim) {
    // C(d + D, D) - 1
    long long c = 1;
    for (int k = 1; k <= state_dim; ++k) c = c * (max_degree + k) / k;
    return static_cast<int>(c - 1);
  }

  int size() const {
    switch (variant) {
      case Variant::trig: return trig_size;
      case Variant::monomial_delay: return 1 + n_delays * monomials_per_state(max_degree, state_dim);
      case Variant::identity: return state_dim;
      case Variant::external: return external_size;
    }
    return 0;
  }

  std::string describe() const {
    switch (variant) {
      case Variant::trig: return "trig(" + std::to_string(trig_size) + ")";
      case Variant::monomial_delay:
        return "monomial_delay(" + std::to_string(max_degree) + "," + std::to_string(n_delays) + "," +
               std::to_string(state_dim) + ")";
      case Variant::identity: return "identity(" + std::to_string(state_dim) + ")";
      case Variant::external: return "external";
    }
    return "external";
  }
};

/// Ordered snapshot pairs stored column-wise: column m of `x` is psi(X_m), of `y` is psi(Y_m).
struct SnapshotSeries {
  CMat x;
  CMat y;
  SamplingKind kind = SamplingKind::iid;
  double dt = 1.0;
  DictionarySpec dictionary;

  Eigen::Index M() const { return x.cols(); }
  Eigen::Index N() const { return x.rows(); }

  ObservablePair pair(Eigen::Index m) const { return {x.col(m), y.col(m)}; }

  static SnapshotSeries from_pairs(const std::vector<ObservablePair>& pairs, SamplingKind kind,
                                   double dt = 1.0, DictionarySpec dict = DictionarySpec::external()) {
    if (pairs.empty()) throw Error(ErrorKind::insufficient_data, "no snapshot pairs");
    const Eigen::Index n = pairs.front().a.size();
    SnapshotSeries s;
    s.x.resize(n, static_cast<Eigen::Index>(pairs.size()));
    s.y.resize(n, static_cast<Eigen::Index>(pairs.size()));
    for (std::size_t m = 0; m < pairs.size(); ++m) {
      if (pairs[m].a.size() != n || pairs[m].b.size() != n)
        throw Error(ErrorKind::shape, "pair " + std::to_string(m) + " has inconsistent length");
      s.x.col(static_cast<Eigen::Index>(m)) = pairs[m].a;
      s.y.col(static_cast<Eigen::Index>(m)) = pairs[m].b;
    }
    s.kind = kind;
    s.dt = dt;
    s.dictionary = dict;
    if (s.dictionary.variant == DictionarySpec::Variant::external) s.dictionary.external_size = static_cast<int>(n);
    s.validate();
    return s;
  }

  void validate() const {
    if (x.rows() < 1) throw Error(ErrorKind::shape, "observable dimension N must be >= 1");
    if (x.rows() != y.rows() || x.cols() != y.cols())
      throw Error(ErrorKind::shape, "a and b blocks have different shapes");
    if (x.cols() < 2) throw Error(ErrorKind::insufficient_data, "need M >= 2 snapshot pairs");
    for (Eigen::Index m = 0; m < x.cols(); ++m)
      if (!x.col(m).allFinite() || !y.col(m).allFinite())
        throw Error(ErrorKind::format, "non-finite entry in pair " + std::to_string(m));
  }
};

// ---------------------------------------------------------------------------
// File formats

enum class SnapshotFormat { csv, json };

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view tok, bool& ok) {
  while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
  while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t' || tok.back() == '\r')) tok.remove_suffix(1);
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  ok = res.ec == std::errc() && res.ptr == tok.data() + tok.size() && !tok.empty();
  return v;
}

inline SnapshotFormat format_from_path(const std::string& path) {
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) return SnapshotFormat::json;
  return SnapshotFormat::csv;
}

}  // namespace detail

inline void write_snapshots_csv(std::ostream& out, const SnapshotSeries& s) {
  out << "# specguard-snapshots v1 N=" << s.N() << " kind=" << to_string(s.kind)
      << " dt=" << detail::format_double(s.dt) << "\n";
  const Eigen::Index n = s.N();
  for (Eigen::Index m = 0; m < s.M(); ++m) {
    std::string row;
    for (Eigen::Index i = 0; i < n; ++i) {
      row += detail::format_double(s.x(i, m).real()) + "," + detail::format_double(s.x(i, m).imag()) + ",";
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      row += detail::format_double(s.y(i, m).real()) + "," + detail::format_double(s.y(i, m).imag());
      if (i + 1 < n) row += ",";
    }
    out << row << "\n";
  }
}

inline SnapshotSeries read_snapshots_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::format, "empty snapshot file");
  const std::string magic = "# specguard-snapshots v1";
  if (line.rfind(magic, 0) != 0) throw Error(ErrorKind::format, "missing '# specguard-snapshots v1' header");

  long n = -1;
  SamplingKind kind = SamplingKind::iid;
  bool have_kind = false;
  double dt = 1.0;
  std::istringstream hs(line.substr(magic.size()));
  std::string tok;
  while (hs >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::format, "malformed header token '" + tok + "'");
    const std::string key = tok.substr(0, eq);
    const std::string val = tok.substr(eq + 1);
    bool ok = false;
    if (key == "N") {
      const double v = detail::parse_double(val, ok);
      if (!ok || v < 1 || v != std::floor(v)) throw Error(ErrorKind::format, "header N must be a positive integer");
      n = static_cast<long>(v);
    } else if (key == "kind") {
      kind = parse_sampling_kind(val);
      have_kind = true;
    } else if (key == "dt") {
      dt = detail::parse_double(val, ok);
      if (!ok) throw Error(ErrorKind::format, "header dt is not a number");
    } else {
      throw Error(ErrorKind::format, "unknown header key '" + key + "'");
    }
  }
  if (n < 1 || !have_kind) throw Error(ErrorKind::format, "header must declare N and kind");

  std::vector<std::vector<double>> rows;
  std::size_t data_row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    std::vector<double> vals;
    std::string_view sv(line);
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = sv.find(',', start);
      const std::string_view field = sv.substr(start, comma == std::string_view::npos ? sv.npos : comma - start);
      bool ok = false;
      const double v = detail::parse_double(field, ok);
      if (!ok) throw Error(ErrorKind::format, "row " + std::to_string(data_row) + ": unparsable field '" + std::string(field) + "'");
      if (!std::isfinite(v)) throw Error(ErrorKind::format, "row " + std::to_string(data_row) + ": non-finite entry");
      vals.push_back(v);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (static_cast<long>(vals.size()) != 4 * n)
      throw Error(ErrorKind::shape, "row " + std::to_string(data_row) + ": expected " + std::to_string(4 * n) +
                                        " columns, got " + std::to_string(vals.size()));
    rows.push_back(std::move(vals));
    ++data_row;
  }
  if (rows.size() < 2) throw Error(ErrorKind::insufficient_data, "need at least 2 data rows, got " + std::to_string(rows.size()));

  SnapshotSeries s;
  s.x.resize(n, static_cast<Eigen::Index>(rows.size()));
  s.y.resize(n, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t m = 0; m < rows.size(); ++m) {
    const auto& r = rows[m];
    for (long i = 0; i < n; ++i) {
      s.x(i, static_cast<Eigen::Index>(m)) = cplx(r[2 * i], r[2 * i + 1]);
      s.y(i, static_cast<Eigen::Index>(m)) = cplx(r[2 * n + 2 * i], r[2 * n + 2 * i + 1]);
    }
  }
  s.kind = kind;
  s.dt = dt;
  s.dictionary = DictionarySpec::external(static_cast<int>(n));
  s.validate();
  return s;
}

inline nlohmann::json snapshots_to_json(const SnapshotSeries& s) {
  using nlohmann::json;
  json pairs = json::array();
  for (Eigen::Index m = 0; m < s.M(); ++m) {
    json a = json::array(), b = json::array();
    for (Eigen::Index i = 0; i < s.N(); ++i) {
      a.push_back({s.x(i, m).real(), s.x(i, m).imag()});
      b.push_back({s.y(i, m).real(), s.y(i, m).imag()});
    }
    pairs.push_back({{"a", a}, {"b", b}});
  }
  return {{"schema", "specguard/v1/snapshots"},
          {"N", s.N()},
          {"M", s.M()},
          {"kind", to_string(s.kind)},
          {"dt", s.dt},
          {"dictionary", s.dictionary.describe()},
          {"pairs", pairs}};
}

inline SnapshotSeries snapshots_from_json(const nlohmann::json& j) {
  try {
    if (j.value("schema", "") != "specguard/v1/snapshots") throw Error(ErrorKind::format, "schema must be specguard/v1/snapshots");
    const long n = j.at("N").get<long>();
    if (n < 1) throw Error(ErrorKind::format, "N must be >= 1");
    const auto& pairs = j.at("pairs");
    std::vector<ObservablePair> out;
    for (std::size_t m = 0; m < pairs.size(); ++m) {
      ObservablePair p{CVec(n), CVec(n)};
      const auto& a = pairs[m].at("a");
      const auto& b = pairs[m].at("b");
      if (static_cast<long>(a.size()) != n || static_cast<long>(b.size()) != n)
        throw Error(ErrorKind::shape, "row " + std::to_string(m) + ": expected " + std::to_string(n) + " entries");
      for (long i = 0; i < n; ++i) {
        if (a[i].is_null() || b[i].is_null() || a[i].at(0).is_null() || a[i].at(1).is_null() ||
            b[i].at(0).is_null() || b[i].at(1).is_null())
          throw Error(ErrorKind::format, "row " + std::to_string(m) + ": non-finite entry");
        p.a(i) = cplx(a[i].at(0).get<double>(), a[i].at(1).get<double>());
        p.b(i) = cplx(b[i].at(0).get<double>(), b[i].at(1).get<double>());
      }
      if (!p.a.allFinite() || !p.b.allFinite()) throw Error(ErrorKind::format, "row " + std::to_string(m) + ": non-finite entry");
      out.push_back(std::move(p));
    }
    if (out.size() < 2) throw Error(ErrorKind::insufficient_data, "need at least 2 pairs");
    return SnapshotSeries::from_pairs(out, parse_sampling_kind(j.at("kind").get<std::string>()), j.value("dt", 1.0));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, e.what());
  }
}

inline void write_snapshots(const std::string& path, const SnapshotSeries& s,
                            SnapshotFormat format) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::resource, "cannot open '" + path + "' for writing");
  if (format == SnapshotFormat::csv)
    write_snapshots_csv(out, s);
  else
    out << snapshots_to_json(s).dump() << "\n";
  if (!out) throw Error(ErrorKind::resource, "write failed for '" + path + "'");
}

inline void write_snapshots(const std::string& path, const SnapshotSeries& s) {
  write_snapshots(path, s, detail::format_from_path(path));
}

inline SnapshotSeries load_snapshots(const std::string& path, SnapshotFormat format) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::format, "cannot open '" + path + "'");
  if (format == SnapshotFormat::csv) return read_snapshots_csv(in);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, e.what());
  }
  return snapshots_from_json(j);
}

inline SnapshotSeries load_snapshots(const std::string& path) {
  return load_snapshots(path, detail::format_from_path(path));
}

// ---------------------------------------------------------------------------
// Dictionaries

/// psi(x) = (1, cos x, sin x, ..., cos((N/2-1)x), sin((N/2-1)x), cos(N x / 2))
inline CVec trig_features(double x, int n) {
  CVec psi(n);
  psi(0) = 1.0;
  int idx = 1;
  for (int k = 1; k < n / 2; ++k) {
    psi(idx++) = std::cos(k * x);
    psi(idx++) = std::sin(k * x);
  }
  psi(idx) = std::cos((n / 2) * x);
  return psi;
}

/// Exponent tuples of total degree 1..max_degree, graded then lexicographically descending
/// (x before y before z within a degree).
inline std::vector<std::vector<int>> monomial_exponents(int max_degree, int state_dim) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(state_dim, 0);
  auto rec = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == state_dim - 1) {
      cur[pos] = remaining;
      out.push_back(cur);
      return;
    }
    for (int e = remaining; e >= 0; --e) {
      cur[pos] = e;
      self(self, pos + 1, remaining - e);
    }
  };
  for (int deg = 1; deg <= max_degree; ++deg) rec(rec, 0, deg);
  return out;
}

inline double monomial(const RVec& state, const std::vector<int>& exps) {
  double v = 1.0;
  for (std::size_t k = 0; k < exps.size(); ++k)
    for (int p = 0; p < exps[k]; ++p) v *= state(static_cast<Eigen::Index>(k));
  return v;
}

inline SnapshotSeries evaluate_dictionary(const RMat& x_states, const RMat& y_states, const DictionarySpec& dict,
                                          SamplingKind kind = SamplingKind::iid, double dt = 1.0) {
  if (x_states.rows() != y_states.rows() || x_states.cols() != y_states.cols())
    throw Error(ErrorKind::shape, "x_states and y_states differ in shape");
  const Eigen::Index m_count = x_states.rows();
  const Eigen::Index d = x_states.cols();
  SnapshotSeries s;
  s.kind = kind;
  s.dt = dt;
  s.dictionary = dict;
  const int n = dict.size();
  s.x.resize(n, m_count);
  s.y.resize(n, m_count);
  switch (dict.variant) {
    case DictionarySpec::Variant::trig:
      if (d != 1) throw Error(ErrorKind::shape, "trig dictionary requires scalar states (d = 1)");
      for (Eigen::Index m = 0; m < m_count; ++m) {
        s.x.col(m) = trig_features(x_states(m, 0), n);
        s.y.col(m) = trig_features(y_states(m, 0), n);
      }
      break;
    case DictionarySpec::Variant::identity:
      if (d != dict.state_dim) throw Error(ErrorKind::shape, "identity dictionary dimension mismatch");
      s.x = x_states.transpose().cast<cplx>();
      s.y = y_states.transpose().cast<cplx>();
      break;
    case DictionarySpec::Variant::monomial_delay: {
      if (d != dict.state_dim) throw Error(ErrorKind::shape, "monomial dictionary dimension mismatch");
      if (dict.n_delays != 1)
        throw Error(ErrorKind::shape, "pointwise evaluation supports n_delays = 1 only; use delay_embed");
      const auto exps = monomial_exponents(dict.max_degree, dict.state_dim);
      for (Eigen::Index m = 0; m < m_count; ++m) {
        s.x(0, m) = 1.0;
        s.y(0, m) = 1.0;
        const RVec xs = x_states.row(m).transpose();
        const RVec ys = y_states.row(m).transpose();
        for (std::size_t k = 0; k < exps.size(); ++k) {
          s.x(static_cast<Eigen::Index>(k) + 1, m) = monomial(xs, exps[k]);
          s.y(static_cast<Eigen::Index>(k) + 1, m) = monomial(ys, exps[k]);
        }
      }
      break;
    }
    case DictionarySpec::Variant::external:
      throw Error(ErrorKind::shape, "cannot evaluate an external dictionary");
  }
  s.validate();
  return s;
}

/// Delay-embedded polynomial observables on a single trajectory. Pair m leads at time
/// t = m + (n_delays - 1) * step + 1; a stacks 1 and the monomials of states t, t - step, ...;
/// b is the same construction one sample later. The oldest sample is consumed as warm-up.
inline SnapshotSeries delay_embed(const RMat& raw_series, const DictionarySpec& dict, int step = 1,
                                  double dt = 1.0) {
  if (dict.variant != DictionarySpec::Variant::monomial_delay)
    throw Error(ErrorKind::shape, "delay_embed requires a monomial_delay dictionary");
  if (step < 1) throw Error(ErrorKind::shape, "delay step must be positive");
  if (raw_series.cols() != dict.state_dim) throw Error(ErrorKind::shape, "trajectory dimension mismatch");
  const Eigen::Index t_len = raw_series.rows();
  const Eigen::Index span = static_cast<Eigen::Index>(dict.n_delays - 1) * step;
  const Eigen::Index m_count = t_len - 2 - span;
  if (m_count < 1)
    throw Error(ErrorKind::insufficient_data, "trajectory of length " + std::to_string(t_len) + " too short for " +
                                                  std::to_string(dict.n_delays) + " delays");
  const auto exps = monomial_exponents(dict.max_degree, dict.state_dim);
  const Eigen::Index per = static_cast<Eigen::Index>(exps.size());
  const int n = dict.size();

  // Feature rows per time, computed once.
  RMat feats(per, t_len);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    const RVec st = raw_series.row(t).transpose();
    for (Eigen::Index k = 0; k < per; ++k) feats(k, t) = monomial(st, exps[static_cast<std::size_t>(k)]);
  }
  auto stack = [&](Eigen::Index lead) {
    CVec v(n);
    v(0) = 1.0;
    for (int d = 0; d < dict.n_delays; ++d)
      v.segment(1 + d * per, per) = feats.col(lead - static_cast<Eigen::Index>(d) * step).cast<cplx>();
    return v;
  };

  SnapshotSeries s;
  s.kind = SamplingKind::trajectory;
  s.dt = dt;
  s.dictionary = dict;
  s.x.resize(n, m_count);
  s.y.resize(n, m_count);
  for (Eigen::Index m = 0; m < m_count; ++m) {
    const Eigen::Index lead = m + span + 1;
    s.x.col(m) = stack(lead);
    s.y.col(m) = stack(lead + 1);
  }
  if (!s.x.allFinite() || !s.y.allFinite()) throw Error(ErrorKind::format, "non-finite delay features");
  return s;
}

}  // namespace specguard
