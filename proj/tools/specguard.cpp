// SPDX-License-Identifier: Apache-2.0
// specguard: generate data, fit EDMD, sweep P-hat grids, test eigenvalues, cluster, self-check.

#include "specguard/specguard.hpp"

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace specguard;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheck = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage:
    case ErrorKind::format:
    case ErrorKind::shape:
    case ErrorKind::insufficient_data:
    case ErrorKind::unsupported_mode:
    case ErrorKind::unstable_kernel:
    case ErrorKind::window_too_large:
      return kExitUsage;
    default:
      return kExitNumeric;
  }
}

std::string g_command_line;

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::format, "cannot open '" + path + "'");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

json provenance(const std::string& input, std::optional<std::uint64_t> seed) {
  json p = {{"tool", "specguard"}, {"version", kVersion}, {"command_line", g_command_line}};
  p["rng"] = {{"algorithm", Rng::kAlgorithm}, {"seed", seed ? json(*seed) : json(nullptr)}};
  if (!input.empty()) p["input"] = {{"path", input}, {"sha256", sha256_file(input)}};
  return p;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::resource, "cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error(ErrorKind::resource, "write failed for '" + path + "'");
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// "re" or "re:im"
cplx parse_complex(const std::string& tok) {
  const auto colon = tok.find(':');
  try {
    std::size_t used = 0;
    const double re = std::stod(tok.substr(0, colon), &used);
    if (used != (colon == std::string::npos ? tok.size() : colon)) throw std::invalid_argument(tok);
    if (colon == std::string::npos) return {re, 0.0};
    const std::string im_s = tok.substr(colon + 1);
    const double im = std::stod(im_s, &used);
    if (used != im_s.size()) throw std::invalid_argument(tok);
    return {re, im};
  } catch (const std::exception&) {
    throw Error(ErrorKind::usage, "cannot parse complex number '" + tok + "' (use re or re:im)");
  }
}

std::vector<cplx> parse_complex_list(const std::vector<std::string>& items) {
  std::vector<cplx> out;
  for (const auto& item : items) {
    std::stringstream ss(item);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) out.push_back(parse_complex(tok));
  }
  return out;
}

json complex_json(cplx z) { return json::array({z.real(), z.imag()}); }

struct KernelFlags {
  bool iid = false;
  int lm = -1;
  double tau = -1.0;
  std::string mu;
  double mu_guard = 0.05;

  void attach(CLI::App* app) {
    auto* o_iid = app->add_flag("--iid", iid, "independent-sample kernel (no lag window)");
    auto* o_lm = app->add_option("--LM", lm, "lag window length L_M");
    auto* o_tau = app->add_option("--tau", tau, "decorrelation time; L_M from the bandwidth rule");
    o_iid->excludes(o_lm)->excludes(o_tau);
    o_lm->excludes(o_tau);
    app->add_option("--mu", mu, "metastability eigenvalues: auto:K or a list re[:im],...");
    app->add_option("--mu-guard", mu_guard, "minimum |1 - mu'")->check(CLI::PositiveNumber);
  }
};

struct ResolvedKernel {
  KernelSpec kernel;
  json info;
  std::vector<std::string> warnings;
};

ResolvedKernel resolve_kernel(const KernelFlags& f, const SnapshotSeries& s, const std::vector<cplx>& eigs) {
  ResolvedKernel r;
  std::vector<cplx> mu;
  std::string mu_source = "none";
  if (!f.mu.empty()) {
    if (f.iid) throw Error(ErrorKind::usage, "--mu needs a windowed kernel, not --iid");
    if (f.mu.rfind("auto:", 0) == 0) {
      int k = 0;
      try {
        k = std::stoi(f.mu.substr(5));
      } catch (const std::exception&) {
        throw Error(ErrorKind::usage, "bad --mu value '" + f.mu + "'");
      }
      const MuSelection sel = select_mu(eigs, k, f.mu_guard);
      mu = sel.mu;
      r.warnings.insert(r.warnings.end(), sel.warnings.begin(), sel.warnings.end());
      mu_source = f.mu;
    } else {
      mu = parse_complex_list({f.mu});
      mu_source = "list";
    }
  }
  if (f.iid) {
    r.kernel = iid_kernel();
    r.info = {{"rule", "iid"}};
    if (s.kind == SamplingKind::trajectory)
      r.warnings.push_back("--iid used on trajectory data: samples are correlated, the i.i.d. kernel is a model mismatch");
  } else if (f.lm >= 0) {
    r.kernel = windowed_kernel(f.lm, mu, f.mu_guard);
    r.info = {{"rule", "fixed"}};
  } else if (f.tau > 0.0 || s.kind == SamplingKind::trajectory) {
    const double tau = f.tau > 0.0 ? f.tau : estimate_tau(s);
    const int lm = window_length(tau, s.M());
    r.kernel = windowed_kernel(lm, mu, f.mu_guard);
    r.info = {{"rule", "bandwidth"}, {"tau", tau}, {"tau_source", f.tau > 0.0 ? "flag" : "estimated"}};
  } else {
    r.kernel = mu.empty() ? iid_kernel() : windowed_kernel(0, mu, f.mu_guard);
    r.info = {{"rule", "iid-data-default"}};
  }
  r.info["mu_source"] = mu_source;
  return r;
}

struct GridFlags {
  GridSpec grid{-1.2, 1.2, -1.2, 1.2, 41, 41};
  double max_memory_mb = 2048.0;

  void attach(CLI::App* app) {
    app->add_option("--re-min", grid.re_min);
    app->add_option("--re-max", grid.re_max);
    app->add_option("--im-min", grid.im_min);
    app->add_option("--im-max", grid.im_max);
    app->add_option("--n-re", grid.n_re)->check(CLI::PositiveNumber);
    app->add_option("--n-im", grid.n_im)->check(CLI::PositiveNumber);
    app->add_option("--max-memory-mb", max_memory_mb, "memory budget for per-cell results");
  }

  void check(Eigen::Index n) const {
    grid.validate();
    const double per_cell = 16.0 * static_cast<double>(n) * static_cast<double>(n) + 256.0;
    const double mb = per_cell * static_cast<double>(grid.size()) / (1024.0 * 1024.0);
    if (mb > max_memory_mb)
      throw Error(ErrorKind::resource, "grid needs about " + std::to_string(static_cast<long long>(mb)) +
                                           " MB, above the --max-memory-mb budget");
  }
};

struct IterFlags {
  double tol = 0.1;
  int max_iters = 200;
  unsigned threads = 0;

  void attach(CLI::App* app, bool with_threads) {
    app->add_option("--tol", tol, "relative bracket tolerance")->check(CLI::PositiveNumber);
    app->add_option("--max-iters", max_iters)->check(CLI::PositiveNumber);
    if (with_threads) app->add_option("--threads", threads, "worker threads (default SPECGUARD_THREADS or all cores)");
  }

  PowerIterSettings settings() const {
    PowerIterSettings s;
    s.rel_tol = tol;
    s.max_iters = max_iters;
    s.keep_history = false;
    return s;
  }
};

std::vector<EigenPair> edmd_eigs(const DataPseudospectrum& eng) {
  return eigensystem(edmd_matrix(eng.gram(), eng.rcond_floor()).k_hat);
}

json manifest(const std::string& input, const ResolvedKernel& k, const IterFlags& it,
              const std::vector<std::string>& extra_warnings = {}) {
  json m = provenance(input, std::nullopt);
  m["kernel"] = kernel_to_json(k.kernel);
  m["kernel_rule"] = k.info;
  m["power_iteration"] = {{"rel_tol", it.tol}, {"max_iters", it.max_iters}};
  std::vector<std::string> w = k.warnings;
  w.insert(w.end(), extra_warnings.begin(), extra_warnings.end());
  m["warnings"] = w;
  return m;
}

void print_warnings(const std::vector<std::string>& w) {
  for (const auto& s : w) std::cerr << "warning: " << s << "\n";
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string system;
  std::string preset = "paper";
  Eigen::Index m = 0;
  std::uint64_t seed = 0;
  std::string out;
  std::string mode = "iid";
  std::string dict;
  bool raw_states = false;
};

DictionarySpec parse_dict(const std::string& d, int state_dim) {
  if (d.rfind("trig:", 0) == 0) return DictionarySpec::trig(std::stoi(d.substr(5)));
  if (d == "delay") return DictionarySpec::monomial_delay(3, 10, state_dim);
  if (d.rfind("delay:", 0) == 0) {
    const std::string rest = d.substr(6);
    const auto comma = rest.find(',');
    if (comma == std::string::npos) throw Error(ErrorKind::usage, "use --dict delay:<degree>,<delays>");
    return DictionarySpec::monomial_delay(std::stoi(rest.substr(0, comma)), std::stoi(rest.substr(comma + 1)), state_dim);
  }
  if (d == "identity") return DictionarySpec::identity(state_dim);
  throw Error(ErrorKind::usage, "unknown dictionary '" + d + "'");
}

int cmd_generate(const GenerateArgs& a) {
  if (a.preset != "paper") throw Error(ErrorKind::usage, "only --preset paper is available");
  json spec;
  SnapshotSeries s;
  if (a.system == "var") {
    const VarSpec v = VarSpec::paper_preset(a.seed);
    const auto [xs, ys] = gen_var(v, a.m);
    s = evaluate_dictionary(xs, ys, DictionarySpec::identity(static_cast<int>(v.N())), SamplingKind::iid);
    spec = {{"system", "var"}, {"N", v.N()}, {"sigma_xi_scale", v.sigma_xi(0, 0)}};
  } else if (a.system == "map1d") {
    const SamplingKind mode = parse_sampling_kind(a.mode);
    const DictionarySpec d = parse_dict(a.dict.empty() ? "trig:10" : a.dict, 1);
    const auto [xs, ys] = gen_expanding_map(a.m, mode, a.seed);
    s = evaluate_dictionary(xs, ys, d, mode);
    spec = {{"system", "map1d"}, {"mode", to_string(mode)}, {"dictionary", d.describe()}};
  } else if (a.system == "lorenz63") {
    const DictionarySpec d = parse_dict(a.dict.empty() ? "delay" : a.dict, 3);
    if (d.variant != DictionarySpec::Variant::monomial_delay)
      throw Error(ErrorKind::usage, "lorenz63 uses a delay dictionary");
    Lorenz63Spec l;
    l.seed = a.seed;
    RMat traj = gen_lorenz63(l, a.m + d.n_delays);
    json scaling = nullptr;
    if (!a.raw_states) {
      // standardize each coordinate so monomials stay well scaled
      const Eigen::RowVectorXd mean = traj.colwise().mean();
      traj.rowwise() -= mean;
      const Eigen::RowVectorXd sd = (traj.array().square().colwise().sum() / static_cast<double>(traj.rows())).sqrt();
      traj.array().rowwise() /= sd.array();
      scaling = {{"mean", std::vector<double>(mean.data(), mean.data() + 3)},
                 {"std", std::vector<double>(sd.data(), sd.data() + 3)}};
    }
    s = delay_embed(traj, d, 1, l.dt_sample);
    spec = {{"system", "lorenz63"}, {"dictionary", d.describe()}, {"dt_sample", l.dt_sample},
            {"substeps", l.substeps}, {"burn_in", l.burn_in}, {"standardization", scaling}};
  } else {
    throw Error(ErrorKind::usage, "unknown --system '" + a.system + "'");
  }
  write_snapshots(a.out, s);
  json m = provenance(a.out, a.seed);
  m["schema"] = "specguard/v1/generate-manifest";
  m["spec"] = spec;
  m["spec"]["preset"] = a.preset;
  m["output"] = {{"path", a.out}, {"N", s.N()}, {"M", s.M()}, {"kind", to_string(s.kind)}};
  m["generated_at"] = utc_now();
  write_json(a.out + ".manifest.json", m);
  std::cerr << "wrote " << a.out << " (N=" << s.N() << ", M=" << s.M() << ")\n";
  return kExitOk;
}

struct EdmdArgs {
  std::string in;
  std::string out;
  double rcond_floor = -1.0;
};

int cmd_edmd(const EdmdArgs& a) {
  const SnapshotSeries s = load_snapshots(a.in);
  const GramPair g = gram_matrices(s);
  const EdmdResult k = edmd_matrix(g, a.rcond_floor);
  json eig = json::array();
  for (const auto& p : eigensystem(k.k_hat))
    eig.push_back({{"lambda", complex_json(p.value)}, {"modulus", std::abs(p.value)}, {"residual", p.residual}});
  json j = {{"schema", "specguard/v1/edmd"}, {"N", s.N()},          {"M", s.M()},
            {"kind", to_string(s.kind)},    {"rcond_psi_xx", k.rcond}, {"eigenvalues", eig},
            {"provenance", provenance(a.in, std::nullopt)}};
  write_json(a.out, j);
  return kExitOk;
}

struct SweepArgs {
  std::string in;
  std::string out = "sweep";
  double log_dt = 0.0;
  double rcond_floor = -1.0;
  KernelFlags kernel;
  GridFlags grid;
  IterFlags iter;
};

int cmd_sweep(const SweepArgs& a) {
  const SnapshotSeries s = load_snapshots(a.in);
  a.grid.check(s.N());
  const DataPseudospectrum probe(s, iid_kernel(), a.rcond_floor);
  const ResolvedKernel rk = resolve_kernel(a.kernel, s, eigenvalues_of(edmd_eigs(probe)));
  print_warnings(rk.warnings);
  const DataPseudospectrum eng(s, rk.kernel, a.rcond_floor);
  const SweepResult r = sweep(eng, a.grid.grid, a.iter.settings(), a.iter.threads);
  std::size_t failed = 0, unconverged = 0;
  for (const auto& c : r.cells) {
    if (!c.ok()) ++failed;
    else if (c.estimate.status == PStatus::max_iters) ++unconverged;
  }
  json j = sweep_to_json(r);
  j["M"] = s.M();
  j["manifest"] = manifest(a.in, rk, a.iter);
  j["summary"] = {{"cells", r.cells.size()}, {"failed", failed}, {"max_iters", unconverged}};
  write_json(a.out + ".json", j);
  write_text(a.out + ".csv", sweep_to_csv(r, a.log_dt));
  std::cerr << "wrote " << a.out << ".json and " << a.out << ".csv (" << r.cells.size() << " cells, " << failed
            << " failed, " << unconverged << " hit max_iters)\n";
  return kExitOk;
}

struct TestArgs {
  std::string in;
  std::string out;
  std::vector<std::string> lambdas;
  bool eigs = false;
  double rcond_floor = -1.0;
  KernelFlags kernel;
  IterFlags iter;
};

int cmd_test(const TestArgs& a) {
  const std::vector<cplx> points = parse_complex_list(a.lambdas);
  if (points.empty() && !a.eigs) throw Error(ErrorKind::usage, "give --lambda values or --eigs");
  const SnapshotSeries s = load_snapshots(a.in);
  const DataPseudospectrum probe(s, iid_kernel(), a.rcond_floor);
  const std::vector<EigenPair> eig = edmd_eigs(probe);
  const ResolvedKernel rk = resolve_kernel(a.kernel, s, eigenvalues_of(eig));
  print_warnings(rk.warnings);
  const DataPseudospectrum eng(s, rk.kernel, a.rcond_floor);
  const PowerIterSettings st = a.iter.settings();
  SpectralReport rep;
  if (a.eigs)
    for (std::size_t i = 0; i < eig.size(); ++i) {
      SpectralEntry e;
      e.index = static_cast<int>(i);
      e.residual = eig[i].residual;
      e.test = eig_test(eig[i].value, eng.p_hat(eig[i].value, st), s.M());
      rep.eigen.push_back(e);
    }
  for (const cplx z : points) rep.points.push_back(eig_test(z, eng.p_hat(z, st), s.M()));
  rep.kernel = kernel_to_json(rk.kernel);
  rep.provenance = manifest(a.in, rk, a.iter);
  json j = spectral_report_to_json(rep);
  j["M"] = s.M();
  write_json(a.out, j);
  return kExitOk;
}

struct ClusterArgs {
  std::string in;
  std::string out;
  double level = 1.0;
  double alpha = 0.05;
  double rcond_floor = -1.0;
  KernelFlags kernel;
  GridFlags grid;
  IterFlags iter;
};

int cmd_cluster(const ClusterArgs& a) {
  const SnapshotSeries s = load_snapshots(a.in);
  a.grid.check(s.N());
  const DataPseudospectrum probe(s, iid_kernel(), a.rcond_floor);
  const std::vector<EigenPair> eig = edmd_eigs(probe);
  const std::vector<cplx> ev = eigenvalues_of(eig);
  const ResolvedKernel rk = resolve_kernel(a.kernel, s, ev);
  print_warnings(rk.warnings);
  const DataPseudospectrum eng(s, rk.kernel, a.rcond_floor);
  const SweepResult r = sweep(eng, a.grid.grid, a.iter.settings(), a.iter.threads);
  const ClusterReport rep = cluster_eigenvalues(r, ev, a.level, s.M());
  print_warnings(rep.warnings);
  const ConfidenceRegion cr = confidence_region(r, s.M(), a.alpha, ev);
  json j = cluster_report_to_json(rep);
  json lam = json::array();
  for (const cplx z : ev) lam.push_back(complex_json(z));
  j["eigenvalues"] = lam;
  j["M"] = s.M();
  j["confidence_region"] = {{"alpha", a.alpha},
                            {"cells", cr.count},
                            {"empty", cr.empty},
                            {"bbox", cr.empty ? json(nullptr) : json({cr.re_lo, cr.re_hi, cr.im_lo, cr.im_hi})},
                            {"contains_eigenvalue", cr.contains}};
  j["manifest"] = manifest(a.in, rk, a.iter);
  write_json(a.out, j);
  return kExitOk;
}

struct OracleArgs {
  double perturb = 0.0;
  int seeds = 1;
  std::uint64_t base_seed = 1;
  std::string out;
};

int cmd_oracle(const OracleArgs& a) {
  OracleOptions opt;
  opt.perturb = a.perturb;
  opt.seeds = a.seeds;
  opt.base_seed = a.base_seed;
  const OracleReport rep = run_oracle_checks(opt);
  for (const auto& c : rep.checks)
    std::cerr << (c.pass ? "[ok]   " : "[FAIL] ") << c.name << ": " << c.value << " (tol " << c.tolerance << ")\n";
  json j = oracle_report_to_json(rep);
  j["provenance"] = provenance("", a.base_seed);
  j["perturb"] = a.perturb;
  j["seeds"] = a.seeds;
  if (!a.out.empty()) write_json(a.out, j);
  std::cerr << (rep.all_pass() ? "oracle-check passed" : "oracle-check FAILED") << "\n";
  return rep.all_pass() ? kExitOk : kExitCheck;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 0; i < argc; ++i) g_command_line += (i ? " " : "") + std::string(argv[i]);

  CLI::App app{"specguard: sampling pseudospectra for EDMD eigenvalue problems"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "sample a built-in system and write snapshot pairs");
  g->add_option("--system", gen.system, "var | map1d | lorenz63")->required()->check(CLI::IsMember({"var", "map1d", "lorenz63"}));
  g->add_option("--preset", gen.preset, "parameter preset")->check(CLI::IsMember({"paper"}));
  g->add_option("--M", gen.m, "number of snapshot pairs")->required()->check(CLI::Range(2, 100000000));
  g->add_option("--seed", gen.seed);
  g->add_option("--out", gen.out, "output .csv or .json")->required();
  g->add_option("--mode", gen.mode, "iid | trajectory (map1d)")->check(CLI::IsMember({"iid", "trajectory"}));
  g->add_option("--dict", gen.dict, "trig:N | delay | delay:D,K | identity");
  g->add_flag("--raw-states", gen.raw_states, "lorenz63: skip standardization of states");

  EdmdArgs ed;
  auto* e = app.add_subcommand("edmd", "fit the EDMD matrix and report its eigenvalues");
  e->add_option("--in", ed.in)->required()->check(CLI::ExistingFile);
  e->add_option("--out", ed.out, "output JSON (default stdout)");
  e->add_option("--rcond-floor", ed.rcond_floor, "singularity threshold for Psi_XX and the characteristic matrix (default 1e-10 N)");

  SweepArgs sw;
  auto* s = app.add_subcommand("sweep", "evaluate P-hat on a grid");
  s->add_option("--in", sw.in)->required()->check(CLI::ExistingFile);
  s->add_option("--out", sw.out, "output prefix for .json and .csv");
  s->add_option("--rcond-floor", sw.rcond_floor, "singularity threshold for Psi_XX and the characteristic matrix (default 1e-10 N)");
  s->add_option("--log-time", sw.log_dt, "add continuous-time axes log(lambda)/dt")->check(CLI::PositiveNumber);
  sw.kernel.attach(s);
  sw.grid.attach(s);
  sw.iter.attach(s, true);

  TestArgs ts;
  auto* t = app.add_subcommand("test", "test whether given points are eigenvalues");
  t->add_option("--in", ts.in)->required()->check(CLI::ExistingFile);
  t->add_option("--out", ts.out, "output JSON (default stdout)");
  t->add_option("--rcond-floor", ts.rcond_floor, "singularity threshold for Psi_XX and the characteristic matrix (default 1e-10 N)");
  t->add_option("--lambda", ts.lambdas, "points re[:im], comma separated");
  t->add_flag("--eigs", ts.eigs, "also test every EDMD eigenvalue");
  ts.kernel.attach(t);
  ts.iter.attach(t, false);

  ClusterArgs cl;
  auto* c = app.add_subcommand("cluster", "group EDMD eigenvalues by sublevel sets of M * P-hat");
  c->add_option("--in", cl.in)->required()->check(CLI::ExistingFile);
  c->add_option("--out", cl.out, "output JSON (default stdout)");
  c->add_option("--rcond-floor", cl.rcond_floor, "singularity threshold for Psi_XX and the characteristic matrix (default 1e-10 N)");
  c->add_option("--level", cl.level, "sublevel for M * P-hat")->check(CLI::PositiveNumber);
  c->add_option("--alpha", cl.alpha, "confidence-region significance level");
  cl.kernel.attach(c);
  cl.grid.attach(c);
  cl.iter.attach(c, true);

  OracleArgs orc;
  auto* o = app.add_subcommand("oracle-check", "run the closed-form and brute-force consistency checks");
  o->add_option("--perturb", orc.perturb, "relative error injected into the engine side");
  o->add_option("--seeds", orc.seeds, "independent replications")->check(CLI::PositiveNumber);
  o->add_option("--base-seed", orc.base_seed);
  o->add_option("--out", orc.out, "output JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*e) return cmd_edmd(ed);
    if (*s) return cmd_sweep(sw);
    if (*t) return cmd_test(ts);
    if (*c) return cmd_cluster(cl);
    if (*o) return cmd_oracle(orc);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return exit_code_for(err.kind());
  } catch (const std::bad_alloc&) {
    std::cerr << "error: resource: out of memory\n";
    return kExitNumeric;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitNumeric;
  }
  return kExitUsage;
}
