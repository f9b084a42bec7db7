// SPDX-License-Identifier: Apache-2.0
//
// Experiment runner: builds problems from a flat configuration, runs seeded
// batches (optionally on several threads), and serializes one record per
// solve plus per-rank aggregates as JSON lines or CSV.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "feasopt/auglag.hpp"
#include "feasopt/dense.hpp"
#include "feasopt/matrix_market.hpp"
#include "feasopt/problems.hpp"
#include "feasopt/solver.hpp"

namespace feasopt {

struct RunRecord {
  std::string kind = "run";  // "run" or "aggregate"
  std::string problem_id;
  long n = 0;
  long p = 0;
  std::string scheme;
  double rho = 0.0;
  std::string gtau;
  bool control = true;
  std::uint64_t seed = 0;
  long rep = 0;    // repetition index; member count for aggregates
  std::string stop_reason;
  double f_initial = 0.0;
  double f_final = 0.0;
  double residual = 0.0;
  double feasi = 0.0;
  double nfge = 0.0;
  double iters = 0.0;
  std::optional<double> nlcmres0;
  std::optional<double> nlcmres;
  std::optional<double> err;
  std::optional<double> nu;
  double wall_ms = 0.0;

  bool operator==(const RunRecord&) const = default;
};

namespace detail {

template <class T>
void put_opt(nlohmann::ordered_json& j, const char* key, const std::optional<T>& v) {
  if (v) {
    j[key] = *v;
  } else {
    j[key] = nullptr;
  }
}

template <class T>
std::optional<T> get_opt(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const RunRecord& r) {
  nlohmann::ordered_json j;
  j["kind"] = r.kind;
  j["problem_id"] = r.problem_id;
  j["n"] = r.n;
  j["p"] = r.p;
  j["scheme"] = r.scheme;
  j["rho"] = r.rho;
  j["gtau"] = r.gtau;
  j["control"] = r.control;
  j["seed"] = r.seed;
  j["rep"] = r.rep;
  j["stop_reason"] = r.stop_reason;
  j["f_initial"] = r.f_initial;
  j["f_final"] = r.f_final;
  j["residual"] = r.residual;
  j["feasi"] = r.feasi;
  j["nfge"] = r.nfge;
  j["iters"] = r.iters;
  detail::put_opt(j, "nlcmres0", r.nlcmres0);
  detail::put_opt(j, "nlcmres", r.nlcmres);
  detail::put_opt(j, "err", r.err);
  detail::put_opt(j, "nu", r.nu);
  j["wall_ms"] = r.wall_ms;
  return j;
}

inline RunRecord record_from_json(const nlohmann::json& j) {
  RunRecord r;
  r.kind = j.at("kind").get<std::string>();
  r.problem_id = j.at("problem_id").get<std::string>();
  r.n = j.at("n").get<long>();
  r.p = j.at("p").get<long>();
  r.scheme = j.at("scheme").get<std::string>();
  r.rho = j.at("rho").get<double>();
  r.gtau = j.at("gtau").get<std::string>();
  r.control = j.at("control").get<bool>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.rep = j.at("rep").get<long>();
  r.stop_reason = j.at("stop_reason").get<std::string>();
  r.f_initial = j.at("f_initial").get<double>();
  r.f_final = j.at("f_final").get<double>();
  r.residual = j.at("residual").get<double>();
  r.feasi = j.at("feasi").get<double>();
  r.nfge = j.at("nfge").get<double>();
  r.iters = j.at("iters").get<double>();
  r.nlcmres0 = detail::get_opt<double>(j, "nlcmres0");
  r.nlcmres = detail::get_opt<double>(j, "nlcmres");
  r.err = detail::get_opt<double>(j, "err");
  r.nu = detail::get_opt<double>(j, "nu");
  r.wall_ms = j.at("wall_ms").get<double>();
  return r;
}

inline std::string to_jsonl(const RunRecord& r) { return to_json(r).dump(); }

inline RunRecord parse_jsonl(const std::string& line) {
  return record_from_json(nlohmann::json::parse(line));
}

inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols = {
      "kind",     "problem_id", "n",      "p",        "scheme",  "rho",    "gtau",
      "control",  "seed",       "rep",    "stop_reason", "f_initial", "f_final", "residual",
      "feasi",    "nfge",       "iters",  "nlcmres0", "nlcmres", "err",    "nu",
      "wall_ms"};
  return cols;
}

inline std::string csv_header() {
  std::string s;
  for (const auto& c : csv_columns()) s += (s.empty() ? "" : ",") + c;
  return s;
}

namespace detail {

inline std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

inline double parse_num(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw DomainError("csv: bad number '" + s + "'");
  return v;
}

}  // namespace detail

/// Identifier fields never contain commas, so no quoting is needed.
inline std::string to_csv(const RunRecord& r) {
  using detail::num;
  std::vector<std::string> f = {r.kind,
                                r.problem_id,
                                std::to_string(r.n),
                                std::to_string(r.p),
                                r.scheme,
                                num(r.rho),
                                r.gtau,
                                r.control ? "1" : "0",
                                std::to_string(r.seed),
                                std::to_string(r.rep),
                                r.stop_reason,
                                num(r.f_initial),
                                num(r.f_final),
                                num(r.residual),
                                num(r.feasi),
                                num(r.nfge),
                                num(r.iters),
                                num(r.nlcmres0),
                                num(r.nlcmres),
                                num(r.err),
                                num(r.nu),
                                num(r.wall_ms)};
  std::string s;
  for (std::size_t i = 0; i < f.size(); ++i) s += (i ? "," : "") + f[i];
  return s;
}

inline RunRecord parse_csv(const std::string& line) {
  std::vector<std::string> f;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      f.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  f.push_back(cur);
  if (f.size() != csv_columns().size()) throw DomainError("csv: wrong number of fields");
  using detail::parse_num;
  auto opt = [](const std::string& s) -> std::optional<double> {
    if (s.empty()) return std::nullopt;
    return detail::parse_num(s);
  };
  RunRecord r;
  r.kind = f[0];
  r.problem_id = f[1];
  r.n = std::stol(f[2]);
  r.p = std::stol(f[3]);
  r.scheme = f[4];
  r.rho = parse_num(f[5]);
  r.gtau = f[6];
  r.control = f[7] == "1";
  r.seed = std::stoull(f[8]);
  r.rep = std::stol(f[9]);
  r.stop_reason = f[10];
  r.f_initial = parse_num(f[11]);
  r.f_final = parse_num(f[12]);
  r.residual = parse_num(f[13]);
  r.feasi = parse_num(f[14]);
  r.nfge = parse_num(f[15]);
  r.iters = parse_num(f[16]);
  r.nlcmres0 = opt(f[17]);
  r.nlcmres = opt(f[18]);
  r.err = opt(f[19]);
  r.nu = opt(f[20]);
  r.wall_ms = parse_num(f[21]);
  return r;
}

// ---------------------------------------------------------------------------

struct ExperimentConfig {
  std::string problem = "ex3";  // ex2 ex3 corr-file balogh trace-eigen ex10
  long n = 0;                   // 0 picks the problem's default size
  std::vector<long> ranks;      // r for correlation problems, p otherwise
  std::string scheme = "new";
  double rho = 0.25;
  std::string gtau = "linear";
  bool control = true;
  double eps = 1e-5;
  double eps_x = 1e-5;
  double eps_f = 1e-8;
  long max_iter = 3000;
  std::uint64_t seed = 0;
  int repeat = 1;
  int jobs = 1;
  std::string matrix_file;
  std::string fixed_entries;
  std::string l_mode = "minus-one";  // or "uniform"
  std::string start = "pca";         // or "random" for correlation problems
  bool weighted = false;
  int ne = 3;
  bool timing = true;

  SolverConfig solver_config() const {
    SolverConfig c;
    c.rho = rho;
    c.scheme.kind = parse_scheme(scheme);
    c.scheme.gtau = parse_gtau(gtau);
    c.scheme.feasibility_control = control;
    c.eps = eps;
    c.eps_x = eps_x;
    c.eps_f = eps_f;
    c.max_iter = max_iter;
    c.seed = seed;
    c.validate();
    return c;
  }

  long default_n() const {
    if (n > 0) return n;
    if (problem == "ex2" || problem == "ex3") return 500;
    if (problem == "ex10" || problem == "balogh") return 200;
    return 100;
  }

  std::vector<long> effective_ranks() const {
    if (!ranks.empty()) return ranks;
    if (problem == "ex10") return {20};
    if (problem == "balogh" || problem == "trace-eigen") return {4};
    return {5};
  }
};

/// Unit-column r x n matrix with Gaussian directions.
inline Matrix random_oblique(Eigen::Index r, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix v(r, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < r; ++i) v(i, j) = nd(rng);
  return v * v.colwise().norm().cwiseInverse().asDiagonal();
}

namespace detail {

inline RunRecord base_record(const ExperimentConfig& cfg, long n, long p, long rep) {
  RunRecord r;
  r.problem_id = cfg.problem;
  r.n = n;
  r.p = p;
  r.scheme = cfg.scheme;
  r.rho = cfg.rho;
  r.gtau = cfg.gtau;
  r.control = cfg.control;
  r.seed = cfg.seed + static_cast<std::uint64_t>(rep);
  r.rep = rep;
  return r;
}

inline void fill_from_report(RunRecord& r, const SolverReport& rep) {
  r.stop_reason = std::string(to_string(rep.stop_reason));
  r.f_initial = rep.f_initial;
  r.f_final = rep.f_final;
  r.residual = rep.residual_final;
  r.feasi = rep.feasi;
  r.nfge = static_cast<double>(rep.nfge);
  r.iters = static_cast<double>(rep.iters);
  r.wall_ms = rep.wall_ms;
}

inline LowRankCorrProblem corr_problem(const ExperimentConfig& cfg, long r) {
  const long n = cfg.default_n();
  if (cfg.problem == "ex2") return gen_ex2(n, r);
  if (cfg.problem == "ex3" || cfg.problem == "ex10") return gen_ex3(n, cfg.weighted, cfg.seed, r);
  if (cfg.problem == "corr-file") {
    if (cfg.matrix_file.empty()) throw DomainError("corr-file needs --matrix-file");
    LowRankCorrProblem p;
    p.c = read_matrix_market(cfg.matrix_file);
    p.r = r;
    p.name = "corr-file";
    return p;
  }
  throw DomainError("unknown correlation problem '" + cfg.problem + "'");
}

}  // namespace detail

/// One solve for (rank, repetition).
inline RunRecord run_one(const ExperimentConfig& cfg, long rank, long rep) {
  const SolverConfig sc = cfg.solver_config();
  const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(rep);
  const std::string& pb = cfg.problem;
  RunRecord rec;

  if (pb == "ex2" || pb == "ex3" || pb == "corr-file") {
    LowRankCorrProblem lc = detail::corr_problem(cfg, rank);
    rec = detail::base_record(cfg, lc.n(), rank, rep);
    const Matrix v0 =
        cfg.start == "random" ? random_oblique(rank, lc.n(), seed) : modified_pca_init(lc.c, rank);
    const SolverReport r = solve(make_problem(lc), v0, sc);
    detail::fill_from_report(rec, r);
    rec.nlcmres0 = nlcmres(lc, v0);
    rec.nlcmres = nlcmres(lc, r.x_final);
  } else if (pb == "balogh") {
    const long n = cfg.default_n();
    HeterogeneousQuadraticProblem hp = cfg.l_mode == "uniform"
                                           ? heterogeneous_uniform(n, rank, seed)
                                           : heterogeneous_minus_one(n, rank);
    if (cfg.l_mode != "uniform" && cfg.l_mode != "minus-one") {
      throw DomainError("unknown l-mode '" + cfg.l_mode + "'");
    }
    rec = detail::base_record(cfg, n, rank, rep);
    const SolverReport r =
        solve(make_problem(hp), StiefelPoint(random_stiefel(n, rank, seed)), sc);
    detail::fill_from_report(rec, r);
    rec.err = std::abs(r.f_final - hp.optimum()) / std::abs(hp.optimum());
  } else if (pb == "trace-eigen") {
    Matrix a = cfg.matrix_file.empty() ? random_symmetric(cfg.default_n(), cfg.seed)
                                       : read_matrix_market(cfg.matrix_file);
    const long n = a.rows();
    const double top = top_eigen_sum(a, rank);
    rec = detail::base_record(cfg, n, rank, rep);
    const SolverReport r =
        solve(make_trace_eigen(std::move(a), rank), StiefelPoint(random_stiefel(n, rank, seed)), sc);
    detail::fill_from_report(rec, r);
    rec.err = std::abs(-r.f_final - top) / std::max(1.0, std::abs(top));
  } else if (pb == "ex10") {
    LowRankCorrProblem lc = detail::corr_problem(cfg, rank);
    const long n = lc.n();
    const FixedEntrySet fes = cfg.fixed_entries.empty() ? ex10_entries(n, cfg.ne, seed)
                                                        : FixedEntrySet::read(cfg.fixed_entries);
    rec = detail::base_record(cfg, n, rank, rep);
    const Matrix v0 = modified_pca_init(lc.c, rank);
    AugLagConfig ac;
    ac.solver = sc;
    const AugLagResult ar = auglag_solve(lc, fes, v0, ac);
    rec.stop_reason = ar.linesearch_failed ? std::string(to_string(StopReason::LineSearchFail))
                                           : (ar.converged ? "auglag_converged" : "auglag_cap");
    rec.f_initial = lowrank_corr_eval(lc, v0).value;
    rec.f_final = ar.theta;
    rec.residual = ar.residual;
    rec.feasi = ObliqueManifold(sc.scheme).feasibility(ar.v);
    rec.nfge = static_cast<double>(ar.total_nfge);
    rec.iters = static_cast<double>(ar.total_iters);
    rec.nlcmres0 = nlcmres(lc, v0);
    rec.nlcmres = ar.residual;
    rec.nu = ar.nu;
    rec.wall_ms = ar.wall_ms;
  } else {
    throw DomainError("unknown problem '" + pb + "'");
  }
  if (!cfg.timing) rec.wall_ms = 0.0;
  return rec;
}

namespace detail {

inline double mean_of(const std::vector<const RunRecord*>& rs, double RunRecord::*f) {
  double s = 0.0;
  for (const auto* r : rs) s += r->*f;
  return s / static_cast<double>(rs.size());
}

inline std::optional<double> mean_opt(const std::vector<const RunRecord*>& rs,
                                      std::optional<double> RunRecord::*f) {
  double s = 0.0;
  for (const auto* r : rs) {
    if (!(r->*f)) return std::nullopt;
    s += *(r->*f);
  }
  return s / static_cast<double>(rs.size());
}

}  // namespace detail

/// Means over the repetitions of each rank, in rank order of first appearance.
inline std::vector<RunRecord> aggregate(const std::vector<RunRecord>& runs) {
  std::vector<long> order;
  std::map<long, std::vector<const RunRecord*>> groups;
  for (const auto& r : runs) {
    if (r.kind != "run") continue;
    if (!groups.count(r.p)) order.push_back(r.p);
    groups[r.p].push_back(&r);
  }
  std::vector<RunRecord> out;
  for (long p : order) {
    const auto& g = groups[p];
    RunRecord a = *g.front();
    a.kind = "aggregate";
    a.rep = static_cast<long>(g.size());
    a.seed = g.front()->seed;
    bool all_same = true;
    for (const auto* r : g) all_same = all_same && r->stop_reason == g.front()->stop_reason;
    a.stop_reason = all_same ? g.front()->stop_reason : "mixed";
    a.f_initial = detail::mean_of(g, &RunRecord::f_initial);
    a.f_final = detail::mean_of(g, &RunRecord::f_final);
    a.residual = detail::mean_of(g, &RunRecord::residual);
    a.feasi = detail::mean_of(g, &RunRecord::feasi);
    a.nfge = detail::mean_of(g, &RunRecord::nfge);
    a.iters = detail::mean_of(g, &RunRecord::iters);
    a.wall_ms = detail::mean_of(g, &RunRecord::wall_ms);
    a.nlcmres0 = detail::mean_opt(g, &RunRecord::nlcmres0);
    a.nlcmres = detail::mean_opt(g, &RunRecord::nlcmres);
    a.err = detail::mean_opt(g, &RunRecord::err);
    a.nu = detail::mean_opt(g, &RunRecord::nu);
    out.push_back(std::move(a));
  }
  return out;
}

/// All (rank, repetition) solves followed by one aggregate per rank. Results
/// are ordered by (rank, repetition) regardless of thread scheduling.
inline std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) {
  if (cfg.repeat < 1) throw DomainError("repeat must be >= 1");
  if (cfg.jobs < 1) throw DomainError("jobs must be >= 1");
  cfg.solver_config();  // validate early
  struct Task {
    long rank;
    long rep;
  };
  std::vector<Task> tasks;
  for (long r : cfg.effective_ranks())
    for (long k = 0; k < cfg.repeat; ++k) tasks.push_back({r, k});
  std::vector<RunRecord> runs(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        runs[i] = run_one(cfg, tasks[i].rank, tasks[i].rep);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int nthreads = std::min<int>(cfg.jobs, static_cast<int>(tasks.size()));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<RunRecord> out = runs;
  for (auto& a : aggregate(runs)) out.push_back(std::move(a));
  return out;
}

inline bool any_linesearch_fail(const std::vector<RunRecord>& recs) {
  return std::any_of(recs.begin(), recs.end(), [](const RunRecord& r) {
    return r.kind == "run" && r.stop_reason == to_string(StopReason::LineSearchFail);
  });
}

inline void write_records(std::ostream& out, const std::vector<RunRecord>& recs,
                          const std::string& format) {
  if (format == "jsonl") {
    for (const auto& r : recs) out << to_jsonl(r) << '\n';
  } else if (format == "csv") {
    out << csv_header() << '\n';
    for (const auto& r : recs) out << to_csv(r) << '\n';
  } else {
    throw DomainError("unknown format '" + format + "'");
  }
}

// ---------------------------------------------------------------------------
// Paired scheme comparison.

/// Applies "key=value,key=value" overrides (scheme, rho, gtau, control).
inline ExperimentConfig apply_variant(ExperimentConfig cfg, const std::string& spec) {
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw DomainError("variant item '" + item + "' lacks '='");
    const std::string key = item.substr(0, eq);
    const std::string val = item.substr(eq + 1);
    if (key == "scheme") {
      parse_scheme(val);
      cfg.scheme = val;
    } else if (key == "rho") {
      cfg.rho = std::stod(val);
    } else if (key == "gtau") {
      parse_gtau(val);
      cfg.gtau = val;
    } else if (key == "control") {
      cfg.control = val == "1" || val == "true" || val == "on";
    } else {
      throw DomainError("unknown variant key '" + key + "'");
    }
  }
  return cfg;
}

struct ComparisonRow {
  std::string label;
  long p = 0;
  double mean_nfge = 0.0;
  std::optional<double> mean_err;
  double s_ratio = 0.0;  // 100 (mean nfge - baseline mean nfge) / baseline mean nfge
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  std::vector<RunRecord> records;
};

/// Runs every variant on the same seeds and reports the saved ratio of each
/// variant against the first one.
inline Comparison compare_schemes(const ExperimentConfig& base,
                                  const std::vector<std::string>& variants) {
  if (variants.size() < 2) throw DomainError("compare_schemes: need at least two variants");
  Comparison cmp;
  std::vector<std::vector<RunRecord>> aggs;
  for (const auto& v : variants) {
    const auto recs = run_experiment(apply_variant(base, v));
    std::vector<RunRecord> ag;
    for (const auto& r : recs) {
      cmp.records.push_back(r);
      if (r.kind == "aggregate") ag.push_back(r);
    }
    aggs.push_back(std::move(ag));
  }
  for (std::size_t vi = 0; vi < variants.size(); ++vi) {
    for (std::size_t k = 0; k < aggs[vi].size(); ++k) {
      ComparisonRow row;
      row.label = variants[vi];
      row.p = aggs[vi][k].p;
      row.mean_nfge = aggs[vi][k].nfge;
      row.mean_err = aggs[vi][k].err;
      const double b = aggs[0][k].nfge;
      row.s_ratio = 100.0 * (row.mean_nfge - b) / b;
      cmp.rows.push_back(row);
    }
  }
  return cmp;
}

// ---------------------------------------------------------------------------
// Feasibility drift along AFBB iterations.

/// Symmetric A = Q diag(lambda) Q^T with the stiffness-like spectrum
/// lambda_k = 4e4 sin^2(k pi / (2n + 2)) and a seeded random orthogonal Q.
/// The clustered top eigenvalues keep AFBB iterating for a long time.
inline Matrix drift_matrix(Eigen::Index n, std::uint64_t seed) {
  Vector ev(n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    const double s = std::sin(static_cast<double>(k) * std::numbers::pi /
                              (2.0 * static_cast<double>(n + 1)));
    ev(k - 1) = 4e4 * s * s;
  }
  const Matrix q = random_stiefel(n, n, seed + 1);
  return sym(q * ev.asDiagonal() * q.transpose());
}

/// ||X_k^T X_k - I||_F after each of up to `steps` iterations of AFBB on
/// -tr(X^T A X), with every stopping test except the iteration cap disabled.
/// The trace ends early if the line search can no longer make progress.
inline std::vector<double> drift_demo(Eigen::Index n, Eigen::Index p, long steps, bool controlled,
                                      std::uint64_t seed = 0) {
  std::vector<double> trace;
  if (steps <= 0) return trace;
  const Problem prob = make_trace_eigen(drift_matrix(n, seed), p);
  SolverConfig cfg;
  cfg.scheme.feasibility_control = controlled;
  cfg.eps = cfg.eps_x = cfg.eps_f = std::numeric_limits<double>::min();
  cfg.stationary_tol = 0.0;
  cfg.max_iter = steps;
  AfbbSolver solver(prob.eval, make_manifold(prob, cfg), cfg);
  SolverState s = solver.init(random_stiefel(n, p, seed + 2));
  while (!s.stopped) {
    const long k = s.k;
    s = solver.iterate_once(std::move(s));
    if (s.k > k) trace.push_back(feasibility_error(s.x));
  }
  return trace;
}

}  // namespace feasopt
