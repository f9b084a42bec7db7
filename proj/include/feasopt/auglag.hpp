// SPDX-License-Identifier: Apache-2.0
//
// Augmented Lagrangian outer loop for the low-rank correlation problem with
// fixed off-diagonal entries v_i^T v_j = q_ij, (i, j) in B_e.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "feasopt/core.hpp"
#include "feasopt/problems.hpp"
#include "feasopt/solver.hpp"

namespace feasopt {

struct FixedEntry {
  Eigen::Index i = 0;  // 0-based, i > j
  Eigen::Index j = 0;
  double q = 0.0;
};

/// Fixed off-diagonal correlations. Each pair is stored once with i > j.
class FixedEntrySet {
 public:
  FixedEntrySet() = default;

  /// Adds (i, j) with 0-based indices in either order.
  void add(Eigen::Index i, Eigen::Index j, double q) {
    if (i == j) throw DomainError("FixedEntrySet: diagonal entries cannot be fixed");
    if (i < 0 || j < 0) throw DomainError("FixedEntrySet: negative index");
    if (!(q >= -1.0 && q <= 1.0)) throw DomainError("FixedEntrySet: q outside [-1, 1]");
    if (i < j) std::swap(i, j);
    if (!keys_.insert({i, j}).second) {
      throw DomainError("FixedEntrySet: duplicate pair (" + std::to_string(i + 1) + ", " +
                        std::to_string(j + 1) + ")");
    }
    entries_.push_back({i, j, q});
  }

  const std::vector<FixedEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  void check_dim(Eigen::Index n) const {
    for (const auto& e : entries_) {
      if (e.i >= n) throw ShapeError("FixedEntrySet: index exceeds matrix dimension");
    }
  }

  /// Lines "i j q" with 1-based indices; '#' starts a comment.
  static FixedEntrySet parse(std::istream& in) {
    FixedEntrySet s;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      std::istringstream ls(line);
      long i = 0, j = 0;
      double q = 0.0;
      if (!(ls >> i)) continue;
      if (!(ls >> j >> q) || i < 1 || j < 1) {
        throw DomainError("fixed-entry file: bad line " + std::to_string(lineno));
      }
      s.add(i - 1, j - 1, q);
    }
    return s;
  }

  static FixedEntrySet read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open fixed-entry file '" + path + "'");
    return parse(in);
  }

  void write(std::ostream& out) const {
    out.precision(17);
    for (const auto& e : entries_) out << e.i + 1 << ' ' << e.j + 1 << ' ' << e.q << '\n';
  }

 private:
  std::vector<FixedEntry> entries_;
  std::set<std::pair<Eigen::Index, Eigen::Index>> keys_;
};

/// For each 1-based row i, min(ne, n - i) distinct columns j > i drawn
/// uniformly, all with q = 0.
inline FixedEntrySet ex10_entries(Eigen::Index n, int ne, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FixedEntrySet s;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index avail = n - 1 - i;
    const Eigen::Index want = std::min<Eigen::Index>(ne, avail);
    std::set<Eigen::Index> cols;
    std::uniform_int_distribution<Eigen::Index> u(i + 1, n - 1);
    while (static_cast<Eigen::Index>(cols.size()) < want) cols.insert(u(rng));
    for (Eigen::Index j : cols) s.add(i, j, 0.0);
  }
  return s;
}

/// Sum over B_e of |v_i^T v_j - q_ij|.
inline double constraint_violation(const Matrix& v, const FixedEntrySet& fes) {
  double nu = 0.0;
  for (const auto& e : fes.entries()) nu += std::abs(v.col(e.i).dot(v.col(e.j)) - e.q);
  return nu;
}

/// theta(V; H, C) + mu/2 theta(V; H_e, C_e + Lambda/mu) where H_e is the 0/1
/// mask of B_e (both triangles) and lambda holds one multiplier per pair.
inline GradientPair auglag_objective(const Matrix& v, const LowRankCorrProblem& base,
                                     const FixedEntrySet& fes, const std::vector<double>& lambda,
                                     double mu) {
  if (!(mu > 0.0)) throw DomainError("auglag_objective: mu must be positive");
  if (lambda.size() != fes.size()) throw ShapeError("auglag_objective: lambda size mismatch");
  GradientPair out = lowrank_corr_eval(base, v);
  const auto& es = fes.entries();
  for (std::size_t k = 0; k < es.size(); ++k) {
    const auto& e = es[k];
    const double r = v.col(e.i).dot(v.col(e.j)) - e.q - lambda[k] / mu;
    // both (i, j) and (j, i) appear in the Hadamard norm
    out.value += 0.5 * mu * r * r;
    out.euclid_grad.col(e.i) += mu * r * v.col(e.j);
    out.euclid_grad.col(e.j) += mu * r * v.col(e.i);
  }
  return out;
}

struct AugLagConfig {
  double mu0 = 1.0;
  double mu_factor = 10.0;
  int max_outer = 30;
  long sub_max_iter = 2000;
  double eps0 = 1e-1, eps_x0 = 1e-3, eps_f0 = 1e-5;
  double eps_min = 1e-5, eps_x_min = 1e-5, eps_f_min = 1e-8;
  double nu_tol = 3e-8;
  double dnu_tol = 1e-8;
  SolverConfig solver;  // scheme and line-search settings for the subproblems
};

struct AugLagResult {
  Matrix v;
  double theta = 0.0;
  double residual = 0.0;  // ||H o (V^T V - C)||_F
  double nu = 0.0;
  int outer_iters = 0;
  long total_nfge = 0;
  long total_iters = 0;
  bool converged = false;
  bool hit_outer_cap = false;
  bool linesearch_failed = false;
  std::vector<double> nu_trace;   // nu after each outer step
  std::vector<double> mu_trace;   // mu used in each outer step
  std::vector<double> lambda;
  double wall_ms = 0.0;
};

inline AugLagResult auglag_solve(const LowRankCorrProblem& base, const FixedEntrySet& fes,
                                 const Matrix& v0, const AugLagConfig& cfg = {}) {
  base.validate();
  fes.check_dim(base.n());
  if (!(cfg.mu0 > 0.0) || !(cfg.mu_factor > 1.0)) {
    throw DomainError("auglag_solve: need mu0 > 0 and mu_factor > 1");
  }
  const auto t0 = std::chrono::steady_clock::now();
  AugLagResult res;
  res.lambda.assign(fes.size(), 0.0);
  Matrix v = v0;
  auto finish = [&](AugLagResult& r) {
    r.v = v;
    r.theta = lowrank_corr_eval(base, v).value;
    r.residual = std::sqrt(2.0 * r.theta);
    r.nu = constraint_violation(v, fes);
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
  };

  if (fes.empty()) {
    const SolverReport rep = solve(make_problem(base), v, cfg.solver);
    v = rep.x_final;
    res.total_nfge = rep.nfge;
    res.total_iters = rep.iters;
    res.linesearch_failed = rep.stop_reason == StopReason::LineSearchFail;
    res.converged = true;
    finish(res);
    return res;
  }

  double mu = cfg.mu0;
  double eps = cfg.eps0, eps_x = cfg.eps_x0, eps_f = cfg.eps_f0;
  double nu_prev = constraint_violation(v, fes);
  for (int k = 0; k < cfg.max_outer; ++k) {
    Problem sub;
    sub.name = "auglag_sub";
    sub.rows = base.r;
    sub.cols = base.n();
    sub.geometry = Geometry::Oblique;
    const std::vector<double> lam = res.lambda;
    sub.eval = [&base, &fes, lam, mu](const Matrix& x) {
      return auglag_objective(x, base, fes, lam, mu);
    };
    SolverConfig sc = cfg.solver;
    sc.eps = eps;
    sc.eps_x = eps_x;
    sc.eps_f = eps_f;
    sc.max_iter = cfg.sub_max_iter;
    const SolverReport rep = solve(sub, v, sc);
    v = rep.x_final;
    res.total_nfge += rep.nfge;
    res.total_iters += rep.iters;
    if (rep.stop_reason == StopReason::LineSearchFail) res.linesearch_failed = true;

    const auto& es = fes.entries();
    for (std::size_t t = 0; t < es.size(); ++t) {
      res.lambda[t] -= mu * (v.col(es[t].i).dot(v.col(es[t].j)) - es[t].q);
    }
    const double nu = constraint_violation(v, fes);
    res.nu_trace.push_back(nu);
    res.mu_trace.push_back(mu);
    res.outer_iters = k + 1;
    if (nu <= cfg.nu_tol || std::abs(nu - nu_prev) <= cfg.dnu_tol) {
      res.converged = true;
      break;
    }
    nu_prev = nu;
    mu *= cfg.mu_factor;
    eps = std::max(0.1 * eps, cfg.eps_min);
    eps_x = std::max(0.1 * eps_x, cfg.eps_x_min);
    eps_f = std::max(0.1 * eps_f, cfg.eps_f_min);
  }
  res.hit_outer_cap = !res.converged;
  finish(res);
  return res;
}

}  // namespace feasopt
