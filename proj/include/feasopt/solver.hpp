// SPDX-License-Identifier: Apache-2.0
//
// The adaptive feasible BB-like method: ABB stepsizes with a safeguard,
// nonmonotone Armijo backtracking against an adaptive reference value, and
// the four termination tests.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "feasopt/core.hpp"
#include "feasopt/geometry.hpp"
#include "feasopt/linesearch.hpp"
#include "feasopt/manifold.hpp"
#include "feasopt/problem.hpp"
#include "feasopt/retraction.hpp"
#include "feasopt/stepsize.hpp"

namespace feasopt {

enum class StopReason { None, ResidualRel, XtolFtol, WindowedMeans, MaxIter, LineSearchFail };

inline std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::None: return "none";
    case StopReason::ResidualRel: return "residual";
    case StopReason::XtolFtol: return "xtol_ftol";
    case StopReason::WindowedMeans: return "windowed_means";
    case StopReason::MaxIter: return "max_iter";
    case StopReason::LineSearchFail: return "linesearch_fail";
  }
  return "none";
}

inline StopReason parse_stop_reason(std::string_view s) {
  for (StopReason r : {StopReason::None, StopReason::ResidualRel, StopReason::XtolFtol,
                       StopReason::WindowedMeans, StopReason::MaxIter,
                       StopReason::LineSearchFail}) {
    if (s == to_string(r)) return r;
  }
  throw DomainError("unknown stop reason '" + std::string(s) + "'");
}

enum class ResidualMode { Relative, Absolute };

struct SolverConfig {
  double rho = 0.25;
  RetractionScheme scheme;
  double eps = 1e-5;
  double eps_x = 1e-5;
  double eps_f = 1e-8;
  int window_t = 5;
  long max_iter = 3000;
  SafeguardParams safeguard;
  int ref_cap = 3;
  std::uint64_t seed = 0;
  double reorth_threshold = 1e-14;
  ResidualMode residual_mode = ResidualMode::Relative;
  /// ||D|| <= stationary_tol * max(1, ||G||) counts as exactly stationary.
  double stationary_tol = 1e-13;
  int max_backtracks = 60;
  /// Overrides the first trial step 0.5 / ||D_0||.
  std::optional<double> tau_init;

  void validate() const {
    if (!(rho > 0.0)) throw DomainError("SolverConfig: rho must be positive");
    if (!(eps > 0.0 && eps_x > 0.0 && eps_f > 0.0)) {
      throw DomainError("SolverConfig: tolerances must be positive");
    }
    if (window_t < 1) throw DomainError("SolverConfig: window_t must be >= 1");
    if (max_iter < 0) throw DomainError("SolverConfig: max_iter must be >= 0");
    if (ref_cap < 1) throw DomainError("SolverConfig: ref_cap must be >= 1");
    if (max_backtracks < 0) throw DomainError("SolverConfig: max_backtracks must be >= 0");
    safeguard.validate();
  }
};

/// Everything the loop needs; plain value type so it can be copied and
/// replayed.
struct SolverState {
  Matrix x;
  GradientPair fg;
  Matrix d;
  double d_norm = 0.0;
  double d0_norm = 0.0;
  long k = 0;
  double tau1_prev = 0.0;
  double tau_last = 0.0;
  int last_backtracks = 0;
  ReferenceState ref;
  std::optional<BBState> bb;
  std::deque<double> tolx_window;
  std::deque<double> tolf_window;
  std::vector<double> f_history;
  long nfge = 0;
  double max_feasibility = 0.0;
  bool stopped = false;
  StopReason reason = StopReason::None;
};

struct SolverReport {
  Matrix x_final;
  double f_initial = 0.0;
  double f_final = 0.0;
  std::vector<double> f_history;
  double residual_initial = 0.0;
  double residual_final = 0.0;
  double feasi = 0.0;
  double max_feasi = 0.0;
  long nfge = 0;
  long iters = 0;
  StopReason stop_reason = StopReason::None;
  double wall_ms = 0.0;
};

class AfbbSolver {
 public:
  AfbbSolver(Evaluator eval, std::shared_ptr<const Manifold> manifold, SolverConfig cfg)
      : eval_(std::move(eval)), manifold_(std::move(manifold)), cfg_(std::move(cfg)) {
    cfg_.validate();
    if (!manifold_) throw DomainError("AfbbSolver: null manifold");
  }

  const SolverConfig& config() const { return cfg_; }
  const Manifold& manifold() const { return *manifold_; }

  SolverState init(const Matrix& x0) const {
    require_nonempty(x0, "AfbbSolver::init");
    SolverState s;
    s.x = x0;
    s.fg = eval_(x0);
    s.nfge = 1;
    if (!std::isfinite(s.fg.value) || !s.fg.euclid_grad.allFinite()) {
      throw NumericalError("AfbbSolver: objective is not finite at the initial point");
    }
    require_same_shape(x0, s.fg.euclid_grad, "AfbbSolver gradient");
    s.d = manifold_->direction(s.x, s.fg.euclid_grad);
    s.d_norm = s.d.norm();
    s.d0_norm = s.d_norm;
    s.ref = ReferenceState::start(s.fg.value, cfg_.ref_cap);
    s.f_history.push_back(s.fg.value);
    s.max_feasibility = manifold_->feasibility(s.x);
    if (residual_small(s)) {
      stop(s, StopReason::ResidualRel);
    } else if (cfg_.max_iter == 0) {
      stop(s, StopReason::MaxIter);
    }
    return s;
  }

  /// One pass of steps 1-5. A stopped state is returned unchanged.
  SolverState iterate_once(SolverState s) const {
    if (s.stopped) return s;
    double tau0;
    if (s.k == 0) {
      tau0 = cfg_.tau_init ? *cfg_.tau_init : 0.5 / s.d_norm;
    } else {
      std::optional<double> t = s.bb ? abb(*s.bb) : std::nullopt;
      tau0 = t ? *t : s.tau1_prev;
    }
    const double tau1 = safeguard(tau0, s.d_norm, cfg_.safeguard);
    s.tau1_prev = tau1;

    std::shared_ptr<const Curve> curve = manifold_->curve(s.x, s.fg.euclid_grad, s.d);
    const double slope = -inner(s.fg.euclid_grad, curve->velocity());
    if (!(slope < 0.0)) {
      stop(s, StopReason::LineSearchFail);
      return s;
    }
    LineSearchResult ls = armijo_backtrack(eval_, curve, tau1, s.ref.f_r, slope,
                                           cfg_.safeguard, cfg_.max_backtracks);
    s.nfge += ls.evaluations;
    s.last_backtracks = ls.backtracks;
    if (!ls.accepted) {
      stop(s, StopReason::LineSearchFail);
      return s;
    }

    Matrix d_new = manifold_->direction(ls.y, ls.fg.euclid_grad);
    BBState bb;
    bb.s_prev = ls.y - s.x;
    bb.y_prev = d_new - s.d;
    bb.k = s.k + 1;
    bb.ss_shortcut = curve->step_norm_sq(ls.tau);
    const double tol_x = bb.s_prev.norm() / std::sqrt(static_cast<double>(s.x.rows()));
    const double f_prev = s.fg.value;
    const double tol_f = std::abs(f_prev - ls.fg.value) / (std::abs(f_prev) + 1.0);

    s.ref = update_reference(s.ref, ls.fg.value);
    s.x = std::move(ls.y);
    s.fg = std::move(ls.fg);
    s.d = std::move(d_new);
    s.d_norm = s.d.norm();
    s.bb = std::move(bb);
    s.tau_last = ls.tau;
    s.k += 1;
    s.f_history.push_back(s.fg.value);
    s.max_feasibility = std::max(s.max_feasibility, manifold_->feasibility(s.x));

    push_window(s.tolx_window, tol_x);
    push_window(s.tolf_window, tol_f);

    if (residual_small(s)) {
      stop(s, StopReason::ResidualRel);
    } else if (tol_x <= cfg_.eps_x && tol_f <= cfg_.eps_f) {
      stop(s, StopReason::XtolFtol);
    } else if (static_cast<int>(s.tolx_window.size()) == cfg_.window_t &&
               mean(s.tolx_window) <= 10.0 * cfg_.eps_x &&
               mean(s.tolf_window) <= 10.0 * cfg_.eps_f) {
      stop(s, StopReason::WindowedMeans);
    } else if (s.k >= cfg_.max_iter) {
      stop(s, StopReason::MaxIter);
    }
    return s;
  }

  /// Final restoration and report assembly.
  SolverReport finish(const SolverState& s) const {
    SolverReport r;
    r.x_final = s.x;
    r.feasi = manifold_->feasibility(r.x_final);
    if (r.feasi >= cfg_.reorth_threshold) {
      r.x_final = manifold_->restore(r.x_final);
      r.feasi = manifold_->feasibility(r.x_final);
    }
    r.f_initial = s.f_history.front();
    r.f_final = s.fg.value;
    r.f_history = s.f_history;
    r.residual_initial = s.d0_norm;
    r.residual_final = s.d_norm;
    r.max_feasi = s.max_feasibility;
    r.nfge = s.nfge;
    r.iters = s.k;
    r.stop_reason = s.reason;
    return r;
  }

  SolverReport solve(const Matrix& x0) const {
    const auto t0 = std::chrono::steady_clock::now();
    SolverState s = init(x0);
    while (!s.stopped) s = iterate_once(std::move(s));
    SolverReport r = finish(s);
    r.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return r;
  }

 private:
  bool residual_small(const SolverState& s) const {
    if (s.d_norm <= cfg_.stationary_tol * std::max(1.0, s.fg.euclid_grad.norm())) return true;
    const double target = cfg_.residual_mode == ResidualMode::Relative ? cfg_.eps * s.d0_norm
                                                                       : cfg_.eps;
    return s.d_norm <= target;
  }

  void push_window(std::deque<double>& w, double v) const {
    w.push_back(v);
    while (static_cast<int>(w.size()) > cfg_.window_t) w.pop_front();
  }

  static double mean(const std::deque<double>& w) {
    return std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
  }

  static void stop(SolverState& s, StopReason r) {
    s.stopped = true;
    s.reason = r;
  }

  Evaluator eval_;
  std::shared_ptr<const Manifold> manifold_;
  SolverConfig cfg_;
};

inline std::shared_ptr<const Manifold> make_manifold(const Problem& prob,
                                                     const SolverConfig& cfg) {
  if (prob.geometry == Geometry::Oblique) return std::make_shared<ObliqueManifold>(cfg.scheme);
  return std::make_shared<StiefelManifold>(cfg.scheme, cfg.rho);
}

/// AFBB on a Stiefel problem from a checked feasible start.
inline SolverReport solve(const Problem& prob, const StiefelPoint& x0, const SolverConfig& cfg) {
  if (prob.geometry != Geometry::Stiefel) {
    throw DomainError("solve: problem '" + prob.name + "' is not posed on St(n,p)");
  }
  AfbbSolver solver([&prob](const Matrix& x) { return prob(x); }, make_manifold(prob, cfg), cfg);
  return solver.solve(x0.mat());
}

/// AFBB on any problem; the start is checked against the problem's own
/// constraint with tolerance feas_tol.
inline SolverReport solve(const Problem& prob, const Matrix& x0, const SolverConfig& cfg,
                          double feas_tol = 1e-10) {
  auto m = make_manifold(prob, cfg);
  if (x0.rows() != prob.rows || x0.cols() != prob.cols) {
    throw ShapeError("solve: start is " + shape_str(x0) + " for problem '" + prob.name + "'");
  }
  const double feas = m->feasibility(x0);
  if (!(feas <= feas_tol)) {
    throw DomainError("solve: infeasible start (" + std::to_string(feas) + ")");
  }
  AfbbSolver solver([&prob](const Matrix& x) { return prob(x); }, std::move(m), cfg);
  return solver.solve(x0);
}

inline SolverReport solve_generalized(const Problem& prob, const Matrix& x0,
                                      const GeneralizedConstraint& gc, const SolverConfig& cfg) {
  gc.check_shape(x0);
  const double v = gc.violation(x0);
  if (!(v <= 1e-10)) {
    throw DomainError("solve_generalized: X0^T H X0 - K has norm " + std::to_string(v));
  }
  auto m = std::make_shared<GeneralizedManifold>(gc, cfg.scheme.gtau);
  AfbbSolver solver([&prob](const Matrix& x) { return prob(x); }, std::move(m), cfg);
  return solver.solve(x0);
}

}  // namespace feasopt
