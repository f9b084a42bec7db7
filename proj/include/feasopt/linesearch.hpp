// SPDX-License-Identifier: Apache-2.0
//
// Nonmonotone Armijo backtracking along a feasible curve.

#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>

#include "feasopt/core.hpp"
#include "feasopt/manifold.hpp"
#include "feasopt/retraction.hpp"
#include "feasopt/stepsize.hpp"

namespace feasopt {

using Evaluator = std::function<GradientPair(const Matrix&)>;

struct LineSearchResult {
  bool accepted = false;
  double tau = 0.0;
  Matrix y;
  GradientPair fg;
  int backtracks = 0;    // i_k
  int evaluations = 0;   // objective+gradient calls made
};

/// First tau = sigma^i tau1 with F(Y(tau)) <= F_r + delta tau slope.
/// A trial whose curve point or objective is not finite counts as rejected.
/// Gives up after max_backtracks reductions.
inline LineSearchResult armijo_backtrack(const Evaluator& eval,
                                         const std::shared_ptr<const Curve>& curve,
                                         double tau1, double f_ref, double slope,
                                         const SafeguardParams& params,
                                         int max_backtracks = 60) {
  if (!(slope < 0.0)) throw DomainError("armijo_backtrack: slope must be negative");
  if (!(tau1 > 0.0) || !std::isfinite(tau1)) {
    throw DomainError("armijo_backtrack: tau1 must be positive and finite");
  }
  LineSearchResult out;
  double tau = tau1;
  for (int i = 0; i <= max_backtracks; ++i, tau *= params.sigma) {
    Matrix y;
    try {
      y = curve->at(tau);
    } catch (const NumericalError&) {
      continue;
    }
    if (!y.allFinite()) continue;
    GradientPair fg = eval(y);
    ++out.evaluations;
    if (!std::isfinite(fg.value)) continue;
    if (fg.value <= f_ref + params.delta_armijo * tau * slope) {
      out.accepted = true;
      out.tau = tau;
      out.y = std::move(y);
      out.fg = std::move(fg);
      out.backtracks = i;
      return out;
    }
  }
  out.backtracks = max_backtracks;
  return out;
}

}  // namespace feasopt
