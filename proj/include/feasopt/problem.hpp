// SPDX-License-Identifier: Apache-2.0
//
// The objective interface consumed by the solver.

#pragma once

#include <functional>
#include <optional>
#include <string>

#include "feasopt/core.hpp"
#include "feasopt/manifold.hpp"

namespace feasopt {

/// Where the iterate lives. Oblique means every column is a unit vector
/// (a product of n spheres St(r,1)).
enum class Geometry { Stiefel, Oblique };

struct Problem {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Geometry geometry = Geometry::Stiefel;
  std::function<GradientPair(const Matrix&)> eval;
  std::optional<double> known_optimum;
  /// X^T G is symmetric for every feasible X.
  bool symmetric_xg = false;

  GradientPair operator()(const Matrix& x) const {
    if (x.rows() != rows || x.cols() != cols) {
      throw ShapeError(name + ": expected " + std::to_string(rows) + "x" +
                       std::to_string(cols) + ", got " + shape_str(x));
    }
    return eval(x);
  }
};

/// Central-difference check |(F(X+hV)-F(X-hV))/2h - <G,V>| / (1 + |F|).
inline double gradient_check_error(const Problem& prob, const Matrix& x, const Matrix& v,
                                   double h = 1e-6) {
  const GradientPair fg = prob(x);
  const double fp = prob(x + h * v).value;
  const double fm = prob(x - h * v).value;
  const double fd = (fp - fm) / (2.0 * h);
  return std::abs(fd - inner(fg.euclid_grad, v)) / (1.0 + std::abs(fg.value));
}

}  // namespace feasopt
