// SPDX-License-Identifier: Apache-2.0
//
// Stiefel manifold primitives: feasibility, tangent projection, the canonical
// gradient and the parametric descent direction D_rho.

#pragma once

#include <algorithm>
#include <string>
#include <utility>

#include "feasopt/core.hpp"

namespace feasopt {

inline constexpr double kDefaultFeasTol = 1e-12;
inline constexpr double kTangentTol = 1e-10;

/// ||X^T X - I_p||_F.
inline double feasibility_error(const Matrix& x) {
  const Eigen::Index p = x.cols();
  return (x.transpose() * x - Matrix::Identity(p, p)).norm();
}

/// An n x p matrix with orthonormal columns, checked on construction.
class StiefelPoint {
 public:
  explicit StiefelPoint(Matrix x, double feas_tol = kDefaultFeasTol)
      : x_(std::move(x)) {
    require_nonempty(x_, "StiefelPoint");
    if (x_.rows() < x_.cols()) {
      throw ShapeError("StiefelPoint: need n >= p, got " + shape_str(x_));
    }
    if (!x_.allFinite()) throw DomainError("StiefelPoint: non-finite entries");
    const double err = feasibility_error(x_);
    if (!(err <= feas_tol)) {
      throw DomainError("StiefelPoint: ||X^T X - I|| = " + std::to_string(err) +
                        " exceeds " + std::to_string(feas_tol));
    }
  }

  const Matrix& mat() const { return x_; }
  Eigen::Index n() const { return x_.rows(); }
  Eigen::Index p() const { return x_.cols(); }

 private:
  Matrix x_;
};

/// An n x p matrix E with X^T E skew-symmetric for its base point X.
class TangentDirection {
 public:
  /// Checked construction: ||X^T E + E^T X||_F <= 1e-10 * max(1, ||E||_F).
  TangentDirection(const StiefelPoint& base, Matrix e) : e_(std::move(e)) {
    require_same_shape(base.mat(), e_, "TangentDirection");
    const Matrix xe = base.mat().transpose() * e_;
    const double defect = (xe + xe.transpose()).norm();
    if (!(defect <= kTangentTol * std::max(1.0, e_.norm()))) {
      throw DomainError("TangentDirection: X^T E is not skew-symmetric (defect " +
                        std::to_string(defect) + ")");
    }
  }

  /// Construction without the skew check, for directions tangent by formula.
  static TangentDirection trusted(Matrix e) { return TangentDirection(std::move(e)); }

  const Matrix& mat() const { return e_; }
  double norm() const { return e_.norm(); }

 private:
  explicit TangentDirection(Matrix e) : e_(std::move(e)) {}
  Matrix e_;
};

/// Objective value and Euclidean gradient G = DF(X).
struct GradientPair {
  double value = 0.0;
  Matrix euclid_grad;
};

/// D_rho = G - X (2 rho G^T X + (1 - 2 rho) X^T G), on raw matrices.
inline Matrix d_rho(const Matrix& x, const Matrix& g, double rho) {
  require_same_shape(x, g, "d_rho");
  if (!(rho > 0.0)) throw DomainError("d_rho: rho must be positive");
  const Matrix xtg = x.transpose() * g;
  return g - x * (2.0 * rho * xtg.transpose() + (1.0 - 2.0 * rho) * xtg);
}

/// Canonical (Riemannian) gradient G - X G^T X.
inline TangentDirection canonical_gradient(const StiefelPoint& x,
                                           const Matrix& g) {
  require_same_shape(x.mat(), g, "canonical_gradient");
  return TangentDirection::trusted(g - x.mat() * (g.transpose() * x.mat()));
}

/// Projection Z - X sym(X^T Z) onto the tangent space at X.
inline TangentDirection tangent_projection(const StiefelPoint& x,
                                           const Matrix& z) {
  require_same_shape(x.mat(), z, "tangent_projection");
  return TangentDirection::trusted(z - x.mat() * sym(x.mat().transpose() * z));
}

inline TangentDirection compute_d_rho(const StiefelPoint& x, const Matrix& g,
                                      double rho) {
  return TangentDirection::trusted(d_rho(x.mat(), g, rho));
}

/// ||D_rho||_F, the stationarity measure used for termination.
inline double optimality_residual(const StiefelPoint& x, const Matrix& g,
                                  double rho) {
  return d_rho(x.mat(), g, rho).norm();
}

}  // namespace feasopt
