// SPDX-License-Identifier: Apache-2.0
//
// The constraint X^T H X = K with H symmetric positive semidefinite and K
// symmetric positive definite, over the reals.

#pragma once

#include <memory>
#include <string>
#include <utility>

#include "feasopt/core.hpp"
#include "feasopt/dense.hpp"
#include "feasopt/retraction.hpp"

namespace feasopt {

class GeneralizedConstraint {
 public:
  GeneralizedConstraint(Matrix h, Matrix k) : h_(std::move(h)), k_(std::move(k)) {
    require_square(h_, "GeneralizedConstraint H");
    require_square(k_, "GeneralizedConstraint K");
    if (!h_.allFinite() || !k_.allFinite()) {
      throw DomainError("GeneralizedConstraint: non-finite entries");
    }
    if (!((h_ - h_.transpose()).norm() <= 1e-12 * h_.norm())) {
      throw DomainError("GeneralizedConstraint: H is not symmetric");
    }
    if (!((k_ - k_.transpose()).norm() <= 1e-12 * k_.norm())) {
      throw DomainError("GeneralizedConstraint: K is not symmetric");
    }
    llt_.compute(k_);
    if (llt_.info() != Eigen::Success) {
      throw DomainError("GeneralizedConstraint: K is not positive definite");
    }
  }

  const Matrix& h() const { return h_; }
  const Matrix& k() const { return k_; }
  const Eigen::LLT<Matrix>& k_llt() const { return llt_; }
  Eigen::Index n() const { return h_.rows(); }
  Eigen::Index p() const { return k_.rows(); }

  /// ||X^T H X - K||_F.
  double violation(const Matrix& x) const {
    check_shape(x);
    return (x.transpose() * (h_ * x) - k_).norm();
  }

  void check_shape(const Matrix& x) const {
    if (x.rows() != n() || x.cols() != p()) {
      throw ShapeError("GeneralizedConstraint: X is " + shape_str(x) + ", expected " +
                       std::to_string(n()) + "x" + std::to_string(p()));
    }
  }

  /// X (X^T H X)^{-1/2} K^{1/2}, which satisfies the constraint exactly in
  /// exact arithmetic.
  Matrix restore(const Matrix& x) const {
    check_shape(x);
    return x * inv_sqrt_spd(x.transpose() * (h_ * x)) * sqrt_spd(k_);
  }

 private:
  Matrix h_;
  Matrix k_;
  Eigen::LLT<Matrix> llt_;
};

/// D = G X^T H^2 X - H X G^T H X.
inline Matrix generalized_direction(const Matrix& x, const Matrix& g,
                                    const GeneralizedConstraint& gc) {
  gc.check_shape(x);
  require_same_shape(x, g, "generalized_direction");
  const Matrix hx = gc.h() * x;
  return g * (hx.transpose() * hx) - hx * (g.transpose() * hx);
}

/// W = -(I - X K^{-1} X^T H) D, J = K + tau^2/4 W^T H W + g(tau) X^T H D,
/// Y = (2X + tau W) J^{-1} K - X. X^T H D enters through its skew part.
class GeneralizedCurve final : public Curve {
 public:
  GeneralizedCurve(const Matrix& x, const Matrix& d, const GeneralizedConstraint& gc, GTau gtau)
      : Curve(x, d), k_(gc.k()), gtau_(gtau) {
    const Matrix hx = gc.h() * x_;
    const Matrix xthd = hx.transpose() * e_;
    w_ = -(e_ - x_ * gc.k_llt().solve(xthd));
    whw_ = w_.transpose() * (gc.h() * w_);
    xthd_ = skew(xthd);
  }

  Matrix j(double tau) const {
    return k_ + 0.25 * tau * tau * whw_ + gtau_value(gtau_, tau) * xthd_;
  }

  Matrix at(double tau) const override {
    Eigen::PartialPivLU<Matrix> lu(j(tau));
    detail::check_lu(lu, "generalized J(tau)");
    const Matrix t = lu.solve(k_);
    return (2.0 * x_ + tau * w_) * t - x_;
  }

 private:
  Matrix k_;
  Matrix w_;
  Matrix whw_;
  Matrix xthd_;
  GTau gtau_;
};

inline std::shared_ptr<const GeneralizedCurve> make_generalized_curve(
    const Matrix& x, const Matrix& g, const GeneralizedConstraint& gc, GTau gtau) {
  return std::make_shared<GeneralizedCurve>(x, generalized_direction(x, g, gc), gc, gtau);
}

inline CurveEvaluation retract_generalized(const Matrix& x, const Matrix& g,
                                           const GeneralizedConstraint& gc, double tau,
                                           GTau gtau = GTau::Linear) {
  return evaluate(make_generalized_curve(x, g, gc, gtau), tau);
}

}  // namespace feasopt
