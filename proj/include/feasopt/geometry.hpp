// SPDX-License-Identifier: Apache-2.0
//
// Adapters that give the solver one interface over St(n,p), the oblique
// manifold (unit columns) and the generalized constraint X^T H X = K.

#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <utility>

#include "feasopt/core.hpp"
#include "feasopt/dense.hpp"
#include "feasopt/generalized.hpp"
#include "feasopt/manifold.hpp"
#include "feasopt/retraction.hpp"

namespace feasopt {

class Manifold {
 public:
  virtual ~Manifold() = default;
  /// The stationarity direction; its norm drives termination and its
  /// differences feed the BB pair.
  virtual Matrix direction(const Matrix& x, const Matrix& g) const = 0;
  /// Search curve at X. Its velocity may differ from direction().
  virtual std::shared_ptr<const Curve> curve(const Matrix& x, const Matrix& g,
                                             const Matrix& d) const = 0;
  virtual double feasibility(const Matrix& x) const = 0;
  /// Pull X back onto the constraint set.
  virtual Matrix restore(const Matrix& x) const = 0;
};

class StiefelManifold final : public Manifold {
 public:
  StiefelManifold(RetractionScheme scheme, double rho) : scheme_(scheme), rho_(rho) {
    if (!(rho > 0.0)) throw DomainError("StiefelManifold: rho must be positive");
    if (scheme.kind == SchemeKind::GeneralizedNew) {
      throw DomainError("StiefelManifold: use GeneralizedManifold for the generalized scheme");
    }
  }

  Matrix direction(const Matrix& x, const Matrix& g) const override {
    return d_rho(x, g, rho_);
  }

  std::shared_ptr<const Curve> curve(const Matrix& x, const Matrix& g,
                                     const Matrix& d) const override {
    switch (scheme_.kind) {
      case SchemeKind::NewScheme:
        return scheme_.feasibility_control ? std::shared_ptr<const Curve>(make_controlled_curve(
                                                 x, g, rho_, scheme_.gtau))
                                           : make_uncontrolled_curve(x, g, rho_, scheme_.gtau);
      case SchemeKind::Polar:
        return std::make_shared<PolarCurve>(x, d);
      case SchemeKind::QrScheme:
        return std::make_shared<QrCurve>(x, d);
      case SchemeKind::GradProjection:
        return std::make_shared<GradProjectionCurve>(x, g);
      case SchemeKind::WenYin:
        return std::make_shared<WenYinCurve>(x, d);
      case SchemeKind::Geodesic:
        return std::make_shared<GeodesicCurve>(x, d);
      case SchemeKind::LowRankColumn:
        return make_lowrank_curve(x, g);
      case SchemeKind::GeneralizedNew:
        break;
    }
    throw DomainError("StiefelManifold: unsupported scheme");
  }

  double feasibility(const Matrix& x) const override { return feasibility_error(x); }
  Matrix restore(const Matrix& x) const override { return qr_positive(x).q; }

 private:
  RetractionScheme scheme_;
  double rho_;
};

/// Column-wise curves on a product of unit spheres. With p = 1 per column,
/// D_rho = g - x (x^T g) for every rho and the skew term of J is zero, so
/// g(tau) plays no role.
class ObliqueCurve final : public Curve {
 public:
  ObliqueCurve(Matrix x, Matrix g, SchemeKind kind, bool controlled)
      : Curve(x, Matrix()), g_(std::move(g)), kind_(kind) {
    require_same_shape(x_, g_, "ObliqueCurve");
    const Vector xg = x_.cwiseProduct(g_).colwise().sum().transpose();
    e_ = g_ - x_ * xg.asDiagonal();
    if (kind_ == SchemeKind::NewScheme || kind_ == SchemeKind::WenYin) {
      Vector denom = Vector::Ones(x_.cols());
      if (controlled) denom = x_.colwise().squaredNorm().transpose();
      w_ = -(g_ - x_ * xg.cwiseQuotient(denom).asDiagonal());
      ww_ = w_.colwise().squaredNorm().transpose();
    } else if (kind_ == SchemeKind::Geodesic) {
      dnorm_ = e_.colwise().norm().transpose();
    }
  }

  Matrix at(double tau) const override {
    switch (kind_) {
      case SchemeKind::NewScheme:
      case SchemeKind::WenYin: {
        const Vector jv = jvec(tau);
        return (2.0 * x_ + tau * w_) * jv.cwiseInverse().asDiagonal() - x_;
      }
      case SchemeKind::Polar:
      case SchemeKind::QrScheme:
        return normalize(x_ - tau * e_);
      case SchemeKind::GradProjection:
        return normalize(x_ - tau * g_);
      case SchemeKind::Geodesic: {
        Matrix y = x_;
        for (Eigen::Index i = 0; i < x_.cols(); ++i) {
          const double t = dnorm_(i);
          if (t > 0.0) {
            y.col(i) = std::cos(tau * t) * x_.col(i) - std::sin(tau * t) / t * e_.col(i);
          }
        }
        return y;
      }
      default:
        break;
    }
    throw DomainError("oblique manifold: scheme not available");
  }

  std::optional<double> step_norm_sq(double tau) const override {
    if (kind_ != SchemeKind::NewScheme && kind_ != SchemeKind::WenYin) return std::nullopt;
    const Vector jv = jvec(tau);
    return 4.0 * ((jv - Vector::Ones(jv.size())).cwiseQuotient(jv)).sum();
  }

 private:
  Vector jvec(double tau) const {
    Vector jv = Vector::Ones(ww_.size()) + 0.25 * tau * tau * ww_;
    if (!(jv.minCoeff() > 0.0)) throw NumericalError("oblique curve: J(tau) not positive");
    return jv;
  }

  static Matrix normalize(const Matrix& a) {
    const Vector nrm = a.colwise().norm().transpose();
    if (!(nrm.minCoeff() > 0.0)) throw NumericalError("oblique curve: zero column");
    return a * nrm.cwiseInverse().asDiagonal();
  }

  Matrix g_;
  SchemeKind kind_;
  Matrix w_;
  Vector ww_;
  Vector dnorm_;
};

class ObliqueManifold final : public Manifold {
 public:
  explicit ObliqueManifold(RetractionScheme scheme) : scheme_(scheme) {
    if (scheme.kind == SchemeKind::LowRankColumn || scheme.kind == SchemeKind::GeneralizedNew) {
      throw DomainError("oblique manifold: scheme '" + std::string(to_string(scheme.kind)) +
                        "' is not available");
    }
  }

  Matrix direction(const Matrix& x, const Matrix& g) const override {
    require_same_shape(x, g, "ObliqueManifold::direction");
    const Vector xg = x.cwiseProduct(g).colwise().sum().transpose();
    return g - x * xg.asDiagonal();
  }

  std::shared_ptr<const Curve> curve(const Matrix& x, const Matrix& g,
                                     const Matrix& /*d*/) const override {
    return std::make_shared<ObliqueCurve>(x, g, scheme_.kind, scheme_.feasibility_control);
  }

  /// || diag(X^T X) - e ||_2.
  double feasibility(const Matrix& x) const override {
    return (x.colwise().squaredNorm().array() - 1.0).matrix().norm();
  }

  Matrix restore(const Matrix& x) const override {
    return x * x.colwise().norm().cwiseInverse().asDiagonal();
  }

 private:
  RetractionScheme scheme_;
};

class GeneralizedManifold final : public Manifold {
 public:
  GeneralizedManifold(GeneralizedConstraint gc, GTau gtau) : gc_(std::move(gc)), gtau_(gtau) {}

  Matrix direction(const Matrix& x, const Matrix& g) const override {
    return generalized_direction(x, g, gc_);
  }

  std::shared_ptr<const Curve> curve(const Matrix& x, const Matrix& /*g*/,
                                     const Matrix& d) const override {
    return std::make_shared<GeneralizedCurve>(x, d, gc_, gtau_);
  }

  double feasibility(const Matrix& x) const override { return gc_.violation(x); }
  Matrix restore(const Matrix& x) const override { return gc_.restore(x); }

  const GeneralizedConstraint& constraint() const { return gc_; }

 private:
  GeneralizedConstraint gc_;
  GTau gtau_;
};

}  // namespace feasopt
