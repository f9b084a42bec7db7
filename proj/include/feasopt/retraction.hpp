// SPDX-License-Identifier: Apache-2.0
//
// Constraint-preserving curves Y(tau; X) on St(n,p).
//
// Every scheme is represented by a Curve object that caches whatever does not
// depend on tau, so a backtracking line search only pays for the p x p (or
// 2p x 2p) work when it shrinks the step. Y(0) = X and Y'(0) = -E where E is
// the curve's velocity().

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "feasopt/core.hpp"
#include "feasopt/dense.hpp"
#include "feasopt/manifold.hpp"

namespace feasopt {

enum class SchemeKind {
  NewScheme,
  Polar,
  QrScheme,
  GradProjection,
  WenYin,
  Geodesic,
  LowRankColumn,
  GeneralizedNew,
};

/// g(tau) in the skew term of J: g1 = tau/2, g2 = tau e^{-tau} / 2.
enum class GTau { Linear, ExpDamped };

struct RetractionScheme {
  SchemeKind kind = SchemeKind::NewScheme;
  GTau gtau = GTau::Linear;
  bool feasibility_control = true;

  /// Whether gtau enters the curve at all.
  bool uses_gtau() const {
    return kind == SchemeKind::NewScheme || kind == SchemeKind::GeneralizedNew;
  }
};

inline double gtau_value(GTau g, double tau) {
  switch (g) {
    case GTau::Linear:
      return 0.5 * tau;
    case GTau::ExpDamped:
      return 0.5 * tau * std::exp(-tau);
  }
  return 0.5 * tau;
}

inline std::string_view to_string(SchemeKind k) {
  switch (k) {
    case SchemeKind::NewScheme: return "new";
    case SchemeKind::Polar: return "polar";
    case SchemeKind::QrScheme: return "qr";
    case SchemeKind::GradProjection: return "gp";
    case SchemeKind::WenYin: return "wenyin";
    case SchemeKind::Geodesic: return "geodesic";
    case SchemeKind::LowRankColumn: return "lowrank";
    case SchemeKind::GeneralizedNew: return "generalized";
  }
  return "new";
}

inline std::string_view to_string(GTau g) {
  return g == GTau::Linear ? "linear" : "expdamped";
}

inline SchemeKind parse_scheme(std::string_view s) {
  for (SchemeKind k : {SchemeKind::NewScheme, SchemeKind::Polar, SchemeKind::QrScheme,
                       SchemeKind::GradProjection, SchemeKind::WenYin, SchemeKind::Geodesic,
                       SchemeKind::LowRankColumn, SchemeKind::GeneralizedNew}) {
    if (s == to_string(k)) return k;
  }
  throw DomainError("unknown scheme '" + std::string(s) + "'");
}

inline GTau parse_gtau(std::string_view s) {
  if (s == "linear") return GTau::Linear;
  if (s == "expdamped") return GTau::ExpDamped;
  throw DomainError("unknown gtau '" + std::string(s) + "'");
}

/// A feasible curve through X. Implementations are immutable after
/// construction.
class Curve {
 public:
  virtual ~Curve() = default;

  /// Y(tau).
  virtual Matrix at(double tau) const = 0;

  /// ||Y(tau) - X||_F^2 from the p x p factor, when the scheme has one.
  virtual std::optional<double> step_norm_sq(double /*tau*/) const { return std::nullopt; }

  /// E with Y'(0) = -E.
  const Matrix& velocity() const { return e_; }
  const Matrix& base() const { return x_; }

 protected:
  Curve(Matrix x, Matrix e) : x_(std::move(x)), e_(std::move(e)) {}
  Matrix x_;
  Matrix e_;
};

/// A point on a curve plus the curve itself for re-evaluation at another tau.
struct CurveEvaluation {
  Matrix y;
  double tau = 0.0;
  std::shared_ptr<const Curve> cached_factor;
};

inline CurveEvaluation evaluate(std::shared_ptr<const Curve> c, double tau) {
  if (!std::isfinite(tau)) throw DomainError("curve evaluation: non-finite tau");
  CurveEvaluation out;
  out.y = c->at(tau);
  out.tau = tau;
  out.cached_factor = std::move(c);
  return out;
}

/// Y(tau_new) on the curve that produced `curve`, reusing its cached factor.
inline CurveEvaluation reevaluate(const CurveEvaluation& curve, double tau_new) {
  if (!curve.cached_factor) throw DomainError("reevaluate: curve has no cached factor");
  return evaluate(curve.cached_factor, tau_new);
}

namespace detail {

inline void check_lu(const Eigen::PartialPivLU<Matrix>& lu, const char* what) {
  const double rc = lu.rcond();
  if (!(rc > 1e-15)) {
    throw NumericalError(std::string(what) + ": matrix is numerically singular (rcond " +
                         std::to_string(rc) + "); shrink tau");
  }
}

/// Y = B J^{-1} via J^T Y^T = B^T.
inline Matrix right_solve(const Matrix& b, const Matrix& j, const char* what) {
  Eigen::PartialPivLU<Matrix> lu(j.transpose());
  check_lu(lu, what);
  return lu.solve(b.transpose()).transpose();
}

}  // namespace detail

/// The range/null-space curve
///   W = -(I - X X^T) E,  J = I + tau^2/4 W^T W + g(tau) X^T E,
///   Y = (2X + tau W) J^{-1} - X.
/// J uses skew(X^T E), which equals X^T E on the manifold and keeps
/// Y^T Y - I = (2J^{-1} - I)^T (X^T X - I) (2J^{-1} - I) when X has drifted.
/// W is passed in so callers can substitute the feasibility-controlled
/// variant.
class NewSchemeCurve final : public Curve {
 public:
  NewSchemeCurve(Matrix x, Matrix e, Matrix w, GTau gtau)
      : Curve(std::move(x), std::move(e)), w_(std::move(w)), gtau_(gtau) {
    require_same_shape(x_, e_, "NewSchemeCurve");
    require_same_shape(x_, w_, "NewSchemeCurve");
    wtw_ = w_.transpose() * w_;
    xte_ = skew(x_.transpose() * e_);
  }

  /// J(tau) - I.
  Matrix j_offset(double tau) const {
    return 0.25 * tau * tau * wtw_ + gtau_value(gtau_, tau) * xte_;
  }

  Matrix j(double tau) const {
    return Matrix::Identity(x_.cols(), x_.cols()) + j_offset(tau);
  }

  Matrix at(double tau) const override {
    Matrix b = 2.0 * x_ + tau * w_;
    return detail::right_solve(b, j(tau), "new scheme J(tau)") - x_;
  }

  /// tr(I - J^{-1}) = tr(J^{-1}(J - I)), free of cancellation for small tau.
  double jinv_defect(double tau) const {
    Eigen::PartialPivLU<Matrix> lu(j(tau));
    detail::check_lu(lu, "new scheme J(tau)");
    return lu.solve(j_offset(tau)).trace();
  }

  /// ||Y - X||^2 = 4p - 4 tr(J^{-1}), valid when X is feasible.
  std::optional<double> step_norm_sq(double tau) const override {
    return 4.0 * jinv_defect(tau);
  }

  const Matrix& w() const { return w_; }

 private:
  Matrix w_;
  Matrix wtw_;
  Matrix xte_;
  GTau gtau_;
};

inline std::shared_ptr<const NewSchemeCurve> make_new_curve(const Matrix& x, const Matrix& e,
                                                            GTau gtau) {
  Matrix w = -(e - x * (x.transpose() * e));
  return std::make_shared<NewSchemeCurve>(x, e, std::move(w), gtau);
}

/// The W-hat variant: W = -(I - X (X^T X)^{-1} X^T) G with E = D_rho, so that
/// X^T W vanishes even when X has drifted off the manifold.
inline std::shared_ptr<const NewSchemeCurve> make_controlled_curve(const Matrix& x,
                                                                   const Matrix& g, double rho,
                                                                   GTau gtau) {
  require_same_shape(x, g, "retract_new_controlled");
  Eigen::LLT<Matrix> llt(x.transpose() * x);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("retract_new_controlled: X^T X is singular");
  }
  const Matrix xtg = x.transpose() * g;
  Matrix w = -(g - x * llt.solve(xtg));
  // Second projection pass: near stationarity ||W|| << ||G|| and one pass
  // leaves X^T W at eps ||G|| instead of eps ||W||.
  w -= x * llt.solve(x.transpose() * w);
  Matrix e = d_rho(x, g, rho);
  return std::make_shared<NewSchemeCurve>(x, std::move(e), std::move(w), gtau);
}

/// E = D_rho with the plain W = -(I - X X^T) G. Once X drifts, X^T W no
/// longer vanishes and the drift can grow.
inline std::shared_ptr<const NewSchemeCurve> make_uncontrolled_curve(const Matrix& x,
                                                                     const Matrix& g,
                                                                     double rho, GTau gtau) {
  require_same_shape(x, g, "make_uncontrolled_curve");
  Matrix w = -(g - x * (x.transpose() * g));
  Matrix e = d_rho(x, g, rho);
  return std::make_shared<NewSchemeCurve>(x, std::move(e), std::move(w), gtau);
}

inline CurveEvaluation retract_new(const StiefelPoint& x, const TangentDirection& e,
                                   double tau, GTau gtau = GTau::Linear) {
  require_same_shape(x.mat(), e.mat(), "retract_new");
  return evaluate(make_new_curve(x.mat(), e.mat(), gtau), tau);
}

inline CurveEvaluation retract_new_controlled(const Matrix& x, const Matrix& g, double rho,
                                              double tau, GTau gtau = GTau::Linear) {
  return evaluate(make_controlled_curve(x, g, rho, gtau), tau);
}

/// (X - tau D)(I + tau^2 D^T D)^{-1/2}; the eigendecomposition of D^T D is
/// computed once. The formula needs X^T D skew, so sym(X^T D) is removed from
/// D first.
class PolarCurve final : public Curve {
 public:
  PolarCurve(Matrix x, Matrix d) : Curve(std::move(x), std::move(d)) {
    require_same_shape(x_, e_, "retract_polar");
    e_ -= x_ * sym(x_.transpose() * e_);
    Eigen::SelfAdjointEigenSolver<Matrix> es(e_.transpose() * e_);
    vecs_ = es.eigenvectors();
    vals_ = es.eigenvalues().cwiseMax(0.0);
  }

  Matrix at(double tau) const override {
    const Vector s =
        (Vector::Ones(vals_.size()) + tau * tau * vals_).cwiseSqrt().cwiseInverse();
    return (x_ - tau * e_) * (vecs_ * s.asDiagonal() * vecs_.transpose());
  }

 private:
  Matrix vecs_;
  Vector vals_;
};

inline CurveEvaluation retract_polar(const StiefelPoint& x, const TangentDirection& d,
                                     double tau) {
  return evaluate(std::make_shared<PolarCurve>(x.mat(), d.mat()), tau);
}

/// qr(X - tau D) with positive-diagonal R.
class QrCurve final : public Curve {
 public:
  QrCurve(Matrix x, Matrix d) : Curve(std::move(x), std::move(d)) {
    require_same_shape(x_, e_, "retract_qr");
  }

  Matrix at(double tau) const override {
    QrFactors f = qr_positive(x_ - tau * e_);
    if (!(qr_rank_ratio(f.r) > 1e-14)) {
      throw NumericalError("retract_qr: X - tau D is rank deficient");
    }
    return std::move(f.q);
  }
};

inline CurveEvaluation retract_qr(const StiefelPoint& x, const TangentDirection& d,
                                  double tau) {
  return evaluate(std::make_shared<QrCurve>(x.mat(), d.mat()), tau);
}

/// P_St(X - tau G). Its velocity is the Euclidean tangent projection of G.
class GradProjectionCurve final : public Curve {
 public:
  GradProjectionCurve(Matrix x, Matrix g)
      : Curve(x, projected(x, g)), g_(std::move(g)) {}

  Matrix at(double tau) const override { return stiefel_projection(x_ - tau * g_); }

 private:
  static Matrix projected(const Matrix& x, const Matrix& g) {
    require_same_shape(x, g, "retract_gradproj");
    return g - x * sym(x.transpose() * g);
  }

  Matrix g_;
};

inline CurveEvaluation retract_gradproj(const StiefelPoint& x, const Matrix& g, double tau) {
  return evaluate(std::make_shared<GradProjectionCurve>(x.mat(), g), tau);
}

/// X - tau U (I_2p + tau/2 V^T U)^{-1} V^T X with U = [P_X D, X],
/// V = [X, -P_X D] and P_X = I - X X^T / 2.
class WenYinCurve final : public Curve {
 public:
  WenYinCurve(Matrix x, Matrix d) : Curve(std::move(x), std::move(d)) {
    require_same_shape(x_, e_, "retract_wenyin");
    const Eigen::Index n = x_.rows();
    const Eigen::Index p = x_.cols();
    const Matrix pd = e_ - 0.5 * x_ * (x_.transpose() * e_);
    u_.resize(n, 2 * p);
    u_ << pd, x_;
    Matrix v(n, 2 * p);
    v << x_, -pd;
    vtu_ = v.transpose() * u_;
    vtx_ = v.transpose() * x_;
  }

  Matrix at(double tau) const override {
    const Eigen::Index m = vtu_.rows();
    // The X^T X block grows like tau, so the system is badly scaled for large
    // tau without being singular. Only a breakdown of the solve is an error.
    Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(m, m) + 0.5 * tau * vtu_);
    Matrix y = x_ - tau * (u_ * lu.solve(vtx_));
    if (!(lu.rcond() > 0.0) || !y.allFinite()) {
      throw NumericalError("retract_wenyin: I + tau/2 V^T U is singular");
    }
    return y;
  }

  /// Reciprocal condition estimate of the 2p x 2p system at tau.
  double system_rcond(double tau) const {
    const Eigen::Index m = vtu_.rows();
    return Eigen::PartialPivLU<Matrix>(Matrix::Identity(m, m) + 0.5 * tau * vtu_).rcond();
  }

 private:
  Matrix u_;
  Matrix vtu_;
  Matrix vtx_;
};

inline CurveEvaluation retract_wenyin(const StiefelPoint& x, const TangentDirection& d,
                                      double tau) {
  return evaluate(std::make_shared<WenYinCurve>(x.mat(), d.mat()), tau);
}

/// [X, Q] exp(tau [[-X^T D, -R^T], [R, 0]]) [I; 0] with Q R = -(I - X X^T) D.
///
/// Q is taken from a Householder QR of [X, K], K = -(I - X X^T) D, so it is an
/// orthonormal basis of a complement of span(X) that contains range(K) even
/// when K is rank deficient. R = Q^T K. The curve does not depend on which
/// such basis is used.
class GeodesicCurve final : public Curve {
 public:
  GeodesicCurve(Matrix x, Matrix d) : Curve(std::move(x), std::move(d)) {
    require_same_shape(x_, e_, "retract_geodesic");
    const Eigen::Index n = x_.rows();
    const Eigen::Index p = x_.cols();
    const Matrix xtd = x_.transpose() * e_;
    const Matrix k = -(e_ - x_ * xtd);
    const Eigen::Index c = std::min(p, n - p);
    Matrix xk(n, 2 * p);
    xk << x_, k;
    Eigen::HouseholderQR<Matrix> qr(xk);
    const Matrix qfull = qr.householderQ() * Matrix::Identity(n, std::min(n, 2 * p));
    q_ = qfull.middleCols(p, c);
    // Remove the tiny span(X) component Householder leaves in Q.
    q_ -= x_ * (x_.transpose() * q_);
    const Matrix r = q_.transpose() * k;
    a_ = Matrix::Zero(p + c, p + c);
    // skew part only, so the exponent stays exactly skew when X^T D carries
    // roundoff that a large tau would amplify
    a_.topLeftCorner(p, p) = -skew(xtd);
    a_.topRightCorner(p, c) = -r.transpose();
    a_.bottomLeftCorner(c, p) = r;
  }

  Matrix at(double tau) const override {
    const Eigen::Index p = x_.cols();
    const Matrix ex = expm(tau * a_);
    Matrix y = x_ * ex.topLeftCorner(p, p);
    if (q_.cols() > 0) y += q_ * ex.bottomLeftCorner(q_.cols(), p);
    return y;
  }

 private:
  Matrix q_;
  Matrix a_;
};

inline CurveEvaluation retract_geodesic(const StiefelPoint& x, const TangentDirection& d,
                                        double tau) {
  return evaluate(std::make_shared<GeodesicCurve>(x.mat(), d.mat()), tau);
}

// ---------------------------------------------------------------------------
// Rank-2 direction E = D^(q) = G_(q) e_q^T - X_(q) G_(q)^T X.

/// argmax_i e_i^T (G^T grad F) e_i; ties go to the smallest index.
inline Eigen::Index lowrank_column_index(const Matrix& x, const Matrix& g) {
  require_same_shape(x, g, "lowrank_column_index");
  const Matrix cg = g - x * (g.transpose() * x);
  Eigen::Index best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const double v = g.col(i).dot(cg.col(i));
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  return best;
}

inline Matrix lowrank_direction(const Matrix& x, const Matrix& g, Eigen::Index q) {
  Matrix e = -x.col(q) * (g.col(q).transpose() * x);
  e.col(q) += g.col(q);
  return e;
}

/// J^{-1} for E = D^(q) in closed form (Sherman-Morrison-Woodbury on the
/// rank-2 structure of J).
inline Matrix lowrank_jinv(const Matrix& x, const Matrix& g, Eigen::Index q, double tau) {
  const Eigen::Index p = x.cols();
  const Vector gq = g.col(q);
  const double xg = x.col(q).dot(gq);
  const double alpha = 0.25 * tau * tau * (gq.squaredNorm() - xg * xg);
  Vector b = 0.5 * tau * (x.transpose() * gq);
  b(q) = 0.0;
  Matrix left(p, 2);
  left.col(0) = Vector::Unit(p, q);
  left.col(1) = b;
  Matrix mid(2, 2);
  mid << alpha, -1.0, 1.0, 1.0;
  return Matrix::Identity(p, p) - (left * mid * left.transpose()) / (1.0 + alpha);
}

class LowRankColumnCurve final : public Curve {
 public:
  LowRankColumnCurve(Matrix x, Matrix g, Eigen::Index q)
      : Curve(x, lowrank_direction(x, g, q)), g_(std::move(g)), q_(q) {
    const Vector gq = g_.col(q_);
    w_ = -(gq - x_ * (x_.transpose() * gq));
    const double xg = x_.col(q_).dot(gq);
    alpha_unit_ = 0.25 * (gq.squaredNorm() - xg * xg);
    b_unit_ = 0.5 * (x_.transpose() * gq);
    b_unit_(q_) = 0.0;
  }

  Matrix at(double tau) const override {
    const double alpha = tau * tau * alpha_unit_;
    const Vector b = tau * b_unit_;
    Matrix bmat = 2.0 * x_;
    bmat.col(q_) += tau * w_;
    // B J^{-1} = B - (B [e_q, b]) M [e_q, b]^T / (1 + alpha)
    Matrix p2(x_.rows(), 2);
    p2.col(0) = bmat.col(q_);
    p2.col(1) = bmat * b;
    Matrix mid(2, 2);
    mid << alpha, -1.0, 1.0, 1.0;
    const Matrix pm = p2 * mid / (1.0 + alpha);
    Matrix y = bmat - pm.col(1) * b.transpose();
    y.col(q_) -= pm.col(0);
    return y - x_;
  }

  Eigen::Index column() const { return q_; }

 private:
  Matrix g_;
  Eigen::Index q_;
  Vector w_;
  double alpha_unit_ = 0.0;
  Vector b_unit_;
};

inline std::shared_ptr<const LowRankColumnCurve> make_lowrank_curve(const Matrix& x,
                                                                    const Matrix& g) {
  return std::make_shared<LowRankColumnCurve>(x, g, lowrank_column_index(x, g));
}

inline CurveEvaluation retract_lowrank_column(const StiefelPoint& x, const Matrix& g,
                                              double tau) {
  require_same_shape(x.mat(), g, "retract_lowrank_column");
  return evaluate(make_lowrank_curve(x.mat(), g), tau);
}

}  // namespace feasopt
