// SPDX-License-Identifier: Apache-2.0
//
// Small dense kernels: positive-diagonal QR, SPD inverse square roots, the
// polar projection onto St(n,p), the matrix exponential and seeded random
// feasible points.

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>

#include <unsupported/Eigen/MatrixFunctions>

#include "feasopt/core.hpp"

namespace feasopt {

struct QrFactors {
  Matrix q;  // n x p, orthonormal columns
  Matrix r;  // p x p, upper triangular, nonnegative diagonal
};

/// Thin Householder QR with the sign convention diag(R) >= 0.
inline QrFactors qr_positive(const Matrix& a) {
  if (a.rows() < a.cols()) throw ShapeError("qr_positive: need rows >= cols");
  const Eigen::Index n = a.rows();
  const Eigen::Index p = a.cols();
  Eigen::HouseholderQR<Matrix> qr(a);
  QrFactors f;
  f.q = qr.householderQ() * Matrix::Identity(n, p);
  f.r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < p; ++j) {
    if (f.r(j, j) < 0.0) {
      f.q.col(j) *= -1.0;
      f.r.row(j) *= -1.0;
    }
  }
  return f;
}

/// Smallest |R_jj| relative to the largest; 0 for an exactly rank-deficient input.
inline double qr_rank_ratio(const Matrix& r) {
  const Vector d = r.diagonal().cwiseAbs();
  const double top = d.maxCoeff();
  return top > 0.0 ? d.minCoeff() / top : 0.0;
}

/// B^{-1/2} for symmetric positive (semi)definite B. Eigenvalues are floored
/// at floor_rel * lambda_max.
inline Matrix inv_sqrt_spd(const Matrix& b, double floor_rel = 1e-15) {
  require_square(b, "inv_sqrt_spd");
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(b));
  if (es.info() != Eigen::Success) {
    throw NumericalError("inv_sqrt_spd: eigendecomposition failed");
  }
  Vector lam = es.eigenvalues();
  const double floor = floor_rel * std::max(lam.maxCoeff(), 0.0);
  if (!(lam.maxCoeff() > 0.0)) throw NumericalError("inv_sqrt_spd: B is not positive");
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    lam(i) = 1.0 / std::sqrt(std::max(lam(i), floor));
  }
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

/// B^{1/2} for symmetric positive semidefinite B.
inline Matrix sqrt_spd(const Matrix& b) {
  require_square(b, "sqrt_spd");
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(b));
  const Vector lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

/// P_St(C) = C (C^T C)^{-1/2}, the nearest matrix with orthonormal columns,
/// computed as Q U V^T from C = Q R and R = U S V^T.
/// Throws when C is numerically rank deficient.
inline Matrix stiefel_projection(const Matrix& c) {
  if (c.rows() < c.cols()) throw ShapeError("stiefel_projection: C is " + shape_str(c));
  Eigen::HouseholderQR<Matrix> qr(c);
  const Matrix r = qr.matrixQR().topRows(c.cols()).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<Matrix> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  if (!(sv(0) > 0.0) || !(sv(sv.size() - 1) > 1e-14 * sv(0))) {
    throw NumericalError("stiefel_projection: argument is rank deficient");
  }
  const Matrix q = qr.householderQ() * Matrix::Identity(c.rows(), c.cols());
  return q * (svd.matrixU() * svd.matrixV().transpose());
}

/// exp(A) by scaling and squaring with Pade approximants.
inline Matrix expm(const Matrix& a) {
  require_square(a, "expm");
  return a.exp();
}

/// sigma_max / sigma_min; +inf for a singular matrix.
inline double cond2(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> svd(a);
  const Vector& s = svd.singularValues();
  const double lo = s(s.size() - 1);
  return lo > 0.0 ? s(0) / lo : std::numeric_limits<double>::infinity();
}

/// Q factor of an n x p standard Gaussian matrix.
template <class Rng>
Matrix random_stiefel(Eigen::Index n, Eigen::Index p, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix a(n, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < n; ++i) a(i, j) = normal(rng);
  return qr_positive(a).q;
}

inline Matrix random_stiefel(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_stiefel(n, p, rng);
}

}  // namespace feasopt
