// SPDX-License-Identifier: Apache-2.0
//
// Test objectives: nearest low-rank correlation, heterogeneous quadratics
// with a planted optimum, and the trace (sum of top eigenvalues) objective.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "feasopt/core.hpp"
#include "feasopt/manifold.hpp"
#include "feasopt/problem.hpp"

namespace feasopt {

// ---------------------------------------------------------------------------
// Low-rank correlation: theta(V) = 1/2 ||H o (V^T V - C)||_F^2, V is r x n
// with unit columns.

struct LowRankCorrProblem {
  Matrix c;                  // n x n symmetric target
  std::optional<Matrix> h;   // n x n nonnegative weights; nullopt means all ones
  Eigen::Index r = 1;
  std::string name = "lowrank_corr";

  Eigen::Index n() const { return c.rows(); }

  void validate() const {
    require_square(c, "LowRankCorrProblem C");
    if ((c - c.transpose()).norm() > 1e-12 * std::max(1.0, c.norm())) {
      throw DomainError("LowRankCorrProblem: C is not symmetric");
    }
    if (h) {
      require_same_shape(c, *h, "LowRankCorrProblem H");
      if (h->minCoeff() < 0.0) throw DomainError("LowRankCorrProblem: negative weight");
    }
    if (r < 1 || r > n()) throw DomainError("LowRankCorrProblem: rank out of range");
  }
};

inline GradientPair lowrank_corr_eval(const LowRankCorrProblem& prob, const Matrix& v) {
  if (v.cols() != prob.n()) {
    throw ShapeError("lowrank_corr_eval: V is " + shape_str(v) + ", C is " + shape_str(prob.c));
  }
  Matrix res = v.transpose() * v - prob.c;
  GradientPair out;
  if (prob.h) {
    const Matrix hr = prob.h->cwiseProduct(res);
    out.value = 0.5 * hr.squaredNorm();
    out.euclid_grad = 2.0 * v * prob.h->cwiseProduct(hr);
  } else {
    out.value = 0.5 * res.squaredNorm();
    out.euclid_grad = 2.0 * v * res;
  }
  return out;
}

/// ||H o (V^T V - C)||_F.
inline double nlcmres(const LowRankCorrProblem& prob, const Matrix& v) {
  return std::sqrt(2.0 * lowrank_corr_eval(prob, v).value);
}

inline Problem make_problem(const LowRankCorrProblem& lc) {
  lc.validate();
  Problem p;
  p.name = lc.name;
  p.rows = lc.r;
  p.cols = lc.n();
  p.geometry = Geometry::Oblique;
  p.symmetric_xg = true;
  auto shared = std::make_shared<const LowRankCorrProblem>(lc);
  p.eval = [shared](const Matrix& v) { return lowrank_corr_eval(*shared, v); };
  return p;
}

/// C_ij = exp(-g1|i-j| - g2|i-j| / max(i,j)^g3 - g4|sqrt(i) - sqrt(j)|),
/// 1-based i, j, with (g1, g2, g3, g4) = (0, 0.480, 1.511, 0.186).
inline Matrix ex2_matrix(Eigen::Index n) {
  if (n < 1) throw DomainError("ex2_matrix: n must be positive");
  const double g1 = 0.0, g2 = 0.480, g3 = 1.511, g4 = 0.186;
  Matrix c(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double a = static_cast<double>(i + 1);
      const double b = static_cast<double>(j + 1);
      const double d = std::abs(a - b);
      c(i, j) = std::exp(-g1 * d - g2 * d / std::pow(std::max(a, b), g3) -
                         g4 * std::abs(std::sqrt(a) - std::sqrt(b)));
    }
  }
  return c;
}

/// C_ij = 0.5 + 0.5 exp(-0.05 |i - j|).
inline Matrix ex3_matrix(Eigen::Index n) {
  if (n < 1) throw DomainError("ex3_matrix: n must be positive");
  Matrix c(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      c(i, j) = 0.5 + 0.5 * std::exp(-0.05 * std::abs(static_cast<double>(i - j)));
  return c;
}

/// Symmetric weights uniform in [0.1, 10], except 200 off-diagonal pairs
/// (drawn without replacement from the strict upper triangle) uniform in
/// [0.01, 100].
inline Matrix ex3_weights(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> base(0.1, 10.0);
  std::uniform_real_distribution<double> wide(0.01, 100.0);
  Matrix h(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      h(i, j) = base(rng);
      h(j, i) = h(i, j);
    }
  }
  const std::int64_t m = static_cast<std::int64_t>(n) * (n - 1) / 2;
  const std::int64_t pick = std::min<std::int64_t>(200, m);
  std::vector<std::int64_t> idx(static_cast<std::size_t>(m));
  std::iota(idx.begin(), idx.end(), 0);
  for (std::int64_t t = 0; t < pick; ++t) {
    std::uniform_int_distribution<std::int64_t> u(t, m - 1);
    std::swap(idx[static_cast<std::size_t>(t)], idx[static_cast<std::size_t>(u(rng))]);
  }
  for (std::int64_t t = 0; t < pick; ++t) {
    // linear index -> (i, j) with i < j, enumerated column by column
    std::int64_t k = idx[static_cast<std::size_t>(t)];
    Eigen::Index j = 1;
    while (k >= j) {
      k -= j;
      ++j;
    }
    const Eigen::Index i = static_cast<Eigen::Index>(k);
    h(i, j) = wide(rng);
    h(j, i) = h(i, j);
  }
  return h;
}

inline LowRankCorrProblem gen_ex2(Eigen::Index n = 500, Eigen::Index r = 5) {
  LowRankCorrProblem p;
  p.c = ex2_matrix(n);
  p.r = r;
  p.name = "ex2";
  return p;
}

inline LowRankCorrProblem gen_ex3(Eigen::Index n = 500, bool weighted = false,
                                  std::uint64_t seed = 0, Eigen::Index r = 5) {
  LowRankCorrProblem p;
  p.c = ex3_matrix(n);
  if (weighted) p.h = ex3_weights(n, seed);
  p.r = r;
  p.name = weighted ? "ex3w" : "ex3";
  return p;
}

/// Start built from the top-r eigenpairs of C: columns of Lambda_r^{1/2} P_1^T,
/// each scaled to unit length. If a top-r eigenvalue is not positive, C is
/// first replaced by its eigenvalue-clipped (at 1e-8), unit-diagonal version.
inline Matrix modified_pca_init(const Matrix& c, Eigen::Index r) {
  require_square(c, "modified_pca_init");
  const Eigen::Index n = c.rows();
  if (r < 1 || r > n) throw DomainError("modified_pca_init: rank out of range");
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(c));
  if (es.info() != Eigen::Success) throw NumericalError("modified_pca_init: eigensolver failed");
  // descending order, ties by index
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const Vector& lam = es.eigenvalues();
  std::stable_sort(order.begin(), order.end(),
                   [&lam](Eigen::Index a, Eigen::Index b) { return lam(a) > lam(b); });
  Matrix vecs = es.eigenvectors();
  Vector vals = lam;
  if (!(lam(order[static_cast<std::size_t>(r - 1)]) > 0.0)) {
    std::cerr << "modified_pca_init: C has nonpositive leading eigenvalues, clipping\n";
    const Vector clipped = lam.cwiseMax(1e-8);
    Matrix cc = vecs * clipped.asDiagonal() * vecs.transpose();
    const Vector s = cc.diagonal().cwiseSqrt().cwiseInverse();
    cc = s.asDiagonal() * cc * s.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Matrix> es2(sym(cc));
    vecs = es2.eigenvectors();
    vals = es2.eigenvalues();
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&vals](Eigen::Index a, Eigen::Index b) { return vals(a) > vals(b); });
  }
  Matrix v(r, n);
  for (Eigen::Index k = 0; k < r; ++k) {
    const Eigen::Index col = order[static_cast<std::size_t>(k)];
    v.row(k) = std::sqrt(std::max(vals(col), 0.0)) * vecs.col(col).transpose();
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double nrm = v.col(i).norm();
    if (nrm > 0.0) {
      v.col(i) /= nrm;
    } else {
      std::cerr << "modified_pca_init: zero column " << i << " replaced by e_1\n";
      v.col(i) = Vector::Unit(r, 0);
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// sum_i x_i^T A_i x_i with A_i = Diag(n(i-1)+1, ..., l_i (slot i), ..., n i).

struct HeterogeneousQuadraticProblem {
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  Vector l;

  void validate() const {
    if (p < 1 || n < p) throw DomainError("HeterogeneousQuadraticProblem: need 1 <= p <= n");
    if (l.size() != p) throw ShapeError("HeterogeneousQuadraticProblem: l has wrong length");
    if (!(l.maxCoeff() < 0.0)) throw DomainError("HeterogeneousQuadraticProblem: l_i must be < 0");
  }

  /// Diagonal of A_i (0-based i).
  Vector diag(Eigen::Index i) const {
    Vector a(n);
    for (Eigen::Index j = 0; j < n; ++j) a(j) = static_cast<double>(n * i + j + 1);
    a(i) = l(i);
    return a;
  }

  double optimum() const { return l.sum(); }
};

inline HeterogeneousQuadraticProblem make_heterogeneous(Eigen::Index n, Eigen::Index p,
                                                        Vector l) {
  HeterogeneousQuadraticProblem hp{n, p, std::move(l)};
  hp.validate();
  return hp;
}

/// l_i = -1.
inline HeterogeneousQuadraticProblem heterogeneous_minus_one(Eigen::Index n, Eigen::Index p) {
  return make_heterogeneous(n, p, Vector::Constant(p, -1.0));
}

/// l_i = -u_i with u_i uniform in (0, 1].
inline HeterogeneousQuadraticProblem heterogeneous_uniform(Eigen::Index n, Eigen::Index p,
                                                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector l(p);
  for (Eigen::Index i = 0; i < p; ++i) l(i) = -(1.0 - u(rng));
  return make_heterogeneous(n, p, std::move(l));
}

inline GradientPair heterogeneous_eval(const HeterogeneousQuadraticProblem& prob,
                                       const Matrix& x) {
  if (x.rows() != prob.n || x.cols() != prob.p) {
    throw ShapeError("heterogeneous_eval: X is " + shape_str(x));
  }
  GradientPair out;
  out.euclid_grad.resize(prob.n, prob.p);
  out.value = 0.0;
  for (Eigen::Index i = 0; i < prob.p; ++i) {
    const Vector a = prob.diag(i);
    const Vector ax = a.cwiseProduct(x.col(i));
    out.value += x.col(i).dot(ax);
    out.euclid_grad.col(i) = 2.0 * ax;
  }
  return out;
}

inline Problem make_problem(const HeterogeneousQuadraticProblem& hp) {
  hp.validate();
  Problem p;
  p.name = "balogh";
  p.rows = hp.n;
  p.cols = hp.p;
  p.geometry = Geometry::Stiefel;
  p.known_optimum = hp.optimum();
  auto shared = std::make_shared<const HeterogeneousQuadraticProblem>(hp);
  p.eval = [shared](const Matrix& x) { return heterogeneous_eval(*shared, x); };
  return p;
}

// ---------------------------------------------------------------------------
// F(X) = -tr(X^T A X), G = -2 A X.

using SymmetricOperator = std::function<Matrix(const Matrix&)>;

inline GradientPair trace_eigen_eval(const SymmetricOperator& apply_a, const Matrix& x) {
  const Matrix ax = apply_a(x);
  require_same_shape(x, ax, "trace_eigen_eval");
  GradientPair out;
  out.value = -inner(x, ax);
  out.euclid_grad = -2.0 * ax;
  return out;
}

inline GradientPair trace_eigen_eval(const Matrix& a, const Matrix& x) {
  require_square(a, "trace_eigen_eval");
  if (a.rows() != x.rows()) throw ShapeError("trace_eigen_eval: A and X disagree");
  return trace_eigen_eval([&a](const Matrix& z) { return Matrix(a * z); }, x);
}

/// Dense symmetric A. Throws if ||A - A^T||_F > tol * ||A||_F.
inline Problem make_trace_eigen(Matrix a, Eigen::Index p, double tol = 1e-12) {
  require_square(a, "make_trace_eigen");
  if ((a - a.transpose()).norm() > tol * std::max(1.0, a.norm())) {
    throw DomainError("make_trace_eigen: A is not symmetric");
  }
  if (p < 1 || p > a.rows()) throw DomainError("make_trace_eigen: p out of range");
  Problem prob;
  prob.name = "trace_eigen";
  prob.rows = a.rows();
  prob.cols = p;
  prob.geometry = Geometry::Stiefel;
  prob.symmetric_xg = true;
  auto shared = std::make_shared<const Matrix>(std::move(a));
  prob.eval = [shared](const Matrix& x) { return trace_eigen_eval(*shared, x); };
  return prob;
}

/// Matrix-free symmetric operator; symmetry is the caller's promise.
inline Problem make_trace_eigen(SymmetricOperator apply_a, Eigen::Index n, Eigen::Index p) {
  if (p < 1 || p > n) throw DomainError("make_trace_eigen: p out of range");
  Problem prob;
  prob.name = "trace_eigen";
  prob.rows = n;
  prob.cols = p;
  prob.symmetric_xg = true;
  prob.eval = [op = std::move(apply_a)](const Matrix& x) { return trace_eigen_eval(op, x); };
  return prob;
}

/// Sum of the p largest eigenvalues.
inline double top_eigen_sum(const Matrix& a, Eigen::Index p) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().tail(p).sum();
}

/// Symmetric matrix with standard normal entries, seeded.
inline Matrix random_symmetric(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix a(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) a(i, j) = nd(rng);
  return sym(a);
}

}  // namespace feasopt
