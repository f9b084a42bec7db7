// SPDX-License-Identifier: Apache-2.0
//
// Basic matrix aliases, error types and small helpers shared by every module.
// All matrices are Eigen column-major dense matrices.

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace feasopt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Operand shapes disagree (n x p vs p x n and friends).
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A scalar parameter is outside its admissible range.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A factorization or solve broke down, or a value became non-finite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_same_shape(const Matrix& a, const Matrix& b,
                               const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a) +
                     " vs " + shape_str(b));
  }
}

inline void require_square(const Matrix& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw ShapeError(std::string(what) + ": expected a square matrix, got " +
                     shape_str(a));
  }
}

inline void require_nonempty(const Matrix& a, const char* what) {
  if (a.rows() < 1 || a.cols() < 1) {
    throw ShapeError(std::string(what) + ": empty matrix");
  }
}

inline Matrix sym(const Matrix& m) { return 0.5 * (m + m.transpose()); }
inline Matrix skew(const Matrix& m) { return 0.5 * (m - m.transpose()); }

/// Frobenius inner product <A, B> = tr(A^T B).
inline double inner(const Matrix& a, const Matrix& b) {
  return a.cwiseProduct(b).sum();
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace feasopt
