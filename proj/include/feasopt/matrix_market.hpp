// SPDX-License-Identifier: Apache-2.0
//
// MatrixMarket reader for dense real matrices (coordinate and array formats).

#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>

#include "feasopt/core.hpp"

namespace feasopt {

class MatrixMarketError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline bool next_data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '%') continue;
    return true;
  }
  return false;
}

}  // namespace detail

/// Reads real/integer/pattern matrices with general, symmetric or
/// skew-symmetric storage into a dense matrix.
inline Matrix read_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw MatrixMarketError("MatrixMarket: empty input");
  std::istringstream hs(line);
  std::string banner, object, format, field, symmetry;
  hs >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket") throw MatrixMarketError("MatrixMarket: missing banner");
  object = detail::lower(object);
  format = detail::lower(format);
  field = detail::lower(field);
  symmetry = detail::lower(symmetry);
  if (object != "matrix") throw MatrixMarketError("MatrixMarket: object must be 'matrix'");
  if (format != "coordinate" && format != "array") {
    throw MatrixMarketError("MatrixMarket: unknown format '" + format + "'");
  }
  if (field != "real" && field != "integer" && field != "double" && field != "pattern") {
    throw MatrixMarketError("MatrixMarket: unsupported field '" + field + "'");
  }
  if (format == "array" && field == "pattern") {
    throw MatrixMarketError("MatrixMarket: pattern field needs coordinate format");
  }
  const bool sym = symmetry == "symmetric";
  const bool skw = symmetry == "skew-symmetric";
  if (!sym && !skw && symmetry != "general") {
    throw MatrixMarketError("MatrixMarket: unsupported symmetry '" + symmetry + "'");
  }
  if (!detail::next_data_line(in, line)) throw MatrixMarketError("MatrixMarket: missing size line");
  std::istringstream ss(line);
  long rows = 0, cols = 0, nnz = 0;
  ss >> rows >> cols;
  if (format == "coordinate") ss >> nnz;
  if (!ss || rows < 1 || cols < 1 || nnz < 0) throw MatrixMarketError("MatrixMarket: bad size line");
  if ((sym || skw) && rows != cols) {
    throw MatrixMarketError("MatrixMarket: symmetric storage needs a square matrix");
  }
  Matrix m = Matrix::Zero(rows, cols);
  if (format == "coordinate") {
    for (long k = 0; k < nnz; ++k) {
      if (!detail::next_data_line(in, line)) throw MatrixMarketError("MatrixMarket: truncated");
      std::istringstream es(line);
      long i = 0, j = 0;
      double v = 1.0;
      es >> i >> j;
      if (field != "pattern") es >> v;
      if (!es || i < 1 || j < 1 || i > rows || j > cols) {
        throw MatrixMarketError("MatrixMarket: bad entry line " + std::to_string(k + 1));
      }
      m(i - 1, j - 1) = v;
      if (i != j && sym) m(j - 1, i - 1) = v;
      if (i != j && skw) m(j - 1, i - 1) = -v;
    }
  } else {
    // column-major; symmetric storage lists the lower triangle only
    for (long j = 0; j < cols; ++j) {
      const long start = sym ? j : (skw ? j + 1 : 0);
      for (long i = start; i < rows; ++i) {
        if (!detail::next_data_line(in, line)) throw MatrixMarketError("MatrixMarket: truncated");
        double v = 0.0;
        std::istringstream es(line);
        if (!(es >> v)) throw MatrixMarketError("MatrixMarket: bad value");
        m(i, j) = v;
        if (i != j && sym) m(j, i) = v;
        if (i != j && skw) m(j, i) = -v;
      }
    }
  }
  return m;
}

inline Matrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MatrixMarketError("cannot open matrix file '" + path + "'");
  return read_matrix_market(in);
}

/// Writes a dense matrix in array general format.
inline void write_matrix_market(std::ostream& out, const Matrix& m) {
  out << "%%MatrixMarket matrix array real general\n" << m.rows() << ' ' << m.cols() << '\n';
  out.precision(17);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) out << m(i, j) << '\n';
}

}  // namespace feasopt
