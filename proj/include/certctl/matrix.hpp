// Copyright 2026 The certctl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CERTCTL_MATRIX_HPP
#define CERTCTL_MATRIX_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace certctl {

using Vec = std::vector<double>;

/// Error type for numeric contract violations (singular systems,
/// non-convergence, dimension mismatches).
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& what, int detail = 0)
      : std::runtime_error(what), detail_(detail) {}
  /// Context-dependent payload (e.g. iteration count at failure).
  int detail() const { return detail_; }

private:
  int detail_;
};

inline bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

/// Dense row-major real matrix.
struct RealMatrix {
  int rows = 0;
  int cols = 0;
  Vec a;  // rows*cols, row-major

  RealMatrix() = default;
  RealMatrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), a(static_cast<size_t>(r) * c, fill) {
    if (r < 0 || c < 0) throw NumericError("RealMatrix: negative dimension");
  }

  double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

  static RealMatrix identity(int n) {
    RealMatrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static RealMatrix from_rows(const std::vector<Vec>& rows_in) {
    if (rows_in.empty()) return RealMatrix();
    RealMatrix m(static_cast<int>(rows_in.size()), static_cast<int>(rows_in[0].size()));
    for (int i = 0; i < m.rows; ++i) {
      if (static_cast<int>(rows_in[i].size()) != m.cols)
        throw NumericError("from_rows: ragged rows");
      for (int j = 0; j < m.cols; ++j) m(i, j) = rows_in[i][j];
    }
    return m;
  }

  bool finite() const { return all_finite(a); }

  void require_finite(const char* where) const {
    if (!finite()) throw NumericError(std::string(where) + ": non-finite entries");
  }

  RealMatrix transposed() const {
    RealMatrix t(cols, rows);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  double frobenius() const {
    double s = 0.0;
    for (double x : a) s += x * x;
    return std::sqrt(s);
  }

  double max_abs() const {
    double s = 0.0;
    for (double x : a) s = std::max(s, std::abs(x));
    return s;
  }
};

inline RealMatrix operator*(const RealMatrix& A, const RealMatrix& B) {
  if (A.cols != B.rows) throw NumericError("matmul: dimension mismatch");
  RealMatrix C(A.rows, B.cols);
  for (int i = 0; i < A.rows; ++i) {
    for (int k = 0; k < A.cols; ++k) {
      const double aik = A(i, k);
      if (aik == 0.0) continue;
      const double* brow = &B.a[static_cast<size_t>(k) * B.cols];
      double* crow = &C.a[static_cast<size_t>(i) * C.cols];
      for (int j = 0; j < B.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return C;
}

inline RealMatrix operator+(const RealMatrix& A, const RealMatrix& B) {
  if (A.rows != B.rows || A.cols != B.cols) throw NumericError("add: dimension mismatch");
  RealMatrix C = A;
  for (size_t i = 0; i < C.a.size(); ++i) C.a[i] += B.a[i];
  return C;
}

inline RealMatrix operator-(const RealMatrix& A, const RealMatrix& B) {
  if (A.rows != B.rows || A.cols != B.cols) throw NumericError("sub: dimension mismatch");
  RealMatrix C = A;
  for (size_t i = 0; i < C.a.size(); ++i) C.a[i] -= B.a[i];
  return C;
}

inline RealMatrix operator*(double s, const RealMatrix& A) {
  RealMatrix C = A;
  for (double& x : C.a) x *= s;
  return C;
}

inline Vec matvec(const RealMatrix& A, const Vec& x) {
  if (static_cast<int>(x.size()) != A.cols) throw NumericError("matvec: dimension mismatch");
  Vec y(A.rows, 0.0);
  for (int i = 0; i < A.rows; ++i) {
    const double* row = &A.a[static_cast<size_t>(i) * A.cols];
    double s = 0.0;
    for (int j = 0; j < A.cols; ++j) s += row[j] * x[j];
    y[i] = s;
  }
  return y;
}

/// y = A^T x
inline Vec matvec_t(const RealMatrix& A, const Vec& x) {
  if (static_cast<int>(x.size()) != A.rows) throw NumericError("matvec_t: dimension mismatch");
  Vec y(A.cols, 0.0);
  for (int i = 0; i < A.rows; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* row = &A.a[static_cast<size_t>(i) * A.cols];
    for (int j = 0; j < A.cols; ++j) y[j] += row[j] * xi;
  }
  return y;
}

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline void axpy(double alpha, const Vec& x, Vec& y) {
  for (size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

/// Symmetric matrix; symmetry is re-established via (S+S^T)/2 on every
/// assembly so downstream eigensolvers can rely on it exactly.
struct SymMatrix {
  int dim = 0;
  Vec a;  // dim*dim row-major, kept exactly symmetric

  SymMatrix() = default;
  explicit SymMatrix(int n, double fill = 0.0)
      : dim(n), a(static_cast<size_t>(n) * n, fill) {
    if (n < 0) throw NumericError("SymMatrix: negative dimension");
  }

  double& operator()(int i, int j) { return a[static_cast<size_t>(i) * dim + j]; }
  double operator()(int i, int j) const { return a[static_cast<size_t>(i) * dim + j]; }

  static SymMatrix identity(int n) {
    SymMatrix s(n);
    for (int i = 0; i < n; ++i) s(i, i) = 1.0;
    return s;
  }

  static SymMatrix diagonal(const Vec& d) {
    SymMatrix s(static_cast<int>(d.size()));
    for (int i = 0; i < s.dim; ++i) s(i, i) = d[i];
    return s;
  }

  /// Build from a (possibly slightly asymmetric) square matrix.
  static SymMatrix symmetrize(const RealMatrix& m) {
    if (m.rows != m.cols) throw NumericError("symmetrize: not square");
    m.require_finite("symmetrize");
    SymMatrix s(m.rows);
    for (int i = 0; i < m.rows; ++i)
      for (int j = 0; j < m.cols; ++j) s(i, j) = 0.5 * (m(i, j) + m(j, i));
    return s;
  }

  RealMatrix dense() const {
    RealMatrix m(dim, dim);
    m.a = a;
    return m;
  }

  double frobenius() const {
    double s = 0.0;
    for (double x : a) s += x * x;
    return std::sqrt(s);
  }

  SymMatrix scaled(double c) const {
    SymMatrix s = *this;
    for (double& x : s.a) x *= c;
    return s;
  }
};

/// m^T applied as congruence S -> L S L^T is frequent enough to name.
inline SymMatrix congruence(const RealMatrix& L, const SymMatrix& S) {
  return SymMatrix::symmetrize(L * S.dense() * L.transposed());
}

}  // namespace certctl

#endif  // CERTCTL_MATRIX_HPP
