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

#ifndef CERTCTL_LLS_HPP
#define CERTCTL_LLS_HPP

#include <cmath>

#include "certctl/eig.hpp"
#include "certctl/matrix.hpp"

namespace certctl {

/// LU factorization with partial pivoting; solves A X = B in place.
/// Used for the small Kronecker systems of Lyapunov solves.
inline RealMatrix lu_solve(RealMatrix A, RealMatrix B) {
  if (A.rows != A.cols || A.rows != B.rows) throw NumericError("lu_solve: dimension mismatch");
  const int n = A.rows;
  const int m = B.cols;
  std::vector<int> piv(n);
  for (int i = 0; i < n; ++i) piv[i] = i;

  for (int k = 0; k < n; ++k) {
    int p = k;
    double best = std::abs(A(k, k));
    for (int i = k + 1; i < n; ++i) {
      const double v = std::abs(A(i, k));
      if (v > best) { best = v; p = i; }
    }
    if (best == 0.0) throw NumericError("lu_solve: singular matrix");
    if (p != k) {
      for (int j = 0; j < n; ++j) std::swap(A(k, j), A(p, j));
      for (int j = 0; j < m; ++j) std::swap(B(k, j), B(p, j));
    }
    const double pivot = A(k, k);
    for (int i = k + 1; i < n; ++i) {
      const double f = A(i, k) / pivot;
      if (f == 0.0) continue;
      A(i, k) = f;
      for (int j = k + 1; j < n; ++j) A(i, j) -= f * A(k, j);
      for (int j = 0; j < m; ++j) B(i, j) -= f * B(k, j);
    }
  }
  // back substitution
  for (int j = 0; j < m; ++j) {
    for (int i = n - 1; i >= 0; --i) {
      double s = B(i, j);
      for (int k = i + 1; k < n; ++k) s -= A(i, k) * B(k, j);
      B(i, j) = s / A(i, i);
    }
  }
  return B;
}

/// Ridge-regularized least squares: X = argmin |A X - B|_F^2 + rho |X|_F^2,
/// solved through the normal equations (A^T A + rho I) X = A^T B.
/// rho = 0 on a rank-deficient system is an error; the caller is told to
/// supply a positive rho instead.
inline RealMatrix ridge_lls(const RealMatrix& A, const RealMatrix& B, double rho) {
  if (rho < 0.0) throw NumericError("ridge_lls: rho must be >= 0");
  if (A.rows != B.rows) throw NumericError("ridge_lls: row count mismatch");
  if (A.rows < 1) throw NumericError("ridge_lls: empty system");
  A.require_finite("ridge_lls A");
  B.require_finite("ridge_lls B");

  const RealMatrix At = A.transposed();
  SymMatrix G = SymMatrix::symmetrize(At * A);
  for (int i = 0; i < G.dim; ++i) G(i, i) += rho;
  const RealMatrix Rhs = At * B;

  auto L = cholesky(G);
  if (!L) {
    if (rho == 0.0)
      throw NumericError("ridge_lls: singular normal equations; supply rho > 0");
    throw NumericError("ridge_lls: normal equations not positive definite");
  }
  RealMatrix X(A.cols, B.cols);
  Vec col(A.cols);
  for (int j = 0; j < B.cols; ++j) {
    for (int i = 0; i < A.cols; ++i) col[i] = Rhs(i, j);
    const Vec x = cholesky_solve(*L, col);
    for (int i = 0; i < A.cols; ++i) X(i, j) = x[i];
  }
  X.require_finite("ridge_lls X");
  return X;
}

/// Relative normal-equations residual |A^T(AX-B) + rho X| / max(1, |A^T B|).
inline double normal_eq_residual(const RealMatrix& A, const RealMatrix& B,
                                 const RealMatrix& X, double rho) {
  const RealMatrix R = A.transposed() * (A * X - B) + rho * X;
  const double scale = std::max(1.0, (A.transposed() * B).frobenius());
  return R.frobenius() / scale;
}

}  // namespace certctl

#endif  // CERTCTL_LLS_HPP
