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

#ifndef CERTCTL_EIG_HPP
#define CERTCTL_EIG_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "certctl/matrix.hpp"

namespace certctl {

struct EigResult {
  Vec eigenvalues;    // ascending
  RealMatrix basis;   // orthonormal, columns are eigenvectors
};

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
/// All certification matrices in this project are small (<= ~60x60),
/// where Jacobi is unconditionally stable and plenty fast.
inline EigResult sym_eig(const SymMatrix& S) {
  const int n = S.dim;
  if (n < 1) throw NumericError("sym_eig: empty matrix");
  RealMatrix A = S.dense();
  A.require_finite("sym_eig");
  RealMatrix V = RealMatrix::identity(n);

  const int max_sweeps = 100;
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
    double scale = 0.0;
    for (int i = 0; i < n; ++i) scale += A(i, i) * A(i, i);
    if (off <= 1e-30 * std::max(1.0, scale) || off == 0.0) break;

    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = A(p, q);
        if (apq == 0.0) continue;
        const double app = A(p, p);
        const double aqq = A(q, q);
        const double tau = (aqq - app) / (2.0 * apq);
        // smaller-magnitude root for stability
        const double t = (tau >= 0.0) ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                      : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        for (int k = 0; k < n; ++k) {
          const double akp = A(k, p);
          const double akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = A(p, k);
          const double aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = V(k, p);
          const double vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (sweep >= max_sweeps)
    throw NumericError("sym_eig: Jacobi did not converge", max_sweeps);

  Vec w(n);
  for (int i = 0; i < n; ++i) w[i] = A(i, i);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) { return w[i] < w[j]; });

  EigResult r;
  r.eigenvalues.resize(n);
  r.basis = RealMatrix(n, n);
  for (int j = 0; j < n; ++j) {
    r.eigenvalues[j] = w[order[j]];
    for (int i = 0; i < n; ++i) r.basis(i, j) = V(i, order[j]);
  }
  return r;
}

inline double max_eigenvalue(const SymMatrix& S) { return sym_eig(S).eigenvalues.back(); }
inline double min_eigenvalue(const SymMatrix& S) { return sym_eig(S).eigenvalues.front(); }

/// Spectral norm of a symmetric matrix.
inline double sym_norm2(const SymMatrix& S) {
  const EigResult e = sym_eig(S);
  return std::max(std::abs(e.eigenvalues.front()), std::abs(e.eigenvalues.back()));
}

/// Spectral norm of a general matrix via the Gram matrix.
inline double spectral_norm(const RealMatrix& A) {
  if (A.rows == 0 || A.cols == 0) return 0.0;
  const bool tall = A.rows >= A.cols;
  const RealMatrix At = A.transposed();
  const SymMatrix G = tall ? SymMatrix::symmetrize(At * A) : SymMatrix::symmetrize(A * At);
  const double lmax = std::max(0.0, max_eigenvalue(G));
  return std::sqrt(lmax);
}

/// Strict negative definiteness: max eigenvalue < -tol.
inline bool is_neg_def(const SymMatrix& S, double tol) {
  if (tol < 0.0) throw NumericError("is_neg_def: tol must be >= 0");
  return max_eigenvalue(S) < -tol;
}

/// Scale-aware default strictness tolerance.
inline double definiteness_tol(const SymMatrix& S) {
  return 1e-9 * std::max(1.0, sym_norm2(S));
}

/// Cholesky factor L (lower) with S = L L^T, or nullopt if S is not
/// positive definite.
inline std::optional<RealMatrix> cholesky(const SymMatrix& S) {
  const int n = S.dim;
  RealMatrix L(n, n);
  for (int j = 0; j < n; ++j) {
    double d = S(j, j);
    for (int k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) return std::nullopt;
    const double ljj = std::sqrt(d);
    L(j, j) = ljj;
    for (int i = j + 1; i < n; ++i) {
      double s = S(i, j);
      for (int k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      L(i, j) = s / ljj;
    }
  }
  return L;
}

inline bool is_pos_def(const SymMatrix& S) { return cholesky(S).has_value(); }

/// Solve S x = b for SPD S via Cholesky.
inline Vec cholesky_solve(const RealMatrix& L, const Vec& b) {
  const int n = L.rows;
  Vec y(n), x(n);
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= L(i, k) * y[k];
    y[i] = s / L(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = y[i];
    for (int k = i + 1; k < n; ++k) s -= L(k, i) * x[k];
    x[i] = s / L(i, i);
  }
  return x;
}

}  // namespace certctl

#endif  // CERTCTL_EIG_HPP
