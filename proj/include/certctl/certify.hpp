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

#ifndef CERTCTL_CERTIFY_HPP
#define CERTCTL_CERTIFY_HPP

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "certctl/eig.hpp"
#include "certctl/koopman.hpp"
#include "certctl/lls.hpp"
#include "certctl/matrix.hpp"
#include "certctl/rng.hpp"

namespace certctl {

// ---------------------------------------------------------------------------
// Spectral radius and Lyapunov utilities
// ---------------------------------------------------------------------------

/// Upper estimate of the spectral radius via normalized repeated squaring
/// (Gelfand): |A^(2^m)|_F^(1/2^m) decreases to rho(A) from above.
inline double spectral_radius(const RealMatrix& A, int squarings = 30) {
  if (A.rows != A.cols) throw NumericError("spectral_radius: not square");
  if (A.rows == 0) return 0.0;
  RealMatrix B = A;
  double f = B.frobenius();
  if (f == 0.0) return 0.0;
  for (double& v : B.a) v /= f;
  double log_norm = std::log(f);
  double weight = 1.0;
  for (int j = 0; j < squarings; ++j) {
    B = B * B;
    const double g = B.frobenius();
    if (g == 0.0) return 0.0;
    for (double& v : B.a) v /= g;
    weight *= 0.5;
    log_norm = log_norm + weight * std::log(g);
  }
  return std::exp(log_norm);
}

/// Solve P A + A^T P = -Q for symmetric Q via the vectorized Kronecker
/// system. Small dimensions only (the latent models here are r <= 8).
inline SymMatrix lyapunov_continuous(const RealMatrix& A, const SymMatrix& Q) {
  const int n = A.rows;
  if (A.cols != n || Q.dim != n) throw NumericError("lyapunov_continuous: dimension mismatch");
  RealMatrix M(n * n, n * n);
  RealMatrix rhs(n * n, 1);
  auto idx = [n](int i, int j) { return i + j * n; };
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int eq = idx(i, j);
      for (int k = 0; k < n; ++k) {
        M(eq, idx(i, k)) += A(k, j);  // (P A)_{ij}
        M(eq, idx(k, j)) += A(k, i);  // (A^T P)_{ij}
      }
      rhs(eq, 0) = -Q(i, j);
    }
  }
  const RealMatrix p = lu_solve(M, rhs);
  RealMatrix P(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) P(i, j) = p(idx(i, j), 0);
  return SymMatrix::symmetrize(P);
}

// ---------------------------------------------------------------------------
// Koopman ISS certificate (discrete-time L2-gain LMI)
// ---------------------------------------------------------------------------

struct IssCertificate {
  SymMatrix P;
  double gamma = 0.0;   // certified gain
  double margin = 0.0;  // -max eigenvalue of the assembled LMI block
  double tol = 0.0;
  int solver_iterations = 0;
  double bracket_lo = 0.0, bracket_hi = 0.0;
};

/// Assemble the discrete-time gain LMI block
///   [ A^T P A - P + I    A^T P E          ]
///   [ E^T P A            E^T P E - g^2 I  ]
inline SymMatrix assemble_psi(const RealMatrix& A, const RealMatrix& E, const SymMatrix& P,
                              double gamma) {
  const int N = A.rows;
  const int k = E.cols;
  if (A.cols != N || P.dim != N || E.rows != N) throw NumericError("assemble_psi: dimension mismatch");

  const RealMatrix Pd = P.dense();
  const RealMatrix AtPA = A.transposed() * Pd * A;
  const RealMatrix AtPE = A.transposed() * Pd * E;
  const RealMatrix EtPE = E.transposed() * Pd * E;

  RealMatrix Psi(N + k, N + k);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      Psi(i, j) = AtPA(i, j) - P(i, j) + (i == j ? 1.0 : 0.0);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < k; ++j) {
      Psi(i, N + j) = AtPE(i, j);
      Psi(N + j, i) = AtPE(i, j);
    }
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      Psi(N + i, N + j) = EtPE(i, j) - (i == j ? gamma * gamma : 0.0);
  return SymMatrix::symmetrize(Psi);
}

struct IssCheck {
  bool feasible = false;
  double margin = 0.0;
};

inline IssCheck check_iss(const RealMatrix& A, const RealMatrix& E, const SymMatrix& P,
                          double gamma, double tol) {
  IssCheck r;
  if (!is_pos_def(P)) return r;
  const SymMatrix Psi = assemble_psi(A, E, P, gamma);
  r.margin = -max_eigenvalue(Psi);
  r.feasible = is_neg_def(Psi, tol);
  return r;
}

namespace detail {

/// Schur stability by Lyapunov doubling: P_{j+1} = P_j + B_j^T P_j B_j with
/// B_j = A^(2^j) either vanishes or blows up doubly exponentially, so even
/// spectral radii within 1e-6 of the unit circle resolve in ~25 squarings.
inline bool lyapunov_stable(const RealMatrix& A) {
  RealMatrix B = A;
  SymMatrix S = SymMatrix::identity(A.rows);
  for (int it = 0; it < 80; ++it) {
    S = SymMatrix::symmetrize(S.dense() + B.transposed() * S.dense() * B);
    if (!S.dense().finite() || S.frobenius() > 1e14) return false;
    B = B * B;
    const double bn = B.frobenius();
    if (bn < 1e-12) return true;
    if (!B.finite() || bn > 1e150) return false;
  }
  return true;
}

/// Bounded-real Riccati fixed point: iterate
///   P <- A^T P A + (1+inflate) I + A^T P E (g^2 I - E^T P E)^{-1} E^T P A
/// from P = 0. Convergence with g^2 I - E^T P E > 0 throughout certifies
/// feasibility of the gain LMI at gamma; divergence, loss of definiteness or
/// hitting the iteration cap is treated as infeasible at this gamma.
inline std::optional<SymMatrix> bounded_real_probe(const RealMatrix& A, const RealMatrix& E,
                                                   double gamma, double inflate,
                                                   int max_iters = 0) {
  const int N = A.rows;
  const int k = E.cols;
  const double g2 = gamma * gamma;
  const bool no_dist = (k == 0) || (E.frobenius() == 0.0);
  if (!no_dist && !(gamma > 0.0)) return std::nullopt;
  if (max_iters <= 0) {
    // the fixed point converges at rate rho(A)^2; scale the cap to the
    // spectral gap so slow stable modes are not misread as infeasible
    const double rho = std::min(spectral_radius(A), 1.0 - 1e-7);
    max_iters = static_cast<int>(std::min(2e6, std::max(4e4, 35.0 / (1.0 - rho * rho))));
  }

  SymMatrix P(N);
  const RealMatrix At = A.transposed();
  for (int it = 0; it < max_iters; ++it) {
    RealMatrix next = At * P.dense() * A;
    for (int i = 0; i < N; ++i) next(i, i) += 1.0 + inflate;

    if (!no_dist) {
      SymMatrix Mid(k);
      const RealMatrix EtPE = E.transposed() * P.dense() * E;
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) Mid(i, j) = (i == j ? g2 : 0.0) - EtPE(i, j);
      Mid = SymMatrix::symmetrize(Mid.dense());
      const auto L = cholesky(Mid);
      if (!L) return std::nullopt;
      const RealMatrix EtPA = E.transposed() * P.dense() * A;
      RealMatrix MinvEtPA(k, N);
      Vec col(k);
      for (int j = 0; j < N; ++j) {
        for (int i = 0; i < k; ++i) col[i] = EtPA(i, j);
        const Vec s = cholesky_solve(*L, col);
        for (int i = 0; i < k; ++i) MinvEtPA(i, j) = s[i];
      }
      next = next + EtPA.transposed() * MinvEtPA;
    }

    const SymMatrix Pn = SymMatrix::symmetrize(next);
    if (!Pn.dense().finite() || Pn.frobenius() > 1e14) return std::nullopt;
    double diff = 0.0;
    for (size_t i = 0; i < Pn.a.size(); ++i) diff = std::max(diff, std::abs(Pn.a[i] - P.a[i]));
    P = Pn;
    if (diff <= 1e-13 * std::max(1.0, P.frobenius())) return P;
  }
  return std::nullopt;
}

}  // namespace detail

struct GainResult {
  bool feasible = false;
  std::string reason;
  double gamma_star = 0.0;  // bisection optimum
  IssCertificate cert;      // strictly feasible pair at (1 + 10 tol) gamma_star
};

/// Certificate at a prescribed (suboptimal) gain: larger gamma buys a larger
/// dissipation margin and a milder P than the near-optimal pair.
inline std::optional<IssCertificate> certificate_at(const RealMatrix& A, const RealMatrix& E,
                                                    double gamma, double inflate = 0.02) {
  const auto P = detail::bounded_real_probe(A, E, gamma, inflate);
  if (!P) return std::nullopt;
  const SymMatrix Psi = assemble_psi(A, E, *P, gamma);
  IssCertificate c;
  c.P = *P;
  c.gamma = gamma;
  c.tol = definiteness_tol(Psi);
  c.margin = -max_eigenvalue(Psi);
  if (!(c.margin > c.tol)) return std::nullopt;
  return c;
}

/// Minimize the certified L2 gain by bisection over gamma with the
/// bounded-real Riccati probe deciding feasibility at each candidate.
inline GainResult optimal_gain(const RealMatrix& A, const RealMatrix& E,
                               double tol_bisect = 1e-6) {
  GainResult out;
  const int N = A.rows;
  if (A.cols != N || E.rows != N) throw NumericError("optimal_gain: dimension mismatch");

  if (!detail::lyapunov_stable(A)) {
    out.reason = "unstable A_K (spectral radius >= 1)";
    return out;
  }
  const double rho = spectral_radius(A);

  const double e_norm = spectral_norm(E);
  int iters = 0;

  auto finalize = [&](double gamma_star) -> GainResult {
    out.feasible = true;
    out.gamma_star = gamma_star;
    // the floor keeps gamma^2 above the definiteness tolerance when the
    // disturbance channel vanishes
    const double floor_gamma = std::max(10.0 * tol_bisect, 1e-4);
    // escalate away from the boundary: both the gain slack and the output
    // inflation grow together, so the margin outruns the scale-aware
    // strictness tolerance even when |P| is large (slow stable modes)
    int attempt = 0;
    for (double rel : {10.0 * tol_bisect, 1e-4, 1e-3, 3e-3, 1e-2, 3e-2}) {
      ++attempt;
      const double gamma_cert =
          std::max(gamma_star == 0.0 ? floor_gamma * attempt : (1.0 + rel) * gamma_star,
                   floor_gamma);
      const double inflate = std::max(rel, 5.0 * tol_bisect);
      const auto P = detail::bounded_real_probe(A, E, gamma_cert, inflate, 2000000);
      if (P) {
        const double tol = definiteness_tol(assemble_psi(A, E, *P, gamma_cert));
        const IssCheck chk = check_iss(A, E, *P, gamma_cert, tol);
        if (chk.feasible) {
          out.cert.P = *P;
          out.cert.gamma = gamma_cert;
          out.cert.margin = chk.margin;
          out.cert.tol = tol;
          out.cert.solver_iterations = iters;
          return out;
        }
      }
    }
    out.feasible = false;
    out.reason = "certificate refinement failed";
    return out;
  };

  if (e_norm == 0.0) {
    // no disturbance channel: the gain vanishes
    return finalize(0.0);
  }

  double lo = 0.0;
  double hi = 10.0 * e_norm / std::max(1e-12, 1.0 - std::min(rho, 1.0 - 1e-12));
  bool hi_ok = false;
  for (int expand = 0; expand < 60; ++expand) {
    ++iters;
    if (detail::bounded_real_probe(A, E, hi, 0.0)) {
      hi_ok = true;
      break;
    }
    lo = hi;
    hi *= 4.0;
  }
  if (!hi_ok) {
    out.reason = "no feasible gain found within bracket expansion";
    return out;
  }
  out.cert.bracket_lo = lo;
  out.cert.bracket_hi = hi;

  while (hi - lo > tol_bisect * hi) {
    const double mid = 0.5 * (lo + hi);
    ++iters;
    if (detail::bounded_real_probe(A, E, mid, 0.0))
      hi = mid;
    else
      lo = mid;
  }
  return finalize(hi);
}

// ---------------------------------------------------------------------------
// CSODE certificate (continuous-time sector LMI, implemented as printed)
// ---------------------------------------------------------------------------

struct CsodeCertificate {
  SymMatrix P;
  double lambda = 0.0;
  double kappa = 0.0;
  double gamma_nn = 0.0;
  double delta_b = 0.0;  // bundle slack at convergence
  double margin = 0.0;
  double tol = 0.0;
};

/// Assemble the sector LMI block
///   [ He(P A) + l k I + P     -l I + P A^T ]
///   [ -l I + A P              -2 l k^{-1} I ]
inline SymMatrix assemble_omega(const RealMatrix& A, const SymMatrix& P, double lambda,
                                double kappa) {
  const int r = A.rows;
  if (A.cols != r || P.dim != r) throw NumericError("assemble_omega: dimension mismatch");
  if (!(lambda > 0.0) || !(kappa > 0.0))
    throw NumericError("assemble_omega: lambda and kappa must be > 0");

  const RealMatrix Pd = P.dense();
  const RealMatrix PA = Pd * A;
  const RealMatrix PAt = Pd * A.transposed();

  RealMatrix Om(2 * r, 2 * r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j) {
      Om(i, j) = PA(i, j) + PA(j, i) + (i == j ? lambda * kappa : 0.0) + P(i, j);
      Om(i, r + j) = (i == j ? -lambda : 0.0) + PAt(i, j);
      Om(r + i, j) = (i == j ? -lambda : 0.0) + PAt(j, i);
      Om(r + i, r + j) = (i == j ? -2.0 * lambda / kappa : 0.0);
    }
  return SymMatrix::symmetrize(Om);
}

/// Theorem gain: sqrt(lambda_max(P)/lambda_min(P)) for positive definite P.
inline double nn_gain(const SymMatrix& P) {
  const EigResult e = sym_eig(P);
  if (!(e.eigenvalues.front() > 0.0)) throw NumericError("nn_gain: P not positive definite");
  return std::sqrt(e.eigenvalues.back() / e.eigenvalues.front());
}

struct CsodeSynthResult {
  bool feasible = false;
  std::string reason;
  CsodeCertificate cert;
  double best_margin = -1e300;  // least-positive max eigenvalue seen (negated)
};

struct CsodeGridSpec {
  int n_q = 25;
  int n_lambda = 33;
  double q_lo = 1e-3, q_hi = 1e3;
  double lambda_lo = 1e-4, lambda_hi = 1e4;
};

/// Candidate search: P solves the Lyapunov equation He(P A) = -q I on a log
/// grid of q (so P scales linearly with q), lambda on its own log grid; the
/// best-margin feasible pair wins.
inline CsodeSynthResult synthesize_csode_cert(const RealMatrix& A, double kappa,
                                              const CsodeGridSpec& grid = {}) {
  CsodeSynthResult out;
  const int r = A.rows;
  SymMatrix P1(r);
  try {
    P1 = lyapunov_continuous(A, SymMatrix::identity(r));
  } catch (const NumericError&) {
    out.reason = "Lyapunov equation singular; A_theta is not Hurwitz";
    return out;
  }
  if (!is_pos_def(P1)) {
    out.reason = "Lyapunov candidate not positive definite; A_theta is not Hurwitz";
    return out;
  }

  auto log_grid = [](double lo, double hi, int n) {
    Vec g(n);
    for (int i = 0; i < n; ++i)
      g[i] = lo * std::pow(hi / lo, n > 1 ? static_cast<double>(i) / (n - 1) : 0.0);
    return g;
  };

  // Omega is jointly linear in (P, lambda), so margins scale with q; rank
  // candidates by the scale-invariant margin/q and normalize the winner to
  // lambda_min(P) = 1 so the certificate's quadratic form stays mild.
  double best_rel = -1e300;
  double sel_q = 0.0, sel_lambda = 0.0;
  for (double q : log_grid(grid.q_lo, grid.q_hi, grid.n_q)) {
    const SymMatrix P = P1.scaled(q);
    for (double lambda : log_grid(grid.lambda_lo, grid.lambda_hi, grid.n_lambda)) {
      const SymMatrix Om = assemble_omega(A, P, lambda, kappa);
      const double margin = -max_eigenvalue(Om);
      if (margin / q > out.best_margin) out.best_margin = margin / q;
      const double tol = definiteness_tol(Om);
      if (margin > tol && margin / q > best_rel) {
        best_rel = margin / q;
        sel_q = q;
        sel_lambda = lambda;
        out.feasible = true;
      }
    }
  }
  if (!out.feasible) {
    out.reason = "grid exhausted without a feasible (q, lambda) pair";
    return out;
  }
  SymMatrix P = P1.scaled(sel_q);
  const double lmin = min_eigenvalue(P);
  P = P.scaled(1.0 / lmin);
  const double lambda = sel_lambda / lmin;
  const SymMatrix Om = assemble_omega(A, P, lambda, kappa);
  out.cert.P = P;
  out.cert.lambda = lambda;
  out.cert.kappa = kappa;
  out.cert.margin = -max_eigenvalue(Om);
  out.cert.tol = definiteness_tol(Om);
  out.cert.gamma_nn = nn_gain(P);
  if (!(out.cert.margin > out.cert.tol)) {
    out.feasible = false;
    out.reason = "normalized certificate lost strict feasibility";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sector verification
// ---------------------------------------------------------------------------

struct SectorReport {
  double kappa = 0.0;
  long samples_checked = 0;
  double min_margin = 0.0;
  long violations = 0;
};

struct SectorSampleSpec {
  Vec z_lo, z_hi;
  Vec xi_lo, xi_hi;  // may be empty when there is no extrinsic input
  long count = 100000;
};

/// Evaluate the quadratic sector form phi^T (z - phi/kappa) on a Halton
/// sample of the (z, xi) box; a sample violates when the form dips below
/// -1e-9.
inline SectorReport verify_sector(
    const std::function<Vec(const Vec& z, const Vec& xi)>& phi, double kappa,
    const SectorSampleSpec& spec) {
  if (!(kappa > 0.0)) throw NumericError("verify_sector: kappa must be > 0");
  const int rz = static_cast<int>(spec.z_lo.size());
  const int rxi = static_cast<int>(spec.xi_lo.size());
  SectorReport rep;
  rep.kappa = kappa;
  rep.min_margin = 1e300;

  for (long s = 0; s < spec.count; ++s) {
    const Vec h = halton_point(static_cast<uint64_t>(s), rz + rxi);
    Vec z(rz), xi(rxi);
    for (int i = 0; i < rz; ++i) z[i] = spec.z_lo[i] + (spec.z_hi[i] - spec.z_lo[i]) * h[i];
    for (int i = 0; i < rxi; ++i)
      xi[i] = spec.xi_lo[i] + (spec.xi_hi[i] - spec.xi_lo[i]) * h[rz + i];
    const Vec p = phi(z, xi);
    double form = 0.0;
    for (int i = 0; i < rz; ++i) form += p[i] * (z[i] - p[i] / kappa);
    rep.min_margin = std::min(rep.min_margin, form);
    if (form < -1e-9) ++rep.violations;
    ++rep.samples_checked;
  }
  if (rep.samples_checked == 0) rep.min_margin = 0.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Empirical dissipation rate
// ---------------------------------------------------------------------------

/// Fraction of steps satisfying the certified dissipation inequality
///   V(e_{k+1}) - V(e_k) <= -|e_k|^2 + gamma^2 |w_k|^2 + tol,  V(e) = e^T P e.
inline double empirical_iss_rate(const std::vector<Vec>& errors, const std::vector<Vec>& dists,
                                 const SymMatrix& P, double gamma, double tol = 1e-9) {
  const size_t steps = std::min(errors.size() > 0 ? errors.size() - 1 : 0, dists.size());
  if (steps == 0) return 1.0;
  auto V = [&](const Vec& e) { return dot(e, matvec(P.dense(), e)); };
  size_t ok = 0;
  for (size_t k = 0; k < steps; ++k) {
    const double lhs = V(errors[k + 1]) - V(errors[k]);
    const double rhs = -dot(errors[k], errors[k]) + gamma * gamma * dot(dists[k], dists[k]);
    if (lhs <= rhs + tol) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(steps);
}

// ---------------------------------------------------------------------------
// Re-identification ladder
// ---------------------------------------------------------------------------

struct RecertifyResult {
  bool success = false;
  KoopmanModel model;
  GainResult gain;
  std::vector<std::pair<double, std::string>> ladder;  // (rho, diagnosis)
};

/// Fit; if the certificate is infeasible or the optimal gain exceeds
/// gamma_max, double the ridge weight and refit, until success or the ladder
/// runs past rho_max.
inline RecertifyResult recertify_loop(const SnapshotDataset& data, const Dictionary& dict,
                                      double gamma_max, double rho0, double rho_max,
                                      double tol_bisect = 1e-6) {
  if (!(rho0 > 0.0)) throw NumericError("recertify_loop: rho0 must be > 0");
  RecertifyResult out;
  for (double rho = rho0; rho <= rho_max; rho *= 2.0) {
    const KoopmanModel model = edmd_fit(data, dict, rho);
    const GainResult gain = optimal_gain(model.A, model.E, tol_bisect);
    if (!gain.feasible) {
      out.ladder.emplace_back(rho, gain.reason);
      continue;
    }
    if (gain.gamma_star > gamma_max) {
      out.ladder.emplace_back(rho, "gamma_star " + format_double(gain.gamma_star) +
                                       " exceeds gamma_max " + format_double(gamma_max));
      continue;
    }
    out.ladder.emplace_back(rho, "feasible");
    out.success = true;
    out.model = model;
    out.gain = gain;
    return out;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Certificate-derived constants for the rollout variance bound
// ---------------------------------------------------------------------------

struct IssConstants {
  double c1 = 0.0;     // condition-number root of P (equals the gain formula)
  double alpha = 0.0;  // decay rate margin/(2 lambda_max(P))
  double gamma = 0.0;
};

inline IssConstants derive_constants(const SymMatrix& P, double margin, double gamma) {
  const EigResult e = sym_eig(P);
  IssConstants c;
  c.c1 = std::sqrt(e.eigenvalues.back() / e.eigenvalues.front());
  c.alpha = margin / (2.0 * e.eigenvalues.back());
  c.gamma = gamma;
  return c;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline nlohmann::json sym_to_json(const SymMatrix& S) {
  return nlohmann::json{{"dim", S.dim}, {"data", S.a}};
}

inline SymMatrix sym_from_json(const nlohmann::json& j) {
  SymMatrix s(j.at("dim").get<int>());
  s.a = j.at("data").get<Vec>();
  return s;
}

inline nlohmann::json iss_cert_to_json(const IssCertificate& c) {
  return nlohmann::json{{"kind", "iss_certificate"},
                        {"P", sym_to_json(c.P)},
                        {"gamma", c.gamma},
                        {"margin", c.margin},
                        {"tol", c.tol},
                        {"solver_iterations", c.solver_iterations},
                        {"bracket", {c.bracket_lo, c.bracket_hi}}};
}

inline IssCertificate iss_cert_from_json(const nlohmann::json& j) {
  IssCertificate c;
  c.P = sym_from_json(j.at("P"));
  c.gamma = j.at("gamma").get<double>();
  c.margin = j.at("margin").get<double>();
  c.tol = j.at("tol").get<double>();
  c.solver_iterations = j.at("solver_iterations").get<int>();
  c.bracket_lo = j.at("bracket")[0].get<double>();
  c.bracket_hi = j.at("bracket")[1].get<double>();
  return c;
}

inline nlohmann::json csode_cert_to_json(const CsodeCertificate& c) {
  return nlohmann::json{{"kind", "csode_certificate"}, {"P", sym_to_json(c.P)},
                        {"lambda", c.lambda},          {"kappa", c.kappa},
                        {"gamma_nn", c.gamma_nn},      {"delta_b", c.delta_b},
                        {"margin", c.margin},          {"tol", c.tol}};
}

inline CsodeCertificate csode_cert_from_json(const nlohmann::json& j) {
  CsodeCertificate c;
  c.P = sym_from_json(j.at("P"));
  c.lambda = j.at("lambda").get<double>();
  c.kappa = j.at("kappa").get<double>();
  c.gamma_nn = j.at("gamma_nn").get<double>();
  c.delta_b = j.at("delta_b").get<double>();
  c.margin = j.at("margin").get<double>();
  c.tol = j.at("tol").get<double>();
  return c;
}

}  // namespace certctl

#endif  // CERTCTL_CERTIFY_HPP
