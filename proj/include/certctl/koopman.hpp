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

#ifndef CERTCTL_KOOPMAN_HPP
#define CERTCTL_KOOPMAN_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "certctl/lls.hpp"
#include "certctl/matrix.hpp"
#include "certctl/plants.hpp"
#include "certctl/rng.hpp"

namespace certctl {

// ---------------------------------------------------------------------------
// Observable dictionary
// ---------------------------------------------------------------------------

struct Observable {
  enum class Kind { Monomial, Rbf };
  Kind kind = Kind::Monomial;
  std::vector<int> powers;  // multi-index over state coordinates
  Vec center;               // RBF center
  double width = 1.0;       // RBF width sigma

  int degree() const {
    int d = 0;
    for (int p : powers) d += p;
    return d;
  }

  bool operator==(const Observable& o) const {
    if (kind != o.kind) return false;
    if (kind == Kind::Monomial) return powers == o.powers;
    return center == o.center && width == o.width;
  }
};

/// Ordered observable list. The first n entries are always the identity
/// coordinates x_1..x_n, which guarantees an exact linear projection from
/// the lifted state back to the state.
struct Dictionary {
  int state_dim = 0;
  std::vector<Observable> observables;

  int size() const { return static_cast<int>(observables.size()); }

  static Dictionary identity(int n) {
    Dictionary d;
    d.state_dim = n;
    for (int i = 0; i < n; ++i) {
      Observable o;
      o.powers.assign(n, 0);
      o.powers[i] = 1;
      d.observables.push_back(o);
    }
    return d;
  }

  void add(const Observable& o) {
    for (const Observable& e : observables)
      if (e == o) throw NumericError("Dictionary: duplicate observable");
    observables.push_back(o);
  }

  void add_monomial(const std::vector<int>& powers) {
    Observable o;
    o.powers = powers;
    add(o);
  }

  void add_rbf(const Vec& center, double width) {
    if (!(width > 0.0)) throw NumericError("Dictionary: RBF width must be > 0");
    Observable o;
    o.kind = Observable::Kind::Rbf;
    o.powers.assign(state_dim, 0);
    o.center = center;
    o.width = width;
    add(o);
  }
};

inline double eval_observable(const Observable& o, const Vec& x) {
  if (o.kind == Observable::Kind::Monomial) {
    double v = 1.0;
    for (size_t i = 0; i < o.powers.size(); ++i)
      for (int p = 0; p < o.powers[i]; ++p) v *= x[i];
    return v;
  }
  double d2 = 0.0;
  for (size_t i = 0; i < o.center.size(); ++i) {
    const double d = x[i] - o.center[i];
    d2 += d * d;
  }
  return std::exp(-d2 / (2.0 * o.width * o.width));
}

inline Vec lift(const Dictionary& dict, const Vec& x) {
  if (static_cast<int>(x.size()) != dict.state_dim)
    throw NumericError("lift: state dimension mismatch");
  Vec z(dict.size());
  for (int i = 0; i < dict.size(); ++i) z[i] = eval_observable(dict.observables[i], x);
  return z;
}

/// All monomial multi-indices with total degree in [1, max_degree],
/// graded-lexicographic order (identity coordinates come first).
inline std::vector<std::vector<int>> monomials_up_to(int n, int max_degree) {
  std::vector<std::vector<int>> out;
  std::vector<int> idx(n, 0);
  for (int deg = 1; deg <= max_degree; ++deg) {
    // enumerate compositions of deg into n parts
    std::function<void(int, int)> rec = [&](int pos, int remaining) {
      if (pos == n - 1) {
        idx[pos] = remaining;
        out.push_back(idx);
        return;
      }
      for (int p = remaining; p >= 0; --p) {
        idx[pos] = p;
        rec(pos + 1, remaining - p);
      }
    };
    rec(0, deg);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Snapshot data
// ---------------------------------------------------------------------------

struct SnapshotDataset {
  int n = 0, m = 0, k = 0;
  double dt = 0.02;
  std::vector<Vec> x, u, w, x_next;

  size_t size() const { return x.size(); }

  void push(const Vec& xk, const Vec& uk, const Vec& wk, const Vec& xk1) {
    if (!all_finite(xk) || !all_finite(xk1) || !all_finite(uk) || !all_finite(wk))
      throw NumericError("SnapshotDataset: non-finite snapshot");
    x.push_back(xk);
    u.push_back(uk);
    w.push_back(wk);
    x_next.push_back(xk1);
  }

  static SnapshotDataset from_trajectories(const std::vector<Trajectory>& trs, double dt) {
    SnapshotDataset d;
    d.dt = dt;
    for (const Trajectory& tr : trs) {
      if (tr.failed || tr.u.empty()) continue;
      if (d.n == 0) {
        d.n = static_cast<int>(tr.x[0].size());
        d.m = static_cast<int>(tr.u[0].size());
        d.k = static_cast<int>(tr.w[0].size());
      }
      for (size_t i = 0; i < tr.u.size(); ++i) d.push(tr.x[i], tr.u[i], tr.w[i], tr.x[i + 1]);
    }
    return d;
  }
};

// ---------------------------------------------------------------------------
// EDMD
// ---------------------------------------------------------------------------

struct KoopmanModel {
  Dictionary dict;
  RealMatrix A;  // N x N
  RealMatrix B;  // N x m
  RealMatrix E;  // N x k
  double residual_eps = 0.0;
  double ridge_rho = 0.0;
  double dt = 0.02;

  int lifted_dim() const { return dict.size(); }

  Vec step(const Vec& z, const Vec& u, const Vec& w) const {
    Vec zn = matvec(A, z);
    axpy(1.0, matvec(B, u), zn);
    if (!w.empty()) axpy(1.0, matvec(E, w), zn);
    return zn;
  }

  /// State recovery: the identity prefix of the lifted vector.
  Vec project(const Vec& z) const { return Vec(z.begin(), z.begin() + dict.state_dim); }
};

inline double model_residual(const KoopmanModel& model, const SnapshotDataset& data) {
  if (data.size() == 0) return 0.0;
  double acc = 0.0;
  for (size_t i = 0; i < data.size(); ++i) {
    const Vec z = lift(model.dict, data.x[i]);
    const Vec zn = lift(model.dict, data.x_next[i]);
    const Vec pred = model.step(z, data.u[i], data.w[i]);
    double e2 = 0.0;
    for (size_t j = 0; j < zn.size(); ++j) {
      const double e = zn[j] - pred[j];
      e2 += e * e;
    }
    acc += e2;
  }
  return std::sqrt(acc / data.size());
}

/// One-step residual restricted to the identity (state) components. Nested
/// dictionaries share these target rows, so enlarging the dictionary can
/// only shrink this quantity; the full lifted residual has no such
/// comparability across dictionary sizes.
inline double state_residual(const KoopmanModel& model, const SnapshotDataset& data) {
  if (data.size() == 0) return 0.0;
  const int n = model.dict.state_dim;
  double acc = 0.0;
  for (size_t i = 0; i < data.size(); ++i) {
    const Vec z = lift(model.dict, data.x[i]);
    const Vec pred = model.step(z, data.u[i], data.w[i]);
    for (int j = 0; j < n; ++j) {
      const double e = data.x_next[i][j] - pred[j];
      acc += e * e;
    }
  }
  return std::sqrt(acc / data.size());
}

/// Least-squares identification of the lifted linear model over snapshot
/// pairs; the disturbance channel is taken from the simulation log.
inline KoopmanModel edmd_fit(const SnapshotDataset& data, const Dictionary& dict, double rho) {
  const int N = dict.size();
  const int cols = N + data.m + data.k;
  if (static_cast<int>(data.size()) < cols)
    throw NumericError("edmd_fit: need at least " + std::to_string(cols) +
                           " snapshot pairs, got " + std::to_string(data.size()),
                       cols);

  RealMatrix G(static_cast<int>(data.size()), cols);
  RealMatrix Znext(static_cast<int>(data.size()), N);
  for (size_t r = 0; r < data.size(); ++r) {
    const Vec z = lift(dict, data.x[r]);
    const Vec zn = lift(dict, data.x_next[r]);
    int c = 0;
    for (double v : z) G(static_cast<int>(r), c++) = v;
    for (double v : data.u[r]) G(static_cast<int>(r), c++) = v;
    for (double v : data.w[r]) G(static_cast<int>(r), c++) = v;
    for (int j = 0; j < N; ++j) Znext(static_cast<int>(r), j) = zn[j];
  }

  const RealMatrix Theta = ridge_lls(G, Znext, rho);  // cols x N

  KoopmanModel model;
  model.dict = dict;
  model.ridge_rho = rho;
  model.dt = data.dt;
  model.A = RealMatrix(N, N);
  model.B = RealMatrix(N, data.m);
  model.E = RealMatrix(N, data.k);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) model.A(i, j) = Theta(j, i);
    for (int j = 0; j < data.m; ++j) model.B(i, j) = Theta(N + j, i);
    for (int j = 0; j < data.k; ++j) model.E(i, j) = Theta(N + data.m + j, i);
  }
  model.residual_eps = model_residual(model, data);
  return model;
}

// ---------------------------------------------------------------------------
// SINDy-style sequential thresholded least squares over candidate monomials
// ---------------------------------------------------------------------------

/// Regress finite-difference state derivatives on candidate monomials (with
/// control and disturbance as auxiliary, never-thresholded regressors); zero
/// small coefficients, refit on survivors, repeat. Identity coordinates are
/// always part of the returned list.
inline std::vector<std::vector<int>> stls_select(const std::vector<std::vector<int>>& candidates,
                                                 const SnapshotDataset& data, double threshold,
                                                 int iterations = 10) {
  if (candidates.empty()) throw NumericError("stls_select: no candidates");
  if (!(threshold >= 0.0)) throw NumericError("stls_select: threshold must be >= 0");
  const int n = data.n;
  const int nc = static_cast<int>(candidates.size());
  const int naux = data.m + data.k;
  const int rows = static_cast<int>(data.size());

  RealMatrix D(rows, n);
  for (int r = 0; r < rows; ++r)
    for (int j = 0; j < n; ++j) D(r, j) = (data.x_next[r][j] - data.x[r][j]) / data.dt;

  std::vector<bool> active(nc, true);
  std::vector<double> best_coeff(nc, 0.0);

  for (int it = 0; it < iterations; ++it) {
    std::vector<int> cols;
    for (int c = 0; c < nc; ++c)
      if (active[c]) cols.push_back(c);
    if (cols.empty()) break;

    RealMatrix F(rows, static_cast<int>(cols.size()) + naux);
    for (int r = 0; r < rows; ++r) {
      for (size_t ci = 0; ci < cols.size(); ++ci) {
        Observable o;
        o.powers = candidates[cols[ci]];
        F(r, static_cast<int>(ci)) = eval_observable(o, data.x[r]);
      }
      int c = static_cast<int>(cols.size());
      for (double v : data.u[r]) F(r, c++) = v;
      for (double v : data.w[r]) F(r, c++) = v;
    }

    const RealMatrix C = ridge_lls(F, D, 1e-10);
    bool changed = false;
    for (size_t ci = 0; ci < cols.size(); ++ci) {
      double mag = 0.0;
      for (int j = 0; j < n; ++j) mag = std::max(mag, std::abs(C(static_cast<int>(ci), j)));
      best_coeff[cols[ci]] = mag;
      if (mag < threshold) {
        active[cols[ci]] = false;
        changed = true;
      }
    }
    if (!changed) break;
  }

  std::vector<std::vector<int>> survivors;
  for (int c = 0; c < nc; ++c)
    if (active[c]) survivors.push_back(candidates[c]);
  if (survivors.empty())
    throw NumericError("stls_select: threshold eliminated every candidate; lower the threshold");

  // identity coordinates are prepended if thresholding removed them
  std::vector<std::vector<int>> out;
  for (int i = 0; i < n; ++i) {
    std::vector<int> id(n, 0);
    id[i] = 1;
    if (std::find(survivors.begin(), survivors.end(), id) == survivors.end()) out.push_back(id);
  }
  out.insert(out.end(), survivors.begin(), survivors.end());
  return out;
}

// ---------------------------------------------------------------------------
// RBF center selection (k-means over training states)
// ---------------------------------------------------------------------------

inline std::vector<Vec> kmeans_centers(const std::vector<Vec>& points, int k, uint64_t seed,
                                       int iterations = 30) {
  if (points.empty() || k <= 0) throw NumericError("kmeans_centers: empty input");
  RngStream rng = RngStream(seed).split(0x63656eULL);
  const int n = static_cast<int>(points[0].size());
  std::vector<Vec> centers;
  for (int i = 0; i < k; ++i) centers.push_back(points[rng.uniform_int(static_cast<int>(points.size()))]);

  std::vector<int> assign(points.size(), 0);
  for (int it = 0; it < iterations; ++it) {
    for (size_t p = 0; p < points.size(); ++p) {
      double best = 1e300;
      for (int c = 0; c < k; ++c) {
        double d2 = 0.0;
        for (int j = 0; j < n; ++j) {
          const double d = points[p][j] - centers[c][j];
          d2 += d * d;
        }
        if (d2 < best) {
          best = d2;
          assign[p] = c;
        }
      }
    }
    for (int c = 0; c < k; ++c) {
      Vec mean(n, 0.0);
      int count = 0;
      for (size_t p = 0; p < points.size(); ++p) {
        if (assign[p] != c) continue;
        axpy(1.0, points[p], mean);
        ++count;
      }
      if (count > 0)
        for (double& v : mean) v /= count;
      else
        mean = points[rng.uniform_int(static_cast<int>(points.size()))];
      centers[c] = mean;
    }
  }
  return centers;
}

inline double median_pairwise_distance(const std::vector<Vec>& centers) {
  Vec dists;
  for (size_t i = 0; i < centers.size(); ++i)
    for (size_t j = i + 1; j < centers.size(); ++j) {
      double d2 = 0.0;
      for (size_t c = 0; c < centers[i].size(); ++c) {
        const double d = centers[i][c] - centers[j][c];
        d2 += d * d;
      }
      dists.push_back(std::sqrt(d2));
    }
  if (dists.empty()) return 1.0;
  std::sort(dists.begin(), dists.end());
  return dists[dists.size() / 2];
}

struct DictionaryConfig {
  int max_degree = 3;
  double stls_threshold = 0.05;
  int stls_iterations = 10;
  int n_rbf = 8;
  uint64_t seed = 0;
};

/// Two-stage default dictionary: STLS-selected monomials up to max_degree,
/// then RBFs at k-means centers with the median pairwise center distance as
/// the shared width.
inline Dictionary build_dictionary(const SnapshotDataset& data, const DictionaryConfig& cfg) {
  Dictionary dict = Dictionary::identity(data.n);
  const auto selected =
      stls_select(monomials_up_to(data.n, cfg.max_degree), data, cfg.stls_threshold,
                  cfg.stls_iterations);
  for (const auto& powers : selected) {
    Observable o;
    o.powers = powers;
    bool dup = false;
    for (const Observable& e : dict.observables)
      if (e == o) dup = true;
    if (!dup) dict.add(o);
  }
  if (cfg.n_rbf > 0) {
    const auto centers = kmeans_centers(data.x, cfg.n_rbf, cfg.seed);
    const double width = std::max(1e-6, median_pairwise_distance(centers));
    for (const Vec& c : centers) dict.add_rbf(c, width);
  }
  return dict;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline nlohmann::json matrix_to_json(const RealMatrix& m) {
  return nlohmann::json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.a}};
}

inline RealMatrix matrix_from_json(const nlohmann::json& j) {
  RealMatrix m(j.at("rows").get<int>(), j.at("cols").get<int>());
  m.a = j.at("data").get<Vec>();
  if (m.a.size() != static_cast<size_t>(m.rows) * m.cols)
    throw NumericError("matrix_from_json: size mismatch");
  return m;
}

inline nlohmann::json dictionary_to_json(const Dictionary& d) {
  nlohmann::json obs = nlohmann::json::array();
  for (const Observable& o : d.observables) {
    if (o.kind == Observable::Kind::Monomial)
      obs.push_back({{"type", "monomial"}, {"powers", o.powers}});
    else
      obs.push_back({{"type", "rbf"}, {"center", o.center}, {"width", o.width}});
  }
  return nlohmann::json{{"state_dim", d.state_dim}, {"observables", obs}};
}

inline Dictionary dictionary_from_json(const nlohmann::json& j) {
  Dictionary d;
  d.state_dim = j.at("state_dim").get<int>();
  for (const auto& jo : j.at("observables")) {
    Observable o;
    if (jo.at("type") == "monomial") {
      o.powers = jo.at("powers").get<std::vector<int>>();
    } else {
      o.kind = Observable::Kind::Rbf;
      o.powers.assign(d.state_dim, 0);
      o.center = jo.at("center").get<Vec>();
      o.width = jo.at("width").get<double>();
    }
    d.observables.push_back(o);
  }
  return d;
}

inline nlohmann::json koopman_to_json(const KoopmanModel& m) {
  return nlohmann::json{{"kind", "koopman"},
                        {"dictionary", dictionary_to_json(m.dict)},
                        {"A", matrix_to_json(m.A)},
                        {"B", matrix_to_json(m.B)},
                        {"E", matrix_to_json(m.E)},
                        {"residual_eps", m.residual_eps},
                        {"ridge_rho", m.ridge_rho},
                        {"dt", m.dt}};
}

inline KoopmanModel koopman_from_json(const nlohmann::json& j) {
  KoopmanModel m;
  m.dict = dictionary_from_json(j.at("dictionary"));
  m.A = matrix_from_json(j.at("A"));
  m.B = matrix_from_json(j.at("B"));
  m.E = matrix_from_json(j.at("E"));
  m.residual_eps = j.at("residual_eps").get<double>();
  m.ridge_rho = j.at("ridge_rho").get<double>();
  m.dt = j.at("dt").get<double>();
  return m;
}

}  // namespace certctl

#endif  // CERTCTL_KOOPMAN_HPP
