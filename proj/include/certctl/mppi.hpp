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

#ifndef CERTCTL_MPPI_HPP
#define CERTCTL_MPPI_HPP

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "certctl/certify.hpp"
#include "certctl/koopman.hpp"
#include "certctl/matrix.hpp"
#include "certctl/neural.hpp"
#include "certctl/rng.hpp"

namespace certctl {

// ---------------------------------------------------------------------------
// Forward models for rollouts
//
// A rollout model exposes a derivative over its own rollout coordinates
// (lifted/latent/state space), how to enter that space from a measurement,
// and how to read the physical state back out for cost evaluation.
// ---------------------------------------------------------------------------

struct RolloutModel {
  int rollout_dim = 0;
  int state_dim = 0;
  int control_dim = 0;
  std::function<Vec(const Vec& x, const Vec& xi)> init;
  std::function<Vec(const Vec& c, const Vec& u, const Vec& xi)> deriv;
  std::function<Vec(const Vec& c)> readout;
  std::function<void(Vec& c, const Vec& xi)> project;  // optional confinement
};

/// Ground-truth dynamics as the rollout engine (disturbance unknown: w = 0).
inline RolloutModel plant_rollout_model(const PlantDef& plant) {
  RolloutModel rm;
  rm.rollout_dim = plant.state_dim;
  rm.state_dim = plant.state_dim;
  rm.control_dim = plant.control_dim;
  rm.init = [](const Vec& x, const Vec&) { return x; };
  rm.deriv = [plant](const Vec& c, const Vec& u, const Vec& xi) {
    return plant.deriv(0.0, c, u, Vec(plant.dist_dim, 0.0), xi);
  };
  rm.readout = [](const Vec& c) { return c; };
  return rm;
}

/// Koopman predictor embedded in continuous time: zdot = (A - I)/dt z + B/dt u.
/// Euler at dt reproduces the discrete map exactly; RK4 at the control rate
/// integrates the same linear field.
inline RolloutModel koopman_rollout_model(const KoopmanModel& model) {
  RolloutModel rm;
  const int N = model.lifted_dim();
  rm.rollout_dim = N;
  rm.state_dim = model.dict.state_dim;
  rm.control_dim = model.B.cols;
  RealMatrix F = model.A;
  for (int i = 0; i < N; ++i) F(i, i) -= 1.0;
  for (double& v : F.a) v /= model.dt;
  RealMatrix G = model.B;
  for (double& v : G.a) v /= model.dt;
  const Dictionary dict = model.dict;
  rm.init = [dict](const Vec& x, const Vec&) { return lift(dict, x); };
  rm.deriv = [F, G](const Vec& z, const Vec& u, const Vec&) {
    Vec d = matvec(F, z);
    axpy(1.0, matvec(G, u), d);
    return d;
  };
  const int n = rm.state_dim;
  rm.readout = [n](const Vec& z) { return Vec(z.begin(), z.begin() + n); };
  return rm;
}

/// Neural latent model, optionally with a residual compensator sharing the
/// latent space and a bundle atlas whose fiber box clamps each propagated
/// latent back onto the admissible region.
inline RolloutModel neural_rollout_model(const OdeModel& model, const OdeModel* residual = nullptr,
                                         const BundleAtlas* atlas = nullptr) {
  RolloutModel rm;
  rm.rollout_dim = model.r;
  rm.state_dim = model.n;
  rm.control_dim = model.m;
  rm.init = [&model](const Vec& x, const Vec& xi) { return encode(model, x, xi); };
  rm.deriv = [&model, residual](const Vec& z, const Vec& u, const Vec& xi) {
    Vec d = latent_deriv(model, z, u, xi);
    if (residual) {
      const Vec rd = latent_deriv(*residual, z, u, xi);
      for (size_t i = 0; i < d.size(); ++i) d[i] += rd[i];
    }
    return d;
  };
  rm.readout = [&model](const Vec& z) { return decode(model, z); };
  if (atlas) {
    rm.project = [atlas](Vec& z, const Vec& xi) {
      const Vec lo = atlas->lower(xi);
      const Vec hi = atlas->upper(xi);
      for (int i = 0; i < atlas->r; ++i) z[i] = std::min(std::max(z[i], lo[i]), hi[i]);
    };
  }
  return rm;
}

// ---------------------------------------------------------------------------
// Controller configuration and batch types
// ---------------------------------------------------------------------------

struct MppiConfig {
  int rollouts = 256;      // M
  double horizon = 1.0;    // T seconds
  double dt_ctrl = 0.05;   // rollout / replanning interval
  Vec sigma_u;             // perturbation std per control channel
  double lambda_T = 1.0;   // softmax temperature
  SymMatrix Q;             // state tracking weights
  SymMatrix R;             // control weights
  SymMatrix Qf;            // terminal weights
  Vec u_min, u_max;        // actuator box
  uint64_t seed = 0;
  int threads = 1;
  // residual drift compensation inside the sampling loop: rollouts carry an
  // exponentially-averaged estimate of the recent one-step prediction error
  bool drift_compensation = false;
  double drift_beta = 0.8;
  double drift_clip = 2.0;

  int horizon_steps() const {
    return std::max(1, static_cast<int>(std::llround(horizon / dt_ctrl)));
  }
};

struct ControlPlan {
  std::vector<Vec> u;  // horizon x m

  static ControlPlan zeros(int steps, int m) {
    ControlPlan p;
    p.u.assign(steps, Vec(m, 0.0));
    return p;
  }
};

constexpr double kCostSentinel = 1e30;

struct RolloutBatch {
  Vec costs;                            // M, +sentinel marks excluded
  std::vector<std::vector<Vec>> dU;     // M x horizon x m
  uint64_t seed = 0;
  int finite_count = 0;
};

// ---------------------------------------------------------------------------
// Cost and update
// ---------------------------------------------------------------------------

inline double quad_form(const SymMatrix& W, const Vec& v) {
  double s = 0.0;
  for (int i = 0; i < W.dim; ++i) {
    double row = 0.0;
    for (int j = 0; j < W.dim; ++j) row += W(i, j) * v[j];
    s += v[i] * row;
  }
  return s;
}

/// Trapezoid-rule cost of one perturbed rollout propagated with RK4 at the
/// control rate. Non-finite propagation yields the sentinel cost.
inline double rollout_cost(const RolloutModel& model, const ControlPlan& nominal,
                           const std::vector<Vec>& du, const Vec& x0,
                           const std::function<Vec(double)>& ref, const Vec& xi,
                           const MppiConfig& cfg, double t0) {
  const int steps = cfg.horizon_steps();
  const int m = model.control_dim;
  Vec c = model.init(x0, xi);

  auto clamped = [&](int k) {
    Vec u(m);
    for (int j = 0; j < m; ++j) {
      double v = nominal.u[k][j] + du[k][j];
      if (!cfg.u_min.empty()) v = std::max(v, cfg.u_min[j]);
      if (!cfg.u_max.empty()) v = std::min(v, cfg.u_max[j]);
      u[j] = v;
    }
    return u;
  };

  auto stage = [&](const Vec& state, const Vec& u, double t) {
    Vec e = state;
    const Vec r = ref(t);
    for (size_t i = 0; i < e.size(); ++i) e[i] -= r[i];
    return quad_form(cfg.Q, e) + quad_form(cfg.R, u);
  };

  double J = 0.0;
  Vec u_prev = clamped(0);
  double l_prev = stage(model.readout(c), u_prev, t0);
  for (int k = 0; k < steps; ++k) {
    const Vec u = clamped(k);
    auto f = [&](double, const Vec& cc) { return model.deriv(cc, u, xi); };
    bool bad = false;
    try {
      c = rk4_step(f, c, t0 + k * cfg.dt_ctrl, cfg.dt_ctrl);
    } catch (const NumericError&) {
      bad = true;
    }
    if (bad || !all_finite(c)) return kCostSentinel;
    if (model.project) model.project(c, xi);
    const Vec xk = model.readout(c);
    const double lk = stage(xk, u, t0 + (k + 1) * cfg.dt_ctrl);
    if (!std::isfinite(lk)) return kCostSentinel;
    J += 0.5 * (l_prev + lk) * cfg.dt_ctrl;
    l_prev = lk;
  }
  // quadratic terminal penalty about the reference at the horizon end
  Vec e = model.readout(c);
  const Vec r = ref(t0 + steps * cfg.dt_ctrl);
  for (size_t i = 0; i < e.size(); ++i) e[i] -= r[i];
  J += quad_form(cfg.Qf, e);
  return std::isfinite(J) ? J : kCostSentinel;
}

struct MppiUpdate {
  ControlPlan plan;
  Vec weights;  // 0 for excluded rollouts
  bool all_excluded = false;
};

/// Softmax-weighted perturbation average with min-cost subtraction (an exact
/// reformulation that avoids underflow at small temperatures).
inline MppiUpdate mppi_update(const ControlPlan& u_nom, const RolloutBatch& batch,
                              double lambda_T) {
  const int M = static_cast<int>(batch.costs.size());
  MppiUpdate out;
  out.plan = u_nom;
  out.weights.assign(M, 0.0);

  double jmin = kCostSentinel;
  for (double j : batch.costs) jmin = std::min(jmin, j);
  if (jmin >= kCostSentinel) {
    out.all_excluded = true;  // hold the previous plan
    return out;
  }

  double wsum = 0.0;
  for (int i = 0; i < M; ++i) {
    if (batch.costs[i] >= kCostSentinel) continue;
    out.weights[i] = std::exp(-(batch.costs[i] - jmin) / lambda_T);
    wsum += out.weights[i];
  }
  for (double& w : out.weights) w /= wsum;

  const int steps = static_cast<int>(u_nom.u.size());
  const int m = static_cast<int>(u_nom.u[0].size());
  for (int k = 0; k < steps; ++k)
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int i = 0; i < M; ++i)
        if (out.weights[i] > 0.0) acc += out.weights[i] * batch.dU[i][k][j];
      out.plan.u[k][j] += acc;
    }
  return out;
}

inline double rollout_variance(const RolloutBatch& batch) {
  Vec finite;
  for (double j : batch.costs)
    if (j < kCostSentinel) finite.push_back(j);
  if (finite.size() < 2)
    throw NumericError("rollout_variance: need at least 2 finite costs");
  double mean = 0.0;
  for (double j : finite) mean += j;
  mean /= finite.size();
  double acc = 0.0;
  for (double j : finite) acc += (j - mean) * (j - mean);
  return acc / (finite.size() - 1);
}

/// Certified rollout variance bound:
///   sigma_J^2 <= T^2 |Q|^2 / M * (c1^2 |e0|^2 + gamma^2 wbar^2)^2.
/// The decay rate alpha travels with the constants record but does not enter
/// the bound itself.
inline double variance_bound(const IssConstants& c, double e0_norm, double w_bar, double T,
                             double Q_norm, int M) {
  const double inner = c.c1 * c.c1 * e0_norm * e0_norm + c.gamma * c.gamma * w_bar * w_bar;
  return T * T * Q_norm * Q_norm / static_cast<double>(M) * inner * inner;
}

// ---------------------------------------------------------------------------
// Receding-horizon controller
// ---------------------------------------------------------------------------

struct StepTelemetry {
  double t = 0.0;
  double sigma_J2 = 0.0;
  double bound = 0.0;
  double weight_entropy = 0.0;
  int excluded_rollouts = 0;
  double step_ms = 0.0;
  bool held_plan = false;
};

inline nlohmann::json telemetry_to_json(const StepTelemetry& s) {
  return nlohmann::json{{"t", s.t},
                        {"sigma_J2", s.sigma_J2},
                        {"bound", s.bound},
                        {"weight_entropy", s.weight_entropy},
                        {"excluded_rollouts", s.excluded_rollouts},
                        {"step_ms", s.step_ms}};
}

class MppiController {
public:
  MppiController(RolloutModel model, MppiConfig cfg, std::function<Vec(double)> ref)
      : model_(std::move(model)),
        cfg_(std::move(cfg)),
        ref_(std::move(ref)),
        plan_(ControlPlan::zeros(cfg_.horizon_steps(), model_.control_dim)) {}

  /// Attach certificate constants so telemetry carries the variance bound.
  void set_bound_constants(const IssConstants& c, double w_bar) {
    constants_ = c;
    w_bar_ = w_bar;
    has_constants_ = true;
  }

  const ControlPlan& plan() const { return plan_; }

  Vec step(double t, const Vec& x, const Vec& xi, StepTelemetry* telem = nullptr) {
    const auto wall0 = std::chrono::steady_clock::now();
    const int steps = cfg_.horizon_steps();
    const int m = model_.control_dim;
    const int M = cfg_.rollouts;

    const Vec c_now = model_.init(x, xi);
    if (cfg_.drift_compensation) {
      if (has_prev_pred_) {
        for (size_t i = 0; i < drift_.size(); ++i) {
          const double err = (c_now[i] - prev_pred_[i]) / cfg_.dt_ctrl;
          double d = cfg_.drift_beta * drift_[i] + (1.0 - cfg_.drift_beta) * err;
          drift_[i] = std::min(std::max(d, -cfg_.drift_clip), cfg_.drift_clip);
        }
      } else {
        drift_.assign(c_now.size(), 0.0);
      }
    }

    RolloutBatch batch;
    batch.seed = RngStream(cfg_.seed).split(step_index_ + 1).key();
    batch.costs.assign(M, kCostSentinel);
    batch.dU.assign(M, std::vector<Vec>(steps, Vec(m, 0.0)));

    RolloutModel eff = model_;
    if (cfg_.drift_compensation && !drift_.empty()) {
      const auto base_deriv = model_.deriv;
      const Vec drift = drift_;
      eff.deriv = [base_deriv, drift](const Vec& c, const Vec& u, const Vec& xi2) {
        Vec d = base_deriv(c, u, xi2);
        for (size_t i = 0; i < d.size(); ++i) d[i] += drift[i];
        return d;
      };
    }

    auto run_range = [&](int lo, int hi) {
      for (int i = lo; i < hi; ++i) {
        RngStream stream = RngStream(batch.seed).split(static_cast<uint64_t>(i));
        for (int k = 0; k < steps; ++k)
          for (int j = 0; j < m; ++j) batch.dU[i][k][j] = cfg_.sigma_u[j] * stream.gaussian();
        batch.costs[i] = rollout_cost(eff, plan_, batch.dU[i], x, ref_, xi, cfg_, t);
      }
    };
    if (cfg_.threads > 1) {
      std::vector<std::thread> pool;
      const int chunk = (M + cfg_.threads - 1) / cfg_.threads;
      for (int th = 0; th < cfg_.threads; ++th) {
        const int lo = th * chunk;
        const int hi = std::min(M, lo + chunk);
        if (lo < hi) pool.emplace_back(run_range, lo, hi);
      }
      for (auto& th : pool) th.join();
    } else {
      run_range(0, M);
    }

    const MppiUpdate upd = mppi_update(plan_, batch, cfg_.lambda_T);
    int excluded = 0;
    for (double j : batch.costs)
      if (j >= kCostSentinel) ++excluded;

    if (!upd.all_excluded) plan_ = upd.plan;
    clamp_plan();
    const Vec u_apply = plan_.u[0];

    if (telem) {
      telem->t = t;
      telem->excluded_rollouts = excluded;
      telem->held_plan = upd.all_excluded;
      telem->sigma_J2 = (M - excluded >= 2) ? rollout_variance(batch) : 0.0;
      double ent = 0.0;
      for (double w : upd.weights)
        if (w > 0.0) ent -= w * std::log(w);
      telem->weight_entropy = ent;
      if (has_constants_) {
        const Vec r = ref_(t);
        Vec e = x;
        for (size_t i = 0; i < e.size(); ++i) e[i] -= r[i];
        telem->bound = variance_bound(constants_, norm2(e), w_bar_, cfg_.horizon,
                                      sym_norm2(cfg_.Q), M);
      }
      telem->step_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - wall0)
              .count();
    }

    if (cfg_.drift_compensation) {
      // one-step-ahead prediction under the applied control feeds the next
      // drift update
      auto f = [&](double, const Vec& c) { return eff.deriv(c, u_apply, xi); };
      bool ok = true;
      Vec pred;
      try {
        pred = rk4_step(f, c_now, t, cfg_.dt_ctrl);
      } catch (const NumericError&) {
        ok = false;
      }
      if (ok && all_finite(pred)) {
        prev_pred_ = pred;
        has_prev_pred_ = true;
      } else {
        has_prev_pred_ = false;
      }
    }

    // receding-horizon warm start: shift one step, zero-pad the tail
    for (int k = 0; k + 1 < steps; ++k) plan_.u[k] = plan_.u[k + 1];
    plan_.u[steps - 1].assign(m, 0.0);
    ++step_index_;
    return u_apply;
  }

private:
  void clamp_plan() {
    if (cfg_.u_min.empty() && cfg_.u_max.empty()) return;
    for (Vec& u : plan_.u)
      for (size_t j = 0; j < u.size(); ++j) {
        if (!cfg_.u_min.empty()) u[j] = std::max(u[j], cfg_.u_min[j]);
        if (!cfg_.u_max.empty()) u[j] = std::min(u[j], cfg_.u_max[j]);
      }
  }

  RolloutModel model_;
  MppiConfig cfg_;
  std::function<Vec(double)> ref_;
  ControlPlan plan_;
  IssConstants constants_;
  double w_bar_ = 0.0;
  bool has_constants_ = false;
  uint64_t step_index_ = 0;
  Vec drift_;
  Vec prev_pred_;
  bool has_prev_pred_ = false;
};

}  // namespace certctl

#endif  // CERTCTL_MPPI_HPP
