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

#ifndef CERTCTL_PLANTS_HPP
#define CERTCTL_PLANTS_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "certctl/csv.hpp"
#include "certctl/integrate.hpp"
#include "certctl/matrix.hpp"
#include "certctl/rng.hpp"

namespace certctl {

inline double wrap_angle(double a) {
  // wrap to (-pi, pi]
  a = std::fmod(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  if (a > M_PI) a -= 2.0 * M_PI;
  return a;
}

inline double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

// ---------------------------------------------------------------------------
// Benchmark 1: kinematic bicycle under friction and lateral wind
// ---------------------------------------------------------------------------

struct BicycleState {
  double px = 0.0;   // m
  double py = 0.0;   // m
  double psi = 0.0;  // rad, wrapped to (-pi, pi]
  double v = 0.0;    // m/s, >= 0

  Vec to_vec() const { return Vec{px, py, psi, v}; }
  static BicycleState from_vec(const Vec& x) {
    BicycleState s;
    s.px = x[0];
    s.py = x[1];
    s.psi = wrap_angle(x[2]);
    s.v = std::max(0.0, x[3]);
    return s;
  }
};

struct BicycleParams {
  double wheelbase_L = 2.5;      // m
  double steer_limit = 0.55;     // rad
  double accel_limit = 4.0;      // m/s^2
  double gravity_g = 9.81;       // m/s^2
  double wind_yaw_gain = 0.05;  // rad/s of yaw disturbance per m/s of wind
  // steering effectiveness g(mu) = min(1, base + slope*mu): cornering
  // stiffness degrades continuously on low-friction surfaces
  double steer_eff_base = 1.0;
  double steer_eff_slope = 0.0;

  double steer_effectiveness(double mu) const {
    return std::min(1.0, steer_eff_base + steer_eff_slope * mu);
  }
};

/// Kinematic single-track derivative. Friction enters through saturation of
/// the effective steering angle so the tire-generated lateral acceleration
/// v^2 tan(delta)/L never exceeds mu*g. Crosswind drifts the position
/// laterally and applies a small yaw moment (pressure-center offset); the
/// yaw term is aerodynamic, not tire-generated, so it bypasses the friction
/// saturation. Inputs are clamped to the actuator limits, never rejected.
inline Vec bicycle_deriv(const BicycleState& s, double delta, double accel,
                         double mu, double wind, const BicycleParams& p = {}) {
  const double d = clamp(delta, -p.steer_limit, p.steer_limit);
  const double a = clamp(accel, -p.accel_limit, p.accel_limit);

  double tan_d = std::tan(d) * p.steer_effectiveness(mu);
  const double v2 = s.v * s.v;
  if (v2 > 1e-9) {
    const double tan_max = mu * p.gravity_g * p.wheelbase_L / v2;
    tan_d = clamp(tan_d, -tan_max, tan_max);
  }
  const double psi_dot = s.v * tan_d / p.wheelbase_L + p.wind_yaw_gain * wind;

  Vec dx(4);
  dx[0] = s.v * std::cos(s.psi);
  dx[1] = s.v * std::sin(s.psi) + wind;
  dx[2] = psi_dot;
  dx[3] = (s.v <= 0.0 && a < 0.0) ? 0.0 : a;
  return dx;
}

// ---------------------------------------------------------------------------
// Benchmark 2: Duffing oscillator  q" + 0.3 q' + q^3 = u + w cos(1.2 t)
// ---------------------------------------------------------------------------

struct DuffingState {
  double q = 0.0;
  double qdot = 0.0;

  Vec to_vec() const { return Vec{q, qdot}; }
  static DuffingState from_vec(const Vec& x) { return DuffingState{x[0], x[1]}; }
};

inline Vec duffing_deriv(const DuffingState& s, double u, double t, double a_w) {
  return Vec{s.qdot, -0.3 * s.qdot - s.q * s.q * s.q + u + a_w * std::cos(1.2 * t)};
}

// ---------------------------------------------------------------------------
// Scenario: disturbance schedules shared by both benchmarks
// ---------------------------------------------------------------------------

/// Piecewise-constant friction over [0, duration]; breakpoints hold from
/// their start time onward, so a step lands exactly on a sample boundary.
struct FrictionSchedule {
  std::vector<std::pair<double, double>> steps{{0.0, 0.9}};  // (t_start, mu)

  double at(double t) const {
    double mu = steps.front().second;
    for (const auto& [ts, m] : steps)
      if (t >= ts) mu = m;
    return mu;
  }
};

struct Scenario {
  double duration = 12.0;  // s
  double dt = 0.02;        // s (50 Hz)
  FrictionSchedule friction;
  double wind_max = 0.0;  // m/s, <= 6
  double a_w = 0.0;       // Duffing forcing amplitude
  uint64_t seed = 0;

  int steps() const { return static_cast<int>(std::llround(duration / dt)); }
};

/// Seeded crosswind bounded by wind_max: a steady component (random sign)
/// plus two gust tones with random frequencies and phases. Reproducible per
/// seed; the steady part keeps |w| away from zero most of the episode, as
/// real crosswind does.
class WindProfile {
public:
  WindProfile(double wind_max, uint64_t seed) : amp_(wind_max) {
    RngStream rng = RngStream(seed).split(0x717dULL);
    dc_ = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.45, 0.6);
    for (int i = 0; i < 2; ++i) {
      freq_[i] = rng.uniform(0.15, 1.2);
      phase_[i] = rng.uniform(0.0, 2.0 * M_PI);
    }
  }

  double at(double t) const {
    if (amp_ == 0.0) return 0.0;
    return amp_ * (dc_ + 0.28 * std::sin(freq_[0] * t + phase_[0]) +
                   0.12 * std::sin(freq_[1] * t + phase_[1]));
  }

private:
  double amp_;
  double dc_ = 0.5;
  double freq_[2] = {0, 0};
  double phase_[2] = {0, 0};
};

// ---------------------------------------------------------------------------
// Reference paths
// ---------------------------------------------------------------------------

/// Double lane-change geometry: tanh-blended lateral offset 0 -> width -> 0
/// at constant forward speed. All waypoints are config values.
struct LaneChangeSpec {
  double speed = 10.0;       // m/s
  double lane_width = 3.5;   // m
  double t_enter = 3.0;      // s, center of entry blend
  double t_exit = 8.0;       // s, center of exit blend
  double steepness = 2.0;    // 1/s
};

inline double lane_change_offset(double t, const LaneChangeSpec& g = {}) {
  const double s1 = 0.5 * (1.0 + std::tanh(g.steepness * (t - g.t_enter)));
  const double s2 = 0.5 * (1.0 + std::tanh(g.steepness * (t - g.t_exit)));
  return g.lane_width * (s1 - s2);
}

inline double lane_change_offset_rate(double t, const LaneChangeSpec& g = {}) {
  auto sech2 = [](double x) {
    const double c = std::cosh(x);
    return 1.0 / (c * c);
  };
  return g.lane_width * 0.5 * g.steepness *
         (sech2(g.steepness * (t - g.t_enter)) - sech2(g.steepness * (t - g.t_exit)));
}

/// C1-continuous reference: either the lane-change path (bicycle benchmark)
/// or a constant setpoint (Duffing benchmark).
struct ReferencePath {
  double duration = 12.0;
  LaneChangeSpec lane;
  bool is_setpoint = false;
  Vec setpoint;  // Duffing (q_ref, qdot_ref)

  /// Desired bicycle state at time t (clamped into the episode).
  BicycleState sample(double t) const {
    const double tc = clamp(t, 0.0, duration);
    BicycleState r;
    r.px = lane.speed * tc;
    r.py = lane_change_offset(tc, lane);
    const double dy = lane_change_offset_rate(tc, lane);
    r.psi = std::atan2(dy, lane.speed);
    r.v = std::hypot(lane.speed, dy);
    return r;
  }

  Vec state_ref(double t, int dim) const {
    if (is_setpoint) return setpoint;
    const BicycleState s = sample(t);
    Vec x = s.to_vec();
    x.resize(dim);
    return x;
  }

  static ReferencePath double_lane_change(double duration, const LaneChangeSpec& g = {}) {
    ReferencePath p;
    p.duration = duration;
    p.lane = g;
    return p;
  }

  static ReferencePath constant_setpoint(double duration, const Vec& target) {
    ReferencePath p;
    p.duration = duration;
    p.is_setpoint = true;
    p.setpoint = target;
    return p;
  }
};

// ---------------------------------------------------------------------------
// Episode simulation
// ---------------------------------------------------------------------------

struct Trajectory {
  Vec t;                    // K+1 timestamps
  std::vector<Vec> x;       // K+1 states
  std::vector<Vec> u;       // K controls
  std::vector<Vec> w;       // K logged disturbances
  std::vector<Vec> xi;      // K extrinsic inputs (may be empty vectors)
  bool failed = false;
  std::string failure_cause;

  size_t samples() const { return x.size(); }
};

/// Either benchmark wrapped behind a single stepping interface. Controls,
/// disturbances and extrinsic inputs are held constant across each dt step
/// (zero-order hold), which keeps logged snapshots exactly consistent with
/// the discrete-time identification problem.
struct PlantDef {
  int state_dim = 0;
  int control_dim = 0;
  int dist_dim = 0;
  int env_dim = 0;
  // deriv(t, x, u, w, xi)
  std::function<Vec(double, const Vec&, const Vec&, const Vec&, const Vec&)> deriv;
  // normalize state after integration (angle wrap, v >= 0)
  std::function<Vec(const Vec&)> normalize;
};

inline PlantDef bicycle_plant(const BicycleParams& p = {}) {
  PlantDef d;
  d.state_dim = 4;
  d.control_dim = 2;
  d.dist_dim = 1;
  d.env_dim = 1;  // xi = (mu)
  d.deriv = [p](double, const Vec& x, const Vec& u, const Vec& w, const Vec& xi) {
    return bicycle_deriv(BicycleState::from_vec(x), u[0], u[1], xi[0], w[0], p);
  };
  d.normalize = [](const Vec& x) { return BicycleState::from_vec(x).to_vec(); };
  return d;
}

inline PlantDef duffing_plant() {
  PlantDef d;
  d.state_dim = 2;
  d.control_dim = 1;
  d.dist_dim = 1;
  d.env_dim = 0;
  // w carries the realized forcing amplitude sample w(t) = a_w cos(1.2 t)
  d.deriv = [](double, const Vec& x, const Vec& u, const Vec& w, const Vec&) {
    return Vec{x[1], -0.3 * x[1] - x[0] * x[0] * x[0] + u[0] + w[0]};
  };
  d.normalize = [](const Vec& x) { return x; };
  return d;
}

using ControllerFn = std::function<Vec(double t, const Vec& x, const Vec& xi)>;
using SignalFn = std::function<Vec(double t)>;

/// Run one episode at fixed dt. The disturbance source is sampled once per
/// step and logged next to states and controls for later identification.
inline Trajectory simulate_episode(const PlantDef& plant, const ControllerFn& controller,
                                   const Scenario& sc, const SignalFn& disturbance,
                                   const Vec& x0, const Rk4Config& integ = {}) {
  Trajectory tr;
  const int K = sc.steps();
  tr.t.reserve(K + 1);
  tr.x.reserve(K + 1);
  tr.u.reserve(K);
  tr.w.reserve(K);
  tr.xi.reserve(K);

  Vec x = plant.normalize(x0);
  tr.t.push_back(0.0);
  tr.x.push_back(x);

  for (int k = 0; k < K; ++k) {
    const double t = k * sc.dt;
    Vec xi(plant.env_dim);
    if (plant.env_dim > 0) xi[0] = sc.friction.at(t);

    Vec u;
    try {
      u = controller(t, x, xi);
    } catch (const std::exception& ex) {
      tr.failed = true;
      tr.failure_cause = std::string("controller: ") + ex.what();
      return tr;
    }
    if (static_cast<int>(u.size()) != plant.control_dim || !all_finite(u)) {
      tr.failed = true;
      tr.failure_cause = "controller returned non-finite or mis-sized control";
      return tr;
    }
    const Vec w = disturbance(t);

    auto f = [&](double tt, const Vec& xx) { return plant.deriv(tt, xx, u, w, xi); };
    try {
      x = plant.normalize(rk4_span(f, x, t, sc.dt, integ));
    } catch (const NumericError& ex) {
      tr.failed = true;
      tr.failure_cause = std::string("integration: ") + ex.what();
      return tr;
    }
    if (!all_finite(x)) {
      tr.failed = true;
      tr.failure_cause = "state became non-finite";
      return tr;
    }

    tr.u.push_back(u);
    tr.w.push_back(w);
    tr.xi.push_back(xi);
    tr.t.push_back((k + 1) * sc.dt);
    tr.x.push_back(x);
  }
  return tr;
}

/// CSV export with header t,x0..xn,u0..um,w0..wk. The terminal sample has no
/// control/disturbance; zeros are written there.
inline void write_trajectory_csv(const Trajectory& tr, const std::string& path) {
  if (tr.x.empty()) throw NumericError("write_trajectory_csv: empty trajectory");
  const int n = static_cast<int>(tr.x[0].size());
  const int m = tr.u.empty() ? 0 : static_cast<int>(tr.u[0].size());
  const int kw = tr.w.empty() ? 0 : static_cast<int>(tr.w[0].size());

  CsvWriter out(path);
  std::vector<std::string> header{"t"};
  for (int i = 0; i < n; ++i) header.push_back("x" + std::to_string(i));
  for (int i = 0; i < m; ++i) header.push_back("u" + std::to_string(i));
  for (int i = 0; i < kw; ++i) header.push_back("w" + std::to_string(i));
  out.row(header);

  for (size_t k = 0; k < tr.x.size(); ++k) {
    Vec row{tr.t[k]};
    for (double v : tr.x[k]) row.push_back(v);
    const bool has_uw = k < tr.u.size();
    for (int i = 0; i < m; ++i) row.push_back(has_uw ? tr.u[k][i] : 0.0);
    for (int i = 0; i < kw; ++i) row.push_back(has_uw ? tr.w[k][i] : 0.0);
    out.numeric_row(row);
  }
}

}  // namespace certctl

#endif  // CERTCTL_PLANTS_HPP
