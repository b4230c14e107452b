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

#ifndef CERTCTL_HARNESS_RUN_HPP
#define CERTCTL_HARNESS_RUN_HPP

// Included from harness.hpp; method preparation with caching, episode
// execution and metric aggregation.

namespace certctl {

namespace detail {

inline std::string cache_key(Benchmark b, MethodId m, const HarnessOptions& o) {
  return benchmark_name(b) + "_" + method_name(m) + "_seed" + std::to_string(o.master_seed);
}

inline MethodArtifacts prepare_koopman(Benchmark bench, MethodId method,
                                       const std::vector<Trajectory>& data,
                                       const HarnessOptions& o) {
  MethodArtifacts art;
  art.benchmark = bench;
  art.method = method;
  const SnapshotDataset snaps = koopman_dataset(bench, data);
  const Dictionary dict = bench_dictionary(bench, snaps, o);

  if (method == MethodId::KoopmanUncert) {
    art.koopman = edmd_fit(snaps, dict, o.koopman_rho_uncert);
    art.has_koopman = true;
    return art;
  }
  // the ladder needs only a coarse optimum; the deployed certificate is
  // re-probed at the relaxed gain anyway
  const RecertifyResult rec = recertify_loop(snaps, dict, o.gamma_max, o.koopman_rho0,
                                             o.koopman_rho_max, std::max(1e-3, o.tol_bisect));
  if (!rec.success) {
    std::string ladder;
    for (const auto& [rho, diag] : rec.ladder)
      ladder += " rho=" + format_double(rho) + ": " + diag + ";";
    throw NumericError("koopman-iss preparation failed:" + ladder);
  }
  art.koopman = rec.model;
  art.has_koopman = true;
  // deploy a relaxed certificate: twice the optimal gain buys dissipation
  // margin and a milder Lyapunov matrix
  const auto relaxed = certificate_at(rec.model.A, rec.model.E,
                                      o.cert_relax * std::max(rec.gain.gamma_star, 1e-4));
  art.iss_cert = relaxed ? *relaxed : rec.gain.cert;
  art.has_iss_cert = true;
  return art;
}

inline void save_artifacts(const MethodArtifacts& art, const std::string& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json meta{{"benchmark", benchmark_name(art.benchmark)},
                      {"method", method_name(art.method)},
                      {"has_koopman", art.has_koopman},
                      {"has_iss_cert", art.has_iss_cert},
                      {"has_neural", art.has_neural},
                      {"has_residual", art.has_residual},
                      {"has_atlas", art.has_atlas},
                      {"has_csode_cert", art.has_csode_cert}};
  if (art.has_koopman) meta["koopman"] = koopman_to_json(art.koopman);
  if (art.has_iss_cert) meta["iss_cert"] = iss_cert_to_json(art.iss_cert);
  if (art.has_csode_cert) meta["csode_cert"] = csode_cert_to_json(art.csode_cert);
  if (art.has_atlas)
    meta["atlas"] = nlohmann::json{{"r", art.atlas.r},          {"n_xi", art.atlas.n_xi},
                                   {"lo0", art.atlas.lo0},      {"hi0", art.atlas.hi0},
                                   {"lo1", art.atlas.lo1.a},    {"hi1", art.atlas.hi1.a},
                                   {"delta_b", art.atlas.delta_b}};
  std::ofstream out(dir + "/method.json", std::ios::binary);
  out << meta.dump(2) << "\n";
  if (art.has_neural) {
    std::filesystem::create_directories(dir + "/model");
    save_checkpoint(art.model, dir + "/model");
  }
  if (art.has_residual) {
    std::filesystem::create_directories(dir + "/residual");
    save_checkpoint(art.residual, dir + "/residual");
  }
}

inline bool load_artifacts(MethodArtifacts& art, const std::string& dir) {
  std::ifstream in(dir + "/method.json", std::ios::binary);
  if (!in) return false;
  nlohmann::json meta;
  in >> meta;
  art.has_koopman = meta.at("has_koopman").get<bool>();
  art.has_iss_cert = meta.at("has_iss_cert").get<bool>();
  art.has_neural = meta.at("has_neural").get<bool>();
  art.has_residual = meta.at("has_residual").get<bool>();
  art.has_atlas = meta.at("has_atlas").get<bool>();
  art.has_csode_cert = meta.at("has_csode_cert").get<bool>();
  if (art.has_koopman) art.koopman = koopman_from_json(meta.at("koopman"));
  if (art.has_iss_cert) art.iss_cert = iss_cert_from_json(meta.at("iss_cert"));
  if (art.has_csode_cert) art.csode_cert = csode_cert_from_json(meta.at("csode_cert"));
  if (art.has_atlas) {
    const auto& ja = meta.at("atlas");
    art.atlas.r = ja.at("r").get<int>();
    art.atlas.n_xi = ja.at("n_xi").get<int>();
    art.atlas.lo0 = ja.at("lo0").get<Vec>();
    art.atlas.hi0 = ja.at("hi0").get<Vec>();
    art.atlas.lo1 = RealMatrix(art.atlas.r, art.atlas.n_xi);
    art.atlas.lo1.a = ja.at("lo1").get<Vec>();
    art.atlas.hi1 = RealMatrix(art.atlas.r, art.atlas.n_xi);
    art.atlas.hi1.a = ja.at("hi1").get<Vec>();
    art.atlas.delta_b = ja.at("delta_b").get<double>();
  }
  if (art.has_neural) art.model = load_checkpoint(dir + "/model");
  if (art.has_residual) art.residual = load_checkpoint(dir + "/residual");
  return true;
}

}  // namespace detail

inline MethodArtifacts prepare_method(Benchmark bench, MethodId method, const HarnessOptions& o,
                                      bool use_cache) {
  const std::string dir = o.cache_dir + "/" + detail::cache_key(bench, method, o);
  MethodArtifacts art;
  art.benchmark = bench;
  art.method = method;
  if (use_cache && detail::load_artifacts(art, dir)) return art;

  const uint64_t data_seed = RngStream(o.master_seed).split(static_cast<uint64_t>(bench) + 1).key();
  const auto data = generate_training_data(bench, o, data_seed);

  if (method == MethodId::KoopmanUncert || method == MethodId::KoopmanIss) {
    art = detail::prepare_koopman(bench, method, data, o);
  } else if (method == MethodId::VanillaNode) {
    art.benchmark = bench;
    art.method = method;
    OdeModel md = make_vanilla_node(detail::model_n(bench), detail::bench_m(bench),
                                    o.vanilla_hidden, detail::method_seed(o, bench, method));
    const std::vector<Trajectory> mdata = detail::to_model_space(bench, data);
    std::vector<Vec> all_states;
    for (const auto& tr : mdata) all_states.insert(all_states.end(), tr.x.begin(), tr.x.end());
    set_standardization(md, all_states);
    // the unstructured baseline ignores the extrinsic channel entirely
    std::vector<Trajectory> blind = mdata;
    for (auto& tr : blind)
      for (auto& xi : tr.xi) xi.clear();
    TrainConfig tc;
    tc.epochs = o.train_epochs;
    tc.seed = detail::method_seed(o, bench, method);
    tc.weights.w_s = 0.0;
    tc.weights.w_b = 0.0;
    tc.weights.w_r = 0.0;
    train(md, make_windows(blind, tc.unroll_H, 5), nullptr, 0.02, tc);
    art.model = md;
    art.has_neural = true;
  } else {
    art = detail::prepare_structured(bench, method, data, o);
  }
  detail::save_artifacts(art, dir);
  return art;
}

// ---------------------------------------------------------------------------
// Episode execution
// ---------------------------------------------------------------------------

struct EpisodeResult {
  int index = 0;
  uint64_t seed = 0;
  bool failed = false;
  double rmse = 0.0;        // B1: lateral deviation; B2: position error
  double smoothness = 0.0;  // B1: mean |d delta|/dt; B2: mean u^2
  double iss_rate = -1.0;   // certified methods only
  double mean_sigma_J2 = 0.0;
  double bound_ok_frac = -1.0;
  double median_step_ms = 0.0;
  int excluded_total = 0;
  double peak_dev_after_switch = 0.0;  // B1 transient metrics
  double recovery_time = -1.0;
};

namespace detail {

/// Wrap a body-subsystem model into the full bicycle rollout state
/// [px, py, c]: positions integrate kinematically from the decoded body
/// state, everything else is delegated.
inline RolloutModel bicycle_body_wrap(RolloutModel inner) {
  RolloutModel rm;
  rm.rollout_dim = 2 + inner.rollout_dim;
  rm.state_dim = 4;
  rm.control_dim = inner.control_dim;
  const auto in_init = inner.init;
  const auto in_deriv = inner.deriv;
  const auto in_read = inner.readout;
  const auto in_proj = inner.project;
  rm.init = [in_init](const Vec& x, const Vec& xi) {
    Vec c{x[0], x[1]};
    const Vec ci = in_init(Vec{x[2], x[3]}, xi);
    c.insert(c.end(), ci.begin(), ci.end());
    return c;
  };
  rm.deriv = [in_deriv, in_read](const Vec& c, const Vec& u, const Vec& xi) {
    const Vec ci(c.begin() + 2, c.end());
    const Vec body = in_read(ci);  // (psi, v)
    Vec d{body[1] * std::cos(body[0]), body[1] * std::sin(body[0])};
    const Vec di = in_deriv(ci, u, xi);
    d.insert(d.end(), di.begin(), di.end());
    return d;
  };
  rm.readout = [in_read](const Vec& c) {
    const Vec body = in_read(Vec(c.begin() + 2, c.end()));
    return Vec{c[0], c[1], body[0], body[1]};
  };
  if (in_proj) {
    rm.project = [in_proj](Vec& c, const Vec& xi) {
      Vec ci(c.begin() + 2, c.end());
      in_proj(ci, xi);
      std::copy(ci.begin(), ci.end(), c.begin() + 2);
    };
  }
  return rm;
}

/// B1 Koopman models live in normalized body coordinates; fold the frame
/// maps into the rollout closures.
inline RolloutModel b1_koopman_inner(const KoopmanModel& model) {
  const B1Frame frame;
  RolloutModel rm = koopman_rollout_model(model);
  const auto raw_deriv = rm.deriv;
  rm.init = [&model, frame](const Vec& eta, const Vec&) {
    return lift(model.dict, frame.norm_eta(eta));
  };
  rm.deriv = [raw_deriv, frame](const Vec& z, const Vec& u, const Vec& xi) {
    // yaw-rate command feature needs the model's own current speed
    const double v = z[1] * frame.eta_scale[1] + frame.eta_mean[1];
    return raw_deriv(z, frame.norm_u(u, v), xi);
  };
  const int n = rm.state_dim;
  rm.readout = [frame, n](const Vec& z) { return frame.unnorm_eta(Vec(z.begin(), z.begin() + n)); };
  return rm;
}

inline RolloutModel method_rollout_model(Benchmark bench, const MethodArtifacts& art) {
  RolloutModel inner;
  if (art.has_koopman) {
    inner = bench == Benchmark::B1 ? b1_koopman_inner(art.koopman)
                                   : koopman_rollout_model(art.koopman);
  } else {
    inner = neural_rollout_model(art.model, art.has_residual ? &art.residual : nullptr,
                                 art.has_atlas ? &art.atlas : nullptr);
    if (bench == Benchmark::B1 && art.model.kind != ModelKind::Vanilla) {
      // structured models were trained on the yaw-rate command feature
      const auto raw_deriv = inner.deriv;
      const auto read = inner.readout;
      inner.deriv = [raw_deriv, read](const Vec& z, const Vec& u, const Vec& xi) {
        const double v = read(z)[1];
        return raw_deriv(z, b1_yaw_cmd_u(u, v), xi);
      };
    }
  }
  return bench == Benchmark::B1 ? bicycle_body_wrap(inner) : inner;
}

inline MppiConfig bench_mppi_config(Benchmark bench, const HarnessOptions& o, uint64_t seed) {
  MppiConfig cfg;
  cfg.rollouts = o.mppi_rollouts;
  cfg.horizon = o.mppi_horizon;
  cfg.dt_ctrl = o.dt_ctrl;
  cfg.seed = seed;
  if (bench == Benchmark::B1) {
    cfg.sigma_u = Vec{o.b1_sigma_steer, 0.8};
    cfg.lambda_T = o.b1_lambda_T;
    // light heading weight: countering lateral wind needs a crab angle
    cfg.Q = SymMatrix::diagonal(Vec{0.5, o.b1_q_lateral, 0.5, 0.3});
    cfg.R = SymMatrix::diagonal(Vec{o.b1_r_steer, 0.05});
    cfg.Qf = SymMatrix::diagonal(Vec{1.0, 2.0 * o.b1_q_lateral, 1.0, 0.6});
    const BicycleParams p;
    cfg.u_min = Vec{-p.steer_limit, -p.accel_limit};
    cfg.u_max = Vec{p.steer_limit, p.accel_limit};
  } else {
    cfg.sigma_u = Vec{1.5};
    cfg.lambda_T = o.b2_lambda_T;
    cfg.Q = SymMatrix::diagonal(Vec{10.0, 0.5});
    cfg.R = SymMatrix::diagonal(Vec{0.05});
    cfg.Qf = SymMatrix::diagonal(Vec{10.0, 0.5});
    cfg.u_min = Vec{-6.0};
    cfg.u_max = Vec{6.0};
  }
  return cfg;
}

inline double median(Vec v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

/// Lifted one-step prediction residuals along a closed-loop trajectory,
/// feeding the empirical dissipation-rate check.
inline double episode_iss_rate(Benchmark bench, const MethodArtifacts& art, const Trajectory& tr) {
  const B1Frame frame;
  auto model_state = [&](const Vec& x) {
    return bench == Benchmark::B1 ? frame.norm_eta(b1_body(x)) : x;
  };
  auto model_u = [&](const Vec& u, const Vec& x) {
    return bench == Benchmark::B1 ? frame.norm_u(u, x[3]) : u;
  };

  std::vector<Vec> errs;
  std::vector<Vec> dists;
  if (art.has_iss_cert) {
    for (size_t k = 0; k < tr.u.size(); ++k) {
      const Vec z = lift(art.koopman.dict, model_state(tr.x[k]));
      const Vec zn = lift(art.koopman.dict, model_state(tr.x[k + 1]));
      const Vec pred = art.koopman.step(z, model_u(tr.u[k], tr.x[k]), tr.w[k]);
      Vec e(zn.size());
      for (size_t i = 0; i < e.size(); ++i) e[i] = zn[i] - pred[i];
      errs.push_back(std::move(e));
      if (k > 0) dists.push_back(tr.w[k - 1]);
    }
    return empirical_iss_rate(errs, dists, art.iss_cert.P, art.iss_cert.gamma);
  }
  if (art.has_csode_cert) {
    // deployed predictor with the logged disturbance: nominal plus residual
    auto f = [&](const Vec& z, const Vec& u, const Vec& xi, const Vec& w) {
      Vec d = latent_deriv(art.model, z, u, xi, nullptr, w);
      if (art.has_residual) {
        const Vec rd = latent_deriv(art.residual, z, u, xi, nullptr, w);
        for (size_t i = 0; i < d.size(); ++i) d[i] += rd[i];
      }
      return d;
    };
    const double dt = tr.t[1] - tr.t[0];
    auto body = [&](const Vec& x) { return bench == Benchmark::B1 ? b1_body(x) : x; };
    for (size_t k = 0; k < tr.u.size(); ++k) {
      const Vec z = encode(art.model, body(tr.x[k]), tr.xi[k]);
      const Vec zn = encode(art.model, body(tr.x[k + 1]), tr.xi[k]);
      const Vec um =
          bench == Benchmark::B1 ? b1_yaw_cmd_u(tr.u[k], tr.x[k][3]) : tr.u[k];
      auto field = [&](double, const Vec& zz) { return f(zz, um, tr.xi[k], tr.w[k]); };
      const Vec pred = rk4_step(field, z, tr.t[k], dt);
      Vec e(zn.size());
      for (size_t i = 0; i < e.size(); ++i) e[i] = zn[i] - pred[i];
      errs.push_back(std::move(e));
      if (k > 0) dists.push_back(tr.w[k - 1]);
    }
    return empirical_iss_rate(errs, dists, art.csode_cert.P, art.csode_cert.gamma_nn);
  }
  return -1.0;
}

}  // namespace detail

/// Closed-loop episode under the method's controller on the benchmark test
/// scenario. Scenario randomness (wind phases, initial condition) derives
/// from scenario_seed, which method comparisons share pairwise.
inline EpisodeResult run_episode(Benchmark bench, const MethodArtifacts& art,
                                 const HarnessOptions& o, int index, uint64_t scenario_seed,
                                 Trajectory* traj_out = nullptr,
                                 std::vector<StepTelemetry>* telem_out = nullptr) {
  EpisodeResult res;
  res.index = index;
  res.seed = scenario_seed;

  Scenario sc;
  ReferencePath ref;
  Vec x0;
  if (bench == Benchmark::B1) {
    sc.duration = o.b1_duration;
    sc.friction.steps = {{0.0, o.b1_mu_high}, {o.b1_mu_switch_t, o.b1_mu_low}};
    sc.wind_max = o.b1_wind_max;
    sc.seed = scenario_seed;
    // rollouts look past the episode end; keep the reference alive there
    ref = ReferencePath::double_lane_change(sc.duration + o.mppi_horizon, o.lane);
    x0 = Vec{0.0, 0.0, 0.0, o.lane.speed};
  } else {
    sc.duration = o.b2_duration;
    sc.a_w = o.b2_a_w;
    sc.seed = scenario_seed;
    ref = ReferencePath::constant_setpoint(sc.duration, Vec{o.b2_setpoint, 0.0});
    // tracking episodes start near the reference so the metric measures
    // disturbance rejection rather than the shared settle transient
    RngStream rng = RngStream(scenario_seed).split(0xb2);
    x0 = Vec{o.b2_setpoint + rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)};
  }

  const PlantDef plant = bench == Benchmark::B1 ? bicycle_plant() : duffing_plant();
  const WindProfile wind(sc.wind_max, sc.seed);
  auto dist = [&](double t) {
    return bench == Benchmark::B1 ? Vec{wind.at(t)} : Vec{sc.a_w * std::cos(1.2 * t)};
  };

  const int n = plant.state_dim;
  auto ref_fn = [&ref, n](double t) { return ref.state_ref(t, n); };

  RolloutModel rollout = detail::method_rollout_model(bench, art);
  MppiConfig mcfg = detail::bench_mppi_config(bench, o, RngStream(scenario_seed).split(42).key());
  mcfg.threads = 1;  // episodes already fan out across the worker pool
  // the composite engine compensates unmodeled drift inside the sampling loop
  mcfg.drift_compensation = art.has_residual && o.drift_comp;
  mcfg.drift_beta = 0.6;
  MppiController ctrl(rollout, mcfg, ref_fn);
  const double w_bar = bench == Benchmark::B1 ? o.b1_wind_envelope : o.b2_a_w;
  if (art.certified()) ctrl.set_bound_constants(art.constants(), w_bar);

  const int ctrl_every = std::max(1, static_cast<int>(std::llround(o.dt_ctrl / sc.dt)));
  std::vector<StepTelemetry> telemetry;
  Vec u_hold(plant.control_dim, 0.0);
  int sim_k = 0;

  auto controller = [&](double t, const Vec& x, const Vec& xi) {
    if (sim_k % ctrl_every == 0) {
      StepTelemetry st;
      u_hold = ctrl.step(t, x, xi, &st);
      telemetry.push_back(st);
    }
    ++sim_k;
    return u_hold;
  };

  const Trajectory tr = simulate_episode(plant, controller, sc, dist, x0);
  if (traj_out) *traj_out = tr;
  if (telem_out) *telem_out = telemetry;
  if (tr.failed) {
    res.failed = true;
    return res;
  }

  // tracking error
  double acc = 0.0;
  double peak = 0.0;
  double recovered_at = -1.0;
  double below_since = -1.0;
  for (size_t k = 0; k < tr.x.size(); ++k) {
    const double t = tr.t[k];
    double dev;
    if (bench == Benchmark::B1) {
      dev = tr.x[k][1] - ref.sample(t).py;
    } else {
      dev = tr.x[k][0] - o.b2_setpoint;
    }
    acc += dev * dev;
    if (bench == Benchmark::B1 && t >= o.b1_mu_switch_t) {
      peak = std::max(peak, std::abs(dev));
      if (std::abs(dev) < 0.05) {
        if (below_since < 0.0) below_since = t;
        if (recovered_at < 0.0 && t - below_since >= 0.5) recovered_at = below_since;
      } else {
        below_since = -1.0;
      }
    }
  }
  res.rmse = std::sqrt(acc / tr.x.size());
  res.peak_dev_after_switch = peak;
  res.recovery_time = recovered_at < 0.0 ? -1.0 : recovered_at - o.b1_mu_switch_t;

  // control smoothness
  if (bench == Benchmark::B1) {
    double sd = 0.0;
    for (size_t k = 1; k < tr.u.size(); ++k) sd += std::abs(tr.u[k][0] - tr.u[k - 1][0]) / sc.dt;
    res.smoothness = tr.u.size() > 1 ? sd / (tr.u.size() - 1) : 0.0;
  } else {
    double p = 0.0;
    for (const Vec& u : tr.u) p += u[0] * u[0];
    res.smoothness = tr.u.empty() ? 0.0 : p / tr.u.size();
  }

  // telemetry aggregates (first step excluded from timing: warm-up)
  Vec times;
  double sig_acc = 0.0;
  int bound_ok = 0, bound_tot = 0;
  for (size_t i = 0; i < telemetry.size(); ++i) {
    const StepTelemetry& st = telemetry[i];
    if (i > 0) times.push_back(st.step_ms);
    sig_acc += st.sigma_J2;
    res.excluded_total += st.excluded_rollouts;
    if (art.certified()) {
      ++bound_tot;
      if (st.sigma_J2 <= st.bound) ++bound_ok;
    }
  }
  res.mean_sigma_J2 = telemetry.empty() ? 0.0 : sig_acc / telemetry.size();
  res.median_step_ms = detail::median(times);
  if (bound_tot > 0) res.bound_ok_frac = static_cast<double>(bound_ok) / bound_tot;
  res.iss_rate = detail::episode_iss_rate(bench, art, tr);
  return res;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

struct MetricsReport {
  std::string benchmark;
  std::string method;
  int episodes = 0;
  double rmse_mean = 0.0;
  double rmse_std = 0.0;
  double smoothness_mean = 0.0;
  double lmi_feasibility_rate = -1.0;  // mean empirical dissipation rate
  double step_time_ms = 0.0;           // median of per-episode medians
  double cost_variance_mean = 0.0;
  double bound_ok_frac = -1.0;
  int failed_episodes = 0;
};

inline MetricsReport aggregate_metrics(Benchmark bench, MethodId method,
                                       const std::vector<EpisodeResult>& eps) {
  MetricsReport rep;
  rep.benchmark = benchmark_name(bench);
  rep.method = method_name(method);
  rep.episodes = static_cast<int>(eps.size());
  if (eps.empty()) throw NumericError("aggregate_metrics: zero episodes");

  Vec rmses, times;
  double smooth = 0.0, sig = 0.0, iss = 0.0, bound = 0.0;
  int iss_n = 0, bound_n = 0, ok = 0;
  for (const EpisodeResult& e : eps) {
    if (e.failed) {
      ++rep.failed_episodes;
      continue;
    }
    ++ok;
    rmses.push_back(e.rmse);
    times.push_back(e.median_step_ms);
    smooth += e.smoothness;
    sig += e.mean_sigma_J2;
    if (e.iss_rate >= 0.0) {
      iss += e.iss_rate;
      ++iss_n;
    }
    if (e.bound_ok_frac >= 0.0) {
      bound += e.bound_ok_frac;
      ++bound_n;
    }
  }
  if (ok == 0) throw NumericError("aggregate_metrics: every episode failed");
  double mean = 0.0;
  for (double r : rmses) mean += r;
  mean /= rmses.size();
  double var = 0.0;
  for (double r : rmses) var += (r - mean) * (r - mean);
  rep.rmse_mean = mean;
  rep.rmse_std = rmses.size() > 1 ? std::sqrt(var / (rmses.size() - 1)) : 0.0;
  rep.smoothness_mean = smooth / ok;
  rep.cost_variance_mean = sig / ok;
  rep.step_time_ms = detail::median(times);
  if (iss_n > 0) rep.lmi_feasibility_rate = iss / iss_n;
  if (bound_n > 0) rep.bound_ok_frac = bound / bound_n;
  return rep;
}

/// Episode fan-out over a small worker pool; results land by index so the
/// reduction is order-independent.
inline std::vector<EpisodeResult> run_episodes(Benchmark bench, const MethodArtifacts& art,
                                               const HarnessOptions& o, int episodes) {
  std::vector<EpisodeResult> results(episodes);
  std::vector<uint64_t> seeds(episodes);
  for (int i = 0; i < episodes; ++i)
    seeds[i] = RngStream(o.master_seed).split(7000 + i).key();  // shared across methods

  const int workers = std::max(1, std::min(o.threads, episodes));
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  auto work = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= episodes) return;
      results[i] = run_episode(bench, art, o, i, seeds[i]);
    }
  };
  if (workers == 1) {
    work();
  } else {
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return results;
}

inline MetricsReport run_method(Benchmark bench, MethodId method, const HarnessOptions& o,
                                int episodes, std::vector<EpisodeResult>* out_eps = nullptr,
                                bool use_cache = true) {
  if (episodes <= 0) throw NumericError("run_method: episode count must be >= 1");
  const MethodArtifacts art = prepare_method(bench, method, o, use_cache);
  const auto eps = run_episodes(bench, art, o, episodes);
  if (out_eps) *out_eps = eps;
  return aggregate_metrics(bench, method, eps);
}

}  // namespace certctl

#endif  // CERTCTL_HARNESS_RUN_HPP
