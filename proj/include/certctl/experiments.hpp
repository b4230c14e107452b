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

#ifndef CERTCTL_EXPERIMENTS_HPP
#define CERTCTL_EXPERIMENTS_HPP

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "certctl/harness.hpp"
#include "certctl/svg.hpp"

namespace certctl {

// ---------------------------------------------------------------------------
// Deterministic output helpers. Wall-clock step times are real measurements
// and therefore live in *_timing sidecars, never in the reproducible
// CSV/JSON set.
// ---------------------------------------------------------------------------

inline nlohmann::json report_to_json(const MetricsReport& r) {
  return nlohmann::json{{"benchmark", r.benchmark},
                        {"method", r.method},
                        {"episodes", r.episodes},
                        {"failed_episodes", r.failed_episodes},
                        {"rmse_mean", r.rmse_mean},
                        {"rmse_std", r.rmse_std},
                        {"smoothness_mean", r.smoothness_mean},
                        {"lmi_feasibility_rate", r.lmi_feasibility_rate},
                        {"cost_variance_mean", r.cost_variance_mean},
                        {"bound_ok_frac", r.bound_ok_frac}};
}

inline void write_episode_rows(CsvWriter& csv, const std::string& bench, const std::string& method,
                               const std::vector<EpisodeResult>& eps) {
  for (const EpisodeResult& e : eps) {
    csv.row({bench, method, std::to_string(e.index), std::to_string(e.seed),
             format_double(e.rmse), format_double(e.smoothness), format_double(e.iss_rate),
             format_double(e.mean_sigma_J2), format_double(e.bound_ok_frac),
             std::to_string(e.excluded_total), format_double(e.peak_dev_after_switch),
             format_double(e.recovery_time), e.failed ? "1" : "0"});
  }
}

inline const std::vector<std::string>& episode_csv_header() {
  static const std::vector<std::string> h{"benchmark", "method",   "episode",   "seed",
                                          "rmse",      "smooth",   "iss_rate",  "sigma_J2",
                                          "bound_ok",  "excluded", "peak_dev",  "recovery",
                                          "failed"};
  return h;
}

/// Re-read an episode CSV and recompute the aggregate means; throws when the
/// stored report disagrees with its own raw rows.
inline void crosscheck_report(const std::string& csv_path,
                              const std::vector<MetricsReport>& reports) {
  const auto rows = read_csv(csv_path);
  if (rows.empty()) throw NumericError("crosscheck: empty csv");
  std::map<std::pair<std::string, std::string>, std::pair<double, int>> acc;
  for (size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.back() == "1") continue;  // failed episodes carry no metrics
    auto& slot = acc[{r[0], r[1]}];
    slot.first += std::stod(r[4]);
    slot.second += 1;
  }
  for (const MetricsReport& rep : reports) {
    const auto it = acc.find({rep.benchmark, rep.method});
    if (it == acc.end()) throw NumericError("crosscheck: method missing from csv: " + rep.method);
    const double mean = it->second.first / it->second.second;
    if (std::abs(mean - rep.rmse_mean) > 1e-9 * std::max(1.0, std::abs(mean)))
      throw NumericError("crosscheck: rmse mismatch for " + rep.method + ": csv " +
                         format_double(mean) + " vs report " + format_double(rep.rmse_mean));
  }
}

// ---------------------------------------------------------------------------
// Table 1: paired-episode comparison of the four methods on both benchmarks
// ---------------------------------------------------------------------------

struct SuiteResult {
  std::vector<MetricsReport> reports;
  std::map<std::string, std::vector<EpisodeResult>> episodes;  // key bench/method
};

inline SuiteResult suite_table1(const HarnessOptions& o, int episodes, const std::string& out_dir,
                                bool use_cache = true) {
  std::filesystem::create_directories(out_dir);
  SuiteResult out;
  const std::vector<MethodId> methods{MethodId::VanillaNode, MethodId::KoopmanUncert,
                                      MethodId::KoopmanIss, MethodId::CsodeIcodeMppi};

  nlohmann::json jreport = nlohmann::json::array();
  std::string timing;
  {
    CsvWriter csv(out_dir + "/table1_episodes.csv");
    csv.row(episode_csv_header());
    for (Benchmark bench : {Benchmark::B1, Benchmark::B2}) {
      for (MethodId m : methods) {
        std::vector<EpisodeResult> eps;
        const MetricsReport rep = run_method(bench, m, o, episodes, &eps, use_cache);
        write_episode_rows(csv, rep.benchmark, rep.method, eps);
        jreport.push_back(report_to_json(rep));
        timing += rep.benchmark + " " + rep.method + " step_time_ms_median " +
                  format_double(rep.step_time_ms) + "\n";
        out.reports.push_back(rep);
        out.episodes[rep.benchmark + "/" + rep.method] = eps;
      }
    }
  }

  {
    std::ofstream jf(out_dir + "/table1_report.json", std::ios::binary);
    jf << jreport.dump(2) << "\n";
  }
  {
    std::ofstream tf(out_dir + "/table1_timing.txt", std::ios::binary);
    tf << timing;
  }
  crosscheck_report(out_dir + "/table1_episodes.csv", out.reports);
  return out;
}

// ---------------------------------------------------------------------------
// Fig. 1: lateral deviation through the friction switch
// ---------------------------------------------------------------------------

struct TransientResult {
  std::map<std::string, double> peak, recovery;
  std::map<std::string, std::vector<std::pair<double, double>>> curves;
};

inline TransientResult suite_fig1(const HarnessOptions& opts, const std::string& out_dir,
                                  bool use_cache = true) {
  std::filesystem::create_directories(out_dir);
  TransientResult out;
  HarnessOptions o = opts;
  o.b1_wind_max = opts.fig1_wind_max;  // isolate the friction-drop transient
  const std::vector<MethodId> methods{MethodId::VanillaNode, MethodId::KoopmanUncert,
                                      MethodId::KoopmanIss, MethodId::CsodeIcodeMppi};
  const ReferencePath ref = ReferencePath::double_lane_change(o.b1_duration, o.lane);
  const uint64_t seed = RngStream(o.master_seed).split(7000).key();  // episode 0 scenario

  std::vector<SvgSeries> series;
  const std::vector<std::string> colors{"#4878cf", "#46a546", "#ee8833", "#c0392b"};
  nlohmann::json jt;
  int ci = 0;
  for (MethodId m : methods) {
    const MethodArtifacts art = prepare_method(Benchmark::B1, m, o, use_cache);
    Trajectory tr;
    const EpisodeResult res = run_episode(Benchmark::B1, art, o, 0, seed, &tr);
    SvgSeries s;
    s.label = method_name(m);
    s.color = colors[ci % colors.size()];
    s.dashed = m != MethodId::CsodeIcodeMppi;
    for (size_t k = 0; k < tr.x.size(); k += 2) {
      const double dev = tr.x[k][1] - ref.sample(tr.t[k]).py;
      s.points.push_back({tr.t[k], std::abs(dev)});
    }
    out.curves[s.label] = s.points;
    out.peak[s.label] = res.peak_dev_after_switch;
    out.recovery[s.label] = res.recovery_time;
    jt[s.label] = {{"peak_after_switch", res.peak_dev_after_switch},
                   {"recovery_time", res.recovery_time},
                   {"rmse", res.rmse}};
    series.push_back(std::move(s));
    ++ci;
  }
  write_line_chart(out_dir + "/fig1_tracking.svg", "Lateral deviation, friction drop", "time (s)",
                   "deviation (m)", series, o.b1_mu_switch_t);
  std::ofstream jf(out_dir + "/fig1_transients.json", std::ios::binary);
  jf << jt.dump(2) << "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Fig. 2: open-loop prediction RMSE vs disturbance amplitude (Duffing)
// ---------------------------------------------------------------------------

struct SweepResult {
  Vec grid;
  std::map<std::string, Vec> rmse;  // per method
  double r2_certified = 0.0;
  double slope = 0.0, intercept = 0.0;
  bool monotone_certified = true;
};

namespace detail {

/// Re-anchored rolling forecast error of the method's predictor on one
/// forced trajectory (prediction runs blind to the disturbance).
inline double forecast_sq_error(const MethodArtifacts& art, const Trajectory& tr,
                                int anchor_every, double dt, double* count) {
  double acc = 0.0;
  const bool koop = art.has_koopman;
  Vec z;
  for (size_t k = 0; k < tr.u.size(); ++k) {
    if (k % anchor_every == 0) {
      z = koop ? lift(art.koopman.dict, tr.x[k]) : encode(art.model, tr.x[k], tr.xi[k]);
    }
    if (koop) {
      z = art.koopman.step(z, tr.u[k], Vec(art.koopman.E.cols, 0.0));
      const double e = z[0] - tr.x[k + 1][0];
      acc += e * e;
    } else {
      auto f = [&](double, const Vec& zz) {
        Vec d = latent_deriv(art.model, zz, tr.u[k], tr.xi[k]);
        if (art.has_residual) {
          const Vec rd = latent_deriv(art.residual, zz, tr.u[k], tr.xi[k]);
          for (size_t i = 0; i < d.size(); ++i) d[i] += rd[i];
        }
        return d;
      };
      z = rk4_step(f, z, tr.t[k], dt);
      const double e = decode(art.model, z)[0] - tr.x[k + 1][0];
      acc += e * e;
    }
    *count += 1.0;
  }
  return acc;
}

}  // namespace detail

inline SweepResult disturbance_sweep(const HarnessOptions& o, const std::vector<MethodId>& methods,
                                     const Vec& a_w_grid, int n_traj, bool use_cache = true) {
  if (a_w_grid.size() < 4) throw NumericError("disturbance_sweep: need >= 4 grid points");
  for (size_t i = 1; i < a_w_grid.size(); ++i)
    if (a_w_grid[i] <= a_w_grid[i - 1])
      throw NumericError("disturbance_sweep: grid must be ascending");

  SweepResult out;
  out.grid = a_w_grid;
  const PlantDef plant = duffing_plant();

  std::vector<MethodArtifacts> arts;
  for (MethodId m : methods) arts.push_back(prepare_method(Benchmark::B2, m, o, use_cache));

  for (double a_w : a_w_grid) {
    std::map<std::string, std::pair<double, double>> acc;  // sq error, count
    for (int t = 0; t < n_traj; ++t) {
      RngStream rng = RngStream(o.master_seed).split(90000 + t);
      Scenario sc;
      sc.duration = 10.0;
      const detail::TwoTone tone(rng.uniform(0.4, 1.0), rng);
      auto ctrl = [&](double tt, const Vec&, const Vec&) { return Vec{tone.at(tt)}; };
      auto dist = [a_w](double tt) { return Vec{a_w * std::cos(1.2 * tt)}; };
      const Vec x0{rng.uniform(-1.0, 1.0), rng.uniform(-0.8, 0.8)};
      const Trajectory tr = simulate_episode(plant, ctrl, sc, dist, x0);
      if (tr.failed) continue;
      for (size_t mi = 0; mi < methods.size(); ++mi) {
        auto& slot = acc[method_name(methods[mi])];
        slot.first += detail::forecast_sq_error(arts[mi], tr, 50, sc.dt, &slot.second);
      }
    }
    for (const auto& [name, se] : acc)
      out.rmse[name].push_back(std::sqrt(se.first / std::max(1.0, se.second)));
  }

  // least-squares line through the certified-Koopman column
  const Vec& y = out.rmse.at(method_name(MethodId::KoopmanIss));
  const size_t n = y.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    sx += a_w_grid[i];
    sy += y[i];
    sxx += a_w_grid[i] * a_w_grid[i];
    sxy += a_w_grid[i] * y[i];
  }
  const double det = n * sxx - sx * sx;
  out.slope = (n * sxy - sx * sy) / det;
  out.intercept = (sy - out.slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double ymean = sy / n;
  for (size_t i = 0; i < n; ++i) {
    const double fit = out.intercept + out.slope * a_w_grid[i];
    ss_res += (y[i] - fit) * (y[i] - fit);
    ss_tot += (y[i] - ymean) * (y[i] - ymean);
  }
  out.r2_certified = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  for (size_t i = 1; i < n; ++i)
    if (y[i] < y[i - 1] - 1e-9) out.monotone_certified = false;
  return out;
}

inline SweepResult suite_fig2(const HarnessOptions& o, int n_traj, const std::string& out_dir,
                              bool use_cache = true) {
  std::filesystem::create_directories(out_dir);
  const std::vector<MethodId> methods{MethodId::VanillaNode, MethodId::KoopmanUncert,
                                      MethodId::KoopmanIss, MethodId::CsodeIcodeMppi};
  const Vec grid{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  const SweepResult res = disturbance_sweep(o, methods, grid, n_traj, use_cache);

  std::vector<SvgSeries> series;
  const std::vector<std::string> colors{"#4878cf", "#46a546", "#ee8833", "#c0392b"};
  int ci = 0;
  for (const auto& [name, col] : res.rmse) {
    SvgSeries s;
    s.label = name;
    s.color = colors[ci++ % colors.size()];
    for (size_t i = 0; i < res.grid.size(); ++i) s.points.push_back({res.grid[i], col[i]});
    series.push_back(std::move(s));
  }
  SvgSeries fit;
  fit.label = "linear fit (certified)";
  fit.color = "#555555";
  fit.dashed = true;
  for (double a : res.grid) fit.points.push_back({a, res.intercept + res.slope * a});
  series.push_back(std::move(fit));
  write_line_chart(out_dir + "/fig2_sweep.svg", "Prediction RMSE vs disturbance amplitude",
                   "a_w", "position RMSE (m)", series);

  nlohmann::json j{{"r2_certified", res.r2_certified},
                   {"slope", res.slope},
                   {"intercept", res.intercept},
                   {"monotone_certified", res.monotone_certified},
                   {"grid", res.grid}};
  for (const auto& [name, col] : res.rmse) j["rmse"][name] = col;
  std::ofstream jf(out_dir + "/fig2_sweep.json", std::ios::binary);
  jf << j.dump(2) << "\n";
  return res;
}

// ---------------------------------------------------------------------------
// Fig. 3: ablation grid
// ---------------------------------------------------------------------------

struct AblationResult {
  std::map<std::string, MetricsReport> reports;
  std::map<std::string, double> variance_ratio;  // vs full pipeline
};

inline AblationResult ablation(const HarnessOptions& o, int episodes, bool use_cache = true) {
  AblationResult out;
  const std::vector<MethodId> variants{MethodId::CsodeIcodeMppi, MethodId::AblateNoBundle,
                                       MethodId::AblateNoIcode, MethodId::AblateNoIss};
  for (MethodId m : variants) {
    std::vector<EpisodeResult> eps;
    out.reports[method_name(m)] = run_method(Benchmark::B1, m, o, episodes, &eps, use_cache);
  }
  const double base = out.reports.at(method_name(MethodId::CsodeIcodeMppi)).cost_variance_mean;
  for (const auto& [name, rep] : out.reports)
    out.variance_ratio[name] = base > 0 ? rep.cost_variance_mean / base : 1.0;
  return out;
}

inline AblationResult suite_fig3(const HarnessOptions& o, int episodes,
                                 const std::string& out_dir, bool use_cache = true) {
  std::filesystem::create_directories(out_dir);
  const AblationResult res = ablation(o, episodes, use_cache);

  std::vector<std::pair<std::string, double>> bars;
  for (MethodId m : {MethodId::CsodeIcodeMppi, MethodId::AblateNoBundle, MethodId::AblateNoIcode,
                     MethodId::AblateNoIss})
    bars.push_back({method_name(m), res.reports.at(method_name(m)).rmse_mean});
  write_bar_chart(out_dir + "/fig3_ablation.svg", "Ablation: tracking RMSE", "RMSE (m)", bars);

  nlohmann::json j;
  for (const auto& [name, rep] : res.reports) {
    j[name] = report_to_json(rep);
    j[name]["variance_ratio_vs_full"] = res.variance_ratio.at(name);
  }
  std::ofstream jf(out_dir + "/fig3_ablation.json", std::ios::binary);
  jf << j.dump(2) << "\n";
  return res;
}

// ---------------------------------------------------------------------------
// Prop. 2: dictionary sweep
// ---------------------------------------------------------------------------

struct DictSweepRow {
  int degree = 0;
  int dict_size = 0;
  double eps_state = 0.0;
  double eps_full = 0.0;
  double gamma_star = 0.0;
  bool feasible = false;
  std::string diagnosis;
};

inline std::vector<DictSweepRow> dictionary_sweep(const SnapshotDataset& data,
                                                  const std::vector<int>& degrees, double rho,
                                                  double tol_bisect) {
  for (size_t i = 1; i < degrees.size(); ++i)
    if (degrees[i] <= degrees[i - 1]) throw NumericError("dictionary_sweep: degrees must ascend");
  std::vector<DictSweepRow> rows;
  for (int deg : degrees) {
    Dictionary dict = Dictionary::identity(data.n);
    for (const auto& powers : monomials_up_to(data.n, deg)) {
      Observable obs;
      obs.powers = powers;
      bool dup = false;
      for (const Observable& e : dict.observables)
        if (e == obs) dup = true;
      if (!dup) dict.add(obs);
    }
    DictSweepRow row;
    row.degree = deg;
    row.dict_size = dict.size();
    const KoopmanModel model = edmd_fit(data, dict, rho);
    row.eps_state = state_residual(model, data);
    row.eps_full = model.residual_eps;
    const GainResult g = optimal_gain(model.A, model.E, tol_bisect);
    row.feasible = g.feasible;
    if (g.feasible) {
      row.gamma_star = g.gamma_star;
      row.diagnosis = "feasible";
    } else {
      row.gamma_star = std::numeric_limits<double>::infinity();
      row.diagnosis = g.reason;
    }
    rows.push_back(row);
  }
  return rows;
}

inline std::vector<DictSweepRow> suite_prop2(const HarnessOptions& o, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const uint64_t data_seed =
      RngStream(o.master_seed).split(static_cast<uint64_t>(Benchmark::B2) + 1).key();
  const auto data = generate_training_data(Benchmark::B2, o, data_seed);
  const SnapshotDataset snaps = SnapshotDataset::from_trajectories(data, 0.02);
  const auto rows = dictionary_sweep(snaps, {1, 2, 3, 4}, 0.0, o.tol_bisect);

  CsvWriter csv(out_dir + "/prop2_sweep.csv");
  csv.row({"degree", "dict_size", "eps_state", "eps_full", "gamma_star", "diagnosis"});
  for (const auto& r : rows)
    csv.row({std::to_string(r.degree), std::to_string(r.dict_size), format_double(r.eps_state),
             format_double(r.eps_full), format_double(r.gamma_star), r.diagnosis});

  bool eps_mono = true, gamma_mono = true;
  for (size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].eps_state > rows[i - 1].eps_state + 1e-12) eps_mono = false;
    if (rows[i].gamma_star > rows[i - 1].gamma_star + 2.0 * o.tol_bisect * rows[i - 1].gamma_star)
      gamma_mono = false;
  }
  nlohmann::json j{{"eps_monotone", eps_mono}, {"gamma_monotone", gamma_mono}};
  std::ofstream jf(out_dir + "/prop2_verdicts.json", std::ios::binary);
  jf << j.dump(2) << "\n";
  return rows;
}

// ---------------------------------------------------------------------------
// Prop. 3: rollout variance bound check
// ---------------------------------------------------------------------------

struct Prop3Result {
  long steps = 0;
  long satisfied = 0;
  double frac = 0.0;
};

inline Prop3Result suite_prop3(const HarnessOptions& o, int episodes, const std::string& out_dir,
                               bool use_cache = true) {
  std::filesystem::create_directories(out_dir);
  const MethodArtifacts art = prepare_method(Benchmark::B1, MethodId::CsodeIcodeMppi, o, use_cache);
  if (!art.certified()) throw NumericError("prop3: full pipeline is not certified");

  Prop3Result res;
  CsvWriter csv(out_dir + "/prop3_steps.csv");
  csv.row({"episode", "t", "sigma_J2", "bound"});
  for (int e = 0; e < episodes; ++e) {
    const uint64_t seed = RngStream(o.master_seed).split(7000 + e).key();
    std::vector<StepTelemetry> telem;
    Trajectory tr;
    run_episode(Benchmark::B1, art, o, e, seed, &tr, &telem);
    for (const StepTelemetry& st : telem) {
      ++res.steps;
      if (st.sigma_J2 <= st.bound) ++res.satisfied;
      if (e == 0) csv.row({std::to_string(e), format_double(st.t), format_double(st.sigma_J2),
                           format_double(st.bound)});
    }
  }
  res.frac = res.steps > 0 ? static_cast<double>(res.satisfied) / res.steps : 0.0;
  nlohmann::json j{{"steps", res.steps}, {"satisfied", res.satisfied}, {"fraction", res.frac}};
  std::ofstream jf(out_dir + "/prop3_bound.json", std::ios::binary);
  jf << j.dump(2) << "\n";
  return res;
}

}  // namespace certctl

#endif  // CERTCTL_EXPERIMENTS_HPP
