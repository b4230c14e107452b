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

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "certctl/experiments.hpp"
#include "certctl/harness.hpp"
#include "certctl/version.hpp"

using namespace certctl;

namespace {

Benchmark parse_benchmark(const std::string& s) {
  if (s == "b1") return Benchmark::B1;
  if (s == "b2") return Benchmark::B2;
  throw NumericError("unknown benchmark: " + s + " (expected b1 or b2)");
}

HarnessOptions load_options(const std::string& config_path, uint64_t seed, int threads,
                            const std::string& cache_dir) {
  HarnessOptions o;
  if (!config_path.empty()) apply_config(o, ConfigFile::parse_file(config_path));
  o.master_seed = seed;
  o.threads = threads;
  if (!cache_dir.empty()) o.cache_dir = cache_dir;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"certctl: certified data-driven dynamics and sampling control"};
  app.require_subcommand(1);

  uint64_t seed = 7;
  int threads = 2;
  std::string config_path;
  std::string cache_dir;
  app.add_option("--seed", seed, "master seed");
  app.add_option("--threads", threads, "worker threads");
  app.add_option("--config", config_path, "options file (key = value sections)");
  app.add_option("--cache", cache_dir, "model artifact cache directory");

  // identify
  auto* cmd_identify = app.add_subcommand("identify", "fit a lifted linear model by EDMD");
  std::string id_bench = "b2", id_out = "model.json";
  int id_degree = 3, id_rbf = -1;
  double id_ridge = 1e-6;
  cmd_identify->add_option("--benchmark", id_bench, "b1|b2")->required();
  cmd_identify->add_option("--degree", id_degree, "max monomial degree");
  cmd_identify->add_option("--ridge", id_ridge, "ridge weight");
  cmd_identify->add_option("--rbf", id_rbf, "RBF count (default: benchmark preset)");
  cmd_identify->add_option("--out", id_out, "output model json")->required();

  // certify
  auto* cmd_certify = app.add_subcommand("certify", "compute the optimal ISS gain certificate");
  std::string ct_model = "model.json", ct_out = "cert.json";
  double ct_tol = 1e-6;
  cmd_certify->add_option("--model", ct_model, "koopman model json")->required();
  cmd_certify->add_option("--tol", ct_tol, "bisection tolerance");
  cmd_certify->add_option("--out", ct_out, "output certificate json")->required();

  // train
  auto* cmd_train = app.add_subcommand("train", "train a neural dynamics model");
  std::string tr_arch = "csode", tr_bench = "b1", tr_out = "ckpt";
  cmd_train->add_option("--arch", tr_arch, "csode|icode|vanilla")->required();
  cmd_train->add_option("--benchmark", tr_bench, "b1|b2")->required();
  cmd_train->add_option("--out", tr_out, "checkpoint directory")->required();

  // simulate
  auto* cmd_sim = app.add_subcommand("simulate", "run one closed-loop episode");
  std::string sm_bench = "b1", sm_method = "csode-icode-mppi", sm_scenario = "lane_change";
  std::string sm_traj, sm_telemetry;
  uint64_t sm_seed = 7;
  cmd_sim->add_option("--benchmark", sm_bench, "b1|b2")->required();
  cmd_sim->add_option("--method", sm_method, "controller method");
  cmd_sim->add_option("--scenario", sm_scenario, "lane_change|setpoint");
  cmd_sim->add_option("--episode-seed", sm_seed, "scenario seed");
  cmd_sim->add_option("--out", sm_traj, "trajectory csv path");
  cmd_sim->add_option("--telemetry", sm_telemetry, "telemetry jsonl path");

  // experiment
  auto* cmd_exp = app.add_subcommand("experiment", "run a reproduction suite");
  std::string ex_suite = "table1", ex_out = "results";
  int ex_episodes = 50;
  bool ex_no_cache = false;
  cmd_exp->add_option("--suite", ex_suite, "table1|fig1|fig2|fig3|prop2|prop3")->required();
  cmd_exp->add_option("--episodes", ex_episodes, "episode count");
  cmd_exp->add_option("--out", ex_out, "output directory")->required();
  cmd_exp->add_flag("--no-cache", ex_no_cache, "retrain instead of loading cached artifacts");

  app.add_subcommand("version", "print the tool version");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("version")) {
      std::printf("certctl %s\n", kVersion);
      return 0;
    }

    HarnessOptions opts = load_options(config_path, seed, threads, cache_dir);

    if (app.got_subcommand(cmd_identify)) {
      const Benchmark bench = parse_benchmark(id_bench);
      const uint64_t data_seed =
          RngStream(opts.master_seed).split(static_cast<uint64_t>(bench) + 1).key();
      const auto data = generate_training_data(bench, opts, data_seed);
      const SnapshotDataset snaps = SnapshotDataset::from_trajectories(data, 0.02);
      DictionaryConfig dc;
      dc.max_degree = id_degree;
      dc.stls_threshold = opts.stls_threshold;
      dc.n_rbf = id_rbf >= 0 ? id_rbf : (bench == Benchmark::B2 ? opts.koopman_rbf_b2 : 0);
      dc.seed = opts.master_seed;
      const Dictionary dict = build_dictionary(snaps, dc);
      const KoopmanModel model = edmd_fit(snaps, dict, id_ridge);
      std::ofstream out(id_out, std::ios::binary);
      out << koopman_to_json(model).dump(2) << "\n";
      std::printf("identified: N=%d residual=%s -> %s\n", model.lifted_dim(),
                  format_double(model.residual_eps).c_str(), id_out.c_str());
      return 0;
    }

    if (app.got_subcommand(cmd_certify)) {
      std::ifstream in(ct_model, std::ios::binary);
      if (!in) throw NumericError("cannot open " + ct_model);
      nlohmann::json j;
      in >> j;
      const KoopmanModel model = koopman_from_json(j);
      const GainResult g = optimal_gain(model.A, model.E, ct_tol);
      if (!g.feasible) {
        std::printf("infeasible: %s\n", g.reason.c_str());
        return 1;
      }
      std::ofstream out(ct_out, std::ios::binary);
      nlohmann::json jc = iss_cert_to_json(g.cert);
      jc["gamma_star"] = g.gamma_star;
      out << jc.dump(2) << "\n";
      std::printf("gamma* = %s (certified at %s, margin %s) -> %s\n",
                  format_double(g.gamma_star).c_str(), format_double(g.cert.gamma).c_str(),
                  format_double(g.cert.margin).c_str(), ct_out.c_str());
      return 0;
    }

    if (app.got_subcommand(cmd_train)) {
      const Benchmark bench = parse_benchmark(tr_bench);
      MethodId method;
      if (tr_arch == "csode")
        method = MethodId::CsodeIcodeMppi;
      else if (tr_arch == "vanilla")
        method = MethodId::VanillaNode;
      else if (tr_arch == "icode")
        method = MethodId::AblateNoBundle;  // coupled latent model without fibers
      else
        throw NumericError("unknown arch: " + tr_arch);
      const MethodArtifacts art = prepare_method(bench, method, opts, /*use_cache=*/false);
      std::filesystem::create_directories(tr_out);
      detail::save_artifacts(art, tr_out);
      std::printf("trained %s for %s -> %s%s\n", tr_arch.c_str(), tr_bench.c_str(),
                  tr_out.c_str(), art.certified() ? " (certified)" : "");
      return 0;
    }

    if (app.got_subcommand(cmd_sim)) {
      const Benchmark bench = parse_benchmark(sm_bench);
      if (bench == Benchmark::B1 && sm_scenario != "lane_change")
        throw NumericError("b1 scenario must be lane_change");
      if (bench == Benchmark::B2 && sm_scenario != "setpoint")
        throw NumericError("b2 scenario must be setpoint");
      const MethodArtifacts art = prepare_method(bench, parse_method(sm_method), opts);
      Trajectory tr;
      std::vector<StepTelemetry> telem;
      const EpisodeResult res = run_episode(bench, art, opts, 0, sm_seed, &tr, &telem);
      if (!sm_traj.empty()) write_trajectory_csv(tr, sm_traj);
      if (!sm_telemetry.empty()) {
        std::ofstream out(sm_telemetry, std::ios::binary);
        for (const StepTelemetry& st : telem) out << telemetry_to_json(st).dump() << "\n";
      }
      std::printf("episode: rmse=%s smooth=%s iss_rate=%s sigma_J2=%s failed=%d\n",
                  format_double(res.rmse).c_str(), format_double(res.smoothness).c_str(),
                  format_double(res.iss_rate).c_str(), format_double(res.mean_sigma_J2).c_str(),
                  res.failed ? 1 : 0);
      return res.failed ? 1 : 0;
    }

    if (app.got_subcommand(cmd_exp)) {
      const bool cache = !ex_no_cache;
      if (ex_suite == "table1") {
        const SuiteResult r = suite_table1(opts, ex_episodes, ex_out, cache);
        for (const MetricsReport& rep : r.reports)
          std::printf("%s %-18s rmse %.4f +- %.4f  iss %.3f\n", rep.benchmark.c_str(),
                      rep.method.c_str(), rep.rmse_mean, rep.rmse_std, rep.lmi_feasibility_rate);
      } else if (ex_suite == "fig1") {
        const TransientResult r = suite_fig1(opts, ex_out, cache);
        for (const auto& [name, peak] : r.peak)
          std::printf("%-18s peak %.3f m, recovery %s s\n", name.c_str(), peak,
                      format_double(r.recovery.at(name)).c_str());
      } else if (ex_suite == "fig2") {
        const SweepResult r = suite_fig2(opts, ex_episodes, ex_out, cache);
        std::printf("certified column R^2 = %.4f, monotone = %d\n", r.r2_certified,
                    r.monotone_certified ? 1 : 0);
      } else if (ex_suite == "fig3") {
        const AblationResult r = suite_fig3(opts, ex_episodes, ex_out, cache);
        for (const auto& [name, rep] : r.reports)
          std::printf("%-18s rmse %.4f  var-ratio %.2f\n", name.c_str(), rep.rmse_mean,
                      r.variance_ratio.at(name));
      } else if (ex_suite == "prop2") {
        const auto rows = suite_prop2(opts, ex_out);
        for (const auto& r : rows)
          std::printf("degree %d (N=%d): eps=%s gamma*=%s %s\n", r.degree, r.dict_size,
                      format_double(r.eps_state).c_str(), format_double(r.gamma_star).c_str(),
                      r.diagnosis.c_str());
      } else if (ex_suite == "prop3") {
        const Prop3Result r = suite_prop3(opts, ex_episodes, ex_out, cache);
        std::printf("sigma_J2 <= bound at %ld / %ld steps (%.4f)\n", r.satisfied, r.steps, r.frac);
      } else {
        throw NumericError("unknown suite: " + ex_suite);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
