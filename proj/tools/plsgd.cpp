/*
 * Copyright 2026 The plsgd Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// plsgd: problem generation, single SGD runs, gradient-gap studies and rate
// experiments.
//
// Exit codes: 0 ok, 2 configuration, 3 certification, 4 too many failed
// cells, 5 divergence in a single run.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "plsgd/experiments.hpp"
#include "plsgd/gradgap.hpp"
#include "plsgd/io.hpp"
#include "plsgd/problems.hpp"

namespace fs = std::filesystem;
using namespace plsgd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitCertification = 3;
constexpr int kExitAggregate = 4;
constexpr int kExitDivergence = 5;

struct Options {
  std::string config;
  std::string out;
  unsigned workers = 0;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> cap_steps;
  bool force = false;
  bool dry_run = false;
  bool dump = false;
};

unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

Config load(const Options& opt) {
  Config cfg = load_config(opt.config);
  if (opt.seed) override_master_seed(cfg, *opt.seed);
  if (opt.cap_steps) override_cap_steps(cfg, *opt.cap_steps);
  return cfg;
}

fs::path require_out(const Options& opt) {
  if (opt.out.empty()) throw ConfigError("--out", "an output directory is required");
  prepare_out_dir(opt.out, opt.force);
  return opt.out;
}

void echo_config(const fs::path& dir, const Config& cfg, RunManifest& manifest) {
  const std::string bytes = cfg.document.dump(2) + "\n";
  manifest.set_config(bytes);
  write_output(dir, "config.json", bytes, manifest);
}

Json resolved_to_json(const std::vector<ResolvedSchedule>& resolved) {
  Json arr = Json::array();
  for (const ResolvedSchedule& r : resolved) {
    Json j;
    j["arm"] = std::string(to_string(r.arm));
    j["n"] = r.n;
    Json scheds = Json::array();
    for (const Schedule& s : r.schedules) {
      Json sj = schedule_to_json(s);
      sj["t"] = s.stop_iter > r.n && s.source != ScheduleSource::Theorem1 &&
                        s.source != ScheduleSource::Theorem4
                    ? s.stop_iter - r.n
                    : 0;
      scheds.push_back(sj);
    }
    j["schedules"] = scheds;
    if (!r.error.empty()) j["error"] = r.error;
    arr.push_back(j);
  }
  return arr;
}

Json cell_to_json(const CellResult& c) {
  Json j;
  j["arm"] = std::string(to_string(c.arm));
  j["n"] = c.n;
  j["seed_index"] = c.seed_index;
  j["dataset_seed"] = c.dataset_seed;
  j["excess_risk"] = c.excess_risk;
  j["excess_std_error"] = c.excess_std_error;
  j["first_epoch_excess"] = c.first_epoch_excess;
  j["steps"] = c.steps;
  j["epochs"] = c.epochs;
  j["truncated"] = c.truncated;
  j["ball_exit"] = c.ball_exit;
  j["diverged"] = c.diverged;
  j["skipped_reason"] = c.skipped_reason;
  j["note"] = c.note;
  Json scheds = Json::array();
  for (const Schedule& s : c.schedules) scheds.push_back(schedule_to_json(s));
  j["schedules"] = scheds;
  return j;
}

int cmd_gen(const Options& opt) {
  Config cfg = load(opt);
  const fs::path dir = require_out(opt);
  RunManifest manifest("gen", cfg.experiment.master_seed);
  echo_config(dir, cfg, manifest);

  const ProblemInstance instance = generate_problem(cfg.problem);
  const int probes = cfg.problem.pl_probes;
  const std::uint64_t probe_seed = derive_seed({cfg.problem.seed, tag("pl-report")});
  const double min_ratio = verify_pl(instance, probes, probe_seed);

  write_output(dir, "problem.json", problem_to_json(cfg.problem).dump(2) + "\n", manifest);

  const std::size_t n = cfg.schedule.n;
  const std::uint64_t ds_seed = cell_dataset_seed(cfg.experiment, n, cfg.schedule.seed_index);
  const Dataset data = generate_dataset(instance, n, ds_seed);
  Json dj;
  dj["problem"] = "problem.json";
  dj["n"] = n;
  dj["seed_index"] = cfg.schedule.seed_index;
  dj["dataset_seed"] = ds_seed;
  dj["hash"] = hex64(dataset_hash(data));
  write_output(dir, "dataset.json", dj.dump(2) + "\n", manifest);
  if (opt.dump) {
    std::ostringstream bin;
    write_dataset_binary(bin, data);
    write_output(dir, "dataset.bin", bin.str(), manifest);
  }

  Json cj;
  cj["family"] = std::string(to_string(cfg.problem.family));
  cj["constants"] = constants_to_json(instance.constants());
  cj["lambda_min_sigma"] = instance.second_moment();
  cj["optimal_risk"] = instance.optimal_risk();
  cj["verify_pl"] = {{"n_probes", probes}, {"seed", probe_seed}, {"min_ratio", min_ratio}};
  write_output(dir, "constants.json", cj.dump(2) + "\n", manifest);
  manifest.write(dir);

  const ProblemConstants& c = instance.constants();
  std::cout << fmt::format("{} d={} mu={:.6g} gamma={:.6g} L={:.6g} verify_pl min ratio={:.6g}\n",
                           to_string(cfg.problem.family), cfg.problem.dim, c.mu, c.gamma, c.L,
                           min_ratio);
  std::cout << fmt::format("dataset n={} hash={}\n", n, hex64(dataset_hash(data)));
  return kExitOk;
}

int cmd_run(const Options& opt) {
  Config cfg = load(opt);
  const ProblemInstance instance = generate_problem(cfg.problem);
  const SingleRunSettings& s = cfg.schedule;
  if (opt.dry_run) {
    ExperimentConfig one = cfg.experiment;
    one.n_grid = {s.n};
    one.arms = {s.arm};
    std::cout << resolved_to_json(resolve_schedules(one, instance)).dump(2) << "\n";
    return kExitOk;
  }
  const fs::path dir = require_out(opt);
  RunManifest manifest("run", cfg.experiment.master_seed);
  echo_config(dir, cfg, manifest);

  const std::uint64_t every = s.checkpoint_every > 0 ? s.checkpoint_every : s.n;
  const SingleRun run = run_single(cfg.experiment, instance, s.arm, s.n, s.seed_index, every);
  std::ostringstream csv;
  write_trajectory_csv(csv, run.trajectory);
  write_output(dir, "trajectory.csv", csv.str(), manifest);
  write_output(dir, "schedule.json", cell_to_json(run.cell).dump(2) + "\n", manifest);
  manifest.write(dir);

  const CellResult& c = run.cell;
  if (c.diverged) {
    std::cerr << "divergence: " << c.note << "\n";
    return kExitDivergence;
  }
  if (!c.skipped_reason.empty()) {
    std::cerr << "schedule not constructible: " << c.skipped_reason << "\n";
    return kExitConfig;
  }
  std::cout << fmt::format("{} n={} steps={} excess_risk={:.6e}{}{}\n", to_string(c.arm), c.n,
                           c.steps, c.excess_risk, c.truncated ? " (truncated)" : "",
                           c.ball_exit ? " (left operating ball)" : "");
  return kExitOk;
}

int cmd_rates(const Options& opt, unsigned workers) {
  Config cfg = load(opt);
  validate_experiment(cfg);
  const ProblemInstance instance = generate_problem(cfg.problem);
  if (opt.dry_run) {
    std::cout << resolved_to_json(resolve_schedules(cfg.experiment, instance)).dump(2) << "\n";
    return kExitOk;
  }
  const fs::path dir = require_out(opt);
  RunManifest manifest("rates", cfg.experiment.master_seed);
  echo_config(dir, cfg, manifest);

  const ExperimentResult result = run_experiment(cfg.experiment, instance, workers);
  std::ostringstream cells, rates;
  write_cells_csv(cells, result.cells);
  write_rates_csv(rates, result.reports);
  write_output(dir, "cells.csv", cells.str(), manifest);
  write_output(dir, "rates.csv", rates.str(), manifest);
  Json echo = Json::array();
  for (const RateReport& r : result.reports) {
    std::ostringstream dat;
    write_rate_dat(dat, r);
    write_output(dir, fmt::format("rate_{}.dat", to_string(r.arm)), dat.str(), manifest);
    for (const auto& [n, scheds] : r.schedule_echo) {
      Json j;
      j["arm"] = std::string(to_string(r.arm));
      j["n"] = n;
      Json arr = Json::array();
      for (const Schedule& s : scheds) arr.push_back(schedule_to_json(s));
      j["schedules"] = arr;
      echo.push_back(j);
    }
    if (r.arm == Arm::EpochSweep) {
      for (std::size_t n : cfg.experiment.n_grid) {
        std::ostringstream ep;
        write_epoch_dat(ep, result.cells, n);
        write_output(dir, fmt::format("epochs_n{}.dat", n), ep.str(), manifest);
      }
    }
  }
  write_output(dir, "schedules.json", echo.dump(2) + "\n", manifest);
  manifest.write(dir);

  for (const RateReport& r : result.reports) {
    if (r.fit)
      std::cout << fmt::format("{:12} slope={:+.3f} r2={:.3f} unusable={}/{}\n", to_string(r.arm),
                               r.fit->slope, r.fit->r_squared, r.unusable_cells, r.total_cells);
    else
      std::cout << fmt::format("{:12} no fit ({}) unusable={}/{}\n", to_string(r.arm),
                               r.fit_error, r.unusable_cells, r.total_cells);
  }
  if (result.failed()) {
    for (const std::string& f : result.failed_arms) std::cerr << "failed arm: " << f << "\n";
    return kExitAggregate;
  }
  return kExitOk;
}

int cmd_gradgap(const Options& opt, unsigned workers) {
  Config cfg = load(opt);
  if (!cfg.has_gradgap) throw ConfigError("gradgap", "section is required for gradgap");
  const ProblemInstance instance = generate_problem(cfg.problem);
  const GapSettings& g = cfg.gradgap;

  Json params;
  params["region"] = std::string(to_string(g.recipe.region));
  params["anchor"] = g.recipe.anchor == AnchorKind::Reference ? "reference" : "first_epoch";
  params["delta"] = g.recipe.envelope.delta;
  params["C"] = g.recipe.envelope.C;
  params["s"] = g.recipe.s;
  params["n_candidates"] = g.recipe.n_candidates;
  params["reference_distance"] = (g.recipe.reference_w - instance.w_star()).norm();
  if (opt.dry_run) {
    Json j;
    j["parameters"] = params;
    j["n_grid"] = g.n_grid;
    j["seeds"] = g.seeds;
    std::cout << j.dump(2) << "\n";
    return kExitOk;
  }
  const fs::path dir = require_out(opt);
  RunManifest manifest("gradgap", g.master_seed);
  echo_config(dir, cfg, manifest);

  const GapScalingResult result =
      gap_scaling_experiment(instance, g.n_grid, g.seeds, g.recipe, g.master_seed, workers);
  std::ostringstream csv;
  write_gap_cells_csv(csv, result, g.recipe);
  write_output(dir, "gap_cells.csv", csv.str(), manifest);

  Json summary;
  summary["parameters"] = params;
  Json points = Json::array();
  std::vector<std::pair<double, double>> fit_points;
  bool too_many_failed = false;
  for (const GapScalingPoint& p : result.points) {
    Json pj;
    pj["n"] = p.n;
    pj["median_max_gap"] = p.median_max_gap;
    pj["cells"] = p.cells;
    pj["failed"] = p.failed;
    points.push_back(pj);
    if (p.failed < p.cells && p.median_max_gap > 0.0)
      fit_points.emplace_back(static_cast<double>(p.n), p.median_max_gap);
    if (static_cast<double>(p.failed) > g.max_failed_fraction * static_cast<double>(p.cells))
      too_many_failed = true;
  }
  summary["points"] = points;
  try {
    const LogLogFit fit = fit_loglog_slope(fit_points);
    summary["fit"] = {{"slope", fit.slope}, {"intercept", fit.intercept}, {"r2", fit.r_squared}};
    std::cout << fmt::format("gap slope={:+.3f} r2={:.3f}\n", fit.slope, fit.r_squared);
  } catch (const FitError& e) {
    summary["fit_error"] = e.what();
  }
  write_output(dir, "gap_summary.json", summary.dump(2) + "\n", manifest);
  manifest.write(dir);
  return too_many_failed ? kExitAggregate : kExitOk;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CertificationError& e) {
    std::cerr << "certification failure: " << e.what() << "\n";
    return kExitCertification;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence at iteration " << e.iteration() << ": " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

void add_common(CLI::App* cmd, Options& opt, bool runs) {
  cmd->add_option("--config", opt.config, "configuration JSON")->required();
  cmd->add_option("--out", opt.out, "output directory");
  cmd->add_option("--seed", opt.seed, "override the master seed");
  cmd->add_flag("--force", opt.force, "allow writing into a non-empty output directory");
  if (runs) {
    cmd->add_option("--workers", opt.workers, "worker threads (default: all cores)")
        ->envname("PLSGD_WORKERS");
    cmd->add_flag("--dry-run", opt.dry_run, "print resolved schedules and exit");
    cmd->add_option("--cap-steps", opt.cap_steps, "override the per-cell step cap");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"plsgd: one-pass versus multi-pass SGD experiments"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Options opt;
  CLI::App* gen = app.add_subcommand("gen", "generate a problem, a dataset and its constants");
  add_common(gen, opt, false);
  gen->add_flag("--dump", opt.dump, "also write the dataset as a flat binary dump");
  CLI::App* run = app.add_subcommand("run", "run one arm on one (n, seed) cell");
  add_common(run, opt, true);
  CLI::App* gap = app.add_subcommand("gradgap", "gradient-gap scaling study");
  add_common(gap, opt, true);
  CLI::App* rates = app.add_subcommand("rates", "excess-risk rate experiment");
  add_common(rates, opt, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const unsigned workers = resolve_workers(opt.workers);
  if (gen->parsed()) return guarded([&] { return cmd_gen(opt); });
  if (run->parsed()) return guarded([&] { return cmd_run(opt); });
  if (gap->parsed()) return guarded([&] { return cmd_gradgap(opt, workers); });
  return guarded([&] { return cmd_rates(opt, workers); });
}
