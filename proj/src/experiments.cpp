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

#include "plsgd/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>

#include "plsgd/parallel.hpp"

namespace plsgd {
namespace {

bool is_first_epoch_arm(Arm arm) { return arm == Arm::OnePassT1 || arm == Arm::OnePassT4; }

bool uses_strong_convexity(Arm arm) {
  return arm == Arm::OnePassT4 || arm == Arm::MultiPassT6;
}

std::uint64_t first_epoch_seed(const ExperimentConfig& config, std::size_t n, std::size_t k) {
  return derive_seed({config.master_seed, tag("epoch1"), n, k});
}

std::uint64_t arm_seed(const ExperimentConfig& config, Arm arm, std::size_t n, std::size_t k) {
  return derive_seed({config.master_seed, tag(to_string(arm)), n, k});
}

std::uint64_t dataset_seed(const ExperimentConfig& config, std::size_t n, std::size_t k) {
  return derive_seed({config.master_seed, tag("dataset"), n, k});
}

// Learning rate for the first epoch of T1/T4 arms (EpochSweep uses the
// post-epoch rate throughout).
Schedule first_epoch_schedule(const ExperimentConfig& config, const ProblemInstance& instance,
                              Arm arm, std::size_t n, const Vector& w0) {
  const ProblemConstants& c = instance.constants();
  Schedule s;
  s.stop_iter = n;
  s.inputs_used["n"] = static_cast<double>(n);
  if (config.eta_override) {
    s.eta = *config.eta_override;
    s.source = ScheduleSource::Manual;
    return s;
  }
  const double F0 = instance.excess_risk(w0).value;
  const double sigma2 = config.constants == ConstantsMode::Certified
                            ? c.sigma2
                            : instance.gradient_variance(w0).value;
  s.inputs_used["F0"] = F0;
  s.inputs_used["sigma2"] = sigma2;
  s.inputs_used["L"] = c.L;
  if (uses_strong_convexity(arm)) {
    if (!(c.gamma > 0.0))
      throw ScheduleError(ScheduleError::Kind::InvalidInput,
                          "strongly convex schedules need a certified gamma > 0");
    const StronglyConvexRate r = lr_theorem4(c.gamma, n, F0, sigma2, c.L);
    s.eta = r.eta;
    s.source = ScheduleSource::Theorem4;
    s.inputs_used["gamma"] = c.gamma;
    s.inputs_used["gamma_hat"] = r.gamma_hat;
  } else {
    s.eta = lr_theorem1(c.mu, n, F0, sigma2, c.L);
    s.source = ScheduleSource::Theorem1;
    s.inputs_used["mu"] = c.mu;
  }
  return s;
}

struct PostEpochPlan {
  Schedule schedule;
  bool truncated = false;
  std::string note;
};

PostEpochPlan post_epoch_schedule(const ExperimentConfig& config, const ProblemInstance& instance,
                                  const Dataset& data, Arm arm, const Vector& w1) {
  const ProblemConstants& c = instance.constants();
  const std::size_t n = data.size();
  PostEpochPlan plan;
  Schedule& s = plan.schedule;
  s.source = arm == Arm::MultiPassT6 ? ScheduleSource::Theorem6 : ScheduleSource::Theorem3;
  s.eta = lr_theorem3(n, c.L);

  const double F1 = instance.excess_risk(w1).value;
  const double G = c.G;
  const double B = config.constants == ConstantsMode::Certified
                       ? c.B
                       : std::sqrt(mean_squared_sample_gradient(data, instance, w1)) / G;
  s.inputs_used["n"] = static_cast<double>(n);
  s.inputs_used["F1"] = F1;
  s.inputs_used["G"] = G;
  s.inputs_used["B"] = B;
  s.inputs_used["L"] = c.L;

  std::uint64_t t = 0;
  if (!(F1 > 0.0) || !(B > 0.0)) {
    plan.note = "first-epoch iterate is stationary; zero additional iterations";
  } else {
    try {
      if (arm == Arm::MultiPassT6) {
        if (!(c.gamma > 0.0))
          throw ScheduleError(ScheduleError::Kind::InvalidInput,
                              "strongly convex schedules need a certified gamma > 0");
        s.inputs_used["gamma"] = c.gamma;
        s.inputs_used["C"] = config.C;
        t = stop_theorem6(s.eta, c.gamma, n, F1, G, B, config.C);
      } else {
        s.inputs_used["mu"] = c.mu;
        t = stop_theorem3(s.eta, c.mu, F1, G, B, c.L);
      }
    } catch (const ScheduleError& e) {
      if (e.kind() != ScheduleError::Kind::LogArgumentNotAboveOne) throw;
      plan.note = "post-epoch log argument not above one; zero additional iterations";
      t = 0;
    }
  }
  s.inputs_used["t"] = static_cast<double>(t);
  if (config.cap_steps > n && t > config.cap_steps - n) {
    t = config.cap_steps - n;
    plan.truncated = true;
  } else if (config.cap_steps <= n && t > 0) {
    t = 0;
    plan.truncated = true;
  }
  if (config.eta_override) s.eta = *config.eta_override;
  s.stop_iter = n + t;
  return plan;
}

void append_trace(Trajectory* trace, Trajectory&& part) {
  if (!trace) return;
  trace->checkpoints.insert(trace->checkpoints.end(), part.checkpoints.begin(),
                            part.checkpoints.end());
  trace->final_w = part.final_w;
  trace->epochs_completed = part.epochs_completed;
  trace->ball_exit = trace->ball_exit || part.ball_exit;
}

void run_epoch_sweep(const ExperimentConfig& config, const ProblemInstance& instance,
                     const Dataset& data, const Vector& w0, CellResult& cell, Trajectory* trace,
                     std::uint64_t checkpoint_every) {
  const std::size_t n = data.size();
  Schedule s;
  s.source = config.eta_override ? ScheduleSource::Manual : ScheduleSource::Theorem3;
  s.eta = config.eta_override ? *config.eta_override : lr_theorem3(n, instance.constants().L);
  s.inputs_used["n"] = static_cast<double>(n);
  s.inputs_used["L"] = instance.constants().L;

  std::size_t epochs = config.sweep_epochs > 0 ? config.sweep_epochs : 2 * n;
  if (static_cast<double>(epochs) * static_cast<double>(n) >
      static_cast<double>(config.cap_steps)) {
    epochs = std::max<std::size_t>(1, config.cap_steps / n);
    cell.truncated = true;
  }
  s.inputs_used["epochs"] = static_cast<double>(epochs);
  s.stop_iter = n;

  RunOptions first;
  first.sampling_mode = SamplingMode::WithoutReplacement;
  first.seed = first_epoch_seed(config, n, cell.seed_index);
  first.record_risks = trace != nullptr;
  first.checkpoint_every = trace ? checkpoint_every : 0;
  Trajectory t1 = run_sgd(instance, data, w0, s, first);
  cell.ball_exit = t1.ball_exit;
  cell.first_epoch_excess = instance.excess_risk(t1.final_w).value;
  cell.epoch_excess.emplace_back(1, cell.first_epoch_excess);

  Vector w = t1.final_w;
  append_trace(trace, std::move(t1));
  if (epochs > 1) {
    Schedule rest = s;
    rest.stop_iter = static_cast<std::uint64_t>(epochs) * n;
    RunOptions opts;
    opts.sampling_mode = config.post_epoch_sampling;
    opts.seed = arm_seed(config, Arm::EpochSweep, n, cell.seed_index);
    opts.start_iter = n;
    opts.checkpoint_every = static_cast<std::uint64_t>(config.sweep_every_epochs) * n;
    Trajectory t2 = run_sgd(instance, data, w, rest, opts);
    cell.ball_exit = cell.ball_exit || t2.ball_exit;
    const double f_star = instance.optimal_risk();
    for (const Checkpoint& c : t2.checkpoints) {
      cell.epoch_excess.emplace_back(static_cast<std::size_t>(c.iter / n), c.f_pop - f_star);
    }
    w = t2.final_w;
    append_trace(trace, std::move(t2));
    s.stop_iter = rest.stop_iter;
  }
  const Estimate final_excess = instance.excess_risk(w);
  cell.excess_risk = final_excess.value;
  cell.excess_std_error = final_excess.std_error;
  if (!cell.epoch_excess.empty()) cell.epoch_excess.back().second = final_excess.value;
  cell.steps = s.stop_iter;
  cell.epochs = static_cast<double>(s.stop_iter) / static_cast<double>(n);
  cell.schedules.push_back(std::move(s));
}

double quantile_nearest_rank(std::vector<double> v, double q) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

}  // namespace

std::string_view to_string(Arm arm) {
  switch (arm) {
    case Arm::OnePassT1:
      return "OnePassT1";
    case Arm::MultiPassT3:
      return "MultiPassT3";
    case Arm::OnePassT4:
      return "OnePassT4";
    case Arm::MultiPassT6:
      return "MultiPassT6";
    case Arm::EpochSweep:
      return "EpochSweep";
  }
  return "unknown";
}

Arm arm_from_string(std::string_view name) {
  for (Arm a : {Arm::OnePassT1, Arm::MultiPassT3, Arm::OnePassT4, Arm::MultiPassT6,
                Arm::EpochSweep})
    if (to_string(a) == name) return a;
  throw ConfigError("arms", "unknown arm '" + std::string(name) + "'");
}

std::string_view to_string(ConstantsMode mode) {
  return mode == ConstantsMode::Certified ? "certified" : "local";
}

ConstantsMode constants_mode_from_string(std::string_view name) {
  if (name == "certified") return ConstantsMode::Certified;
  if (name == "local") return ConstantsMode::Local;
  throw ConfigError("constants", "expected 'certified' or 'local', got '" + std::string(name) +
                                     "'");
}

void ExperimentConfig::validate() const {
  validate_run_settings();
  if (n_grid.size() < 4) throw ConfigError("n_grid", "needs at least 4 points");
  if (n_grid.front() < 1) throw ConfigError("n_grid", "sizes must be positive");
  for (std::size_t i = 1; i < n_grid.size(); ++i)
    if (n_grid[i] <= n_grid[i - 1]) throw ConfigError("n_grid", "must be strictly increasing");
  if (seeds_per_cell < 1) throw ConfigError("seeds_per_cell", "must be >= 1");
  if (arms.empty()) throw ConfigError("arms", "at least one arm is required");
}

void ExperimentConfig::validate_run_settings() const {
  problem.validate();
  if (!(C > 0.0)) throw ConfigError("C", "must be positive");
  if (!(w0_offset >= 0.0) || w0_offset > 1.0)
    throw ConfigError("w0_offset", "must lie in [0, 1] (fraction of the operating radius)");
  if (w0_direction.size() != 0 &&
      (w0_direction.size() != problem.dim || !(w0_direction.norm() > 0.0)))
    throw ConfigError("w0_direction", "must be a non-zero vector of length dim");
  if (cap_steps < 1) throw ConfigError("cap_steps", "must be >= 1");
  if (sweep_every_epochs < 1) throw ConfigError("sweep_every_epochs", "must be >= 1");
  if (eta_override && !(*eta_override >= 0.0 && std::isfinite(*eta_override)))
    throw ConfigError("eta_override", "must be finite and non-negative");
  if (!(max_unusable_fraction >= 0.0 && max_unusable_fraction <= 1.0))
    throw ConfigError("max_unusable_fraction", "must lie in [0, 1]");
  if (!(fit_floor >= 0.0)) throw ConfigError("fit_floor", "must be non-negative");
}

Vector initial_point(const ExperimentConfig& config) {
  const int d = config.problem.dim;
  Vector dir = config.w0_direction;
  if (dir.size() == 0) {
    dir.resize(d);
    for (int j = 0; j < d; ++j) dir[j] = (j % 2 == 0) ? 1.0 : -1.0;
  }
  dir.normalize();
  return config.problem.w_star + config.w0_offset * config.problem.operating_radius * dir;
}

namespace {

CellResult execute_arm(const ExperimentConfig& config, const ProblemInstance& instance, Arm arm,
                       std::size_t n, std::size_t seed_index, Trajectory* trace,
                       std::uint64_t checkpoint_every) {
  CellResult cell;
  cell.arm = arm;
  cell.n = n;
  cell.seed_index = seed_index;
  cell.dataset_seed = dataset_seed(config, n, seed_index);
  const Dataset data = generate_dataset(instance, n, cell.dataset_seed);
  const Vector w0 = initial_point(config);

  try {
    if (arm == Arm::EpochSweep) {
      run_epoch_sweep(config, instance, data, w0, cell, trace, checkpoint_every);
      return cell;
    }
    const Arm first_arm = uses_strong_convexity(arm) ? Arm::OnePassT4 : Arm::OnePassT1;
    Schedule first = first_epoch_schedule(config, instance, first_arm, n, w0);
    RunOptions opts;
    opts.sampling_mode = SamplingMode::WithoutReplacement;
    opts.seed = first_epoch_seed(config, n, seed_index);
    opts.record_risks = trace != nullptr;
    opts.checkpoint_every = trace ? checkpoint_every : 0;
    Trajectory t1 = run_sgd(instance, data, w0, first, opts);
    cell.ball_exit = t1.ball_exit;
    cell.first_epoch_excess = instance.excess_risk(t1.final_w).value;
    cell.schedules.push_back(first);
    Vector w = t1.final_w;
    append_trace(trace, std::move(t1));
    std::uint64_t steps = n;

    if (!is_first_epoch_arm(arm)) {
      PostEpochPlan plan = post_epoch_schedule(config, instance, data, arm, w);
      cell.truncated = plan.truncated;
      cell.note = plan.note;
      if (plan.schedule.stop_iter > n) {
        RunOptions post;
        post.sampling_mode = config.post_epoch_sampling;
        post.seed = arm_seed(config, arm, n, seed_index);
        post.start_iter = n;
        post.record_risks = trace != nullptr;
        post.checkpoint_every = trace ? checkpoint_every : 0;
        Trajectory t2 = run_sgd(instance, data, w, plan.schedule, post);
        cell.ball_exit = cell.ball_exit || t2.ball_exit;
        w = t2.final_w;
        append_trace(trace, std::move(t2));
      }
      steps = plan.schedule.stop_iter;
      cell.schedules.push_back(std::move(plan.schedule));
    }
    const Estimate excess = instance.excess_risk(w);
    cell.excess_risk = excess.value;
    cell.excess_std_error = excess.std_error;
    cell.steps = steps;
    cell.epochs = static_cast<double>(steps) / static_cast<double>(n);
  } catch (const ScheduleError& e) {
    cell.skipped_reason = fmt::format("{}: {}", to_string(e.kind()), e.what());
  } catch (const DivergenceError& e) {
    cell.diverged = true;
    cell.note = fmt::format("diverged at iteration {}", e.iteration());
  }
  return cell;
}

}  // namespace

CellResult run_arm(const ExperimentConfig& config, const ProblemInstance& instance, Arm arm,
                   std::size_t n, std::size_t seed_index) {
  return execute_arm(config, instance, arm, n, seed_index, nullptr, 0);
}

SingleRun run_single(const ExperimentConfig& config, const ProblemInstance& instance, Arm arm,
                     std::size_t n, std::size_t seed_index, std::uint64_t checkpoint_every) {
  config.validate_run_settings();
  if (n < 1) throw ConfigError("n", "must be >= 1");
  SingleRun run;
  run.trajectory.sampling_mode = SamplingMode::WithoutReplacement;
  run.trajectory.seed = first_epoch_seed(config, n, seed_index);
  run.cell = execute_arm(config, instance, arm, n, seed_index, &run.trajectory, checkpoint_every);
  return run;
}

LogLogFit fit_loglog_slope(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw FitError("log-log fit needs at least 3 points");
  for (const auto& [n, v] : points) {
    if (!(n > 0.0)) throw FitError("log-log fit needs positive n");
    if (!(v > 0.0))
      throw FitError(fmt::format("NonPositiveValue: value {} at n = {} cannot be logged", v, n));
  }
  const double m = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [n, v] : points) {
    mx += std::log(n);
    my += std::log(v);
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [n, v] : points) {
    const double dx = std::log(n) - mx;
    const double dy = std::log(v) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw FitError("log-log fit needs distinct n values");
  LogLogFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  const double ss_res = std::max(0.0, syy - fit.slope * sxy);
  fit.r_squared = syy == 0.0 ? 1.0 : std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  return fit;
}

const RateReport* ExperimentResult::report(Arm arm) const {
  for (const RateReport& r : reports)
    if (r.arm == arm) return &r;
  return nullptr;
}

std::vector<RateReport> aggregate_cells(const ExperimentConfig& config,
                                        const std::vector<CellResult>& cells) {
  std::vector<RateReport> reports;
  for (Arm arm : config.arms) {
    RateReport rep;
    rep.arm = arm;
    for (std::size_t n : config.n_grid) {
      RatePoint p;
      p.n = n;
      std::vector<double> values;
      for (const CellResult& c : cells) {
        if (c.arm != arm || c.n != n) continue;
        ++rep.total_cells;
        if (c.seed_index == 0) rep.schedule_echo[n] = c.schedules;
        if (!c.usable()) {
          ++p.unusable;
          ++rep.unusable_cells;
          continue;
        }
        values.push_back(c.excess_risk);
      }
      // Cells arrive in arbitrary order; sort so the floating-point sums are order-free.
      std::sort(values.begin(), values.end());
      p.used = values.size();
      if (!values.empty()) {
        double sum = 0.0;
        for (double v : values) sum += v;
        p.mean = sum / static_cast<double>(values.size());
        if (values.size() > 1) {
          double ss = 0.0;
          for (double v : values) ss += (v - p.mean) * (v - p.mean);
          p.std_error = std::sqrt(ss / static_cast<double>(values.size() - 1) /
                                  static_cast<double>(values.size()));
        }
        p.p90 = quantile_nearest_rank(values, 0.9);
      } else {
        p.mean = std::nan("");
      }
      rep.points.push_back(p);
    }
    std::vector<std::pair<double, double>> fit_points;
    for (const RatePoint& p : rep.points) {
      if (p.used == 0) continue;
      double v = p.mean;
      if (config.fit_floor > 0.0) v = std::max(v, config.fit_floor);
      if (!(v > 0.0)) continue;
      fit_points.emplace_back(static_cast<double>(p.n), v);
    }
    try {
      rep.fit = fit_loglog_slope(fit_points);
    } catch (const FitError& e) {
      rep.fit_error = e.what();
    }
    reports.push_back(std::move(rep));
  }
  return reports;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const ProblemInstance& instance,
                                unsigned workers) {
  config.validate();
  struct Key {
    Arm arm;
    std::size_t n;
    std::size_t seed;
  };
  std::vector<Key> keys;
  for (Arm arm : config.arms)
    for (std::size_t n : config.n_grid)
      for (std::size_t k = 0; k < config.seeds_per_cell; ++k) keys.push_back({arm, n, k});
  // Largest cells first keeps the pool busy at the end of the run.
  std::stable_sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) { return a.n > b.n; });

  ExperimentResult result;
  result.cells.resize(keys.size());
  parallel_for(keys.size(), workers, [&](std::size_t i) {
    result.cells[i] = run_arm(config, instance, keys[i].arm, keys[i].n, keys[i].seed);
  });
  std::sort(result.cells.begin(), result.cells.end(),
            [](const CellResult& a, const CellResult& b) {
              if (a.arm != b.arm) return a.arm < b.arm;
              if (a.n != b.n) return a.n < b.n;
              return a.seed_index < b.seed_index;
            });
  result.reports = aggregate_cells(config, result.cells);
  for (const RateReport& r : result.reports) {
    if (r.total_cells == 0) continue;
    const double frac =
        static_cast<double>(r.unusable_cells) / static_cast<double>(r.total_cells);
    if (frac > config.max_unusable_fraction)
      result.failed_arms.push_back(fmt::format("{}: {} of {} cells unusable", to_string(r.arm),
                                               r.unusable_cells, r.total_cells));
  }
  return result;
}

std::uint64_t cell_dataset_seed(const ExperimentConfig& config, std::size_t n,
                                std::size_t seed_index) {
  return dataset_seed(config, n, seed_index);
}

std::vector<ResolvedSchedule> resolve_schedules(const ExperimentConfig& config,
                                                const ProblemInstance& instance) {
  config.validate_run_settings();
  std::vector<ResolvedSchedule> out;
  const Vector w0 = initial_point(config);
  for (Arm arm : config.arms) {
    for (std::size_t n : config.n_grid) {
      ResolvedSchedule r;
      r.arm = arm;
      r.n = n;
      try {
        const Dataset data = generate_dataset(instance, n, dataset_seed(config, n, 0));
        if (arm == Arm::EpochSweep) {
          Schedule s;
          s.source = ScheduleSource::Theorem3;
          s.eta = lr_theorem3(n, instance.constants().L);
          s.stop_iter = static_cast<std::uint64_t>(config.sweep_epochs > 0 ? config.sweep_epochs
                                                                           : 2 * n) * n;
          s.inputs_used["n"] = static_cast<double>(n);
          s.inputs_used["L"] = instance.constants().L;
          r.schedules.push_back(s);
        } else {
          const Arm first_arm = uses_strong_convexity(arm) ? Arm::OnePassT4 : Arm::OnePassT1;
          Schedule first = first_epoch_schedule(config, instance, first_arm, n, w0);
          r.schedules.push_back(first);
          if (!is_first_epoch_arm(arm)) {
            RunOptions opts;
            opts.seed = first_epoch_seed(config, n, 0);
            opts.record_risks = false;
            const Vector w1 = run_sgd(instance, data, w0, first, opts).final_w;
            r.schedules.push_back(post_epoch_schedule(config, instance, data, arm, w1).schedule);
          }
        }
      } catch (const ScheduleError& e) {
        r.error = fmt::format("{}: {}", to_string(e.kind()), e.what());
      } catch (const DivergenceError& e) {
        r.error = e.what();
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

void write_cells_csv(std::ostream& out, const std::vector<CellResult>& cells) {
  out << "arm,n,seed,excess_risk,steps,epochs,skipped_reason,first_epoch_excess,eta_first,"
         "eta_post,truncated,ball_exit,diverged,note\n";
  for (const CellResult& c : cells) {
    const double eta_first = c.schedules.empty() ? 0.0 : c.schedules.front().eta;
    const double eta_post = c.schedules.size() > 1 ? c.schedules[1].eta : 0.0;
    out << fmt::format("{},{},{},{:.17g},{},{:.17g},\"{}\",{:.17g},{:.17g},{:.17g},{},{},{},\"{}\"\n",
                       to_string(c.arm), c.n, c.seed_index, c.excess_risk, c.steps, c.epochs,
                       c.skipped_reason, c.first_epoch_excess, eta_first, eta_post,
                       c.truncated ? 1 : 0, c.ball_exit ? 1 : 0, c.diverged ? 1 : 0, c.note);
  }
}

void write_rates_csv(std::ostream& out, const std::vector<RateReport>& reports) {
  out << "arm,slope,intercept,r2,points,unusable_cells,total_cells,fit_error\n";
  for (const RateReport& r : reports) {
    std::size_t points = 0;
    for (const RatePoint& p : r.points) points += p.used > 0 ? 1 : 0;
    if (r.fit) {
      out << fmt::format("{},{:.17g},{:.17g},{:.17g},{},{},{},\"\"\n", to_string(r.arm),
                         r.fit->slope, r.fit->intercept, r.fit->r_squared, points,
                         r.unusable_cells, r.total_cells);
    } else {
      out << fmt::format("{},,,,{},{},{},\"{}\"\n", to_string(r.arm), points, r.unusable_cells,
                         r.total_cells, r.fit_error);
    }
  }
}

void write_rate_dat(std::ostream& out, const RateReport& report) {
  out << "# " << to_string(report.arm) << "\n# n mean_excess std_error p90 used\n";
  for (const RatePoint& p : report.points)
    out << fmt::format("{} {:.17g} {:.17g} {:.17g} {}\n", p.n, p.mean, p.std_error, p.p90, p.used);
}

void write_epoch_dat(std::ostream& out, const std::vector<CellResult>& cells, std::size_t n) {
  std::map<std::size_t, std::vector<double>> by_epoch;
  for (const CellResult& c : cells) {
    if (c.arm != Arm::EpochSweep || c.n != n || !c.usable()) continue;
    for (const auto& [epoch, excess] : c.epoch_excess) by_epoch[epoch].push_back(excess);
  }
  out << "# EpochSweep n = " << n << "\n# epoch mean_excess std_error\n";
  for (auto& [epoch, values] : by_epoch) {
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double se = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1) /
                                                    static_cast<double>(values.size()))
                                        : 0.0;
    out << fmt::format("{} {:.17g} {:.17g}\n", epoch, mean, se);
  }
}

}  // namespace plsgd
