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

// One-pass versus multi-pass excess-risk experiments and rate fitting.
//
// Arms:
//   OnePassT1    one without-replacement epoch at the first-epoch PL rate
//   MultiPassT3  the same epoch, then t more steps at eta = min(1/n^2, 1/L)
//   OnePassT4    one epoch at the strongly convex first-epoch rate
//   MultiPassT6  that epoch, then the strongly convex stopping time
//   EpochSweep   fixed eta = min(1/n^2, 1/L), excess risk at every epoch
//
// Within a (n, seed) pair every arm sees the same dataset and the same
// first-epoch index stream, so OnePassT1/MultiPassT3 and OnePassT4/MultiPassT6
// share their first epoch bit-for-bit.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "plsgd/common.hpp"
#include "plsgd/problems.hpp"
#include "plsgd/schedules.hpp"
#include "plsgd/sgd.hpp"

namespace plsgd {

enum class Arm { OnePassT1, MultiPassT3, OnePassT4, MultiPassT6, EpochSweep };

std::string_view to_string(Arm arm);
Arm arm_from_string(std::string_view name);

// Which values of sigma^2, G and B are plugged into the schedules.
//   Certified: the worst-case constants of the instance (sigma^2 = 4 G^2 B^2).
//   Local: sigma^2 = E||grad l(w0) - grad F(w0)||^2 at the start point, and
//          B = sqrt(mean_i ||grad l(w1; z_i)||^2) / G at the first-epoch iterate,
//          so that G^2 B^2 is the mean squared per-example gradient there.
enum class ConstantsMode { Certified, Local };

std::string_view to_string(ConstantsMode mode);
ConstantsMode constants_mode_from_string(std::string_view name);

struct ExperimentConfig {
  ProblemSpec problem;
  std::vector<std::size_t> n_grid;
  std::size_t seeds_per_cell = 20;
  std::vector<Arm> arms{Arm::OnePassT1, Arm::MultiPassT3};
  double C = 1.0;
  // w0 = w* + w0_offset * R * direction.
  double w0_offset = 0.5;
  Vector w0_direction;  // empty: alternating-sign unit vector
  std::uint64_t master_seed = 0;
  std::uint64_t cap_steps = 100'000'000;
  ConstantsMode constants = ConstantsMode::Local;
  SamplingMode post_epoch_sampling = SamplingMode::WithReplacement;
  // EpochSweep horizon in epochs; 0 means 2n.
  std::size_t sweep_epochs = 0;
  std::size_t sweep_every_epochs = 1;
  // Replaces every learning rate (stopping times still follow the theorems).
  std::optional<double> eta_override;
  double max_unusable_fraction = 0.2;
  // Means at or below zero are dropped before fitting unless a positive floor is given.
  double fit_floor = 0.0;

  void validate() const;  // throws ConfigError
  // Everything except n_grid, seeds_per_cell and arms.
  void validate_run_settings() const;
};

Vector initial_point(const ExperimentConfig& config);

struct CellResult {
  Arm arm = Arm::OnePassT1;
  std::size_t n = 0;
  std::size_t seed_index = 0;
  std::uint64_t dataset_seed = 0;
  double excess_risk = 0.0;
  double excess_std_error = 0.0;
  double first_epoch_excess = 0.0;
  std::uint64_t steps = 0;
  double epochs = 0.0;
  bool ball_exit = false;
  bool diverged = false;
  bool truncated = false;
  std::string skipped_reason;  // empty when the cell ran
  std::string note;
  std::vector<Schedule> schedules;
  std::vector<std::pair<std::size_t, double>> epoch_excess;  // EpochSweep

  bool usable() const { return skipped_reason.empty() && !ball_exit && !diverged; }
};

CellResult run_arm(const ExperimentConfig& config, const ProblemInstance& instance, Arm arm,
                   std::size_t n, std::size_t seed_index);

struct SingleRun {
  CellResult cell;
  Trajectory trajectory;  // checkpoints of every phase, risks evaluated
};

// One arm on one (n, seed) cell with the full trajectory recorded.
SingleRun run_single(const ExperimentConfig& config, const ProblemInstance& instance, Arm arm,
                     std::size_t n, std::size_t seed_index, std::uint64_t checkpoint_every);

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

class FitError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Least squares on (ln n, ln value). Needs >= 3 points with distinct n and
// positive values; a non-positive value throws FitError (NonPositiveValue).
LogLogFit fit_loglog_slope(const std::vector<std::pair<double, double>>& points);

struct RatePoint {
  std::size_t n = 0;
  double mean = 0.0;
  double std_error = 0.0;
  double p90 = 0.0;
  std::size_t used = 0;
  std::size_t unusable = 0;
};

struct RateReport {
  Arm arm = Arm::OnePassT1;
  std::vector<RatePoint> points;
  std::optional<LogLogFit> fit;
  std::string fit_error;
  std::size_t total_cells = 0;
  std::size_t unusable_cells = 0;
  // Schedule inputs of the first seed at each n.
  std::map<std::size_t, std::vector<Schedule>> schedule_echo;
};

struct ExperimentResult {
  std::vector<CellResult> cells;
  std::vector<RateReport> reports;
  std::vector<std::string> failed_arms;  // arms over the unusable-cell threshold

  const RateReport* report(Arm arm) const;
  bool failed() const { return !failed_arms.empty(); }
};

ExperimentResult run_experiment(const ExperimentConfig& config, const ProblemInstance& instance,
                                unsigned workers = 1);

// Aggregates already-computed cells (exposed for order-independence checks).
std::vector<RateReport> aggregate_cells(const ExperimentConfig& config,
                                        const std::vector<CellResult>& cells);

struct ResolvedSchedule {
  Arm arm = Arm::OnePassT1;
  std::size_t n = 0;
  std::vector<Schedule> schedules;
  std::string error;
};

// Seed of the dataset shared by every arm at (n, seed_index).
std::uint64_t cell_dataset_seed(const ExperimentConfig& config, std::size_t n,
                                std::size_t seed_index);

// Resolves every arm's schedules for seed 0 of each n without running the
// post-epoch phase (the first epoch is run, since post-epoch stopping times
// depend on its iterate).
std::vector<ResolvedSchedule> resolve_schedules(const ExperimentConfig& config,
                                                const ProblemInstance& instance);

void write_cells_csv(std::ostream& out, const std::vector<CellResult>& cells);
void write_rates_csv(std::ostream& out, const std::vector<RateReport>& reports);
// gnuplot columns: n mean std_error p90 used
void write_rate_dat(std::ostream& out, const RateReport& report);
// gnuplot columns: epoch mean_excess std_error
void write_epoch_dat(std::ostream& out, const std::vector<CellResult>& cells, std::size_t n);

}  // namespace plsgd
