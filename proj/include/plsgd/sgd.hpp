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

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "plsgd/common.hpp"
#include "plsgd/problems.hpp"
#include "plsgd/schedules.hpp"

namespace plsgd {

enum class SamplingMode { WithoutReplacement, WithReplacement };

std::string_view to_string(SamplingMode mode);
SamplingMode sampling_mode_from_string(std::string_view name);

// Example index stream for single-sample SGD. Without replacement, each
// block of n draws is a fresh uniform permutation of [0, n).
class IndexSampler {
 public:
  IndexSampler(std::size_t n, SamplingMode mode, std::uint64_t seed);

  std::size_t next();

 private:
  std::size_t n_;
  SamplingMode mode_;
  Rng rng_;
  std::vector<std::size_t> perm_;
  std::size_t cursor_;
};

struct Checkpoint {
  std::uint64_t iter = 0;
  double epoch = 0.0;
  double f_pop = 0.0;
  double f_emp = 0.0;
  double grad_norm_pop = 0.0;
  bool in_ball = true;
};

struct Trajectory {
  SamplingMode sampling_mode = SamplingMode::WithoutReplacement;
  std::uint64_t seed = 0;
  std::vector<Checkpoint> checkpoints;
  Vector final_w;
  double epochs_completed = 0.0;
  bool ball_exit = false;
};

struct RunOptions {
  SamplingMode sampling_mode = SamplingMode::WithoutReplacement;
  std::uint64_t seed = 0;
  // Iteration count already performed (continuation of an earlier phase).
  // The run executes schedule.stop_iter - start_iter updates.
  std::uint64_t start_iter = 0;
  // 0 records only the final iterate.
  std::uint64_t checkpoint_every = 0;
  // Evaluate risks at checkpoints; off leaves the risk fields at zero.
  bool record_risks = true;
  // Test hook: receives every sampled example index.
  std::vector<std::size_t>* visit_log = nullptr;
};

// w_{t+1} = w_t - eta (f(w_t; x_i) - y_i) grad f(w_t; x_i). Throws
// DivergenceError carrying the offending iteration on a non-finite iterate.
Trajectory run_sgd(const ProblemInstance& instance, const Dataset& data, const Vector& w0,
                   const Schedule& schedule, const RunOptions& options);

Checkpoint evaluate_checkpoint(const ProblemInstance& instance, const Dataset& data,
                               const Vector& w, std::uint64_t iter);

// CSV with columns iter,epoch,F_pop,F_emp,grad_norm_pop,in_ball.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);

}  // namespace plsgd
