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

#include "plsgd/sgd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include <fmt/format.h>

namespace plsgd {

std::string_view to_string(SamplingMode mode) {
  return mode == SamplingMode::WithoutReplacement ? "WithoutReplacement" : "WithReplacement";
}

SamplingMode sampling_mode_from_string(std::string_view name) {
  if (name == "WithoutReplacement") return SamplingMode::WithoutReplacement;
  if (name == "WithReplacement") return SamplingMode::WithReplacement;
  throw ConfigError("sampling", "unknown sampling mode '" + std::string(name) + "'");
}

IndexSampler::IndexSampler(std::size_t n, SamplingMode mode, std::uint64_t seed)
    : n_(n), mode_(mode), rng_(seed), cursor_(n) {
  if (n_ == 0) throw ConfigError("n", "cannot sample from an empty dataset");
  if (mode_ == SamplingMode::WithoutReplacement) {
    perm_.resize(n_);
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
  }
}

std::size_t IndexSampler::next() {
  if (mode_ == SamplingMode::WithReplacement) {
    std::uniform_int_distribution<std::size_t> pick(0, n_ - 1);
    return pick(rng_);
  }
  if (cursor_ == n_) {
    std::shuffle(perm_.begin(), perm_.end(), rng_);
    cursor_ = 0;
  }
  return perm_[cursor_++];
}

Checkpoint evaluate_checkpoint(const ProblemInstance& instance, const Dataset& data,
                               const Vector& w, std::uint64_t iter) {
  Checkpoint c;
  c.iter = iter;
  c.epoch = static_cast<double>(iter) / static_cast<double>(data.size());
  const PopulationEval pop = instance.population_risk_and_gradient(w);
  c.f_pop = pop.risk.value;
  c.grad_norm_pop = pop.gradient.value.norm();
  c.f_emp = empirical_risk_and_gradient(data, instance, w).risk;
  c.in_ball = instance.in_ball(w);
  return c;
}

Trajectory run_sgd(const ProblemInstance& instance, const Dataset& data, const Vector& w0,
                   const Schedule& schedule, const RunOptions& options) {
  if (w0.size() != instance.dim()) throw ConfigError("w0", "dimension mismatch");
  if (!(schedule.eta >= 0.0) || !std::isfinite(schedule.eta))
    throw ConfigError("eta", "learning rate must be finite and non-negative");
  if (schedule.stop_iter < options.start_iter)
    throw ConfigError("stop_iter", "stop_iter precedes the starting iteration");

  const Link link = instance.link();
  const Vector& w_star = instance.w_star();
  const double radius_sq = instance.spec().operating_radius * instance.spec().operating_radius;
  const double eta = schedule.eta;

  Trajectory traj;
  traj.sampling_mode = options.sampling_mode;
  traj.seed = options.seed;
  traj.ball_exit = !instance.in_ball(w0);

  IndexSampler sampler(data.size(), options.sampling_mode, options.seed);
  Vector w = w0;
  const auto record = [&](std::uint64_t iter) {
    if (options.record_risks) {
      traj.checkpoints.push_back(evaluate_checkpoint(instance, data, w, iter));
    } else {
      Checkpoint c;
      c.iter = iter;
      c.epoch = static_cast<double>(iter) / static_cast<double>(data.size());
      c.in_ball = instance.in_ball(w);
      traj.checkpoints.push_back(c);
    }
  };

  for (std::uint64_t it = options.start_iter; it < schedule.stop_iter; ++it) {
    const std::size_t i = sampler.next();
    if (options.visit_log) options.visit_log->push_back(i);
    const auto x = data.inputs.row(static_cast<Eigen::Index>(i));
    const double u = x.dot(w);
    const double coef = eta * (link.value(u) - data.labels[static_cast<Eigen::Index>(i)]) *
                        link.slope(u);
    w.noalias() -= coef * x.transpose();
    if (!std::isfinite(coef) || !w.allFinite())
      throw DivergenceError(it + 1, fmt::format("non-finite iterate at iteration {}", it + 1));
    if (!traj.ball_exit && (w - w_star).squaredNorm() > radius_sq) traj.ball_exit = true;
    const std::uint64_t done = it + 1;
    if (options.checkpoint_every != 0 && done % options.checkpoint_every == 0 &&
        done != schedule.stop_iter)
      record(done);
  }
  record(schedule.stop_iter);

  traj.final_w = std::move(w);
  traj.epochs_completed =
      static_cast<double>(schedule.stop_iter) / static_cast<double>(data.size());
  return traj;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  out << "iter,epoch,F_pop,F_emp,grad_norm_pop,in_ball\n";
  for (const Checkpoint& c : trajectory.checkpoints)
    out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", c.iter, c.epoch, c.f_pop,
                       c.f_emp, c.grad_norm_pop, c.in_ball ? 1 : 0);
}

}  // namespace plsgd
