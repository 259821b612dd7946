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

// Uniform gradient deviation  max_w ||grad F(w) - grad F_S(w)||  over a
// residual-constrained region or a ball around w*.
//
// The maximum is searched by random proposals, so every reported max_gap is a
// lower bound on the true supremum. Linear realizable problems additionally
// get the exact ball supremum r * ||Sigma - Sigma_hat||_op for comparison.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "plsgd/common.hpp"
#include "plsgd/problems.hpp"

namespace plsgd {

// Fewer than 1% of proposals satisfied the region constraints.
class RegionTooThinError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// { w : mean r_i(w)^2 <= r_hat^2,  mean |r_i(w)| <= sqrt(s/n) r_hat }
struct ResidualRegion {
  double r_hat = 0.0;
  double s = 1.0;
  Vector anchor_w;
};

// { w : ||w - center|| <= r }
struct BallRegion {
  double r = 0.0;
  Vector center;
};

enum class RegionKind { Ball, Residual };

struct GapReport {
  RegionKind region = RegionKind::Ball;
  std::size_t n = 0;
  double r_hat = 0.0;  // residual regions
  double s = 0.0;      // residual regions
  double r = 0.0;      // ball regions
  std::size_t proposals = 0;
  std::size_t candidates_evaluated = 0;  // proposals inside the region
  double max_gap = 0.0;
  double anchor_gap = 0.0;
  Vector argmax_w;
  double argmax_distance = 0.0;  // ||argmax - w*||
  double argmax_sparsity = 0.0;
  double oracle_std_error = 0.0;  // population-gradient error at the argmax
  std::optional<double> closed_form;
};

// n (mean |r|)^2 / mean r^2; zero for an all-zero vector.
double effective_sparsity(std::span<const double> residuals);

// Smallest region containing `anchor` with sparsity parameter s; s <= 0
// selects s = effective_sparsity(anchor residuals).
ResidualRegion make_residual_region(const ProblemInstance& instance, const Dataset& data,
                                    const Vector& anchor, double s = 0.0);

bool in_residual_region(const ResidualRegion& region, std::span<const double> residuals);

// ||grad F(w) - grad F_S(w)|| by direct evaluation of both gradients.
double gap_at(const ProblemInstance& instance, const Dataset& data, const Vector& w);

// Gap evaluation specialised per dataset. Closed-form families reduce to
// ||(Sigma - Sigma_hat)(w - w*) + b_hat|| with b_hat = (1/n) sum eps_i x_i.
class GapEvaluator {
 public:
  GapEvaluator(const ProblemInstance& instance, const Dataset& data);

  double operator()(const Vector& w) const;
  bool moment_form() const { return moment_form_; }
  const Eigen::MatrixXd& moment_error() const { return moment_error_; }  // Sigma - Sigma_hat
  const Vector& noise_cross_term() const { return b_hat_; }

 private:
  const ProblemInstance* instance_;
  const Dataset* data_;
  bool moment_form_;
  Eigen::MatrixXd moment_error_;
  Vector b_hat_;
};

// Exact sup over the ball of radius r around w* for closed-form realizable
// problems; nullopt otherwise.
std::optional<double> ball_gap_closed_form(const ProblemInstance& instance, const Dataset& data,
                                           double r);

// Candidate 0 is the anchor itself; candidate k >= 1 perturbs the anchor
// along a Gaussian direction by a log-uniform radius in [1e-3 R, R] drawn from
// a stream keyed on (seed, k), so results are prefix-stable in n_candidates.
GapReport max_gap_over_residual_region(const ProblemInstance& instance, const Dataset& data,
                                       const ResidualRegion& region, std::size_t n_candidates,
                                       std::uint64_t seed);

// Candidate 0 is the center; the rest are uniform in the ball.
GapReport max_gap_over_ball(const ProblemInstance& instance, const Dataset& data,
                            const BallRegion& region, std::size_t n_candidates,
                            std::uint64_t seed);

// max_i || grad f(w*; x_i) (f(w*; x_i) - y_i) ||.
double measure_nu(const ProblemInstance& instance, const Dataset& data);

struct EnvelopeParams {
  double delta = 0.05;
  double C = 1.0;
};

// C (G B log(1/delta)/n + G r_hat [sqrt(log(1/delta)/n) + sqrt(s/n log(2n/s)) (1 + log n)])
double residual_gap_envelope(const ProblemConstants& c, std::size_t n, double r_hat, double s,
                             const EnvelopeParams& p);
// C (G r / n + G r sqrt((log(1/delta) + d log n) / n))
double ball_gap_envelope(const ProblemConstants& c, std::size_t n, int dim, double r,
                         const EnvelopeParams& p);

enum class AnchorKind { Reference, FirstEpoch };

struct GapRecipe {
  RegionKind region = RegionKind::Ball;
  AnchorKind anchor = AnchorKind::Reference;
  Vector reference_w;
  // Residual regions: s <= 0 uses the anchor's own effective sparsity.
  double s = 0.0;
  // FirstEpoch anchors: one without-replacement epoch from reference_w.
  double first_epoch_eta = 0.0;
  std::size_t n_candidates = 1000;
  EnvelopeParams envelope;
};

struct GapCell {
  std::size_t n = 0;
  std::size_t seed_index = 0;
  std::uint64_t dataset_seed = 0;
  double envelope = 0.0;
  double nu = 0.0;
  GapReport report;
  std::string failure;  // empty on success
};

struct GapScalingPoint {
  std::size_t n = 0;
  double median_max_gap = 0.0;
  std::size_t cells = 0;
  std::size_t failed = 0;
};

struct GapScalingResult {
  std::vector<GapCell> cells;
  std::vector<GapScalingPoint> points;
};

GapScalingResult gap_scaling_experiment(const ProblemInstance& instance,
                                        const std::vector<std::size_t>& n_grid,
                                        std::size_t seeds, const GapRecipe& recipe,
                                        std::uint64_t master_seed, unsigned workers = 1);

std::string_view to_string(RegionKind kind);

// One row per (n, seed, region).
void write_gap_cells_csv(std::ostream& out, const GapScalingResult& result,
                         const GapRecipe& recipe);

}  // namespace plsgd
