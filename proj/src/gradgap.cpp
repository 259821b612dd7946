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

#include "plsgd/gradgap.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "plsgd/parallel.hpp"
#include "plsgd/sgd.hpp"

namespace plsgd {
namespace {

// Relative slack on the region inequalities so the anchor stays a member
// despite rounding in its own r_hat and s_eff.
constexpr double kMembershipSlack = 1e-12;

struct ResidualStats {
  double mean_sq = 0.0;
  double mean_abs = 0.0;
};

ResidualStats residual_stats(std::span<const double> r) {
  ResidualStats s;
  for (double v : r) {
    s.mean_sq += v * v;
    s.mean_abs += std::abs(v);
  }
  const double n = static_cast<double>(r.size());
  s.mean_sq /= n;
  s.mean_abs /= n;
  return s;
}

std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

double median(std::vector<double> values) {
  if (values.empty()) return std::nan("");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid),
                   values.end());
  const double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  const double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

void fill_argmax(GapReport& report, const ProblemInstance& instance, const Dataset& data,
                 const Vector& best) {
  report.argmax_w = best;
  report.argmax_distance = (best - instance.w_star()).norm();
  const Vector r = residuals(data, instance, best);
  report.argmax_sparsity = effective_sparsity(as_span(r));
  if (!instance.exact())
    report.oracle_std_error = instance.population_gradient(best).std_error.norm();
}

}  // namespace

std::string_view to_string(RegionKind kind) {
  return kind == RegionKind::Ball ? "ball" : "residual";
}

double effective_sparsity(std::span<const double> residuals) {
  if (residuals.empty()) return 0.0;
  const ResidualStats s = residual_stats(residuals);
  if (s.mean_sq == 0.0) return 0.0;
  return static_cast<double>(residuals.size()) * s.mean_abs * s.mean_abs / s.mean_sq;
}

ResidualRegion make_residual_region(const ProblemInstance& instance, const Dataset& data,
                                    const Vector& anchor, double s) {
  const Vector r = residuals(data, instance, anchor);
  const ResidualStats st = residual_stats(as_span(r));
  ResidualRegion region;
  region.anchor_w = anchor;
  region.r_hat = std::sqrt(st.mean_sq);
  const double s_eff = effective_sparsity(as_span(r));
  region.s = s > 0.0 ? s : std::max(s_eff, 1.0);
  if (!in_residual_region(region, as_span(r)))
    throw ConfigError("s", fmt::format("s = {} is below the anchor's effective sparsity {}",
                                       region.s, s_eff));
  return region;
}

bool in_residual_region(const ResidualRegion& region, std::span<const double> residuals) {
  const ResidualStats st = residual_stats(residuals);
  const double n = static_cast<double>(residuals.size());
  const double r2 = region.r_hat * region.r_hat;
  if (st.mean_sq > r2 * (1.0 + kMembershipSlack)) return false;
  return st.mean_abs <= std::sqrt(region.s / n) * region.r_hat * (1.0 + kMembershipSlack);
}

double gap_at(const ProblemInstance& instance, const Dataset& data, const Vector& w) {
  const Vector pop = instance.population_gradient(w).value;
  const Vector emp = empirical_risk_and_gradient(data, instance, w).gradient;
  return (pop - emp).norm();
}

GapEvaluator::GapEvaluator(const ProblemInstance& instance, const Dataset& data)
    : instance_(&instance), data_(&data), moment_form_(instance.exact()) {
  if (!moment_form_) return;
  const double n = static_cast<double>(data.size());
  const int d = instance.dim();
  const Eigen::MatrixXd sigma_hat = (data.inputs.transpose() * data.inputs) / n;
  moment_error_ = instance.second_moment() * Eigen::MatrixXd::Identity(d, d) - sigma_hat;
  if (instance.realizable()) {
    b_hat_ = Vector::Zero(d);
  } else {
    const Vector noise = data.labels - data.inputs * instance.w_star();
    b_hat_ = (data.inputs.transpose() * noise) / n;
  }
}

double GapEvaluator::operator()(const Vector& w) const {
  if (!moment_form_) return gap_at(*instance_, *data_, w);
  return (moment_error_ * (w - instance_->w_star()) + b_hat_).norm();
}

std::optional<double> ball_gap_closed_form(const ProblemInstance& instance, const Dataset& data,
                                           double r) {
  if (!instance.exact() || !instance.realizable()) return std::nullopt;
  const GapEvaluator eval(instance, data);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(eval.moment_error(),
                                                     Eigen::EigenvaluesOnly);
  return r * eig.eigenvalues().cwiseAbs().maxCoeff();
}

GapReport max_gap_over_residual_region(const ProblemInstance& instance, const Dataset& data,
                                       const ResidualRegion& region, std::size_t n_candidates,
                                       std::uint64_t seed) {
  if (n_candidates < 1) throw ConfigError("n_candidates", "must be >= 1");
  if (region.anchor_w.size() != instance.dim())
    throw ConfigError("anchor_w", "dimension mismatch");
  if (!in_residual_region(region, as_span(residuals(data, instance, region.anchor_w))))
    throw ConfigError("anchor_w", "the region anchor is not a member of its own region");

  const GapEvaluator eval(instance, data);
  const double radius = instance.spec().operating_radius;
  GapReport report;
  report.region = RegionKind::Residual;
  report.n = data.size();
  report.r_hat = region.r_hat;
  report.s = region.s;
  report.proposals = n_candidates;
  report.anchor_gap = eval(region.anchor_w);
  report.max_gap = report.anchor_gap;
  report.candidates_evaluated = 1;
  Vector best = region.anchor_w;

  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vector dir(instance.dim());
  for (std::size_t k = 1; k < n_candidates; ++k) {
    Rng rng(derive_seed({seed, k}));
    for (Eigen::Index j = 0; j < dir.size(); ++j) dir[j] = normal(rng);
    const double rho = radius * std::pow(10.0, -3.0 * unif(rng));
    const Vector w = region.anchor_w + (rho / dir.norm()) * dir;
    if (!in_residual_region(region, as_span(residuals(data, instance, w)))) continue;
    ++report.candidates_evaluated;
    const double g = eval(w);
    if (g > report.max_gap) {
      report.max_gap = g;
      best = w;
    }
  }
  if (100 * report.candidates_evaluated < report.proposals)
    throw RegionTooThinError(fmt::format(
        "only {} of {} proposals fall inside the residual region (r_hat = {}, s = {})",
        report.candidates_evaluated, report.proposals, region.r_hat, region.s));
  fill_argmax(report, instance, data, best);
  return report;
}

GapReport max_gap_over_ball(const ProblemInstance& instance, const Dataset& data,
                            const BallRegion& region, std::size_t n_candidates,
                            std::uint64_t seed) {
  if (n_candidates < 1) throw ConfigError("n_candidates", "must be >= 1");
  if (!(region.r >= 0.0)) throw ConfigError("r", "ball radius must be non-negative");
  if (region.center.size() != instance.dim()) throw ConfigError("center", "dimension mismatch");

  const GapEvaluator eval(instance, data);
  GapReport report;
  report.region = RegionKind::Ball;
  report.n = data.size();
  report.r = region.r;
  report.proposals = n_candidates;
  report.candidates_evaluated = n_candidates;
  report.anchor_gap = eval(region.center);
  report.max_gap = report.anchor_gap;
  Vector best = region.center;
  for (std::size_t k = 1; k < n_candidates; ++k) {
    Rng rng(derive_seed({seed, k}));
    const Vector w = sample_in_ball(region.center, region.r, rng);
    const double g = eval(w);
    if (g > report.max_gap) {
      report.max_gap = g;
      best = w;
    }
  }
  if (region.center == instance.w_star())
    report.closed_form = ball_gap_closed_form(instance, data, region.r);
  fill_argmax(report, instance, data, best);
  return report;
}

double measure_nu(const ProblemInstance& instance, const Dataset& data) {
  const Link& link = instance.link();
  double nu = 0.0;
  for (Eigen::Index i = 0; i < data.inputs.rows(); ++i) {
    const auto x = data.inputs.row(i);
    const double u = x.dot(instance.w_star());
    const double r = link.value(u) - data.labels[i];
    nu = std::max(nu, std::abs(r * link.slope(u)) * x.norm());
  }
  return nu;
}

double residual_gap_envelope(const ProblemConstants& c, std::size_t n, double r_hat, double s,
                             const EnvelopeParams& p) {
  const double nd = static_cast<double>(n);
  const double log_delta = std::log(1.0 / p.delta);
  const double sparse =
      std::sqrt(s / nd * std::log(2.0 * nd / s)) * (1.0 + std::log(nd));
  return p.C * (c.G * c.B * log_delta / nd + c.G * r_hat * (std::sqrt(log_delta / nd) + sparse));
}

double ball_gap_envelope(const ProblemConstants& c, std::size_t n, int dim, double r,
                         const EnvelopeParams& p) {
  const double nd = static_cast<double>(n);
  const double complexity = std::log(1.0 / p.delta) + dim * std::log(nd);
  return p.C * (c.G * r / nd + c.G * r * std::sqrt(complexity / nd));
}

GapScalingResult gap_scaling_experiment(const ProblemInstance& instance,
                                        const std::vector<std::size_t>& n_grid,
                                        std::size_t seeds, const GapRecipe& recipe,
                                        std::uint64_t master_seed, unsigned workers) {
  if (n_grid.size() < 4) throw ConfigError("n_grid", "needs at least 4 points");
  for (std::size_t i = 1; i < n_grid.size(); ++i)
    if (n_grid[i] <= n_grid[i - 1]) throw ConfigError("n_grid", "must be strictly increasing");
  if (seeds < 1) throw ConfigError("seeds", "must be >= 1");
  if (recipe.reference_w.size() != instance.dim())
    throw ConfigError("reference_w", "dimension mismatch");
  if (recipe.anchor == AnchorKind::FirstEpoch && !(recipe.first_epoch_eta > 0.0))
    throw ConfigError("first_epoch_eta", "first-epoch anchors need a positive learning rate");

  GapScalingResult out;
  out.cells.resize(n_grid.size() * seeds);
  parallel_for(out.cells.size(), workers, [&](std::size_t idx) {
    GapCell& cell = out.cells[idx];
    cell.n = n_grid[idx / seeds];
    cell.seed_index = idx % seeds;
    cell.dataset_seed = derive_seed({master_seed, tag("gap-dataset"), cell.n, cell.seed_index});
    const Dataset data = generate_dataset(instance, cell.n, cell.dataset_seed);
    cell.nu = measure_nu(instance, data);

    Vector anchor = recipe.reference_w;
    if (recipe.anchor == AnchorKind::FirstEpoch) {
      Schedule sched;
      sched.eta = recipe.first_epoch_eta;
      sched.stop_iter = cell.n;
      RunOptions opts;
      opts.seed = derive_seed({master_seed, tag("gap-epoch"), cell.n, cell.seed_index});
      opts.record_risks = false;
      anchor = run_sgd(instance, data, anchor, sched, opts).final_w;
    }
    const std::uint64_t search_seed =
        derive_seed({master_seed, tag("gap-search"), cell.n, cell.seed_index});
    try {
      if (recipe.region == RegionKind::Ball) {
        BallRegion ball{(anchor - instance.w_star()).norm(), instance.w_star()};
        cell.report = max_gap_over_ball(instance, data, ball, recipe.n_candidates, search_seed);
        cell.envelope = ball_gap_envelope(instance.constants(), cell.n, instance.dim(), ball.r,
                                          recipe.envelope);
      } else {
        const ResidualRegion region = make_residual_region(instance, data, anchor, recipe.s);
        cell.report = max_gap_over_residual_region(instance, data, region, recipe.n_candidates,
                                                   search_seed);
        cell.envelope = residual_gap_envelope(instance.constants(), cell.n, region.r_hat,
                                              region.s, recipe.envelope);
      }
    } catch (const RegionTooThinError& e) {
      cell.failure = e.what();
    }
  });

  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    GapScalingPoint p;
    p.n = n_grid[i];
    std::vector<double> gaps;
    for (std::size_t k = 0; k < seeds; ++k) {
      const GapCell& c = out.cells[i * seeds + k];
      ++p.cells;
      if (c.failure.empty()) {
        gaps.push_back(c.report.max_gap);
      } else {
        ++p.failed;
      }
    }
    p.median_max_gap = median(std::move(gaps));
    out.points.push_back(p);
  }
  return out;
}

void write_gap_cells_csv(std::ostream& out, const GapScalingResult& result,
                         const GapRecipe& recipe) {
  out << "n,seed,region,r_hat,s,r,proposals,accepted,max_gap,anchor_gap,closed_form,"
         "argmax_distance,argmax_sparsity,oracle_std_error,nu,envelope,delta,C,failure\n";
  for (const GapCell& c : result.cells) {
    const GapReport& r = c.report;
    out << fmt::format("{},{},{},{:.17g},{:.17g},{:.17g},{},{},{:.17g},{:.17g},{},{:.17g},{:.17g},"
                       "{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},\"{}\"\n",
                       c.n, c.seed_index, to_string(recipe.region), r.r_hat, r.s, r.r,
                       r.proposals, r.candidates_evaluated, r.max_gap, r.anchor_gap,
                       r.closed_form ? fmt::format("{:.17g}", *r.closed_form) : std::string(),
                       r.argmax_distance, r.argmax_sparsity, r.oracle_std_error, c.nu,
                       c.envelope, recipe.envelope.delta, recipe.envelope.C, c.failure);
  }
}

}  // namespace plsgd
