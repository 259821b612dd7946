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

// Synthetic least-squares problems with known population risk.
//
// Every problem has the form  l(w; x, y) = 1/2 (phi(w.x) - y)^2  with inputs
// drawn uniformly from the hypercube [-s, s]^d. The link phi is the identity
// for the linear families and u + a*sin(u) for SineLinkRealizable. Linear
// families (and SineLink with a = 0) have closed-form population quantities;
// SineLink with a > 0 is evaluated against a fixed Monte-Carlo oracle sample.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string_view>
#include <utility>

#include "plsgd/common.hpp"

namespace plsgd {

enum class Family { LinearRealizable, SineLinkRealizable, LinearNoisy };

std::string_view to_string(Family family);
Family family_from_string(std::string_view name);  // throws ConfigError

struct ProblemSpec {
  Family family = Family::LinearRealizable;
  int dim = 1;
  double input_scale = 1.0;
  double link_amplitude = 0.0;  // SineLink only, in [0, 1)
  double noise_std = 0.0;       // LinearNoisy only
  Vector w_star;
  double operating_radius = 1.0;
  std::uint64_t seed = 0;
  // Monte-Carlo oracle size for SineLink population quantities.
  std::size_t oracle_size = 1'000'000;
  // Probes used to certify the PL constant of SineLink instances.
  int pl_probes = 10'000;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// Constants certified on the operating ball ||w - w*|| <= R.
struct ProblemConstants {
  double mu = 0.0;     // PL constant
  double gamma = 0.0;  // strong convexity; 0 when not certified
  double L = 0.0;      // smoothness of F
  double G = 0.0;      // sup ||grad f(w; x)||
  double B = 0.0;      // sup |y| + |f(w; x)|
  double sigma2 = 0.0; // always 4 G^2 B^2
  bool mu_probed = false;
};

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

struct GradientEstimate {
  Vector value;
  Vector std_error;
};

struct PopulationEval {
  Estimate risk;
  GradientEstimate gradient;
};

struct Dataset {
  RowMatrix inputs;  // n x d
  Vector labels;
  std::uint64_t seed = 0;

  std::size_t size() const { return static_cast<std::size_t>(labels.size()); }
  int dim() const { return static_cast<int>(inputs.cols()); }
};

// Scalar link phi and its derivatives.
struct Link {
  double amplitude = 0.0;

  double value(double u) const { return amplitude == 0.0 ? u : u + amplitude * std::sin(u); }
  double slope(double u) const { return amplitude == 0.0 ? 1.0 : 1.0 + amplitude * std::cos(u); }
  // phi(u) - phi(u_ref) without cancellation; delta = u - u_ref computed upstream.
  double difference(double u, double u_ref, double delta) const {
    if (amplitude == 0.0) return delta;
    return delta + 2.0 * amplitude * std::cos(0.5 * (u + u_ref)) * std::sin(0.5 * delta);
  }
};

class ProblemInstance {
 public:
  const ProblemSpec& spec() const { return spec_; }
  const ProblemConstants& constants() const { return constants_; }
  const Link& link() const { return link_; }
  int dim() const { return spec_.dim; }
  const Vector& w_star() const { return spec_.w_star; }

  // E[x_j^2] = s^2 / 3; the population second-moment matrix is this times I.
  double second_moment() const;
  // Variance of the additive label noise.
  double noise_variance() const;
  // True when population quantities are closed form rather than oracle estimates.
  bool exact() const { return link_.amplitude == 0.0; }
  bool realizable() const { return spec_.family != Family::LinearNoisy; }
  double optimal_risk() const { return 0.5 * noise_variance(); }
  bool in_ball(const Vector& w) const;

  Estimate population_risk(const Vector& w) const;
  GradientEstimate population_gradient(const Vector& w) const;
  PopulationEval population_risk_and_gradient(const Vector& w) const;
  // Exact (F(w), grad F(w)) for every family. SineLink terms reduce to the
  // characteristic function of the uniform cube; the expansion cancels near
  // w*, so excess risks below ~1e-12 are better read from the oracle.
  std::pair<double, Vector> population_closed_form(const Vector& w) const;
  // F(w) - F*.
  Estimate excess_risk(const Vector& w) const;
  // E_z || grad l(w; z) - grad F(w) ||^2.
  Estimate gradient_variance(const Vector& w) const;

  std::size_t oracle_size() const;

 private:
  friend ProblemInstance generate_problem(const ProblemSpec& spec);
  explicit ProblemInstance(ProblemSpec spec);

  ProblemSpec spec_;
  ProblemConstants constants_;
  Link link_;
  std::shared_ptr<const RowMatrix> oracle_;  // SineLink a > 0 only
};

// Builds an instance and certifies its constants. SineLink with a > 0 runs
// spec.pl_probes PL probes against the oracle. Throws ConfigError on an
// invalid spec and CertificationError if the constants are inconsistent.
ProblemInstance generate_problem(const ProblemSpec& spec);

// n i.i.d. examples; bit-identical for equal (instance seed, n, seed).
Dataset generate_dataset(const ProblemInstance& instance, std::size_t n, std::uint64_t seed);

struct RiskAndGradient {
  double risk = 0.0;
  Vector gradient;
};

// F_S(w) and its gradient in a single pass over the data.
RiskAndGradient empirical_risk_and_gradient(const Dataset& data, const ProblemInstance& instance,
                                            const Vector& w);

// f(w; x_i) - y_i for every example.
Vector residuals(const Dataset& data, const ProblemInstance& instance, const Vector& w);

// (1/n) sum_i || grad l(w; z_i) ||^2.
double mean_squared_sample_gradient(const Dataset& data, const ProblemInstance& instance,
                                    const Vector& w);

struct PlProbe {
  double min_ratio = 0.0;
  Vector argmin;
  int evaluated = 0;  // probes that passed the F - F* > 1e-12 filter
};

using RiskGradientFn = std::function<std::pair<double, Vector>(const Vector&)>;

// min ||grad F(w)||^2 / (2 (F(w) - f_star)) over n_probes points drawn
// uniformly from the ball of `radius` around `center`.
PlProbe probe_pl(const RiskGradientFn& risk_and_gradient, const Vector& center, double radius,
                 double f_star, int n_probes, std::uint64_t seed);

// Probes the instance over its operating ball. For closed-form families a
// ratio below 0.999 * mu throws CertificationError.
double verify_pl(const ProblemInstance& instance, int n_probes, std::uint64_t seed);

}  // namespace plsgd
