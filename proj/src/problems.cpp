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

#include "plsgd/problems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace plsgd {
namespace {

constexpr double kPlExclusion = 1e-12;

double sup_input_norm(const ProblemSpec& spec) {
  return spec.input_scale * std::sqrt(static_cast<double>(spec.dim));
}

// Half-width of the uniform label noise with standard deviation noise_std.
double noise_bound(const ProblemSpec& spec) {
  return spec.family == Family::LinearNoisy ? std::sqrt(3.0) * spec.noise_std : 0.0;
}

struct OracleSums {
  double risk = 0.0;
  double risk_sq = 0.0;
  Vector grad;
  Vector grad_sq;
  double grad_norm_sq = 0.0;  // sum ||g_i||^2
};

OracleSums accumulate_oracle(const RowMatrix& xs, const Link& link, const Vector& w,
                             const Vector& w_star) {
  const Vector v = w - w_star;
  OracleSums s;
  s.grad = Vector::Zero(w.size());
  s.grad_sq = Vector::Zero(w.size());
  Vector g(w.size());
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    const auto x = xs.row(i);
    const double u = x.dot(w);
    const double u_star = x.dot(w_star);
    const double r = link.difference(u, u_star, x.dot(v));
    const double loss = 0.5 * r * r;
    s.risk += loss;
    s.risk_sq += loss * loss;
    g.noalias() = (r * link.slope(u)) * x.transpose();
    s.grad += g;
    s.grad_sq += g.cwiseAbs2();
    s.grad_norm_sq += g.squaredNorm();
  }
  return s;
}

// sinc(t) = sin(t)/t and its first two derivatives, with series near 0.
struct SincDerivs {
  double f, d1, d2;
};

SincDerivs sinc_derivs(double t) {
  if (std::abs(t) < 1e-3) {
    const double t2 = t * t;
    return {1.0 - t2 / 6.0 + t2 * t2 / 120.0, -t / 3.0 + t * t2 / 30.0, -1.0 / 3.0 + t2 / 10.0};
  }
  const double sn = std::sin(t), cs = std::cos(t);
  return {sn / t, (t * cs - sn) / (t * t), ((2.0 - t * t) * sn - 2.0 * t * cs) / (t * t * t)};
}

// Phi(c) = E cos(c.x) = prod_j sinc(s c_j) for x uniform on [-s, s]^d, with
// its gradient and Hessian in c.
struct CharFn {
  double value;
  Vector grad;
  Eigen::MatrixXd hess;
};

CharFn char_fn(const Vector& c, double s, bool want_hessian) {
  const Eigen::Index d = c.size();
  std::vector<SincDerivs> k(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) k[static_cast<std::size_t>(j)] = sinc_derivs(s * c[j]);
  const auto prod_except = [&](Eigen::Index a, Eigen::Index b) {
    double p = 1.0;
    for (Eigen::Index j = 0; j < d; ++j)
      if (j != a && j != b) p *= k[static_cast<std::size_t>(j)].f;
    return p;
  };
  CharFn out;
  out.value = prod_except(-1, -1);
  out.grad.resize(d);
  for (Eigen::Index a = 0; a < d; ++a)
    out.grad[a] = s * k[static_cast<std::size_t>(a)].d1 * prod_except(a, -1);
  if (want_hessian) {
    out.hess.resize(d, d);
    for (Eigen::Index a = 0; a < d; ++a) {
      out.hess(a, a) = s * s * k[static_cast<std::size_t>(a)].d2 * prod_except(a, -1);
      for (Eigen::Index b = a + 1; b < d; ++b) {
        out.hess(a, b) = s * s * k[static_cast<std::size_t>(a)].d1 *
                         k[static_cast<std::size_t>(b)].d1 * prod_except(a, b);
        out.hess(b, a) = out.hess(a, b);
      }
    }
  }
  return out;
}

double std_error(double sum, double sum_sq, double m) {
  const double mean = sum / m;
  const double var = std::max(0.0, sum_sq / m - mean * mean);
  return std::sqrt(var / m);
}

}  // namespace

std::string_view to_string(Family family) {
  switch (family) {
    case Family::LinearRealizable:
      return "LinearRealizable";
    case Family::SineLinkRealizable:
      return "SineLinkRealizable";
    case Family::LinearNoisy:
      return "LinearNoisy";
  }
  return "unknown";
}

Family family_from_string(std::string_view name) {
  if (name == "LinearRealizable") return Family::LinearRealizable;
  if (name == "SineLinkRealizable") return Family::SineLinkRealizable;
  if (name == "LinearNoisy") return Family::LinearNoisy;
  throw ConfigError("family", "unknown problem family '" + std::string(name) + "'");
}

void ProblemSpec::validate() const {
  if (dim < 1) throw ConfigError("dim", "must be >= 1");
  if (!(input_scale > 0.0) || !std::isfinite(input_scale))
    throw ConfigError("input_scale", "must be a positive finite number");
  if (!(operating_radius > 0.0) || !std::isfinite(operating_radius))
    throw ConfigError("operating_radius", "must be a positive finite number");
  if (w_star.size() != dim)
    throw ConfigError("w_star", "length " + std::to_string(w_star.size()) +
                                    " does not match dim " + std::to_string(dim));
  if (!w_star.allFinite()) throw ConfigError("w_star", "must be finite");
  if (!(link_amplitude >= 0.0) || !(link_amplitude < 1.0))
    throw ConfigError("link_amplitude", "must lie in [0, 1)");
  if (family != Family::SineLinkRealizable && link_amplitude != 0.0)
    throw ConfigError("link_amplitude", "only SineLinkRealizable takes a link amplitude");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std))
    throw ConfigError("noise_std", "must be a non-negative finite number");
  if (family != Family::LinearNoisy && noise_std != 0.0)
    throw ConfigError("noise_std", "realizable families require noise_std = 0");
  if (oracle_size < 1) throw ConfigError("oracle_size", "must be >= 1");
  if (pl_probes < 1) throw ConfigError("pl_probes", "must be >= 1");
}

ProblemInstance::ProblemInstance(ProblemSpec spec) : spec_(std::move(spec)) {
  link_.amplitude = spec_.family == Family::SineLinkRealizable ? spec_.link_amplitude : 0.0;
}

double ProblemInstance::second_moment() const {
  return spec_.input_scale * spec_.input_scale / 3.0;
}

double ProblemInstance::noise_variance() const {
  return spec_.family == Family::LinearNoisy ? spec_.noise_std * spec_.noise_std : 0.0;
}

bool ProblemInstance::in_ball(const Vector& w) const {
  const double r = spec_.operating_radius;
  return (w - spec_.w_star).squaredNorm() <= r * r;
}

std::size_t ProblemInstance::oracle_size() const {
  return oracle_ ? static_cast<std::size_t>(oracle_->rows()) : 0;
}

PopulationEval ProblemInstance::population_risk_and_gradient(const Vector& w) const {
  PopulationEval out;
  if (exact()) {
    const Vector v = w - spec_.w_star;
    const double m2 = second_moment();
    out.risk = {0.5 * m2 * v.squaredNorm() + 0.5 * noise_variance(), 0.0};
    out.gradient = {m2 * v, Vector::Zero(w.size())};
    return out;
  }
  const double m = static_cast<double>(oracle_->rows());
  const OracleSums s = accumulate_oracle(*oracle_, link_, w, spec_.w_star);
  out.risk = {s.risk / m, std_error(s.risk, s.risk_sq, m)};
  out.gradient.value = s.grad / m;
  out.gradient.std_error.resize(w.size());
  for (Eigen::Index j = 0; j < w.size(); ++j)
    out.gradient.std_error[j] = std_error(s.grad[j], s.grad_sq[j], m);
  return out;
}

std::pair<double, Vector> ProblemInstance::population_closed_form(const Vector& w) const {
  const Vector v = w - spec_.w_star;
  const double m2 = second_moment();
  if (exact()) return {0.5 * m2 * v.squaredNorm() + 0.5 * noise_variance(), m2 * v};
  // Expand r = v.x + a (sin u - sin u*) and reduce every expectation to Phi
  // and its derivatives at w, w*, v, 2w, 2w* and w + w*.
  const double a = link_.amplitude;
  const double s = spec_.input_scale;
  const Vector& ws = spec_.w_star;
  const CharFn at_w = char_fn(w, s, true);
  const CharFn at_ws = char_fn(ws, s, false);
  const CharFn at_v = char_fn(v, s, false);
  const CharFn at_2w = char_fn(2.0 * w, s, false);
  const CharFn at_2ws = char_fn(2.0 * ws, s, false);
  const CharFn at_sum = char_fn(w + ws, s, false);
  const double sin_sq = 1.0 - 0.5 * at_2w.value - 0.5 * at_2ws.value - at_v.value + at_sum.value;
  const double risk = 0.5 * (m2 * v.squaredNorm() + 2.0 * a * v.dot(at_ws.grad - at_w.grad) +
                             a * a * sin_sq);
  Vector grad = m2 * v - a * at_w.grad + a * at_ws.grad - a * (at_w.hess * v) -
                0.5 * a * a * at_2w.grad + 0.5 * a * a * (at_sum.grad - at_v.grad);
  return {risk, std::move(grad)};
}

Estimate ProblemInstance::population_risk(const Vector& w) const {
  return population_risk_and_gradient(w).risk;
}

GradientEstimate ProblemInstance::population_gradient(const Vector& w) const {
  return population_risk_and_gradient(w).gradient;
}

Estimate ProblemInstance::excess_risk(const Vector& w) const {
  if (exact()) return {0.5 * second_moment() * (w - spec_.w_star).squaredNorm(), 0.0};
  Estimate f = population_risk(w);
  f.value -= optimal_risk();
  return f;
}

Estimate ProblemInstance::gradient_variance(const Vector& w) const {
  if (exact()) {
    // E[(x.v)^2 |x|^2] = |v|^2 (m4 + (d-1) m2^2) for i.i.d. symmetric coordinates.
    const double m2 = second_moment();
    const double s2 = spec_.input_scale * spec_.input_scale;
    const double m4 = s2 * s2 / 5.0;
    const double d = static_cast<double>(spec_.dim);
    const double v2 = (w - spec_.w_star).squaredNorm();
    const double second = v2 * (m4 + (d - 1.0) * m2 * m2) + noise_variance() * d * m2;
    return {second - m2 * m2 * v2, 0.0};
  }
  const double m = static_cast<double>(oracle_->rows());
  const OracleSums s = accumulate_oracle(*oracle_, link_, w, spec_.w_star);
  const Vector mean = s.grad / m;
  // Unbiased sample variance of the per-example gradient.
  const double var = (s.grad_norm_sq - m * mean.squaredNorm()) / (m - 1.0);
  return {std::max(0.0, var), 0.0};
}

ProblemInstance generate_problem(const ProblemSpec& spec) {
  spec.validate();
  ProblemInstance inst(spec);

  const double x_sup = sup_input_norm(spec);
  const double w_norm = spec.w_star.norm();
  const double a = inst.link_.amplitude;
  const double m2 = inst.second_moment();
  ProblemConstants& c = inst.constants_;

  c.G = (1.0 + a) * x_sup;
  // |y| <= |phi(w*.x)| and |f(w;x)| <= |phi(w.x)| with |phi(u)| <= |u| + a.
  c.B = x_sup * (w_norm + spec.operating_radius) + x_sup * w_norm + 2.0 * a + noise_bound(spec);
  c.sigma2 = 4.0 * c.G * c.G * c.B * c.B;

  if (inst.exact()) {
    c.mu = m2;
    c.gamma = m2;
    c.L = m2;
    return inst;
  }

  // Hessian of F is E[(phi'^2 + r phi'') x x^T] with |r| <= (1+a)|v.x|, and
  // E[|v.x| (e.x)^2] <= sqrt(m2) |v| sqrt(3) m2 because E(e.x)^4 <= 3 m2^2.
  c.L = (1.0 + a) * (1.0 + a) * m2 +
        std::sqrt(3.0) * a * (1.0 + a) * m2 * std::sqrt(m2) * spec.operating_radius;
  c.gamma = 0.0;

  auto oracle = std::make_shared<RowMatrix>(static_cast<Eigen::Index>(spec.oracle_size), spec.dim);
  Rng rng(derive_seed({spec.seed, tag("oracle")}));
  std::uniform_real_distribution<double> unif(-spec.input_scale, spec.input_scale);
  for (Eigen::Index i = 0; i < oracle->rows(); ++i)
    for (Eigen::Index j = 0; j < oracle->cols(); ++j) (*oracle)(i, j) = unif(rng);
  inst.oracle_ = std::move(oracle);

  c.mu = verify_pl(inst, spec.pl_probes, derive_seed({spec.seed, tag("pl-certify")}));
  c.mu_probed = true;
  if (!(c.mu > 0.0))
    throw CertificationError("PL probe found no positive constant for the SineLink instance");
  if (c.mu > c.L)
    throw CertificationError("probed PL constant " + std::to_string(c.mu) +
                             " exceeds the smoothness bound " + std::to_string(c.L));
  return inst;
}

Dataset generate_dataset(const ProblemInstance& instance, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("n", "dataset size must be >= 1");
  const ProblemSpec& spec = instance.spec();
  Dataset data;
  data.seed = seed;
  data.inputs.resize(static_cast<Eigen::Index>(n), spec.dim);
  data.labels.resize(static_cast<Eigen::Index>(n));

  Rng rng(derive_seed({spec.seed, tag("dataset"), seed}));
  std::uniform_real_distribution<double> unif(-spec.input_scale, spec.input_scale);
  const double half_width = noise_bound(spec);
  std::uniform_real_distribution<double> noise(-half_width, half_width);
  for (Eigen::Index i = 0; i < data.inputs.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.inputs.cols(); ++j) data.inputs(i, j) = unif(rng);
    double y = instance.link().value(data.inputs.row(i).dot(spec.w_star));
    if (spec.family == Family::LinearNoisy) y += noise(rng);
    data.labels[i] = y;
  }
  return data;
}

RiskAndGradient empirical_risk_and_gradient(const Dataset& data, const ProblemInstance& instance,
                                            const Vector& w) {
  const Link& link = instance.link();
  RiskAndGradient out;
  out.gradient = Vector::Zero(w.size());
  for (Eigen::Index i = 0; i < data.inputs.rows(); ++i) {
    const auto x = data.inputs.row(i);
    const double u = x.dot(w);
    const double r = link.value(u) - data.labels[i];
    out.risk += 0.5 * r * r;
    out.gradient.noalias() += (r * link.slope(u)) * x.transpose();
  }
  const double n = static_cast<double>(data.size());
  out.risk /= n;
  out.gradient /= n;
  return out;
}

Vector residuals(const Dataset& data, const ProblemInstance& instance, const Vector& w) {
  const Link& link = instance.link();
  Vector r(data.labels.size());
  for (Eigen::Index i = 0; i < r.size(); ++i)
    r[i] = link.value(data.inputs.row(i).dot(w)) - data.labels[i];
  return r;
}

double mean_squared_sample_gradient(const Dataset& data, const ProblemInstance& instance,
                                    const Vector& w) {
  const Link& link = instance.link();
  double total = 0.0;
  for (Eigen::Index i = 0; i < data.inputs.rows(); ++i) {
    const auto x = data.inputs.row(i);
    const double u = x.dot(w);
    const double coef = (link.value(u) - data.labels[i]) * link.slope(u);
    total += coef * coef * x.squaredNorm();
  }
  return total / static_cast<double>(data.size());
}

PlProbe probe_pl(const RiskGradientFn& risk_and_gradient, const Vector& center, double radius,
                 double f_star, int n_probes, std::uint64_t seed) {
  PlProbe out;
  out.min_ratio = std::numeric_limits<double>::infinity();
  Rng rng(seed);
  for (int k = 0; k < n_probes; ++k) {
    const Vector w = sample_in_ball(center, radius, rng);
    const auto [f, grad] = risk_and_gradient(w);
    const double gap = f - f_star;
    if (gap < kPlExclusion) continue;
    ++out.evaluated;
    const double ratio = grad.squaredNorm() / (2.0 * gap);
    if (ratio < out.min_ratio) {
      out.min_ratio = ratio;
      out.argmin = w;
    }
  }
  return out;
}

double verify_pl(const ProblemInstance& instance, int n_probes, std::uint64_t seed) {
  if (n_probes < 1) throw ConfigError("n_probes", "must be >= 1");
  const auto fn = [&instance](const Vector& w) { return instance.population_closed_form(w); };
  const PlProbe probe = probe_pl(fn, instance.w_star(), instance.spec().operating_radius,
                                 instance.optimal_risk(), n_probes, seed);
  if (probe.evaluated == 0)
    throw CertificationError("every PL probe fell inside the F - F* < 1e-12 exclusion");
  if (instance.exact() && probe.min_ratio < 0.999 * instance.constants().mu)
    throw CertificationError("PL probe ratio " + std::to_string(probe.min_ratio) +
                             " is below the certified mu " +
                             std::to_string(instance.constants().mu));
  return probe.min_ratio;
}

}  // namespace plsgd
