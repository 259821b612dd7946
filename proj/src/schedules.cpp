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

#include "plsgd/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace plsgd {
namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value))
    throw ScheduleError(ScheduleError::Kind::InvalidInput,
                        std::string(name) + " must be positive and finite");
}

// Risk values may be zero; a zero risk surfaces as a log argument of zero.
void require_non_negative(double value, const char* name) {
  if (!(value >= 0.0) || !std::isfinite(value))
    throw ScheduleError(ScheduleError::Kind::InvalidInput,
                        std::string(name) + " must be non-negative and finite");
}

double checked_log(double argument, const char* formula) {
  if (!(argument > 1.0))
    throw ScheduleError(ScheduleError::Kind::LogArgumentNotAboveOne,
                        std::string(formula) + ": log argument " + std::to_string(argument) +
                            " is not above one");
  return std::log(argument);
}

std::uint64_t ceil_steps(double t) {
  if (!std::isfinite(t) || t > static_cast<double>(std::numeric_limits<std::uint64_t>::max() / 2))
    throw ScheduleError(ScheduleError::Kind::InvalidInput, "stopping time overflows");
  return static_cast<std::uint64_t>(std::ceil(t));
}

}  // namespace

std::string_view to_string(ScheduleError::Kind kind) {
  switch (kind) {
    case ScheduleError::Kind::LogArgumentNotAboveOne:
      return "LogArgumentNotAboveOne";
    case ScheduleError::Kind::StepTooLarge:
      return "StepTooLarge";
    case ScheduleError::Kind::InvalidInput:
      return "InvalidInput";
  }
  return "unknown";
}

std::string_view to_string(ScheduleSource source) {
  switch (source) {
    case ScheduleSource::Theorem1:
      return "Theorem1";
    case ScheduleSource::Theorem3:
      return "Theorem3";
    case ScheduleSource::Theorem4:
      return "Theorem4";
    case ScheduleSource::Theorem6:
      return "Theorem6";
    case ScheduleSource::Manual:
      return "Manual";
  }
  return "unknown";
}

double lr_theorem1(double mu, std::uint64_t n, double F0, double sigma2, double L) {
  require_positive(mu, "mu");
  require_non_negative(F0, "F0");
  require_positive(sigma2, "sigma2");
  require_positive(L, "L");
  if (n < 1) throw ScheduleError(ScheduleError::Kind::InvalidInput, "n must be >= 1");
  const double nd = static_cast<double>(n);
  const double eta =
      checked_log(nd * mu * mu * F0 / (sigma2 * L), "first-epoch PL rate") / (mu * nd);
  if (eta * L > 1.0)
    throw ScheduleError(ScheduleError::Kind::StepTooLarge,
                        "first-epoch PL rate violates eta L <= 1 (eta L = " +
                            std::to_string(eta * L) + ")");
  return eta;
}

double lr_theorem3(std::uint64_t n, double L) {
  require_positive(L, "L");
  if (n < 1) throw ScheduleError(ScheduleError::Kind::InvalidInput, "n must be >= 1");
  const double nd = static_cast<double>(n);
  return std::min(1.0 / (nd * nd), 1.0 / L);
}

std::uint64_t stop_theorem3(double eta, double mu, double F1, double G, double B, double L) {
  require_positive(eta, "eta");
  require_positive(mu, "mu");
  require_non_negative(F1, "F1");
  require_positive(G, "G");
  require_positive(B, "B");
  require_positive(L, "L");
  const double lg = checked_log(mu * F1 / (eta * G * G * B * B * L), "post-epoch PL stop");
  return ceil_steps(2.0 / (eta * mu) * lg);
}

StronglyConvexRate lr_theorem4(double gamma, std::uint64_t n, double F0, double sigma2,
                               double L) {
  require_positive(gamma, "gamma");
  require_non_negative(F0, "F0");
  require_positive(sigma2, "sigma2");
  require_positive(L, "L");
  if (n < 1) throw ScheduleError(ScheduleError::Kind::InvalidInput, "n must be >= 1");
  const double nd = static_cast<double>(n);
  const double g2 = gamma * gamma;
  const double lg = checked_log(nd * g2 * g2 * F0 / (4.0 * sigma2 * L * L),
                                "first-epoch strongly convex rate");
  StronglyConvexRate out;
  out.eta = 4.0 * L / (g2 * nd) * lg;
  out.gamma_hat = g2 / (4.0 * L);
  if (out.eta * L > 1.0)
    throw ScheduleError(ScheduleError::Kind::StepTooLarge,
                        "first-epoch strongly convex rate violates eta L <= 1 (eta L = " +
                            std::to_string(out.eta * L) + ")");
  return out;
}

std::uint64_t stop_theorem6(double eta, double gamma, std::uint64_t n, double F1, double G,
                            double B, double C) {
  require_positive(eta, "eta");
  require_positive(gamma, "gamma");
  require_non_negative(F1, "F1");
  require_positive(G, "G");
  require_positive(B, "B");
  require_positive(C, "C");
  if (n < 1) throw ScheduleError(ScheduleError::Kind::InvalidInput, "n must be >= 1");
  const double nd = static_cast<double>(n);
  const double lg = checked_log(gamma * nd * nd * F1 / (2.0 * C * C * G * G * B * B),
                                "post-epoch strongly convex stop");
  return ceil_steps(2.0 / (eta * gamma) * lg);
}

}  // namespace plsgd
