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

// Closed-form learning rates and stopping times.
//
//   first epoch, PL:               eta = log(n mu^2 F0 / (sigma2 L)) / (mu n)
//   after first epoch, PL:         eta = min(1/n^2, 1/L)
//                                  t   = ceil(2/(eta mu) log(mu F1 / (eta G^2 B^2 L)))
//   first epoch, strongly convex:  eta = 4L/(gamma^2 n) log(n gamma^4 F0 / (4 sigma2 L^2))
//   after first epoch, s. convex:  t   = ceil(2/(eta gamma) log(gamma n^2 F1 / (2 C^2 G^2 B^2)))
//
// Every log argument must exceed one; first-epoch rates must satisfy eta L <= 1.

#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace plsgd {

class ScheduleError : public std::domain_error {
 public:
  enum class Kind { LogArgumentNotAboveOne, StepTooLarge, InvalidInput };

  ScheduleError(Kind kind, const std::string& message)
      : std::domain_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::string_view to_string(ScheduleError::Kind kind);

enum class ScheduleSource { Theorem1, Theorem3, Theorem4, Theorem6, Manual };

std::string_view to_string(ScheduleSource source);

struct Schedule {
  double eta = 0.0;
  // Total iterations, counting the first epoch when the schedule continues one.
  std::uint64_t stop_iter = 1;
  ScheduleSource source = ScheduleSource::Manual;
  // Named values plugged into the formula (mu, n, F0, sigma2, L, ...).
  std::map<std::string, double> inputs_used;
};

double lr_theorem1(double mu, std::uint64_t n, double F0, double sigma2, double L);

double lr_theorem3(std::uint64_t n, double L);

std::uint64_t stop_theorem3(double eta, double mu, double F1, double G, double B, double L);

struct StronglyConvexRate {
  double eta = 0.0;
  double gamma_hat = 0.0;  // gamma^2 / (4 L), the PL constant implied by strong convexity
};

StronglyConvexRate lr_theorem4(double gamma, std::uint64_t n, double F0, double sigma2, double L);

std::uint64_t stop_theorem6(double eta, double gamma, std::uint64_t n, double F1, double G,
                            double B, double C);

}  // namespace plsgd
