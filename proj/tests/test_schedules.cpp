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

#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "plsgd/schedules.hpp"

namespace plsgd {
namespace {

using oracle::HP;

double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

ScheduleError::Kind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ScheduleError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no ScheduleError thrown";
  return ScheduleError::Kind::InvalidInput;
}

TEST(Schedules, LrTheorem3IsMinOfInverseSquareAndInverseL) {
  EXPECT_DOUBLE_EQ(lr_theorem3(100, 0.5), 1e-4);
  EXPECT_DOUBLE_EQ(lr_theorem3(1, 4.0), 0.25);
  EXPECT_DOUBLE_EQ(lr_theorem3(2, 4.0), 0.25);
}

TEST(Schedules, LrTheorem1HandValue) {
  // n mu^2 F0 / (sigma2 L) = 1000 * 1 * 1 / (10 * 1) = 100.
  EXPECT_NEAR(lr_theorem1(1.0, 1000, 1.0, 10.0, 1.0), std::log(100.0) / 1000.0, 1e-18);
}

TEST(Schedules, DocumentedExamples) {
  EXPECT_NEAR(lr_theorem1(1.0, 1000, 1.0, 1.0, 1.0), 6.9078e-3, 1e-7);
  EXPECT_NEAR(lr_theorem1(1.0, 10, std::exp(1.0) / 10.0, 1.0, 1.0), 0.1, 1e-15);
  EXPECT_EQ(kind_of([] { lr_theorem1(1.0, 10, 0.05, 1.0, 1.0); }),
            ScheduleError::Kind::LogArgumentNotAboveOne);
  EXPECT_EQ(lr_theorem3(100, 1.0), 1e-4);
  EXPECT_EQ(lr_theorem3(1, 10.0), 0.1);
  EXPECT_EQ(lr_theorem3(2, 0.5), 0.25);
  EXPECT_EQ(stop_theorem3(1e-4, 1.0, 1.0, 1.0, 1.0, 1.0), 184207u);
  EXPECT_NEAR(lr_theorem4(1.0, 1000, 4.0, 1.0, 1.0).eta, 0.027631, 1e-6);
  EXPECT_EQ(stop_theorem6(1e-4, 1.0, 100, 1.0, 1.0, 1.0, 1.0), 170344u);
}

TEST(Schedules, LogEqualToOneGivesTwoOverEtaMu) {
  const double e = std::exp(1.0);
  // mu F1 = e eta G^2 B^2 L with eta = 1/64.
  EXPECT_EQ(stop_theorem3(1.0 / 64, 1.0, e / 64, 1.0, 1.0, 1.0), 128u);
  // gamma n^2 F1 = 2 e C^2 G^2 B^2.
  EXPECT_EQ(stop_theorem6(1.0 / 64, 1.0, 1, 2.0 * e, 1.0, 1.0, 1.0), 128u);
  EXPECT_EQ(kind_of([] { stop_theorem3(1.0 / 64, 1.0, 1.0 / 64, 1.0, 1.0, 1.0); }),
            ScheduleError::Kind::LogArgumentNotAboveOne);
  EXPECT_EQ(kind_of([] { stop_theorem6(1.0 / 64, 1.0, 1, 2.0, 1.0, 1.0, 1.0); }),
            ScheduleError::Kind::LogArgumentNotAboveOne);
}

TEST(Schedules, StronglyConvexRateEqualsPlRateAtGammaHat) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 200; ++k) {
    const double L = log_uniform(rng, 0.5, 5.0);
    const double gamma = log_uniform(rng, 0.1, 1.0) * L;
    const std::uint64_t n = static_cast<std::uint64_t>(log_uniform(rng, 1e3, 1e6));
    const double F0 = log_uniform(rng, 0.1, 10.0);
    const double s2 = log_uniform(rng, 1e-3, 1.0);
    double lr4;
    try {
      lr4 = lr_theorem4(gamma, n, F0, s2, L).eta;
    } catch (const ScheduleError&) {
      continue;
    }
    const double gh = gamma * gamma / (4.0 * L);
    EXPECT_NEAR(lr4, lr_theorem1(gh, n, 4.0 * L * F0, s2, L), 1e-12 * lr4);
    EXPECT_DOUBLE_EQ(lr_theorem4(gamma, n, F0, s2, L).gamma_hat, gh);
  }
}

TEST(Schedules, MatchHighPrecisionOnRandomValidInputs) {
  std::mt19937_64 rng(1234);
  int checked[5] = {0, 0, 0, 0, 0};
  while (checked[0] < 1000 || checked[2] < 1000 || checked[3] < 1000 || checked[4] < 1000) {
    const double mu = log_uniform(rng, 1e-3, 10.0);
    const double L = mu * log_uniform(rng, 1.0, 100.0);
    const double n = std::floor(log_uniform(rng, 1.0, 1e7));
    const double F = log_uniform(rng, 1e-6, 1e3);
    const double s2 = log_uniform(rng, 1e-6, 1e4);
    const double G = log_uniform(rng, 0.1, 10.0);
    const double B = log_uniform(rng, 1e-4, 10.0);
    const double C = log_uniform(rng, 0.1, 10.0);
    const double eta = log_uniform(rng, 1e-14, 1.0 / L);
    const auto un = static_cast<std::uint64_t>(n);

    if (auto want = oracle::hp_lr1(mu, n, F, s2, L); want && checked[0] < 1000) {
      if (*want * HP(L) <= 1) {
        EXPECT_LE(oracle::rel_err(lr_theorem1(mu, un, F, s2, L), *want), 1e-12);
        ++checked[0];
      }
    }
    EXPECT_LE(oracle::rel_err(lr_theorem3(un, L), oracle::hp_lr3(n, L)), 1e-12);
    ++checked[1];
    if (auto want = oracle::hp_stop3(eta, mu, F, G, B, L); want && checked[2] < 1000) {
      if (*want < HP(1e15)) {
        EXPECT_TRUE(oracle::ceil_matches(stop_theorem3(eta, mu, F, G, B, L), *want));
        ++checked[2];
      }
    }
    if (auto want = oracle::hp_lr4(mu, n, F, s2, L); want && checked[3] < 1000) {
      if (*want * HP(L) <= 1) {
        EXPECT_LE(oracle::rel_err(lr_theorem4(mu, un, F, s2, L).eta, *want), 1e-12);
        ++checked[3];
      }
    }
    if (auto want = oracle::hp_stop6(eta, mu, n, F, G, B, C); want && checked[4] < 1000) {
      if (*want < HP(1e15)) {
        EXPECT_TRUE(oracle::ceil_matches(stop_theorem6(eta, mu, un, F, G, B, C), *want));
        ++checked[4];
      }
    }
  }
}

TEST(Schedules, LogArgumentAtOrBelowOneIsRejected) {
  // n mu^2 F0 / (sigma2 L) = 1 exactly.
  EXPECT_EQ(kind_of([] { lr_theorem1(1.0, 4, 0.25, 1.0, 1.0); }),
            ScheduleError::Kind::LogArgumentNotAboveOne);
  EXPECT_EQ(kind_of([] { lr_theorem1(1.0, 4, 0.0, 1.0, 1.0); }),
            ScheduleError::Kind::LogArgumentNotAboveOne);
  // mu F1 / (eta G^2 B^2 L) = 1.
  EXPECT_EQ(kind_of([] { stop_theorem3(0.5, 1.0, 0.5, 1.0, 1.0, 1.0); }),
            ScheduleError::Kind::LogArgumentNotAboveOne);
  // n gamma^4 F0 / (4 sigma2 L^2) = 1.
  EXPECT_EQ(kind_of([] { lr_theorem4(1.0, 4, 1.0, 1.0, 1.0); }),
            ScheduleError::Kind::LogArgumentNotAboveOne);
  // gamma n^2 F1 / (2 C^2 G^2 B^2) = 1.
  EXPECT_EQ(kind_of([] { stop_theorem6(0.1, 2.0, 1, 1.0, 1.0, 1.0, 1.0); }),
            ScheduleError::Kind::LogArgumentNotAboveOne);
}

TEST(Schedules, JustAboveOneIsAccepted) {
  const double F0 = 0.25 * (1.0 + 1e-9);
  EXPECT_GT(lr_theorem1(1.0, 4, F0, 1.0, 1.0), 0.0);
}

TEST(Schedules, StepTooLargeWhenEtaLExceedsOne) {
  // eta = log(1e6)/1 ~ 13.8 with L = 1.
  EXPECT_EQ(kind_of([] { lr_theorem1(1.0, 1, 1e6, 1.0, 1.0); }),
            ScheduleError::Kind::StepTooLarge);
  EXPECT_EQ(kind_of([] { lr_theorem4(1.0, 1, 1e9, 1.0, 1.0); }),
            ScheduleError::Kind::StepTooLarge);
}

TEST(Schedules, InvalidInputs) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(kind_of([] { lr_theorem1(0.0, 10, 1.0, 1.0, 1.0); }), ScheduleError::Kind::InvalidInput);
  EXPECT_EQ(kind_of([] { lr_theorem1(1.0, 0, 1.0, 1.0, 1.0); }), ScheduleError::Kind::InvalidInput);
  EXPECT_EQ(kind_of([&] { lr_theorem1(1.0, 10, nan, 1.0, 1.0); }),
            ScheduleError::Kind::InvalidInput);
  EXPECT_EQ(kind_of([] { lr_theorem1(1.0, 10, -1.0, 1.0, 1.0); }),
            ScheduleError::Kind::InvalidInput);
  EXPECT_EQ(kind_of([] { lr_theorem3(0, 1.0); }), ScheduleError::Kind::InvalidInput);
  EXPECT_EQ(kind_of([] { lr_theorem3(5, 0.0); }), ScheduleError::Kind::InvalidInput);
  EXPECT_EQ(kind_of([] { stop_theorem3(0.0, 1.0, 1.0, 1.0, 1.0, 1.0); }),
            ScheduleError::Kind::InvalidInput);
  EXPECT_EQ(kind_of([] { stop_theorem3(1e-3, 1.0, 1.0, 0.0, 1.0, 1.0); }),
            ScheduleError::Kind::InvalidInput);
  EXPECT_EQ(kind_of([] { lr_theorem4(-1.0, 10, 1.0, 1.0, 1.0); }),
            ScheduleError::Kind::InvalidInput);
  EXPECT_EQ(kind_of([] { stop_theorem6(1e-3, 1.0, 10, 1.0, 1.0, 1.0, 0.0); }),
            ScheduleError::Kind::InvalidInput);
  EXPECT_EQ(kind_of([] { stop_theorem6(1e-300, 1.0, 1000, 1e300, 1.0, 1e-300, 1.0); }),
            ScheduleError::Kind::InvalidInput);
}

}  // namespace
}  // namespace plsgd
