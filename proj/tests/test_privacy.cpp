//
// Copyright 2026 The dpem Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include <gtest/gtest.h>

#include <cmath>

#include "dpem/errors.hpp"
#include "dpem/privacy.hpp"
#include "dpem/robust_mean.hpp"

namespace dpem {
namespace {

// 30-digit references: log(1e5) and sqrt(log 1e5 + 1) - sqrt(log 1e5).
constexpr double kLog1e5 = 11.5129254649702284200899572734;
constexpr double kEpsTilde = 0.14429115821676483138716166051;

TEST(MakeBudget, Example) {
  const auto b = make_budget(1.0, 1e-5);
  EXPECT_NEAR(b.log_inv_delta(), kLog1e5, 1e-13);
  EXPECT_NEAR(b.eps_tilde, kEpsTilde, 1e-15);
  EXPECT_NEAR(b.eps_tilde, std::sqrt(kLog1e5 + 1.0) - std::sqrt(kLog1e5), 1e-14);
  EXPECT_NEAR(zcdp_to_approx_dp(b.rho(), b.delta), 1.0, 1e-12);
}

TEST(MakeBudget, RoundTripOnGrid) {
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) {
      const double eps = std::pow(10.0, -2.0 + 0.4 * i);
      const double delta = std::pow(10.0, -1.0 - 1.1 * j);
      const auto b = make_budget(eps, delta);
      EXPECT_NEAR(b.rho() + 2.0 * std::sqrt(b.rho() * std::log(1.0 / delta)), eps, 1e-12 * std::max(1.0, eps));
    }
}

TEST(MakeBudget, Monotone) {
  double prev = 0.0;
  for (double eps = 0.05; eps < 10.0; eps *= 1.3) {
    const double e = make_budget(eps, 1e-6).eps_tilde;
    EXPECT_GT(e, prev);
    prev = e;
  }
  prev = INFINITY;
  for (double delta = 0.5; delta > 1e-30; delta /= 10.0) {
    const double e = make_budget(1.0, delta).eps_tilde;
    EXPECT_LT(e, prev);
    prev = e;
  }
}

TEST(MakeBudget, RejectsOutOfRange) {
  EXPECT_THROW(make_budget(0.0, 1e-5), DomainError);
  EXPECT_THROW(make_budget(-1.0, 1e-5), DomainError);
  EXPECT_THROW(make_budget(1.0, 0.0), DomainError);
  EXPECT_THROW(make_budget(1.0, 1.0), DomainError);
}

TEST(GaussianSigmaForZcdp, Examples) {
  EXPECT_DOUBLE_EQ(gaussian_sigma_for_zcdp(1.0, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(gaussian_sigma_for_zcdp(2.0, 0.5), 2.0);
  const double sens = 0.7, rho = 0.3;
  const double sigma = gaussian_sigma_for_zcdp(sens, rho);
  EXPECT_NEAR(sens * sens / (2.0 * sigma * sigma), rho, 1e-15);
  EXPECT_NEAR(gaussian_sigma_for_zcdp(3.0 * sens, rho), 3.0 * sigma, 1e-15);
  EXPECT_NEAR(gaussian_sigma_for_zcdp(sens, 4.0 * rho), sigma / 2.0, 1e-15);
  EXPECT_THROW(gaussian_sigma_for_zcdp(0.0, 1.0), DomainError);
  EXPECT_THROW(gaussian_sigma_for_zcdp(1.0, 0.0), DomainError);
}

TEST(GaussianSigmaForZcdp, PartitionedCoordinateNoise) {
  const auto b = make_budget(0.5, 1e-4);
  const double s = 3.7;
  const std::size_t m = 250, d = 10;
  const double sigma = gaussian_sigma_for_zcdp(robust_mean_sensitivity(s, m), split_budget_partitioned(b, d, 8));
  EXPECT_NEAR(sigma * sigma, 16.0 * s * s * d / (9.0 * m * m * b.rho()), 1e-14);
}

TEST(SplitBudgetPartitioned, Examples) {
  const auto b = make_budget(1.0, 1e-5);
  EXPECT_EQ(split_budget_partitioned(b, 1, 17), b.rho());
  const double rho = split_budget_partitioned(b, 10, 3);
  EXPECT_NEAR(rho, b.rho() / 10.0, 1e-18);
  double total = 0.0;
  for (int j = 0; j < 10; ++j) total += rho;
  EXPECT_NEAR(total, b.rho(), 1e-16);
  EXPECT_NEAR(zcdp_to_approx_dp(total, b.delta), 1.0, 1e-12);
  EXPECT_THROW(split_budget_partitioned(b, 0, 1), DomainError);
}

TEST(SplitBudgetSequential, Examples) {
  const auto b = make_budget(1.0, 1e-5);
  EXPECT_EQ(split_budget_sequential(b, 1), b.rho());
  EXPECT_NEAR(clipped_noise_sigma(b, 4, 1000, 1.0) / clipped_noise_sigma(b, 1, 1000, 1.0), 2.0, 1e-14);
  // C sqrt(2T) / (n eps_tilde) = sqrt(50) / (1000 * 0.144291...)
  EXPECT_NEAR(clipped_noise_sigma(b, 25, 1000, 1.0), 0.0490055516862841664608, 1e-15);
  EXPECT_THROW(split_budget_sequential(b, 0), DomainError);
}

}  // namespace
}  // namespace dpem
