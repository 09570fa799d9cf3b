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
#include <vector>

#include "dpem/errors.hpp"
#include "dpem/numeric.hpp"
#include "dpem/robust_mean.hpp"
#include "oracles.hpp"

namespace dpem {
namespace {

const double kC = 2.0 * std::sqrt(2.0) / 3.0;

RobustMeanParams params(double s, double beta) {
  RobustMeanParams p;
  p.s = s;
  p.beta = beta;
  return p;
}

TEST(Phi, Examples) {
  EXPECT_EQ(phi(0.0), 0.0);
  EXPECT_NEAR(phi(std::sqrt(2.0)), kC, 1e-15);
  EXPECT_NEAR(phi(-1.0), -5.0 / 6.0, 1e-15);
  EXPECT_EQ(phi(10.0), kC);
  EXPECT_EQ(phi(-10.0), -kC);
}

TEST(Phi, BoundedAndContinuousAtKnots) {
  const double r2 = std::sqrt(2.0);
  EXPECT_NEAR(phi(std::nextafter(r2, 0.0)), phi(std::nextafter(r2, 10.0)), 1e-15);
  for (double x = -5.0; x <= 5.0; x += 1e-3) EXPECT_LE(std::abs(phi(x)), kC + 1e-16);
}

TEST(CorrectionC, ZeroAtOrigin) {
  for (double b : {1e-3, 0.3, 1.0, 7.0}) EXPECT_NEAR(correction_C(0.0, b), 0.0, 1e-15);
}

TEST(CorrectionC, SmallNoiseLimit) {
  EXPECT_NEAR(correction_C(2.0, 1e-8), kC - 2.0 + 8.0 / 6.0, 1e-7);
}

TEST(CorrectionC, MatchesHighPrecisionQuadrature) {
  // C(a, b) = E phi(a + b xi) - a(1 - b^2/2) + a^3/6, reference values by
  // 40-digit adaptive quadrature split at the kinks.
  struct Case { double a, b, c; };
  const Case cases[] = {{0.5, 0.3, 0.000011399063158008311807},
                        {1.0, 0.7, 0.074514590274680328643},
                        {-1.2, 0.4, -0.025042144961239440071},
                        {2.0, 1.5, 2.3189109230757841544},
                        {0.1, 2.0, 0.1359814232566158315},
                        {3.0, 0.5, 2.8177920057964238352}};
  for (const auto& c : cases) EXPECT_NEAR(correction_C(c.a, c.b), c.c, 1e-13) << c.a << "," << c.b;
}

TEST(CorrectionC, MatchesLibraryQuadrature) {
  const double r2 = std::sqrt(2.0);
  auto f = [](double u) { return phi(u); };
  const double a = 0.5, b = 0.5;
  const Vec kinks{-r2, r2};
  const double e = expectation_under_gaussian(f, a, b, 200, kinks);
  EXPECT_NEAR(correction_C(a, b), e - (a * (1.0 - b * b / 2.0) - a * a * a / 6.0), 1e-10);
}

TEST(CorrectionC, RejectsNonPositiveB) {
  EXPECT_THROW(correction_C(1.0, 0.0), DomainError);
  EXPECT_THROW(correction_C(1.0, -1.0), DomainError);
}

TEST(SmoothedPhi, Examples) {
  EXPECT_EQ(smoothed_phi(0.0, params(2.0, 4.0)), 0.0);
  // s * E phi(1.3 (1 + eta) / 2), eta ~ N(0, 1/4); 40-digit reference.
  EXPECT_NEAR(smoothed_phi(1.3, params(2.0, 4.0)), 2.0 * 0.57005663168305258307, 1e-12);
  EXPECT_LE(std::abs(smoothed_phi(1e6, params(1.0, 1.0))), kC);
}

TEST(SmoothedPhi, SmallInputIsNearlyIdentity) {
  const double x = 1e-3;
  EXPECT_NEAR(smoothed_phi(x, params(1e3, 1.0)) / x, 1.0, 10.0 * x * x / 1e6);
}

TEST(SmoothedPhi, Odd) {
  RngStream rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double x = std::pow(10.0, 8.0 * rng.next_uniform() - 4.0);
    const auto p = params(std::pow(10.0, 4.0 * rng.next_uniform() - 2.0), 0.1 + 10.0 * rng.next_uniform());
    EXPECT_NEAR(smoothed_phi(-x, p), -smoothed_phi(x, p), 1e-12 * std::max(1.0, p.s));
  }
}

TEST(SmoothedPhi, BoundedOnLogGrid) {
  for (double s : {0.01, 1.0, 1000.0})
    for (double beta : {0.1, 1.0, 100.0})
      for (double x = 1e-6; x <= 1e12; x *= 1.2) {
        const auto p = params(s, beta);
        ASSERT_LE(std::abs(smoothed_phi(x, p)), kC * s * (1.0 + 1e-12)) << x;
        ASSERT_LE(std::abs(smoothed_phi(-x, p)), kC * s * (1.0 + 1e-12)) << x;
      }
}

TEST(SmoothedPhi, ClosedFormMatchesOracle) {
  RngStream rng(2718);
  for (int i = 0; i < 1000; ++i) {
    const double s = std::pow(10.0, -2.0 + 5.0 * rng.next_uniform());
    const double beta = std::pow(10.0, -1.0 + 3.0 * rng.next_uniform());
    const double x = sample_gaussian(rng, 0.0, 1.0) * s * std::pow(10.0, 2.0 * rng.next_uniform() - 1.0);
    const auto p = params(s, beta);
    const double oracle_value = s * oracle::smoothed_phi_unit(x / s, std::abs(x) / (s * std::sqrt(beta)));
    EXPECT_NEAR(smoothed_phi(x, p), oracle_value, 1e-8) << x << " s=" << s << " beta=" << beta;
  }
}

TEST(SmoothedPhi, LargeScaleLimit) {
  for (double s : {1e2, 1e3, 1e4}) {
    const double x = 1.5;
    EXPECT_NEAR(smoothed_phi(x, params(s, 2.0)) / x, 1.0, 2.0 * x * x / (s * s));
  }
}

TEST(RobustMean, AllZeroAndEmpty) {
  const std::vector<double> zeros(17, 0.0);
  EXPECT_EQ(robust_mean(zeros, params(1.0, 1.0)), 0.0);
  EXPECT_THROW(robust_mean(std::vector<double>{}, params(1.0, 1.0)), DomainError);
  EXPECT_THROW(robust_mean(std::vector<double>{NAN}, params(1.0, 1.0)), DomainError);
}

TEST(RobustMean, ConcentratesOnHeavyTailedData) {
  const std::size_t n = 10000;
  const double tau = 4.0, zeta = 0.05;
  const auto p = select_params_nonprivate(n, tau, zeta);
  const double bound = 5.0 * std::sqrt(tau * std::log(1.0 / zeta) / n);
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RngStream rng(seed);
    std::vector<double> xs(n);
    for (auto& x : xs) x = 1.0 + oracle::student_t(rng, 3);
    ok += std::abs(robust_mean(xs, p) - 1.0) <= bound;
  }
  EXPECT_GE(ok, 95);
}

TEST(RobustMean, ReplaceOneSensitivity) {
  RngStream rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.next_below(50);
    const auto p = params(std::pow(10.0, 3.0 * rng.next_uniform() - 1.0), 0.2 + 5.0 * rng.next_uniform());
    std::vector<double> xs(n);
    for (auto& x : xs) x = oracle::student_t(rng, 2) * 10.0;
    std::vector<double> ys = xs;
    ys[rng.next_below(n)] = sample_gaussian(rng, 0.0, 1e4);
    EXPECT_LE(std::abs(robust_mean(xs, p) - robust_mean(ys, p)),
              robust_mean_sensitivity(p.s, n) * (1.0 + 1e-12));
  }
}

TEST(SelectParamsNonprivate, Formula) {
  const auto p = select_params_nonprivate(10000, 4.0, 0.05);
  EXPECT_NEAR(p.beta, 2.0 * std::log(20.0), 1e-14);
  EXPECT_NEAR(p.s, std::sqrt(10000.0 * 4.0 / (2.0 * std::log(20.0))), 1e-12);
  EXPECT_EQ(p.sigma, 0.0);
}

TEST(SelectParamsCentral, Examples) {
  const auto p = select_params_central(10000, 1.0, 1.0, 1e-5, 0.05);
  EXPECT_NEAR(p.beta, 1.73081838260228533818, 1e-14);
  EXPECT_NEAR(p.s, 18.1217685183492419150, 1e-12);
  const auto q = select_params_central(20000, 1.0, 1.0, 1e-5, 0.05);
  EXPECT_NEAR(q.s / p.s, std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(p.sigma * 10000.0 / p.s, (4.0 * std::sqrt(2.0) / 3.0) * 4.84480526260538942126, 1e-12);
}

TEST(SelectParamsCentral, RejectsBadInputs) {
  EXPECT_THROW(select_params_central(1, 1.0, 1.0, 1e-5, 0.05), DomainError);
  EXPECT_THROW(select_params_central(100, 1.0, 0.0, 1e-5, 0.05), DomainError);
  EXPECT_THROW(select_params_central(100, 1.0, 1.0, 1.0, 0.05), DomainError);
  EXPECT_THROW(select_params_central(100, 1.0, 1.0, 1e-5, 0.0), DomainError);
  EXPECT_THROW(select_params_central(100, -1.0, 1.0, 1e-5, 0.05), DomainError);
}

TEST(CentralDpMean, NoiseStdOnZeroData) {
  const std::vector<double> zeros(1000, 0.0);
  const auto p = select_params_central(zeros.size(), 1.0, 1.0, 1e-5, 0.05);
  double s2 = 0.0;
  const int reps = 10000;
  for (int i = 0; i < reps; ++i) {
    RngStream rng = RngStream::split(17, i);
    const double v = central_dp_mean(zeros, p, rng);
    s2 += v * v;
  }
  EXPECT_NEAR(std::sqrt(s2 / reps) / p.sigma, 1.0, 0.05);
}

TEST(CentralDpMean, HeavyTailedAccuracy) {
  const std::size_t n = 10000;
  const double tau = 4.0, eps = 1.0, delta = 1e-5, zeta = 0.05;
  const double rate = std::sqrt(tau * std::sqrt(std::log(1.0 / delta)) * std::log(1.0 / zeta) / (n * eps));
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RngStream rng(seed);
    std::vector<double> xs(n);
    for (auto& x : xs) x = 1.0 + oracle::student_t(rng, 3);
    RngStream noise = rng.split(1);
    ok += std::abs(central_dp_mean(xs, tau, eps, delta, zeta, noise) - 1.0) <= 10.0 * rate;
  }
  EXPECT_GE(ok, 95);
}

TEST(SelectParamsLocal, Examples) {
  const auto p = select_params_local(10000, 1.0, 1.0, 1e-5, 0.05);
  EXPECT_NEAR(p.s, 1.81217685183492419150, 1e-13);
  const auto q = select_params_local(160000, 1.0, 1.0, 1e-5, 0.05);
  EXPECT_NEAR(q.s / p.s, 2.0, 1e-14);
  EXPECT_NEAR(p.sigma / p.s, q.sigma / q.s, 1e-14);
  EXPECT_NEAR(p.sigma, 4.84480526260538942126 * (4.0 * std::sqrt(2.0) / 3.0) * p.s, 1e-12);
}

TEST(LocalDpMean, ZeroDataStd) {
  const std::size_t n = 100;
  const std::vector<double> zeros(n, 0.0);
  const auto p = select_params_local(n, 1.0, 1.0, 1e-5, 0.05);
  double s2 = 0.0;
  const int reps = 10000;
  for (int i = 0; i < reps; ++i) {
    RngStream rng = RngStream::split(23, i);
    const double v = local_dp_mean(zeros, p, rng);
    s2 += v * v;
  }
  EXPECT_NEAR(std::sqrt(s2 / reps) / (p.sigma / std::sqrt(double(n))), 1.0, 0.05);
}

TEST(LocalDpMean, ErrorShrinksWithN) {
  auto median_error = [](std::size_t n) {
    std::vector<double> errs;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      RngStream rng = RngStream::split(n, seed);
      std::vector<double> xs(n);
      for (auto& x : xs) x = 1.0 + oracle::student_t(rng, 3);
      RngStream noise = rng.split(9);
      errs.push_back(std::abs(local_dp_mean(xs, 4.0, 1.0, 1e-5, 0.05, noise) - 1.0));
    }
    return oracle::median(errs);
  };
  EXPECT_LE(median_error(160000), 0.6 * median_error(10000));
}

TEST(LocalDpMean, NoiselessSingleUser) {
  auto p = params(2.0, 3.0);
  p.sigma = 0.0;
  RngStream rng(1);
  const std::vector<double> one{0.8};
  EXPECT_EQ(local_dp_mean(one, p, rng), smoothed_phi(0.8, p));
}

TEST(LocalDpMean, PerUserSensitivity) {
  RngStream rng(4);
  const auto p = select_params_local(1000, 1.0, 1.0, 1e-5, 0.05);
  for (int i = 0; i < 1000; ++i) {
    const double x = sample_gaussian(rng, 0.0, 1e3), y = sample_gaussian(rng, 0.0, 1.0);
    EXPECT_LE(std::abs(smoothed_phi(x, p) - smoothed_phi(y, p)), kSensitivityFactor * p.s);
  }
}

}  // namespace
}  // namespace dpem
