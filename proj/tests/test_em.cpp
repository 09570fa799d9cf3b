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

#include <algorithm>
#include <cmath>
#include <vector>

#include "dpem/em.hpp"
#include "dpem/errors.hpp"
#include "dpem/models.hpp"
#include "dpem/privacy.hpp"
#include "oracles.hpp"

namespace dpem {
namespace {

ModelSpec spec(ModelKind kind, std::size_t d, double sigma = 1.0, double pm = 0.0) {
  ModelSpec m;
  m.kind = kind;
  m.dim = d;
  m.sigma = sigma;
  m.missing_prob = pm;
  return m;
}

struct Problem {
  ModelSpec model;
  Vec beta_star;
  ObservationSet data;
  Vec beta0;
};

// Synthetic problem with ||beta*|| = snr * sigma and a unit start on the
// half-space of beta*.
Problem make_problem(ModelKind kind, std::size_t n, std::size_t d, std::uint64_t seed,
                     double snr = 3.0, double sigma = 1.0) {
  Problem p;
  p.model = spec(kind, d, sigma, kind == ModelKind::kRmc ? 0.1 : 0.0);
  RngStream rng(seed);
  RngStream truth = rng.split(1), data = rng.split(2), init = rng.split(3);
  p.beta_star = sample_unit_vector(truth, d);
  for (auto& v : p.beta_star) v *= snr * sigma;
  p.data = sample_model(p.model, n, p.beta_star, data);
  p.beta0 = random_init(init, d);
  if (dot(p.beta0, p.beta_star) < 0) for (auto& v : p.beta0) v = -v;
  return p;
}

RunConfig private_config(std::size_t T, double eps, std::size_t n) {
  RunConfig c;
  c.iterations = T;
  c.budget = make_budget(eps, std::pow(double(n), -1.1));
  return c;
}

TEST(EstimationError, Examples) {
  const Vec a{1.0, -2.0, 0.5};
  EXPECT_EQ(estimation_error(a, a), 0.0);
  EXPECT_EQ(estimation_error(Vec{3.0, 4.0}, Vec{0.0, 0.0}), 5.0);
  EXPECT_THROW(estimation_error(Vec{1.0}, Vec{1.0, 2.0}), DomainError);
  RngStream rng(1);
  const Matrix q = oracle::random_orthogonal(rng, 3);
  const Vec b{0.2, 0.7, -1.1};
  EXPECT_NEAR(estimation_error(q.multiply(a), q.multiply(b)), estimation_error(a, b), 1e-12);
}

TEST(GradientEm, ZeroIterations) {
  const auto p = make_problem(ModelKind::kGmm, 100, 3, 1);
  const auto tr = gradient_em(p.data, p.model, p.beta0, 1.0, 0, p.beta_star);
  ASSERT_EQ(tr.betas.size(), 1u);
  EXPECT_EQ(tr.betas[0], p.beta0);
  EXPECT_EQ(tr.errors.size(), 1u);
}

TEST(GradientEm, NoiselessFixedPoint) {
  auto p = make_problem(ModelKind::kGmm, 500, 4, 2, 3.0, 1e-9);
  // With sigma -> 0 the fixed point is the sign-weighted sample mean, i.e. beta*.
  Vec start = p.beta_star;
  for (auto& v : start) v *= 0.8;
  const auto tr = gradient_em(p.data, p.model, start, 1.0, 50, p.beta_star);
  EXPECT_LT(tr.final_error(), 1e-6);
}

TEST(GradientEm, ConvergesOnGmm) {
  std::vector<double> errs;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto p = make_problem(ModelKind::kGmm, 2000, 10, seed);
    errs.push_back(gradient_em(p.data, p.model, p.beta0, 1.0, 50, p.beta_star).final_error());
  }
  EXPECT_LE(oracle::median(errs), 0.2 * 3.0);
}

TEST(GradientEm, Validation) {
  const auto p = make_problem(ModelKind::kGmm, 50, 3, 3);
  EXPECT_THROW(gradient_em(p.data, p.model, Vec{1.0}, 1.0, 1), DomainError);
  EXPECT_THROW(gradient_em(p.data, spec(ModelKind::kMrm, 3), p.beta0, 1.0, 1), DomainError);
  EXPECT_THROW(gradient_em(p.data, p.model, p.beta0, 0.0, 1), DomainError);
}

TEST(ClippedDpGradientEm, ReducesToGradientEmWhenClipIsInactive) {
  const auto p = make_problem(ModelKind::kGmm, 300, 3, 4);
  RunConfig c = private_config(5, 1.0, 300);
  c.clip = 1e6;
  c.add_noise = false;
  const auto a = clipped_dp_gradient_em(p.data, p.model, p.beta0, c, RngStream(9), p.beta_star);
  const auto b = gradient_em(p.data, p.model, p.beta0, 1.0, 5, p.beta_star);
  ASSERT_EQ(a.betas.size(), b.betas.size());
  for (std::size_t t = 0; t < a.betas.size(); ++t)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(a.betas[t][j], b.betas[t][j], 1e-12);
  EXPECT_EQ(a.meta("noise"), "disabled (non-private)");
}

TEST(ClippedDpGradientEm, ClipBoundsEveryGradient) {
  RngStream rng(5);
  for (int i = 0; i < 1000; ++i) {
    Vec g = sample_gaussian_vector(rng, 4, std::pow(10.0, 4.0 * rng.next_uniform() - 2.0));
    const double c = 0.1 + rng.next_uniform();
    clip_l2(g, c);
    EXPECT_LE(norm2(g), c * (1.0 + 1e-15));
  }
}

TEST(ClippedDpGradientEm, NoiseStdMatchesAccounting) {
  const auto p = make_problem(ModelKind::kGmm, 1000, 2, 6);
  RunConfig c = private_config(25, 1.0, 1000);
  c.clip = 1.0;
  const auto tr = clipped_dp_gradient_em(p.data, p.model, p.beta0, c, RngStream(1), p.beta_star);
  const double expected = 1.0 * std::sqrt(50.0) / (1000.0 * c.budget->eps_tilde);
  EXPECT_NEAR(std::stod(tr.meta("noise_sigma")), expected, 1e-15);
  EXPECT_EQ(tr.betas.size(), 26u);
}

TEST(PartitionBlocks, DisjointEqualBlocks) {
  const auto blocks = partition_blocks(103, 5, true, RngStream(3));
  ASSERT_EQ(blocks.size(), 5u);
  std::vector<std::size_t> all;
  for (const auto& b : blocks) {
    EXPECT_EQ(b.size(), 20u);
    all.insert(all.end(), b.begin(), b.end());
  }
  std::sort(all.begin(), all.end());
  EXPECT_EQ(std::unique(all.begin(), all.end()), all.end());
  const auto plain = partition_blocks(10, 2, false, RngStream(3));
  EXPECT_EQ(plain[1], (std::vector<std::size_t>{5, 6, 7, 8, 9}));
  EXPECT_THROW(partition_blocks(3, 4, true, RngStream(1)), DomainError);
}

TEST(DpGradientEm, ScheduleMatchesFormulas) {
  const auto p = make_problem(ModelKind::kGmm, 2000, 10, 7);
  RunConfig c = private_config(8, 0.5, 2000);
  c.tau = 40.0;
  const auto tr = dp_gradient_em(p.data, p.model, p.beta0, c, RngStream(2), p.beta_star);
  const double et = c.budget->eps_tilde, m = 250.0, ldz = std::log(10.0 / 0.05);
  const double s = std::sqrt(m * 40.0 * et) / (2.0 * ldz);
  EXPECT_EQ(tr.meta("m"), "250");
  EXPECT_NEAR(std::stod(tr.meta("s")), s, 1e-12 * s);
  EXPECT_NEAR(std::stod(tr.meta("beta")), std::sqrt(ldz), 1e-14);
  const double sigma = std::stod(tr.meta("noise_sigma"));
  EXPECT_NEAR(sigma * sigma, 16.0 * s * s * 10.0 / (9.0 * m * m * et * et), 1e-12 * sigma * sigma);
  // The per-coordinate budgets compose back to the target.
  EXPECT_NEAR(zcdp_to_approx_dp(10.0 * split_budget_partitioned(*c.budget, 10, 8), c.budget->delta), 0.5, 1e-12);
}

TEST(DpGradientEm, NoiselessSingleIterationIsGradientStep) {
  const auto p = make_problem(ModelKind::kGmm, 2000, 5, 8);
  RunConfig c = private_config(1, 1.0, 2000);
  c.tau = 1e12;
  c.add_noise = false;
  const auto a = dp_gradient_em(p.data, p.model, p.beta0, c, RngStream(4), p.beta_star);
  const auto b = gradient_em(p.data, p.model, p.beta0, 1.0, 1, p.beta_star);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(a.final_beta()[j], b.final_beta()[j], 1e-3);
}

TEST(DpGradientEm, NoiselessLargeScaleFollowsBlockwiseGradientEm) {
  const auto p = make_problem(ModelKind::kGmm, 2000, 5, 9);
  RunConfig c = private_config(7, 1.0, 2000);
  c.tau = 1e12;
  c.add_noise = false;
  const RngStream rng(5);
  const auto a = dp_gradient_em(p.data, p.model, p.beta0, c, rng, p.beta_star);
  // Reference: plain gradient steps, each on the block the method uses.
  const auto blocks = partition_blocks(2000, 7, true, rng.split(kShuffleStream));
  Vec beta = p.beta0;
  for (const auto& block : blocks) {
    const Vec g = mean_gradient(p.model, p.data.subset(block), beta);
    for (std::size_t j = 0; j < 5; ++j) beta[j] += g[j];
  }
  for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(a.final_beta()[j], beta[j], 1e-3);
}

TEST(DpGradientEm, SensitivityOfReleaseAcrossNeighbours) {
  for (auto kind : {ModelKind::kGmm, ModelKind::kMrm, ModelKind::kRmc}) {
    auto p = make_problem(kind, 400, 4, 10);
    const auto budget = make_budget(0.5, 1e-4);
    const std::size_t T = 4, m = 100;
    const auto params = partitioned_schedule(m, 4, 20.0, budget, 0.05);
    const auto blocks = partition_blocks(400, T, true, RngStream(1));
    RngStream rng(11);
    for (int trial = 0; trial < 100; ++trial) {
      const Vec beta = sample_gaussian_vector(rng, 4, 2.0);
      const auto& block = blocks[rng.next_below(T)];
      ObservationSet neighbour = p.data;
      const std::size_t row = block[rng.next_below(m)];
      for (std::size_t j = 0; j < 4; ++j) neighbour.features[row * 4 + j] = sample_gaussian(rng, 0.0, 50.0);
      if (kind != ModelKind::kGmm) neighbour.responses[row] = sample_gaussian(rng, 0.0, 50.0);
      const Vec a = robust_gradient_release(p.model, p.data, block, beta, params);
      const Vec b = robust_gradient_release(p.model, neighbour, block, beta, params);
      for (std::size_t j = 0; j < 4; ++j)
        EXPECT_LE(std::abs(a[j] - b[j]), robust_mean_sensitivity(params.s, m) * (1.0 + 1e-12));
    }
  }
}

TEST(DpGradientEm, Errors) {
  const auto p = make_problem(ModelKind::kGmm, 5, 2, 12);
  RunConfig c = private_config(6, 1.0, 5);
  EXPECT_THROW(dp_gradient_em(p.data, p.model, p.beta0, c, RngStream(1)), DomainError);
  c.iterations = 2;
  c.tau = 0.0;
  EXPECT_THROW(dp_gradient_em(p.data, p.model, p.beta0, c, RngStream(1)), DomainError);
  c.tau = 1.0;
  c.budget.reset();
  EXPECT_THROW(dp_gradient_em(p.data, p.model, p.beta0, c, RngStream(1)), DomainError);
}

TEST(DpGradientEm, MonotoneInEpsilon) {
  for (auto kind : {ModelKind::kGmm, ModelKind::kMrm, ModelKind::kRmc}) {
    double lo = 0.0, hi = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto p = make_problem(kind, 2000, 10, seed);
      for (double eps : {0.2, 1.0}) {
        RunConfig c = private_config(default_iterations(2000), eps, 2000);
        c.tau = tau_bound(kind, norm_inf(p.beta_star), norm2(p.beta_star), 1.0, 10);
        const double e = dp_gradient_em(p.data, p.model, p.beta0, c, RngStream(seed).split(7), p.beta_star).final_error();
        (eps < 0.5 ? lo : hi) += e / 20.0;
      }
    }
    EXPECT_LE(hi, lo) << to_string(kind);
  }
}

TEST(DpEmGmm, ScheduleAndNoiselessReduction) {
  const auto p = make_problem(ModelKind::kGmm, 2000, 5, 13);
  RunConfig c = private_config(6, 0.5, 2000);
  c.tau = 8.0;
  const auto tr = dp_em_gmm(p.data, p.model, p.beta0, c, RngStream(3), p.beta_star);
  const double et = c.budget->eps_tilde, ldz = std::log(5.0 / 0.05);
  const double s = std::sqrt(2000.0 * 8.0 * et) / (2.0 * ldz);
  EXPECT_NEAR(std::stod(tr.meta("s")), s, 1e-12 * s);
  const double sigma = std::stod(tr.meta("noise_sigma"));
  EXPECT_NEAR(sigma * sigma, 16.0 * s * s * 5.0 * 6.0 / (9.0 * 2000.0 * 2000.0 * et * et), 1e-12 * sigma * sigma);

  c.iterations = 1;
  c.tau = 1e12;
  c.add_noise = false;
  const auto a = dp_em_gmm(p.data, p.model, p.beta0, c, RngStream(3), p.beta_star);
  const auto b = gradient_em(p.data, p.model, p.beta0, 1.0, 1, p.beta_star);
  for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(a.final_beta()[j], b.final_beta()[j], 1e-3);
}

TEST(DpEmGmm, NoiselessLowNoiseDataLandsNearFixedPoint) {
  const auto p = make_problem(ModelKind::kGmm, 2000, 5, 14, 3.0, 1e-3);
  RunConfig c = private_config(1, 1.0, 2000);
  c.tau = 1e12;
  c.add_noise = false;
  Vec start = p.beta_star;
  for (auto& v : start) v *= 0.5;
  const auto tr = dp_em_gmm(p.data, p.model, start, c, RngStream(1), p.beta_star);
  EXPECT_LT(tr.final_error(), 1e-2);
}

TEST(DpEmGmm, SensitivityAndModelCheck) {
  const auto p = make_problem(ModelKind::kGmm, 300, 3, 15);
  const auto params = full_data_schedule(300, 3, 4, 12.0, make_budget(0.5, 1e-4), 0.05);
  RngStream rng(16);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec bp = sample_gaussian_vector(rng, 3, 2.0);
    ObservationSet neighbour = p.data;
    const std::size_t row = rng.next_below(300);
    for (std::size_t j = 0; j < 3; ++j) neighbour.features[row * 3 + j] = sample_gaussian(rng, 0.0, 100.0);
    const Vec a = robust_mstep_release(p.data, 1.0, bp, params);
    const Vec b = robust_mstep_release(neighbour, 1.0, bp, params);
    for (std::size_t j = 0; j < 3; ++j)
      EXPECT_LE(std::abs(a[j] - b[j]), robust_mean_sensitivity(params.s, 300) * (1.0 + 1e-12));
  }
  const auto mrm = make_problem(ModelKind::kMrm, 50, 3, 16);
  EXPECT_THROW(dp_em_gmm(mrm.data, mrm.model, mrm.beta0, private_config(2, 1.0, 50), RngStream(1)), DomainError);
}

TEST(Determinism, AllAlgorithmsAreBitwiseReproducible) {
  for (auto kind : {ModelKind::kGmm, ModelKind::kMrm, ModelKind::kRmc}) {
    const auto p = make_problem(kind, 500, 4, 17);
    RunConfig c = private_config(3, 0.5, 500);
    c.tau = 30.0;
    auto run = [&](int alg) {
      switch (alg) {
        case 0: return gradient_em(p.data, p.model, p.beta0, 1.0, 3, p.beta_star);
        case 1: return clipped_dp_gradient_em(p.data, p.model, p.beta0, c, RngStream(5), p.beta_star);
        case 2: return dp_gradient_em(p.data, p.model, p.beta0, c, RngStream(5), p.beta_star);
        default: return dp_em_gmm(p.data, p.model, p.beta0, c, RngStream(5), p.beta_star);
      }
    };
    for (int alg = 0; alg < (kind == ModelKind::kGmm ? 4 : 3); ++alg) {
      const auto a = run(alg), b = run(alg);
      EXPECT_EQ(a.betas, b.betas);
      EXPECT_EQ(a.errors, b.errors);
      EXPECT_EQ(a.metadata, b.metadata);
      EXPECT_EQ(a.betas.size(), 4u);
    }
  }
}

}  // namespace
}  // namespace dpem
