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

// Estimation procedures built on the models:
//
//   gradient_em             beta <- beta + eta * mean_i grad q_i(beta; beta)
//   clipped_dp_gradient_em  per-sample l2 clipping + Gaussian noise, full data
//                           every iteration
//   dp_gradient_em          data split into T disjoint blocks; per coordinate,
//                           smoothed robust mean of the gradient + Gaussian noise
//   dp_em_gmm               GMM only; robust private mean of the M-step
//                           summands f_i, full data every iteration
//
// Every procedure returns an IterationTrace holding beta^0..beta^T. All
// randomness comes from the RngStream argument through fixed split indices,
// so a trace is a pure function of (data, config, seed).

#ifndef DPEM_EM_HPP_
#define DPEM_EM_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dpem/errors.hpp"
#include "dpem/models.hpp"
#include "dpem/numeric.hpp"
#include "dpem/privacy.hpp"
#include "dpem/robust_mean.hpp"

namespace dpem {

struct RunConfig {
  double eta = 1.0;
  std::size_t iterations = 1;  // T
  double clip = 1.0;           // clipped method only
  double tau = 1.0;            // robust methods only
  double zeta = 0.05;
  std::optional<PrivacyBudget> budget;  // required by the private methods
  bool shuffle = true;                  // partitioned method: shuffle before splitting
  // Test-only: skip noise injection. Output is NOT private; traces carry
  // "noise=disabled (non-private)" in their metadata.
  bool add_noise = true;
};

struct IterationTrace {
  std::vector<Vec> betas;  // beta^0 .. beta^T
  Vec errors;              // ||beta^t - beta*||_2, empty without ground truth
  std::vector<std::pair<std::string, std::string>> metadata;

  const Vec& final_beta() const { return betas.back(); }
  double final_error() const { return errors.back(); }

  std::string meta(const std::string& key) const {
    for (const auto& [k, v] : metadata)
      if (k == key) return v;
    return {};
  }
};

inline double estimation_error(std::span<const double> beta, std::span<const double> beta_star) {
  if (beta.size() != beta_star.size()) throw DomainError("estimation_error: dimension mismatch");
  double acc = 0.0;
  for (std::size_t j = 0; j < beta.size(); ++j) {
    const double diff = beta[j] - beta_star[j];
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

// Seeded standard-Gaussian direction scaled to unit norm.
inline Vec random_init(RngStream& rng, std::size_t d) { return sample_unit_vector(rng, d); }

// Default iteration count ceil(ln n).
inline std::size_t default_iterations(std::size_t n) {
  return static_cast<std::size_t>(std::ceil(std::log(static_cast<double>(std::max<std::size_t>(n, 2)))));
}

// Per-release schedule of the partitioned method over blocks of m samples:
//   s = sqrt(m tau eps_tilde) / (2 log(d/zeta)), beta = sqrt(log(d/zeta)),
//   sigma^2 = 16 s^2 d / (9 m^2 eps_tilde^2).
inline RobustMeanParams partitioned_schedule(std::size_t m, std::size_t d, double tau,
                                             const PrivacyBudget& budget, double zeta) {
  if (m < 1 || d < 1) throw DomainError("partitioned_schedule: m and d must be >= 1");
  const double ldz = std::log(static_cast<double>(d) / zeta);
  RobustMeanParams p;
  p.s = std::sqrt(static_cast<double>(m) * tau * budget.eps_tilde) / (2.0 * ldz);
  p.beta = std::sqrt(ldz);
  p.tau = tau;
  p.zeta = zeta;
  p.sigma = gaussian_sigma_for_zcdp(robust_mean_sensitivity(p.s, m),
                                    split_budget_partitioned(budget, d, 1));
  p.validate();
  return p;
}

// Schedule of the private EM method on all n samples for T iterations:
//   s = sqrt(n tau eps_tilde) / (2 log(d/zeta)), beta = sqrt(log(d/zeta)),
//   sigma^2 = 16 s^2 d T / (9 n^2 eps_tilde^2).
inline RobustMeanParams full_data_schedule(std::size_t n, std::size_t d, std::size_t iterations,
                                           double tau, const PrivacyBudget& budget, double zeta) {
  if (n < 1 || d < 1 || iterations < 1) throw DomainError("full_data_schedule: n, d, T must be >= 1");
  const double ldz = std::log(static_cast<double>(d) / zeta);
  RobustMeanParams p;
  p.s = std::sqrt(static_cast<double>(n) * tau * budget.eps_tilde) / (2.0 * ldz);
  p.beta = std::sqrt(ldz);
  p.tau = tau;
  p.zeta = zeta;
  p.sigma = gaussian_sigma_for_zcdp(
      robust_mean_sensitivity(p.s, n),
      split_budget_sequential(budget, iterations) / static_cast<double>(d));
  p.validate();
  return p;
}

// Mean gradient (1/n) sum_i grad q_i(beta; beta) over `rows` of `data`.
inline Vec mean_gradient(const ModelSpec& model, const ObservationSet& data,
                         std::span<const double> beta) {
  const std::size_t d = beta.size();
  Vec acc(d, 0.0), g(d);
  for (std::size_t i = 0; i < data.n; ++i) {
    grad_q(model, data.sample(i), beta, g);
    for (std::size_t j = 0; j < d; ++j) acc[j] += g[j];
  }
  for (auto& v : acc) v /= static_cast<double>(data.n);
  return acc;
}

// Pre-noise release of the partitioned method: per coordinate j, the smoothed
// robust mean of {grad_j q_i(beta; beta) : i in rows}.
inline Vec robust_gradient_release(const ModelSpec& model, const ObservationSet& data,
                                   std::span<const std::size_t> rows, std::span<const double> beta,
                                   const RobustMeanParams& p) {
  if (rows.empty()) throw DomainError("robust_gradient_release: empty block");
  const std::size_t d = beta.size();
  Vec acc(d, 0.0), g(d);
  for (std::size_t i : rows) {
    grad_q(model, data.sample(i), beta, g);
    for (std::size_t j = 0; j < d; ++j) acc[j] += smoothed_phi(g[j], p);
  }
  for (auto& v : acc) v /= static_cast<double>(rows.size());
  return acc;
}

// Pre-noise release of the private EM method: per coordinate, the smoothed
// robust mean of f_gmm(y_i, beta') over all samples.
inline Vec robust_mstep_release(const ObservationSet& data, double sigma,
                                std::span<const double> beta_prime, const RobustMeanParams& p) {
  if (data.n == 0) throw DomainError("robust_mstep_release: empty data");
  const std::size_t d = beta_prime.size();
  Vec acc(d, 0.0);
  for (std::size_t i = 0; i < data.n; ++i) {
    const Vec f = f_gmm(data.sample(i).v, beta_prime, sigma);
    for (std::size_t j = 0; j < d; ++j) acc[j] += smoothed_phi(f[j], p);
  }
  for (auto& v : acc) v /= static_cast<double>(data.n);
  return acc;
}

namespace internal {

inline void check_run_inputs(const ObservationSet& data, const ModelSpec& model,
                             std::span<const double> beta0, std::span<const double> truth) {
  model.validate();
  data.validate();
  if (data.kind != model.kind) throw DomainError("data does not match model kind");
  if (data.n == 0) throw DomainError("empty data");
  if (beta0.size() != data.d || model.dim != data.d) throw DomainError("dimension mismatch");
  if (!all_finite(beta0)) throw DomainError("non-finite initial beta");
  if (!truth.empty() && truth.size() != data.d) throw DomainError("ground truth dimension mismatch");
}

inline void record(IterationTrace& trace, Vec beta, std::span<const double> truth) {
  if (!truth.empty()) trace.errors.push_back(estimation_error(beta, truth));
  trace.betas.push_back(std::move(beta));
}

inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline const PrivacyBudget& require_budget(const RunConfig& cfg, const char* who) {
  if (!cfg.budget) throw DomainError(std::string(who) + ": a privacy budget is required");
  return *cfg.budget;
}

inline void echo_common(IterationTrace& trace, const char* algorithm, const RunConfig& cfg,
                        std::uint64_t seed) {
  trace.metadata.emplace_back("algorithm", algorithm);
  trace.metadata.emplace_back("eta", num(cfg.eta));
  trace.metadata.emplace_back("T", std::to_string(cfg.iterations));
  trace.metadata.emplace_back("seed", std::to_string(seed));
  if (cfg.budget) {
    trace.metadata.emplace_back("eps", num(cfg.budget->eps));
    trace.metadata.emplace_back("delta", num(cfg.budget->delta));
    trace.metadata.emplace_back("eps_tilde", num(cfg.budget->eps_tilde));
  }
  trace.metadata.emplace_back("noise", cfg.add_noise ? "enabled" : "disabled (non-private)");
}

}  // namespace internal

inline IterationTrace gradient_em(const ObservationSet& data, const ModelSpec& model,
                                  std::span<const double> beta0, double eta, std::size_t iterations,
                                  std::span<const double> truth = {}) {
  internal::check_run_inputs(data, model, beta0, truth);
  if (!(eta > 0.0)) throw DomainError("gradient_em: eta must be positive");
  IterationTrace trace;
  RunConfig cfg;
  cfg.eta = eta;
  cfg.iterations = iterations;
  internal::echo_common(trace, "em", cfg, 0);
  Vec beta(beta0.begin(), beta0.end());
  internal::record(trace, beta, truth);
  for (std::size_t t = 1; t <= iterations; ++t) {
    const Vec g = mean_gradient(model, data, beta);
    for (std::size_t j = 0; j < beta.size(); ++j) beta[j] += eta * g[j];
    internal::record(trace, beta, truth);
  }
  return trace;
}

// Scales a gradient onto the l2 ball of radius `clip`.
inline void clip_l2(std::span<double> g, double clip) {
  const double n = norm2(g);
  if (n > clip) {
    const double scale = clip / n;
    for (auto& v : g) v *= scale;
  }
}

inline IterationTrace clipped_dp_gradient_em(const ObservationSet& data, const ModelSpec& model,
                                             std::span<const double> beta0, const RunConfig& cfg,
                                             RngStream rng, std::span<const double> truth = {}) {
  internal::check_run_inputs(data, model, beta0, truth);
  if (!(cfg.clip > 0.0)) throw DomainError("clipped_dp_gradient_em: clip must be positive");
  if (!(cfg.eta > 0.0)) throw DomainError("clipped_dp_gradient_em: eta must be positive");
  if (cfg.iterations < 1) throw DomainError("clipped_dp_gradient_em: T must be >= 1");
  const PrivacyBudget& budget = internal::require_budget(cfg, "clipped_dp_gradient_em");
  const std::size_t d = data.d;
  const double sigma = cfg.add_noise ? clipped_noise_sigma(budget, cfg.iterations, data.n, cfg.clip) : 0.0;

  IterationTrace trace;
  internal::echo_common(trace, "clipped", cfg, rng.seed());
  trace.metadata.emplace_back("clip", internal::num(cfg.clip));
  trace.metadata.emplace_back("noise_sigma", internal::num(sigma));
  Vec beta(beta0.begin(), beta0.end());
  internal::record(trace, beta, truth);
  Vec acc(d), g(d);
  for (std::size_t t = 1; t <= cfg.iterations; ++t) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t i = 0; i < data.n; ++i) {
      grad_q(model, data.sample(i), beta, g);
      clip_l2(g, cfg.clip);
      for (std::size_t j = 0; j < d; ++j) acc[j] += g[j];
    }
    RngStream noise = rng.split(t);
    for (std::size_t j = 0; j < d; ++j) {
      const double z = sample_gaussian(noise, 0.0, sigma);
      beta[j] += cfg.eta * (acc[j] / static_cast<double>(data.n) + z);
    }
    internal::record(trace, beta, truth);
  }
  return trace;
}

// Index blocks D_1..D_T of size m = floor(n/T), after an optional seeded
// shuffle; the trailing n - mT samples are dropped.
inline std::vector<std::vector<std::size_t>> partition_blocks(std::size_t n, std::size_t iterations,
                                                              bool shuffle_rows, RngStream rng) {
  if (iterations < 1) throw DomainError("partition_blocks: T must be >= 1");
  if (n < iterations) throw DomainError("partition_blocks: need n >= T");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (shuffle_rows) shuffle(order, rng);
  const std::size_t m = n / iterations;
  std::vector<std::vector<std::size_t>> blocks(iterations);
  for (std::size_t t = 0; t < iterations; ++t)
    blocks[t].assign(order.begin() + t * m, order.begin() + (t + 1) * m);
  return blocks;
}

inline constexpr std::uint64_t kShuffleStream = 0xb10c5ULL;

inline IterationTrace dp_gradient_em(const ObservationSet& data, const ModelSpec& model,
                                     std::span<const double> beta0, const RunConfig& cfg,
                                     RngStream rng, std::span<const double> truth = {}) {
  internal::check_run_inputs(data, model, beta0, truth);
  if (!(cfg.tau > 0.0)) throw DomainError("dp_gradient_em: tau must be positive");
  if (!(cfg.eta > 0.0)) throw DomainError("dp_gradient_em: eta must be positive");
  if (cfg.iterations < 1) throw DomainError("dp_gradient_em: T must be >= 1");
  if (data.n < cfg.iterations) throw DomainError("dp_gradient_em: need n >= T");
  const PrivacyBudget& budget = internal::require_budget(cfg, "dp_gradient_em");
  const std::size_t d = data.d;
  const std::size_t m = data.n / cfg.iterations;
  RobustMeanParams p = partitioned_schedule(m, d, cfg.tau, budget, cfg.zeta);
  if (!cfg.add_noise) p.sigma = 0.0;
  const auto blocks = partition_blocks(data.n, cfg.iterations, cfg.shuffle, rng.split(kShuffleStream));

  IterationTrace trace;
  internal::echo_common(trace, "dpgem", cfg, rng.seed());
  trace.metadata.emplace_back("tau", internal::num(cfg.tau));
  trace.metadata.emplace_back("zeta", internal::num(cfg.zeta));
  trace.metadata.emplace_back("m", std::to_string(m));
  trace.metadata.emplace_back("s", internal::num(p.s));
  trace.metadata.emplace_back("beta", internal::num(p.beta));
  trace.metadata.emplace_back("noise_sigma", internal::num(p.sigma));
  Vec beta(beta0.begin(), beta0.end());
  internal::record(trace, beta, truth);
  for (std::size_t t = 1; t <= cfg.iterations; ++t) {
    const Vec g = robust_gradient_release(model, data, blocks[t - 1], beta, p);
    const RngStream iter_rng = rng.split(t);
    for (std::size_t j = 0; j < d; ++j) {
      RngStream coord = iter_rng.split(j);
      beta[j] += cfg.eta * (g[j] + sample_gaussian(coord, 0.0, p.sigma));
    }
    internal::record(trace, beta, truth);
  }
  return trace;
}

inline IterationTrace dp_em_gmm(const ObservationSet& data, const ModelSpec& model,
                                std::span<const double> beta0, const RunConfig& cfg,
                                RngStream rng, std::span<const double> truth = {}) {
  if (model.kind != ModelKind::kGmm || data.kind != ModelKind::kGmm)
    throw DomainError("dp_em_gmm: only defined for the Gaussian mixture model");
  internal::check_run_inputs(data, model, beta0, truth);
  if (!(cfg.tau > 0.0)) throw DomainError("dp_em_gmm: tau must be positive");
  if (cfg.iterations < 1) throw DomainError("dp_em_gmm: T must be >= 1");
  const PrivacyBudget& budget = internal::require_budget(cfg, "dp_em_gmm");
  const std::size_t d = data.d;
  RobustMeanParams p = full_data_schedule(data.n, d, cfg.iterations, cfg.tau, budget, cfg.zeta);
  if (!cfg.add_noise) p.sigma = 0.0;

  IterationTrace trace;
  internal::echo_common(trace, "dpem", cfg, rng.seed());
  trace.metadata.emplace_back("tau", internal::num(cfg.tau));
  trace.metadata.emplace_back("zeta", internal::num(cfg.zeta));
  trace.metadata.emplace_back("s", internal::num(p.s));
  trace.metadata.emplace_back("beta", internal::num(p.beta));
  trace.metadata.emplace_back("noise_sigma", internal::num(p.sigma));
  Vec beta(beta0.begin(), beta0.end());
  internal::record(trace, beta, truth);
  for (std::size_t t = 1; t <= cfg.iterations; ++t) {
    Vec next = robust_mstep_release(data, model.sigma, beta, p);
    const RngStream iter_rng = rng.split(t);
    for (std::size_t j = 0; j < d; ++j) {
      RngStream coord = iter_rng.split(j);
      next[j] += sample_gaussian(coord, 0.0, p.sigma);
    }
    beta = std::move(next);
    internal::record(trace, beta, truth);
  }
  return trace;
}

}  // namespace dpem

#endif  // DPEM_EM_HPP_
