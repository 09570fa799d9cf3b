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

// zCDP budget arithmetic. An (eps, delta) target is mapped to the zCDP budget
// rho = eps_tilde^2 with eps_tilde = sqrt(log(1/delta) + eps) - sqrt(log(1/delta)),
// which converts back through rho + 2 sqrt(rho log(1/delta)) = eps. Gaussian
// noise of std sigma on a statistic of l2 sensitivity Delta is
// Delta^2 / (2 sigma^2)-zCDP, and zCDP budgets add under composition.

#ifndef DPEM_PRIVACY_HPP_
#define DPEM_PRIVACY_HPP_

#include <cmath>
#include <cstddef>

#include "dpem/errors.hpp"

namespace dpem {

struct PrivacyBudget {
  double eps = 1.0;
  double delta = 1e-5;
  double eps_tilde = 0.0;  // derived; see make_budget

  double rho() const { return eps_tilde * eps_tilde; }
  double log_inv_delta() const { return std::log(1.0 / delta); }
};

inline PrivacyBudget make_budget(double eps, double delta) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw DomainError("make_budget: eps must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("make_budget: delta must lie in (0,1)");
  const double l = std::log(1.0 / delta);
  // sqrt(l + eps) - sqrt(l) rewritten without the subtraction.
  const double eps_tilde = eps / (std::sqrt(l + eps) + std::sqrt(l));
  return PrivacyBudget{eps, delta, eps_tilde};
}

// rho-zCDP implies (rho + 2 sqrt(rho log(1/delta)), delta)-DP.
inline double zcdp_to_approx_dp(double rho, double delta) {
  if (!(rho >= 0.0)) throw DomainError("zcdp_to_approx_dp: rho must be >= 0");
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("zcdp_to_approx_dp: delta must lie in (0,1)");
  return rho + 2.0 * std::sqrt(rho * std::log(1.0 / delta));
}

// sigma = sensitivity / sqrt(2 rho).
inline double gaussian_sigma_for_zcdp(double sensitivity, double rho) {
  if (!(sensitivity > 0.0)) throw DomainError("gaussian_sigma_for_zcdp: sensitivity must be positive");
  if (!(rho > 0.0)) throw DomainError("gaussian_sigma_for_zcdp: rho must be positive");
  return sensitivity / std::sqrt(2.0 * rho);
}

// Per-coordinate budget of the subset-partitioned gradient method: each
// iteration touches a disjoint block of the data, so iterations compose in
// parallel and only the d coordinate releases share eps_tilde^2.
inline double split_budget_partitioned(const PrivacyBudget& budget, std::size_t d,
                                       std::size_t iterations) {
  if (d < 1 || iterations < 1) throw DomainError("split_budget_partitioned: d and T must be >= 1");
  return budget.rho() / static_cast<double>(d);
}

// Per-iteration budget when every iteration reads the full dataset
// (sequential composition over T vector releases).
inline double split_budget_sequential(const PrivacyBudget& budget, std::size_t iterations) {
  if (iterations < 1) throw DomainError("split_budget_sequential: T must be >= 1");
  return budget.rho() / static_cast<double>(iterations);
}

// Noise std of the clipped method: averaged clipped gradients have l2
// sensitivity 2C/n, giving C sqrt(2T) / (n eps_tilde).
inline double clipped_noise_sigma(const PrivacyBudget& budget, std::size_t iterations,
                                  std::size_t n, double clip) {
  if (n < 1) throw DomainError("clipped_noise_sigma: n must be >= 1");
  if (!(clip > 0.0)) throw DomainError("clipped_noise_sigma: clip must be positive");
  return gaussian_sigma_for_zcdp(2.0 * clip / static_cast<double>(n),
                                 split_budget_sequential(budget, iterations));
}

}  // namespace dpem

#endif  // DPEM_PRIVACY_HPP_
