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

// Smoothed soft-truncation mean estimator for heavy-tailed data and its
// central and local differentially private releases.
//
// Each sample x is rescaled by s, multiplied by (1 + eta) with
// eta ~ N(0, 1/beta), passed through the bounded cubic phi and the noise is
// integrated out in closed form. Every per-sample value lies in
// [-(2 sqrt2 / 3) s, (2 sqrt2 / 3) s], so replacing one of n samples moves the
// mean by at most (4 sqrt2 / 3) s / n.

#ifndef DPEM_ROBUST_MEAN_HPP_
#define DPEM_ROBUST_MEAN_HPP_

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "dpem/errors.hpp"
#include "dpem/numeric.hpp"

namespace dpem {

// Saturation level of phi.
inline constexpr double kPhiBound = 2.0 * kSqrt2 / 3.0;
// Replace-one sensitivity of a sum of phi-smoothed values, in units of s.
inline constexpr double kSensitivityFactor = 4.0 * kSqrt2 / 3.0;

struct RobustMeanParams {
  double s = 1.0;      // scale
  double beta = 1.0;   // inverse variance of the multiplicative noise
  double tau = 1.0;    // second-moment bound
  double zeta = 0.05;  // failure probability
  double sigma = 0.0;  // std of the privacy noise

  void validate() const {
    if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("RobustMeanParams: s must be positive");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("RobustMeanParams: beta must be positive");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("RobustMeanParams: tau must be positive");
    if (!(zeta > 0.0 && zeta < 1.0)) throw DomainError("RobustMeanParams: zeta must lie in (0,1)");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw DomainError("RobustMeanParams: sigma must be >= 0");
  }
};

// Soft truncation: x - x^3/6 on [-sqrt2, sqrt2], +-2 sqrt2/3 outside.
inline double phi(double x) {
  if (x > kSqrt2) return kPhiBound;
  if (x < -kSqrt2) return -kPhiBound;
  return x - x * x * x / 6.0;
}

// Correction term C(a, b) such that, for xi ~ N(0, 1),
//   E phi(a + b xi) = a (1 - b^2/2) - a^3/6 + C(a, b).
inline double correction_C(double a, double b) {
  if (!(b > 0.0)) throw DomainError("correction_C: b must be positive");
  const double v_minus = (kSqrt2 - a) / b;
  const double v_plus = (kSqrt2 + a) / b;
  const double f_minus = std_normal_cdf(-v_minus);
  const double f_plus = std_normal_cdf(-v_plus);
  const double e_minus = std::exp(-0.5 * v_minus * v_minus);
  const double e_plus = std::exp(-0.5 * v_plus * v_plus);

  const double t1 = kPhiBound * (f_minus - f_plus);
  const double t2 = -(a - a * a * a / 6.0) * (f_minus + f_plus);
  const double t3 = b * kInvSqrt2Pi * (1.0 - a * a / 2.0) * (e_plus - e_minus);
  const double t4 = 0.5 * a * b * b *
                    (f_plus + f_minus + kInvSqrt2Pi * (v_plus * e_plus + v_minus * e_minus));
  const double t5 = b * b * b * kInvSqrt2Pi / 6.0 *
                    ((2.0 + v_minus * v_minus) * e_minus - (2.0 + v_plus * v_plus) * e_plus);
  return t1 + t2 + t3 + t4 + t5;
}

namespace internal {

// Beyond this |a| the polynomial terms of the closed form (~a^3) cancel to an
// O(1) result; the region decomposition below is used instead.
inline constexpr double kClosedFormLimit = 8.0;

// E phi(a + b xi) as saturated tails plus the cubic part over |u| <= sqrt2,
// integrated directly in u. Only used for |a| > kClosedFormLimit, where
// b = |a| / sqrt(beta) and the cubic window carries little mass.
inline double smoothed_phi_by_regions(double a, double b) {
  static const QuadratureRule rule = gauss_legendre_rule(64);
  const double f_upper = std_normal_cdf((a - kSqrt2) / b);   // P(u > sqrt2)
  const double f_lower = std_normal_cdf(-(a + kSqrt2) / b);  // P(u < -sqrt2)
  double middle = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double u = kSqrt2 * rule.nodes[i];
    middle += rule.weights[i] * (u - u * u * u / 6.0) * std_normal_pdf((u - a) / b);
  }
  middle *= kSqrt2 / b;
  return kPhiBound * (f_upper - f_lower) + middle;
}

}  // namespace internal

// Per-sample smoothed value s * E_eta phi((x + eta x) / s), eta ~ N(0, 1/beta).
inline double smoothed_phi(double x, const RobustMeanParams& p) {
  if (x == 0.0) return 0.0;
  const double a = x / p.s;
  const double b = std::abs(x) / (p.s * std::sqrt(p.beta));
  if (std::abs(a) > internal::kClosedFormLimit)
    return p.s * internal::smoothed_phi_by_regions(a, b);
  return x * (1.0 - x * x / (2.0 * p.s * p.s * p.beta)) - x * x * x / (6.0 * p.s * p.s) +
         p.s * correction_C(a, b);
}

// Non-private estimate (1/n) sum_i smoothed_phi(x_i).
inline double robust_mean(std::span<const double> xs, const RobustMeanParams& p) {
  if (xs.empty()) throw DomainError("robust_mean: empty input");
  double acc = 0.0;
  for (double x : xs) {
    if (!std::isfinite(x)) throw DomainError("robust_mean: non-finite input");
    acc += smoothed_phi(x, p);
  }
  return acc / static_cast<double>(xs.size());
}

// Replace-one sensitivity of robust_mean over n samples.
inline double robust_mean_sensitivity(double s, std::size_t n) {
  return kSensitivityFactor * s / static_cast<double>(n);
}

// sqrt(2 ln(1.25/delta)) / eps: Gaussian-mechanism noise per unit of l2
// sensitivity.
inline double gaussian_mechanism_multiplier(double eps, double delta) {
  return std::sqrt(2.0 * std::log(1.25 / delta)) / eps;
}

namespace internal {

inline void check_schedule_inputs(std::size_t n, double tau, double eps,
                                  double delta, double zeta, const char* who) {
  const std::string w(who);
  if (n < 2) throw DomainError(w + ": n must be >= 2");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError(w + ": tau must be positive");
  if (!(eps > 0.0) || !std::isfinite(eps)) throw DomainError(w + ": eps must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError(w + ": delta must lie in (0,1)");
  if (!(zeta > 0.0 && zeta < 1.0)) throw DomainError(w + ": zeta must lie in (0,1)");
}

}  // namespace internal

// Non-private schedule: beta = 2 log(1/zeta), s = sqrt(n tau / (2 log(1/zeta))).
inline RobustMeanParams select_params_nonprivate(std::size_t n, double tau, double zeta) {
  internal::check_schedule_inputs(n, tau, 1.0, 0.5, zeta, "select_params_nonprivate");
  const double lz = std::log(1.0 / zeta);
  RobustMeanParams p;
  p.beta = 2.0 * lz;
  p.s = std::sqrt(static_cast<double>(n) * tau / (2.0 * lz));
  p.tau = tau;
  p.zeta = zeta;
  p.sigma = 0.0;
  return p;
}

// Central-model schedule:
//   beta = sqrt(log 1/zeta),
//   s = sqrt(n eps tau) / (log(1/zeta) log^{1/4}(1/delta)),
//   sigma = sqrt(2 ln(1.25/delta)) * (4 sqrt2/3) s / n / eps.
inline RobustMeanParams select_params_central(std::size_t n, double tau, double eps,
                                              double delta, double zeta) {
  internal::check_schedule_inputs(n, tau, eps, delta, zeta, "select_params_central");
  const double lz = std::log(1.0 / zeta);
  const double ld = std::log(1.0 / delta);
  RobustMeanParams p;
  p.beta = std::sqrt(lz);
  p.s = std::sqrt(static_cast<double>(n) * eps * tau) / (lz * std::pow(ld, 0.25));
  p.tau = tau;
  p.zeta = zeta;
  p.sigma = gaussian_mechanism_multiplier(eps, delta) * robust_mean_sensitivity(p.s, n);
  return p;
}

// Local-model schedule: s grows as n^{1/4}; each user's release has
// sensitivity (4 sqrt2/3) s, so sigma does not depend on n.
inline RobustMeanParams select_params_local(std::size_t n, double tau, double eps,
                                            double delta, double zeta) {
  internal::check_schedule_inputs(n, tau, eps, delta, zeta, "select_params_local");
  const double lz = std::log(1.0 / zeta);
  const double ld = std::log(1.0 / delta);
  RobustMeanParams p;
  p.beta = std::sqrt(lz);
  p.s = std::pow(static_cast<double>(n), 0.25) * std::sqrt(eps * tau) /
        (lz * std::pow(ld, 0.25));
  p.tau = tau;
  p.zeta = zeta;
  p.sigma = gaussian_mechanism_multiplier(eps, delta) * kSensitivityFactor * p.s;
  return p;
}

// robust_mean plus N(0, p.sigma^2).
inline double central_dp_mean(std::span<const double> xs, const RobustMeanParams& p,
                              RngStream& rng) {
  p.validate();
  return robust_mean(xs, p) + sample_gaussian(rng, 0.0, p.sigma);
}

inline double central_dp_mean(std::span<const double> xs, double tau, double eps,
                              double delta, double zeta, RngStream& rng) {
  return central_dp_mean(xs, select_params_central(xs.size(), tau, eps, delta, zeta), rng);
}

// Every user perturbs their own smoothed value with N(0, p.sigma^2); the server
// averages the releases.
inline double local_dp_mean(std::span<const double> xs, const RobustMeanParams& p,
                            RngStream& rng) {
  p.validate();
  if (xs.empty()) throw DomainError("local_dp_mean: empty input");
  double acc = 0.0;
  for (double x : xs) {
    if (!std::isfinite(x)) throw DomainError("local_dp_mean: non-finite input");
    acc += smoothed_phi(x, p) + sample_gaussian(rng, 0.0, p.sigma);
  }
  return acc / static_cast<double>(xs.size());
}

inline double local_dp_mean(std::span<const double> xs, double tau, double eps,
                            double delta, double zeta, RngStream& rng) {
  return local_dp_mean(xs, select_params_local(xs.size(), tau, eps, delta, zeta), rng);
}

}  // namespace dpem

#endif  // DPEM_ROBUST_MEAN_HPP_
