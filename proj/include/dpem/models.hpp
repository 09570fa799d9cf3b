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

// The three latent-variable models:
//
//   GMM  y = z beta* + v,          z Rademacher, v ~ N(0, sigma^2 I_d)
//   MRM  y = z <beta*, x> + v,     x ~ N(0, I_d), v ~ N(0, sigma^2)
//   RMC  y = <x, beta*> + v,       each x_j hidden independently w.p. p_m
//
// with per-sample Q-function values q(beta; beta'), their gradients at
// beta' = beta, second-moment bounds of the gradient coordinates, and the
// labeled-data-to-GMM preprocessing used for real datasets.

#ifndef DPEM_MODELS_HPP_
#define DPEM_MODELS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpem/errors.hpp"
#include "dpem/numeric.hpp"

namespace dpem {

enum class ModelKind { kGmm, kMrm, kRmc };

inline std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kGmm: return "gmm";
    case ModelKind::kMrm: return "mrm";
    case ModelKind::kRmc: return "rmc";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "gmm" || s == "GMM") return ModelKind::kGmm;
  if (s == "mrm" || s == "MRM") return ModelKind::kMrm;
  if (s == "rmc" || s == "RMC") return ModelKind::kRmc;
  throw ConfigError("unknown model kind '" + std::string(s) + "'");
}

struct ModelSpec {
  ModelKind kind = ModelKind::kGmm;
  double sigma = 1.0;
  double missing_prob = 0.0;  // RMC only
  std::size_t dim = 1;

  void validate() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("ModelSpec: sigma must be positive");
    if (dim < 1) throw DomainError("ModelSpec: dimension must be >= 1");
    if (!(missing_prob >= 0.0 && missing_prob < 1.0))
      throw DomainError("ModelSpec: missing probability must lie in [0,1)");
    if (kind != ModelKind::kRmc && missing_prob != 0.0)
      throw DomainError("ModelSpec: missing probability is only defined for RMC");
  }
};

// One observation. GMM: `v` is the response vector y. MRM/RMC: `v` is the
// covariate vector x and `y` the scalar response. RMC: `observed[j] != 0` iff
// x_j was observed; unobserved entries of `v` are never read.
struct SampleView {
  std::span<const double> v;
  double y = 0.0;
  std::span<const std::uint8_t> observed;
};

struct ObservationSet {
  ModelKind kind = ModelKind::kGmm;
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> features;        // n x d, row-major
  std::vector<double> responses;       // n (MRM, RMC)
  std::vector<std::uint8_t> observed;  // n x d (RMC)

  SampleView sample(std::size_t i) const {
    SampleView s;
    s.v = std::span<const double>(features.data() + i * d, d);
    if (kind != ModelKind::kGmm) s.y = responses[i];
    if (kind == ModelKind::kRmc) s.observed = std::span<const std::uint8_t>(observed.data() + i * d, d);
    return s;
  }

  // Rows in `indices`, in that order.
  ObservationSet subset(std::span<const std::size_t> indices) const {
    ObservationSet out;
    out.kind = kind;
    out.d = d;
    out.n = indices.size();
    out.features.reserve(indices.size() * d);
    for (std::size_t i : indices) {
      if (i >= n) throw DomainError("ObservationSet::subset: index out of range");
      out.features.insert(out.features.end(), features.begin() + i * d, features.begin() + (i + 1) * d);
      if (kind != ModelKind::kGmm) out.responses.push_back(responses[i]);
      if (kind == ModelKind::kRmc)
        out.observed.insert(out.observed.end(), observed.begin() + i * d, observed.begin() + (i + 1) * d);
    }
    return out;
  }

  void validate() const {
    if (d < 1) throw DomainError("ObservationSet: d must be >= 1");
    if (features.size() != n * d) throw DomainError("ObservationSet: feature block has wrong size");
    const bool has_y = kind != ModelKind::kGmm;
    if (has_y != (responses.size() == n) || (!has_y && !responses.empty()))
      throw DomainError("ObservationSet: response column does not match model kind");
    const bool has_mask = kind == ModelKind::kRmc;
    if (has_mask ? observed.size() != n * d : !observed.empty())
      throw DomainError("ObservationSet: missingness mask does not match model kind");
  }

  friend bool operator==(const ObservationSet&, const ObservationSet&) = default;
};

// ---------------------------------------------------------------------------
// Samplers.

inline ObservationSet sample_gmm(std::size_t n, std::span<const double> beta_star,
                                 double sigma, RngStream& rng) {
  if (n < 1) throw DomainError("sample_gmm: n must be >= 1");
  if (!(sigma > 0.0)) throw DomainError("sample_gmm: sigma must be positive");
  if (beta_star.empty()) throw DomainError("sample_gmm: empty beta*");
  const std::size_t d = beta_star.size();
  ObservationSet out{ModelKind::kGmm, n, d, {}, {}, {}};
  out.features.resize(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = sample_rademacher(rng);
    for (std::size_t j = 0; j < d; ++j)
      out.features[i * d + j] = z * beta_star[j] + sample_gaussian(rng, 0.0, sigma);
  }
  return out;
}

inline ObservationSet sample_mrm(std::size_t n, std::span<const double> beta_star,
                                 double sigma, RngStream& rng) {
  if (n < 1) throw DomainError("sample_mrm: n must be >= 1");
  if (!(sigma > 0.0)) throw DomainError("sample_mrm: sigma must be positive");
  if (beta_star.empty()) throw DomainError("sample_mrm: empty beta*");
  const std::size_t d = beta_star.size();
  ObservationSet out{ModelKind::kMrm, n, d, {}, {}, {}};
  out.features.resize(n * d);
  out.responses.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double* x = out.features.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) x[j] = sample_gaussian(rng, 0.0, 1.0);
    const double z = sample_rademacher(rng);
    out.responses[i] = z * dot(beta_star, {x, d}) + sample_gaussian(rng, 0.0, sigma);
  }
  return out;
}

// The response uses the complete covariate vector; masking happens afterwards
// and masked cells are stored as 0.
inline ObservationSet sample_rmc(std::size_t n, std::span<const double> beta_star,
                                 double sigma, double missing_prob, RngStream& rng) {
  if (n < 1) throw DomainError("sample_rmc: n must be >= 1");
  if (!(sigma > 0.0)) throw DomainError("sample_rmc: sigma must be positive");
  if (!(missing_prob >= 0.0 && missing_prob < 1.0))
    throw DomainError("sample_rmc: missing probability must lie in [0,1)");
  if (beta_star.empty()) throw DomainError("sample_rmc: empty beta*");
  const std::size_t d = beta_star.size();
  ObservationSet out{ModelKind::kRmc, n, d, {}, {}, {}};
  out.features.resize(n * d);
  out.responses.resize(n);
  out.observed.resize(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    double* x = out.features.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) x[j] = sample_gaussian(rng, 0.0, 1.0);
    out.responses[i] = dot(beta_star, {x, d}) + sample_gaussian(rng, 0.0, sigma);
    for (std::size_t j = 0; j < d; ++j) {
      const bool seen = !sample_bernoulli(rng, missing_prob);
      out.observed[i * d + j] = seen ? 1 : 0;
      if (!seen) x[j] = 0.0;
    }
  }
  return out;
}

inline ObservationSet sample_model(const ModelSpec& model, std::size_t n,
                                   std::span<const double> beta_star, RngStream& rng) {
  model.validate();
  if (beta_star.size() != model.dim) throw DomainError("sample_model: beta* dimension mismatch");
  switch (model.kind) {
    case ModelKind::kGmm: return sample_gmm(n, beta_star, model.sigma, rng);
    case ModelKind::kMrm: return sample_mrm(n, beta_star, model.sigma, rng);
    case ModelKind::kRmc: return sample_rmc(n, beta_star, model.sigma, model.missing_prob, rng);
  }
  throw DomainError("sample_model: unknown model");
}

// ---------------------------------------------------------------------------
// Posterior weights.

// 1 / (1 + exp(-t)) without overflow for large |t|.
inline double logistic(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// Posterior probability of the positive component given t = <beta, y> / sigma^2
// (GMM) or y <beta, x> / sigma^2 (MRM). The two component densities differ by
// exp(2t), so the log-odds are 2t.
inline double posterior_weight(double t) { return logistic(2.0 * t); }

// 2 posterior_weight(t) - 1 = tanh(t), exactly odd in t.
inline double centered_weight(double t) { return std::tanh(t); }

// ---------------------------------------------------------------------------
// Missing-covariate conditional moments.

namespace internal {

inline void check_rmc_sample(std::span<const double> x, std::span<const std::uint8_t> observed,
                             std::span<const double> beta) {
  if (x.size() != beta.size() || observed.size() != beta.size())
    throw DomainError("RMC sample: dimension mismatch");
}

}  // namespace internal

// m = z.x + (y - <beta, z.x>) / (sigma^2 + ||(1-z).beta||^2) * (1-z).beta
inline Vec m_beta(std::span<const double> x, std::span<const std::uint8_t> observed, double y,
                  std::span<const double> beta, double sigma) {
  internal::check_rmc_sample(x, observed, beta);
  const std::size_t d = beta.size();
  double inner = 0.0;
  double hidden_norm2 = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    if (observed[j]) {
      inner += beta[j] * x[j];
    } else {
      hidden_norm2 += beta[j] * beta[j];
    }
  }
  const double coef = (y - inner) / (sigma * sigma + hidden_norm2);
  Vec m(d);
  for (std::size_t j = 0; j < d; ++j) m[j] = observed[j] ? x[j] : coef * beta[j];
  return m;
}

// K = diag(1-z) + m m^T - ((1-z).m)((1-z).m)^T
inline Matrix K_beta(std::span<const double> x, std::span<const std::uint8_t> observed, double y,
                     std::span<const double> beta, double sigma) {
  const Vec m = m_beta(x, observed, y, beta, sigma);
  const std::size_t d = beta.size();
  Matrix k(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double hi = observed[i] ? 0.0 : m[i];
      const double hj = observed[j] ? 0.0 : m[j];
      k(i, j) = (i == j && !observed[i] ? 1.0 : 0.0) + m[i] * m[j] - hi * hj;
    }
  }
  return k;
}

// ---------------------------------------------------------------------------
// Gradients and Q values.

// Writes grad_beta q(beta; beta) for one sample into `out`.
inline void grad_q(const ModelSpec& model, const SampleView& s, std::span<const double> beta,
                   std::span<double> out) {
  const std::size_t d = beta.size();
  if (s.v.size() != d || out.size() != d) throw DomainError("grad_q: dimension mismatch");
  const double var = model.sigma * model.sigma;
  switch (model.kind) {
    case ModelKind::kGmm: {
      const double c = centered_weight(dot(beta, s.v) / var);
      for (std::size_t j = 0; j < d; ++j) out[j] = c * s.v[j] - beta[j];
      return;
    }
    case ModelKind::kMrm: {
      const double xb = dot(s.v, beta);
      const double c = centered_weight(s.y * xb / var);
      for (std::size_t j = 0; j < d; ++j) out[j] = c * s.y * s.v[j] - s.v[j] * xb;
      return;
    }
    case ModelKind::kRmc: {
      if (s.observed.size() != d) throw DomainError("grad_q: RMC sample without mask");
      // y m - K beta, with K beta expanded to avoid forming K.
      const Vec m = m_beta(s.v, s.observed, s.y, beta, model.sigma);
      double mb = 0.0, hb = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        mb += m[j] * beta[j];
        hb += (s.observed[j] ? 0.0 : m[j]) * beta[j];
      }
      for (std::size_t j = 0; j < d; ++j) {
        const double diag = s.observed[j] ? 0.0 : beta[j];
        const double h = s.observed[j] ? 0.0 : m[j];
        out[j] = s.y * m[j] - ((diag + m[j] * mb) - h * hb);
      }
      return;
    }
  }
}

inline Vec grad_q(const ModelSpec& model, const SampleView& s, std::span<const double> beta) {
  Vec out(beta.size());
  grad_q(model, s, beta, out);
  return out;
}

// Per-sample Q value q(beta; beta_prime), dropping additive terms that do not
// depend on beta. Its beta-gradient at beta = beta_prime equals grad_q.
inline double q_value(const ModelSpec& model, const SampleView& s, std::span<const double> beta,
                      std::span<const double> beta_prime) {
  const std::size_t d = beta.size();
  if (s.v.size() != d || beta_prime.size() != d) throw DomainError("q_value: dimension mismatch");
  const double var = model.sigma * model.sigma;
  switch (model.kind) {
    case ModelKind::kGmm: {
      const double w = posterior_weight(dot(beta_prime, s.v) / var);
      double minus = 0.0, plus = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        minus += (s.v[j] - beta[j]) * (s.v[j] - beta[j]);
        plus += (s.v[j] + beta[j]) * (s.v[j] + beta[j]);
      }
      return -0.5 * (w * minus + (1.0 - w) * plus);
    }
    case ModelKind::kMrm: {
      const double w = posterior_weight(s.y * dot(beta_prime, s.v) / var);
      const double xb = dot(s.v, beta);
      return -0.5 * (w * (s.y - xb) * (s.y - xb) + (1.0 - w) * (s.y + xb) * (s.y + xb));
    }
    case ModelKind::kRmc: {
      if (s.observed.size() != d) throw DomainError("q_value: RMC sample without mask");
      const Vec m = m_beta(s.v, s.observed, s.y, beta_prime, model.sigma);
      const Matrix k = K_beta(s.v, s.observed, s.y, beta_prime, model.sigma);
      const Vec kb = k.multiply(beta);
      return s.y * dot(beta, m) - 0.5 * dot(beta, kb);
    }
  }
  return 0.0;
}

// GMM M-step summand: argmax_beta Q_n(beta; beta') = mean_i f_gmm(y_i, beta').
inline Vec f_gmm(std::span<const double> y, std::span<const double> beta_prime, double sigma) {
  if (y.size() != beta_prime.size()) throw DomainError("f_gmm: dimension mismatch");
  const double c = centered_weight(dot(beta_prime, y) / (sigma * sigma));
  Vec out(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) out[j] = c * y[j];
  return out;
}

// Bound on the per-coordinate second moment of the gradient near beta*, with
// the model's leading expression scaled by `multiplier`:
//   GMM  ||beta*||_inf^2 + sigma^2
//   MRM  max{(||beta*||_2^2 + sigma^2)^2, d ||beta*||_2^2}
//   RMC  (sqrt(d) ||beta*||_2 + sigma^2 + ||beta*||_2^2)^2
inline double tau_bound(ModelKind kind, double beta_norm_inf, double beta_norm_2, double sigma,
                        std::size_t d, double multiplier = 4.0) {
  if (beta_norm_inf < 0.0 || beta_norm_2 < 0.0) throw DomainError("tau_bound: negative norm");
  const double s2 = sigma * sigma;
  const double b2 = beta_norm_2 * beta_norm_2;
  const double dd = static_cast<double>(d);
  switch (kind) {
    case ModelKind::kGmm: return multiplier * (beta_norm_inf * beta_norm_inf + s2);
    case ModelKind::kMrm: return multiplier * std::max((b2 + s2) * (b2 + s2), dd * b2);
    case ModelKind::kRmc: {
      const double r = std::sqrt(dd) * beta_norm_2 + s2 + b2;
      return multiplier * r * r;
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Labeled data -> GMM.

struct LabeledRow {
  Vec features;
  int label = 0;  // 0 or 1
};

struct PreprocessedGmm {
  ObservationSet data;
  Vec beta_star;       // (mu_1 - mu_0) / 2
  double sigma = 0.0;  // sqrt(max(lambda_0, lambda_1)), floored
  double lambda_max[2] = {0.0, 0.0};
  bool sigma_floored = false;
  std::size_t per_cluster = 0;
};

inline constexpr double kSigmaFloor = 1e-6;

// Keeps the first n_min rows of each label (input order), estimates sigma from
// the larger of the two per-cluster top covariance eigenvalues, and centers
// all rows on the midpoint of the two cluster means.
inline PreprocessedGmm preprocess_real_gmm(std::span<const LabeledRow> rows) {
  if (rows.empty()) throw DataError("preprocess: no rows");
  const std::size_t d = rows.front().features.size();
  if (d == 0) throw DataError("preprocess: rows have no features");
  std::vector<std::size_t> idx[2];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.features.size() != d) throw DataError("preprocess: ragged feature rows");
    if (!all_finite(r.features)) throw DataError("preprocess: non-finite feature");
    if (r.label != 0 && r.label != 1) throw DataError("preprocess: label must be 0 or 1");
    idx[r.label].push_back(i);
  }
  if (idx[0].empty() || idx[1].empty()) throw DataError("preprocess: both labels must be present");
  const std::size_t n_min = std::min(idx[0].size(), idx[1].size());
  if (n_min < 2) throw DataError("preprocess: each cluster needs at least 2 rows");
  idx[0].resize(n_min);
  idx[1].resize(n_min);

  PreprocessedGmm out;
  out.per_cluster = n_min;
  Vec mean[2] = {Vec(d, 0.0), Vec(d, 0.0)};
  for (int c = 0; c < 2; ++c) {
    for (std::size_t i : idx[c])
      for (std::size_t j = 0; j < d; ++j) mean[c][j] += rows[i].features[j];
    for (auto& v : mean[c]) v /= static_cast<double>(n_min);
    Matrix cov(d, d);
    for (std::size_t i : idx[c]) {
      const auto& f = rows[i].features;
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a; b < d; ++b)
          cov(a, b) += (f[a] - mean[c][a]) * (f[b] - mean[c][b]);
    }
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) {
        cov(a, b) /= static_cast<double>(n_min - 1);
        cov(b, a) = cov(a, b);
      }
    out.lambda_max[c] = max_eigenvalue(cov);
  }
  const double lambda = std::max({out.lambda_max[0], out.lambda_max[1], 0.0});
  out.sigma = std::sqrt(lambda);
  if (out.sigma < kSigmaFloor) {
    out.sigma = kSigmaFloor;
    out.sigma_floored = true;
  }

  Vec mid(d);
  out.beta_star.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    mid[j] = 0.5 * (mean[0][j] + mean[1][j]);
    out.beta_star[j] = 0.5 * (mean[1][j] - mean[0][j]);
  }

  std::vector<std::size_t> keep;
  keep.reserve(2 * n_min);
  {
    std::size_t a = 0, b = 0;
    while (a < n_min || b < n_min) {
      if (b >= n_min || (a < n_min && idx[0][a] < idx[1][b])) {
        keep.push_back(idx[0][a++]);
      } else {
        keep.push_back(idx[1][b++]);
      }
    }
  }
  out.data.kind = ModelKind::kGmm;
  out.data.d = d;
  out.data.n = keep.size();
  out.data.features.reserve(keep.size() * d);
  for (std::size_t i : keep)
    for (std::size_t j = 0; j < d; ++j) out.data.features.push_back(rows[i].features[j] - mid[j]);
  return out;
}

}  // namespace dpem

#endif  // DPEM_MODELS_HPP_
