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

// Scalar and small-vector numerics shared by the rest of the library:
// standard normal CDF, a splittable counter-based random stream with the
// sampling primitives built on it, a dense d x d matrix with a power-iteration
// top eigenvalue, and Gaussian-weight quadrature used as an oracle for closed
// forms.

#ifndef DPEM_NUMERIC_HPP_
#define DPEM_NUMERIC_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dpem/errors.hpp"

namespace dpem {

using Vec = std::vector<double>;

inline constexpr double kSqrt2 = std::numbers::sqrt2;
inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;

// ---------------------------------------------------------------------------
// Small vector helpers.

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DomainError("dot: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

inline bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(),
                     [](double v) { return std::isfinite(v); });
}

// Dense row-major matrix. Used for d x d quantities (x x^T, K_beta,
// covariances); not a general linear algebra type.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t d) {
    Matrix m(d, d);
    for (std::size_t i = 0; i < d; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix diagonal(std::span<const double> diag) {
    Matrix m(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  Vec multiply(std::span<const double> v) const {
    if (v.size() != cols_) throw DomainError("Matrix::multiply: dimension mismatch");
    Vec out(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = dot(row(i), v);
    return out;
  }

  bool is_symmetric(double tol) const {
    if (rows_ != cols_) return false;
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = i + 1; j < cols_; ++j)
        if (std::abs((*this)(i, j) - (*this)(j, i)) > tol) return false;
    return true;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Standard normal distribution.

inline double std_normal_pdf(double x) {
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

// Phi(x) through the complementary error function, which keeps full relative
// accuracy in the lower tail (absolute error well below 1e-15 everywhere).
inline double std_normal_cdf(double x) {
  if (!std::isfinite(x)) throw DomainError("std_normal_cdf: non-finite input");
  return 0.5 * std::erfc(-x / kSqrt2);
}

// ---------------------------------------------------------------------------
// Random streams.

namespace internal {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace internal

// Counter-based stream: the k-th output is mix64(key + k * golden), i.e. a
// SplitMix64 sequence started at `key`. A stream is fully described by
// (key, position), so every draw is a pure function of the seed and the number
// of draws before it.
//
// Derived streams: split(seed, index) keys a new stream with
//   mix64(mix64(seed) ^ mix64(index + golden)),
// so (seed, index) pairs map to statistically unrelated sequences and the
// mapping does not depend on any draw order.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), key_(seed) {}

  static RngStream split(std::uint64_t seed, std::uint64_t index) {
    RngStream s(seed);
    s.key_ = derive(seed, index);
    return s;
  }

  // Child stream keyed off this stream's key (not its position).
  RngStream split(std::uint64_t index) const {
    RngStream s(seed_);
    s.key_ = derive(key_, index);
    return s;
  }

  std::uint64_t next_u64() {
    ++position_;
    return internal::mix64(key_ + position_ * internal::kGolden);
  }

  // Uniform on [0, 1) with 53 random bits.
  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1).
  double next_open_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound), bound >= 1, by rejection.
  std::uint64_t next_below(std::uint64_t bound) {
    if (bound == 0) throw DomainError("RngStream::next_below: bound must be positive");
    const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % bound);
    std::uint64_t r;
    do {
      r = next_u64();
    } while (r >= limit);
    return r % bound;
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t key() const { return key_; }
  std::uint64_t position() const { return position_; }

  friend bool operator==(const RngStream&, const RngStream&) = default;

 private:
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t index) {
    return internal::mix64(internal::mix64(seed) ^
                           internal::mix64(index + internal::kGolden));
  }

  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t position_ = 0;
};

// Box-Muller, one output per pair of uniforms (no cached second value, so the
// stream position after n draws is always 2n).
inline double sample_gaussian(RngStream& rng, double mean, double std) {
  if (!(std >= 0.0)) throw DomainError("sample_gaussian: negative std");
  const double u1 = rng.next_open_uniform();
  const double u2 = rng.next_uniform();
  if (std == 0.0) return mean;
  const double z =
      std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  return mean + std * z;
}

inline double sample_rademacher(RngStream& rng) {
  return (rng.next_u64() >> 63) != 0 ? 1.0 : -1.0;
}

inline bool sample_bernoulli(RngStream& rng, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("sample_bernoulli: p outside [0,1]");
  return rng.next_uniform() < p;
}

inline Vec sample_gaussian_vector(RngStream& rng, std::size_t d, double std = 1.0) {
  Vec v(d);
  for (auto& x : v) x = sample_gaussian(rng, 0.0, std);
  return v;
}

// Uniform direction on the unit sphere in R^d.
inline Vec sample_unit_vector(RngStream& rng, std::size_t d) {
  if (d == 0) throw DomainError("sample_unit_vector: d must be >= 1");
  for (;;) {
    Vec v = sample_gaussian_vector(rng, d);
    const double n = norm2(v);
    if (n > 0.0) {
      for (auto& x : v) x /= n;
      return v;
    }
  }
}

// Fisher-Yates with the stream's own integer draws (std::shuffle is not
// specified bit-for-bit across standard libraries).
template <typename T>
void shuffle(std::vector<T>& items, RngStream& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(items[i - 1], items[j]);
  }
}

// ---------------------------------------------------------------------------
// Top eigenvalue.

struct PowerIterationOptions {
  double tolerance = 1e-10;
  int max_iterations = 10000;
  std::uint64_t start_seed = 0x70776572ULL;
};

// Largest eigenvalue of a symmetric PSD matrix by power iteration from a
// seeded Gaussian start vector. Converged when the residual
// ||A v - lambda v|| <= tolerance * |lambda|.
inline double max_eigenvalue(const Matrix& m,
                             const PowerIterationOptions& opts = {}) {
  const std::size_t d = m.rows();
  if (d == 0 || m.cols() != d) throw DomainError("max_eigenvalue: matrix must be square and non-empty");
  double scale = 1.0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      if (!std::isfinite(m(i, j))) throw DomainError("max_eigenvalue: non-finite entry");
      scale = std::max(scale, std::abs(m(i, j)));
    }
  if (!m.is_symmetric(1e-9 * scale)) throw DomainError("max_eigenvalue: matrix is not symmetric");
  for (std::size_t i = 0; i < d; ++i)
    if (m(i, i) < -1e-9 * scale) throw DomainError("max_eigenvalue: matrix is not PSD");

  RngStream rng(opts.start_seed);
  Vec v = sample_unit_vector(rng, d);
  double lambda = 0.0;
  for (int it = 0; it < opts.max_iterations; ++it) {
    Vec w = m.multiply(v);
    lambda = dot(v, w);
    double residual = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double r = w[i] - lambda * v[i];
      residual += r * r;
    }
    residual = std::sqrt(residual);
    const double wn = norm2(w);
    if (wn == 0.0) return 0.0;
    if (residual <= opts.tolerance * std::abs(lambda)) {
      if (lambda < -1e-9 * scale) throw DomainError("max_eigenvalue: matrix is not PSD");
      return lambda;
    }
    for (std::size_t i = 0; i < d; ++i) v[i] = w[i] / wn;
  }
  throw ConvergenceError("max_eigenvalue: power iteration did not converge",
                         lambda, v);
}

// ---------------------------------------------------------------------------
// Quadrature.

struct QuadratureRule {
  Vec nodes;
  Vec weights;
};

// Gauss-Hermite rule for the standard normal weight: E f(xi), xi ~ N(0,1), is
// approximated by sum_i weights[i] * f(nodes[i]); weights sum to one.
// Golub-Welsch: nodes are the eigenvalues of the Jacobi matrix of the
// probabilists' Hermite recurrence (zero diagonal, off-diagonal sqrt(k)) and
// weights the squared first components of its eigenvectors. Implicit QL
// iteration tracks only that first row.
inline QuadratureRule gauss_hermite_rule(int n) {
  if (n < 1) throw DomainError("gauss_hermite_rule: n must be >= 1");
  const std::size_t m = static_cast<std::size_t>(n);
  Vec d(m, 0.0), e(m, 0.0), z(m, 0.0);
  for (std::size_t i = 0; i + 1 < m; ++i) e[i] = std::sqrt(static_cast<double>(i + 1));
  z[0] = 1.0;
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  for (std::size_t l = 0; l < m; ++l) {
    int iter = 0;
    std::size_t k;
    do {
      for (k = l; k + 1 < m; ++k) {
        const double dd = std::abs(d[k]) + std::abs(d[k + 1]);
        if (std::abs(e[k]) <= kEps * dd) break;
      }
      if (k == l) break;
      if (++iter > 60) throw ConvergenceError("gauss_hermite_rule: QL iteration did not converge", d[l], d);
      double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
      double r = std::hypot(g, 1.0);
      g = d[k] - d[l] + e[l] / (g + std::copysign(r, g));
      double s = 1.0, c = 1.0, p = 0.0;
      bool underflow = false;
      for (std::size_t i = k; i-- > l;) {
        const double f = s * e[i], b = c * e[i];
        r = std::hypot(f, g);
        e[i + 1] = r;
        if (r == 0.0) {
          d[i + 1] -= p;
          e[k] = 0.0;
          underflow = true;
          break;
        }
        s = f / r;
        c = g / r;
        g = d[i + 1] - p;
        r = (d[i] - g) * s + 2.0 * c * b;
        p = s * r;
        d[i + 1] = g + p;
        g = c * r - b;
        const double zf = z[i + 1];
        z[i + 1] = s * z[i] + c * zf;
        z[i] = c * z[i] - s * zf;
      }
      if (underflow) continue;
      d[l] -= p;
      e[l] = g;
      e[k] = 0.0;
    } while (true);
  }
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
  QuadratureRule rule{Vec(m), Vec(m)};
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    rule.nodes[i] = d[order[i]];
    rule.weights[i] = z[order[i]] * z[order[i]];
    total += rule.weights[i];
  }
  // Symmetrize (the exact rule is symmetric) and renormalize.
  for (std::size_t i = 0; i < m / 2; ++i) {
    const std::size_t j = m - 1 - i;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    rule.weights[i] = rule.weights[j] = w;
  }
  if (m % 2 == 1) rule.nodes[m / 2] = 0.0;
  for (auto& w : rule.weights) w /= total;
  return rule;
}

// Gauss-Legendre rule on [-1, 1].
inline QuadratureRule gauss_legendre_rule(int n) {
  if (n < 1) throw DomainError("gauss_legendre_rule: n must be >= 1");
  QuadratureRule rule{Vec(n), Vec(n)};
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int its = 0; its < 100; ++its) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15) break;
    }
    rule.nodes[i] = -z;
    rule.nodes[n - 1 - i] = z;
    rule.weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    rule.weights[n - 1 - i] = rule.weights[i];
  }
  return rule;
}

// E f(eta), eta ~ N(mean, std^2), by a fixed-order Gauss-Hermite rule. Exact
// for polynomials of degree < 2 * nodes; appropriate for smooth integrands.
template <typename F>
double expectation_under_gaussian(F&& f, double mean, double std, int nodes) {
  if (nodes < 32) throw DomainError("expectation_under_gaussian: nodes must be >= 32");
  if (!(std >= 0.0)) throw DomainError("expectation_under_gaussian: negative std");
  if (std == 0.0) return f(mean);
  const QuadratureRule rule = gauss_hermite_rule(nodes);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    acc += rule.weights[i] * f(mean + std * rule.nodes[i]);
  return acc;
}

// Same expectation for bounded, piecewise-smooth f whose kinks sit at
// `breakpoints` (in the eta variable). The standardized axis is truncated to
// [-38, 38], split at the breakpoints and into panels of width <= 1, and each
// panel is integrated with a `nodes`-point Gauss-Legendre rule.
template <typename F>
double expectation_under_gaussian(F&& f, double mean, double std, int nodes,
                                  std::span<const double> breakpoints) {
  if (nodes < 32) throw DomainError("expectation_under_gaussian: nodes must be >= 32");
  if (!(std >= 0.0)) throw DomainError("expectation_under_gaussian: negative std");
  if (std == 0.0) return f(mean);
  constexpr double kHalfWidth = 38.0;
  Vec cuts{-kHalfWidth, kHalfWidth};
  for (double bp : breakpoints) {
    const double z = (bp - mean) / std;
    if (std::isfinite(z) && z > -kHalfWidth && z < kHalfWidth) cuts.push_back(z);
  }
  std::sort(cuts.begin(), cuts.end());
  const QuadratureRule rule = gauss_legendre_rule(nodes);
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double lo = cuts[k], hi = cuts[k + 1];
    if (!(hi > lo)) continue;
    const int panels = std::max(1, static_cast<int>(std::ceil(hi - lo)));
    const double width = (hi - lo) / panels;
    for (int p = 0; p < panels; ++p) {
      const double a = lo + p * width;
      const double half = 0.5 * width, mid = a + half;
      double panel = 0.0;
      for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double z = mid + half * rule.nodes[i];
        panel += rule.weights[i] * f(mean + std * z) * std_normal_pdf(z);
      }
      acc += half * panel;
    }
  }
  return acc;
}

}  // namespace dpem

#endif  // DPEM_NUMERIC_HPP_
