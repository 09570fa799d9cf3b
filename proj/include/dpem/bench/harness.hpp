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

// Experiment harness behind the `dpem` command-line tool.
//
// Every run is keyed by its seed. Independent streams derived from the seed
// drive the ground-truth direction, the data, the initial point and the
// algorithm's own randomness, so a (cell, seed) run is reproducible in
// isolation and the result does not depend on scheduling.

#ifndef DPEM_BENCH_HARNESS_HPP_
#define DPEM_BENCH_HARNESS_HPP_

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "dpem/bench/config.hpp"
#include "dpem/bench/csv.hpp"
#include "dpem/em.hpp"
#include "dpem/errors.hpp"
#include "dpem/models.hpp"
#include "dpem/numeric.hpp"
#include "dpem/privacy.hpp"

namespace dpem::bench {

inline constexpr std::uint64_t kDataStream = 1;
inline constexpr std::uint64_t kInitStream = 2;
inline constexpr std::uint64_t kAlgorithmStream = 3;
inline constexpr std::uint64_t kTruthStream = 4;

// One point of the experiment grid. T is resolved (never auto); C is 0 for
// algorithms that do not clip.
struct Cell {
  std::string algorithm;
  double eps = 0.0;
  double delta = 0.0;
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t T = 0;
  double C = 0.0;
};

inline ModelSpec model_spec(const ExperimentConfig& cfg, std::size_t d) {
  ModelSpec m;
  m.kind = cfg.kind;
  m.sigma = cfg.sigma;
  m.missing_prob = cfg.missing_prob;
  m.dim = d;
  m.validate();
  return m;
}

// Uniform direction on the sphere scaled to ||beta*|| = snr * sigma.
inline Vec make_beta_star(std::uint64_t seed, std::size_t d, double snr, double sigma) {
  RngStream rng = RngStream(seed).split(kTruthStream);
  Vec b = sample_unit_vector(rng, d);
  for (auto& v : b) v *= snr * sigma;
  return b;
}

inline ObservationSet make_dataset(const ModelSpec& model, std::size_t n,
                                   std::span<const double> beta_star, std::uint64_t seed) {
  RngStream rng = RngStream(seed).split(kDataStream);
  return sample_model(model, n, beta_star, rng);
}

// Random unit start. With `aligned`, sign-symmetric models flip it onto the
// half-space of the truth.
inline Vec make_init(std::uint64_t seed, const ModelSpec& model, std::span<const double> beta_star,
                     bool aligned) {
  RngStream rng = RngStream(seed).split(kInitStream);
  Vec b = random_init(rng, model.dim);
  if (aligned && model.kind != ModelKind::kRmc && dot(b, beta_star) < 0.0)
    for (auto& v : b) v = -v;
  return b;
}

inline double resolve_tau(const ExperimentConfig& cfg, const ModelSpec& model,
                          std::span<const double> beta_star) {
  if (cfg.tau) return *cfg.tau;
  return tau_bound(model.kind, norm_inf(beta_star), norm2(beta_star), model.sigma, model.dim,
                   cfg.tau_multiplier);
}

// The grid for fixed data sizes: algorithm x eps x T x C, in config order.
inline std::vector<Cell> expand_cells(const ExperimentConfig& cfg, std::size_t n, std::size_t d) {
  std::vector<Cell> cells;
  const std::vector<std::size_t> t_values =
      cfg.T.empty() ? std::vector<std::size_t>{ExperimentConfig::kAutoT} : cfg.T;
  for (const auto& alg : cfg.algorithms) {
    if (alg == "dpem" && cfg.kind != ModelKind::kGmm)
      throw ConfigError("run.algorithm: dpem is only defined for model.kind = gmm");
    const std::vector<double> clips = alg == "clipped" ? cfg.clip : std::vector<double>{0.0};
    for (double eps : cfg.eps)
      for (std::size_t t : t_values)
        for (double c : clips) {
          Cell cell;
          cell.algorithm = alg;
          cell.eps = eps;
          cell.delta = cfg.delta_for(n);
          cell.n = n;
          cell.d = d;
          cell.T = cfg.iterations_for(t, n);
          cell.C = c;
          cells.push_back(cell);
        }
  }
  return cells;
}

// Runs one (cell, seed) on the given data and returns one row per iteration.
inline std::vector<ResultRow> run_cell(const ExperimentConfig& cfg, const Cell& cell,
                                       const ModelSpec& model, const ObservationSet& data,
                                       std::span<const double> beta_star, std::uint64_t seed) {
  const Vec beta0 = make_init(seed, model, beta_star, cfg.aligned_init);
  RunConfig run;
  run.eta = cfg.eta;
  run.iterations = cell.T;
  run.clip = cell.C > 0.0 ? cell.C : 1.0;
  run.tau = resolve_tau(cfg, model, beta_star);
  run.zeta = cfg.zeta;
  run.budget = make_budget(cell.eps, cell.delta);
  run.shuffle = cfg.shuffle;
  run.add_noise = cfg.add_noise;
  const RngStream rng = RngStream(seed).split(kAlgorithmStream);

  const auto start = std::chrono::steady_clock::now();
  IterationTrace trace;
  if (cell.algorithm == "em") {
    trace = gradient_em(data, model, beta0, run.eta, cell.T, beta_star);
  } else if (cell.algorithm == "clipped") {
    trace = clipped_dp_gradient_em(data, model, beta0, run, rng, beta_star);
  } else if (cell.algorithm == "dpgem") {
    trace = dp_gradient_em(data, model, beta0, run, rng, beta_star);
  } else if (cell.algorithm == "dpem") {
    trace = dp_em_gmm(data, model, beta0, run, rng, beta_star);
  } else {
    throw ConfigError("run.algorithm: unknown algorithm '" + cell.algorithm + "'");
  }
  const double wall_ms =
      cfg.timing ? std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count()
                 : 0.0;

  std::vector<ResultRow> rows;
  rows.reserve(trace.errors.size());
  for (std::size_t t = 0; t < trace.errors.size(); ++t) {
    ResultRow r;
    r.model = std::string(to_string(model.kind));
    r.algorithm = cell.algorithm;
    r.eps = cell.eps;
    r.delta = cell.delta;
    r.d = cell.d;
    r.n = cell.n;
    r.T = cell.T;
    r.C = cell.C;
    r.seed = seed;
    r.iter = t;
    r.error = trace.errors[t];
    r.wall_ms = wall_ms;
    rows.push_back(std::move(r));
  }
  return rows;
}

// Runs `count` tasks on up to `threads` workers. Each task writes only its own
// slot; the first failure in task order is rethrown.
template <typename Task>
void run_parallel(std::size_t count, std::size_t threads, Task&& task) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, count));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Commands.

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  return out;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path + "'");
  return in;
}

inline std::size_t single_value(const std::vector<std::size_t>& v, const char* key) {
  if (v.size() != 1) throw ConfigError(std::string(key) + ": gen needs exactly one value");
  return v.front();
}

// Draws one dataset from the first configured seed and writes it with its
// metadata.
inline void cmd_gen(const ExperimentConfig& cfg, std::ostream& data_out, std::ostream& meta_out) {
  if (cfg.seeds.empty()) throw ConfigError("seeds: gen needs a seed");
  const std::size_t n = single_value(cfg.n, "data.n");
  const std::size_t d = single_value(cfg.d, "data.d");
  const std::uint64_t seed = cfg.seeds.front();
  const ModelSpec model = model_spec(cfg, d);
  const Vec beta_star = make_beta_star(seed, d, cfg.snr, cfg.sigma);
  write_dataset(data_out, make_dataset(model, n, beta_star, seed));
  DatasetMeta meta;
  meta.kind = cfg.kind;
  meta.n = n;
  meta.d = d;
  meta.sigma = cfg.sigma;
  meta.missing_prob = cfg.missing_prob;
  meta.snr = cfg.snr;
  meta.seed = seed;
  meta.beta_star = beta_star;
  write_meta(meta_out, meta);
}

namespace internal {

inline void check_field(bool ok, const char* field, const std::string& detail) {
  if (!ok) throw ConfigError("dataset does not match config: " + std::string(field) + " (" + detail + ")");
}

}  // namespace internal

// Runs every configured (algorithm, eps, T, C) once per seed on a fixed
// dataset. Seeds vary the start point and the algorithm's randomness.
inline void cmd_run(const ExperimentConfig& cfg_in, const ObservationSet& data,
                    const DatasetMeta& meta, std::ostream& out) {
  using internal::check_field;
  ExperimentConfig cfg = cfg_in;
  check_field(!cfg.is_set("model.kind") || cfg.kind == meta.kind, "model.kind",
              "config " + std::string(to_string(cfg.kind)) + ", metadata " + std::string(to_string(meta.kind)));
  check_field(data.kind == meta.kind, "model.kind", "dataset and metadata disagree");
  check_field(data.d == meta.beta_star.size(), "data.d",
              "dataset has " + std::to_string(data.d) + " columns, beta_star has " +
                  std::to_string(meta.beta_star.size()));
  check_field(meta.n == 0 || meta.n == data.n, "data.n",
              "dataset has " + std::to_string(data.n) + " rows, metadata says " + std::to_string(meta.n));
  check_field(!cfg.is_set("data.d") || (cfg.d.size() == 1 && cfg.d[0] == data.d), "data.d",
              "dataset has d = " + std::to_string(data.d));
  check_field(!cfg.is_set("data.n") || (cfg.n.size() == 1 && cfg.n[0] == data.n), "data.n",
              "dataset has n = " + std::to_string(data.n));
  check_field(!cfg.is_set("model.sigma") || cfg.sigma == meta.sigma, "model.sigma",
              "metadata has sigma = " + format_double(meta.sigma));
  cfg.kind = meta.kind;
  cfg.sigma = meta.sigma;
  cfg.missing_prob = meta.missing_prob;
  const ModelSpec model = model_spec(cfg, data.d);

  const auto cells = expand_cells(cfg, data.n, data.d);
  const std::size_t runs = cells.size() * cfg.seeds.size();
  if (runs == 0) throw ConfigError("nothing to run: empty algorithm, eps, T, C or seed list");
  std::vector<std::vector<ResultRow>> slots(runs);
  run_parallel(runs, cfg.threads, [&](std::size_t i) {
    const Cell& cell = cells[i / cfg.seeds.size()];
    slots[i] = run_cell(cfg, cell, model, data, meta.beta_star, cfg.seeds[i % cfg.seeds.size()]);
  });
  write_result_header(out);
  for (const auto& rows : slots)
    for (const auto& r : rows) write_result_row(out, r);
}

// Cartesian product over (algorithm, eps, n, d, T, C) x seeds on synthetic
// data. Rows come out sorted by cell, then seed, then iteration.
inline void cmd_sweep(const ExperimentConfig& cfg, std::ostream& out) {
  std::vector<Cell> cells;
  for (const auto& alg : cfg.algorithms) {
    ExperimentConfig one = cfg;
    one.algorithms = {alg};
    for (std::size_t n : cfg.n)
      for (std::size_t d : cfg.d) {
        auto part = expand_cells(one, n, d);
        cells.insert(cells.end(), part.begin(), part.end());
      }
  }
  const std::size_t runs = cells.size() * cfg.seeds.size();
  if (runs == 0) throw ConfigError("empty sweep: every axis and the seed list need at least one value");

  std::vector<std::vector<ResultRow>> slots(runs);
  run_parallel(runs, cfg.threads, [&](std::size_t i) {
    const Cell& cell = cells[i / cfg.seeds.size()];
    const std::uint64_t seed = cfg.seeds[i % cfg.seeds.size()];
    const ModelSpec model = model_spec(cfg, cell.d);
    const Vec beta_star = make_beta_star(seed, cell.d, cfg.snr, cfg.sigma);
    const ObservationSet data = make_dataset(model, cell.n, beta_star, seed);
    slots[i] = run_cell(cfg, cell, model, data, beta_star, seed);
  });
  write_result_header(out);
  for (const auto& rows : slots)
    for (const auto& r : rows) write_result_row(out, r);
}

// Labeled rows to a centered GMM dataset plus metadata.
inline void cmd_preprocess(std::istream& labeled, std::ostream& data_out, std::ostream& meta_out) {
  const auto rows = read_labeled(labeled);
  const PreprocessedGmm pre = preprocess_real_gmm(rows);
  write_dataset(data_out, pre.data);
  DatasetMeta meta;
  meta.kind = ModelKind::kGmm;
  meta.n = pre.data.n;
  meta.d = pre.data.d;
  meta.sigma = pre.sigma;
  meta.snr = norm2(pre.beta_star) / pre.sigma;
  meta.beta_star = pre.beta_star;
  meta.extra["lambda_max_0"] = format_double(pre.lambda_max[0]);
  meta.extra["lambda_max_1"] = format_double(pre.lambda_max[1]);
  meta.extra["per_cluster"] = std::to_string(pre.per_cluster);
  meta.extra["sigma_floored"] = pre.sigma_floored ? "true" : "false";
  meta.extra["source"] = "preprocess";
  write_meta(meta_out, meta);
}

inline void cmd_report(std::istream& rows_in, std::ostream& out) {
  write_summary(out, summarize(read_result_rows(rows_in)));
}

}  // namespace dpem::bench

#endif  // DPEM_BENCH_HARNESS_HPP_
