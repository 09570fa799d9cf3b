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

// Experiment configuration: a plain-text `key = value` file. Keys are dotted
// (`run.eta`) or grouped under `[section]` headers; `#` starts a comment.
// List-valued keys take comma-separated values, and `seeds` also accepts
// inclusive ranges such as `1..20`.

#ifndef DPEM_BENCH_CONFIG_HPP_
#define DPEM_BENCH_CONFIG_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dpem/bench/csv.hpp"
#include "dpem/errors.hpp"
#include "dpem/models.hpp"

namespace dpem::bench {

inline constexpr std::string_view kAlgorithms[] = {"em", "clipped", "dpgem", "dpem"};

struct ExperimentConfig {
  ModelKind kind = ModelKind::kGmm;
  double sigma = 1.0;
  double missing_prob = 0.0;
  std::vector<std::size_t> n{2000};
  std::vector<std::size_t> d{10};
  double snr = 3.0;

  std::vector<std::string> algorithms{"dpgem"};
  std::vector<std::size_t> T;  // empty: ceil(ln n)
  double eta = 1.0;
  std::vector<double> clip{1.0};
  std::optional<double> tau;  // empty: tau_bound of the ground truth
  double tau_multiplier = 4.0;
  double zeta = 0.05;
  bool shuffle = true;
  bool aligned_init = true;

  std::vector<double> eps{0.5};
  std::optional<double> delta;  // empty: delta = n^-delta_power
  double delta_power = 1.1;

  std::vector<std::uint64_t> seeds{1};
  std::string output;
  std::size_t threads = 1;
  bool timing = false;
  bool add_noise = true;

  std::set<std::string> explicit_keys;

  bool is_set(const std::string& key) const { return explicit_keys.count(key) > 0; }

  double delta_for(std::size_t n_rows) const {
    return delta ? *delta : std::pow(static_cast<double>(n_rows), -delta_power);
  }
  std::size_t iterations_for(std::size_t t_value, std::size_t n_rows) const {
    return t_value == kAutoT ? default_iterations_of(n_rows) : t_value;
  }

  static constexpr std::size_t kAutoT = static_cast<std::size_t>(-1);

 private:
  static std::size_t default_iterations_of(std::size_t n_rows) {
    return static_cast<std::size_t>(
        std::ceil(std::log(static_cast<double>(std::max<std::size_t>(n_rows, 2)))));
  }
};

// Every recognised key, in documentation order.
inline constexpr std::string_view kConfigKeys[] = {
    "model.kind",   "model.sigma",        "model.missing_prob", "data.n",
    "data.d",       "data.snr",           "run.algorithm",      "run.T",
    "run.eta",      "run.clip_C",         "run.tau",            "run.tau_multiplier",
    "run.zeta",     "run.shuffle",        "run.init",           "privacy.eps",
    "privacy.delta", "seeds",             "output.path",        "threads",
    "timing"};

namespace internal {

inline ConfigError bad_value(const std::string& key, std::string_view value, const char* what) {
  return ConfigError(key + ": " + what + " (got '" + std::string(value) + "')");
}

inline double to_double(const std::string& key, std::string_view v) {
  try {
    return parse_double(v, 0);
  } catch (const ParseError&) {
    throw bad_value(key, v, "expected a number");
  }
}

inline std::uint64_t to_u64(const std::string& key, std::string_view v) {
  try {
    return parse_int<std::uint64_t>(v, 0);
  } catch (const ParseError&) {
    throw bad_value(key, v, "expected a non-negative integer");
  }
}

inline bool to_bool(const std::string& key, std::string_view v) {
  const auto s = trim(v);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw bad_value(key, v, "expected true or false");
}

inline std::vector<std::string_view> list_cells(const std::string& key, std::string_view v) {
  std::vector<std::string_view> out;
  if (trim(v).empty()) return out;
  for (auto cell : split(v)) {
    cell = trim(cell);
    if (cell.empty()) throw bad_value(key, v, "empty list element");
    out.push_back(cell);
  }
  return out;
}

inline std::vector<double> to_doubles(const std::string& key, std::string_view v) {
  std::vector<double> out;
  for (auto c : list_cells(key, v)) out.push_back(to_double(key, c));
  return out;
}

inline std::vector<std::size_t> to_counts(const std::string& key, std::string_view v) {
  std::vector<std::size_t> out;
  for (auto c : list_cells(key, v)) out.push_back(static_cast<std::size_t>(to_u64(key, c)));
  return out;
}

inline std::vector<std::uint64_t> to_seeds(const std::string& key, std::string_view v) {
  std::vector<std::uint64_t> out;
  for (auto c : list_cells(key, v)) {
    const auto dots = c.find("..");
    if (dots == std::string_view::npos) {
      out.push_back(to_u64(key, c));
      continue;
    }
    const std::uint64_t lo = to_u64(key, c.substr(0, dots));
    const std::uint64_t hi = to_u64(key, c.substr(dots + 2));
    if (hi < lo) throw bad_value(key, c, "empty seed range");
    if (hi - lo >= 1000000) throw bad_value(key, c, "seed range too long");
    for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
  }
  return out;
}

}  // namespace internal

// Sets one key. Throws ConfigError for unknown keys and malformed values.
inline void apply_setting(ExperimentConfig& cfg, const std::string& key, std::string_view value) {
  using namespace internal;
  const std::string v(trim(value));
  if (key == "model.kind") {
    cfg.kind = parse_model_kind(v);
  } else if (key == "model.sigma") {
    cfg.sigma = to_double(key, v);
    if (!(cfg.sigma > 0.0) || !std::isfinite(cfg.sigma)) throw bad_value(key, v, "must be positive");
  } else if (key == "model.missing_prob") {
    cfg.missing_prob = to_double(key, v);
    if (!(cfg.missing_prob >= 0.0 && cfg.missing_prob < 1.0)) throw bad_value(key, v, "must lie in [0,1)");
  } else if (key == "data.n") {
    cfg.n = to_counts(key, v);
    for (auto n : cfg.n)
      if (n < 2) throw bad_value(key, v, "every n must be >= 2");
  } else if (key == "data.d") {
    cfg.d = to_counts(key, v);
    for (auto d : cfg.d)
      if (d < 1) throw bad_value(key, v, "every d must be >= 1");
  } else if (key == "data.snr") {
    cfg.snr = to_double(key, v);
    if (!(cfg.snr > 0.0) || !std::isfinite(cfg.snr)) throw bad_value(key, v, "must be positive");
  } else if (key == "run.algorithm") {
    cfg.algorithms.clear();
    for (auto c : list_cells(key, v)) {
      if (std::find(std::begin(kAlgorithms), std::end(kAlgorithms), c) == std::end(kAlgorithms))
        throw bad_value(key, c, "expected em, clipped, dpgem or dpem");
      cfg.algorithms.emplace_back(c);
    }
  } else if (key == "run.T") {
    cfg.T.clear();
    for (auto c : list_cells(key, v))
      cfg.T.push_back(c == "auto" ? ExperimentConfig::kAutoT : static_cast<std::size_t>(to_u64(key, c)));
  } else if (key == "run.eta") {
    cfg.eta = to_double(key, v);
    if (!(cfg.eta > 0.0)) throw bad_value(key, v, "must be positive");
  } else if (key == "run.clip_C") {
    cfg.clip = to_doubles(key, v);
    for (double c : cfg.clip)
      if (!(c > 0.0)) throw bad_value(key, v, "every C must be positive");
  } else if (key == "run.tau") {
    if (v == "auto") {
      cfg.tau.reset();
    } else {
      cfg.tau = to_double(key, v);
      if (!(*cfg.tau > 0.0)) throw bad_value(key, v, "must be positive or auto");
    }
  } else if (key == "run.tau_multiplier") {
    cfg.tau_multiplier = to_double(key, v);
    if (!(cfg.tau_multiplier > 0.0)) throw bad_value(key, v, "must be positive");
  } else if (key == "run.zeta") {
    cfg.zeta = to_double(key, v);
    if (!(cfg.zeta > 0.0 && cfg.zeta < 1.0)) throw bad_value(key, v, "must lie in (0,1)");
  } else if (key == "run.shuffle") {
    cfg.shuffle = to_bool(key, v);
  } else if (key == "run.init") {
    if (v == "aligned") cfg.aligned_init = true;
    else if (v == "random") cfg.aligned_init = false;
    else throw bad_value(key, v, "expected aligned or random");
  } else if (key == "privacy.eps") {
    cfg.eps = to_doubles(key, v);
    for (double e : cfg.eps)
      if (!(e > 0.0) || !std::isfinite(e)) throw bad_value(key, v, "every eps must be positive");
  } else if (key == "privacy.delta") {
    if (v.rfind("n_power(", 0) == 0 && v.back() == ')') {
      cfg.delta.reset();
      cfg.delta_power = to_double(key, std::string_view(v).substr(8, v.size() - 9));
      if (!(cfg.delta_power > 0.0)) throw bad_value(key, v, "power must be positive");
    } else {
      cfg.delta = to_double(key, v);
      if (!(*cfg.delta > 0.0 && *cfg.delta < 1.0)) throw bad_value(key, v, "must lie in (0,1) or be n_power(p)");
    }
  } else if (key == "seeds") {
    cfg.seeds = to_seeds(key, v);
  } else if (key == "output.path") {
    cfg.output = v;
  } else if (key == "threads") {
    cfg.threads = static_cast<std::size_t>(to_u64(key, v));
    if (cfg.threads < 1) throw bad_value(key, v, "must be >= 1");
  } else if (key == "timing") {
    cfg.timing = to_bool(key, v);
  } else {
    throw ConfigError("unknown configuration key '" + key + "'");
  }
  cfg.explicit_keys.insert(key);
}

inline void load_config(std::istream& in, ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> entries;
  try {
    entries = parse_key_values(in);
  } catch (const ParseError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  for (const auto& [k, v] : entries) apply_setting(cfg, k, v);
}

}  // namespace dpem::bench

#endif  // DPEM_BENCH_CONFIG_HPP_
