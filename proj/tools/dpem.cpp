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

// dpem: dataset generation, experiment runs and sweeps, preprocessing of
// labeled data, and CSV reporting.
//
// Exit codes: 0 success, 2 configuration error, 3 data error,
// 4 numeric non-convergence.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dpem/bench/config.hpp"
#include "dpem/bench/csv.hpp"
#include "dpem/bench/harness.hpp"
#include "dpem/errors.hpp"

namespace {

using namespace dpem;
using namespace dpem::bench;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> threads;
  bool no_noise = false;
  bool timing = false;
  std::string data;
  std::string meta;
  std::string input;
  std::map<std::string, std::string> overrides;
};

ExperimentConfig build_config(const Options& o) {
  ExperimentConfig cfg;
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw ConfigError("cannot read config '" + o.config_path + "'");
    load_config(in, cfg);
  }
  for (const auto& [k, v] : o.overrides) apply_setting(cfg, k, v);
  if (o.seed) apply_setting(cfg, "seeds", std::to_string(*o.seed));
  if (o.threads) apply_setting(cfg, "threads", std::to_string(*o.threads));
  if (o.timing) cfg.timing = true;
  if (o.no_noise) {
    cfg.add_noise = false;
    std::cerr << "dpem: WARNING: --unsafe-no-noise disables privacy noise; output is not private\n";
  }
  if (!o.out.empty()) cfg.output = o.out;
  return cfg;
}

// Writes through `fn` to cfg.output, or to stdout when no path is set.
template <typename Fn>
void with_output(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out = open_output(path);
  fn(out);
  if (!out) throw ConfigError("failed writing '" + path + "'");
}

void require(const std::string& value, const char* flag, const char* cmd) {
  if (value.empty()) throw ConfigError(std::string(cmd) + " needs " + flag);
}

int dispatch(const std::string& cmd, const Options& o) {
  const ExperimentConfig cfg = build_config(o);
  if (cmd == "gen") {
    require(cfg.output, "--out (or output.path)", "gen");
    const std::string meta_path = o.meta.empty() ? cfg.output + ".meta" : o.meta;
    std::ofstream data_out = open_output(cfg.output);
    std::ofstream meta_out = open_output(meta_path);
    cmd_gen(cfg, data_out, meta_out);
  } else if (cmd == "run") {
    require(o.data, "--data", "run");
    std::ifstream meta_in = open_input(o.meta.empty() ? o.data + ".meta" : o.meta);
    const DatasetMeta meta = read_meta(meta_in);
    std::ifstream data_in = open_input(o.data);
    const ObservationSet data = read_dataset(data_in, meta.kind);
    with_output(cfg.output, [&](std::ostream& out) { cmd_run(cfg, data, meta, out); });
  } else if (cmd == "sweep") {
    with_output(cfg.output, [&](std::ostream& out) { cmd_sweep(cfg, out); });
  } else if (cmd == "preprocess") {
    require(o.input, "--input", "preprocess");
    require(cfg.output, "--out", "preprocess");
    std::ifstream in = open_input(o.input);
    std::ofstream data_out = open_output(cfg.output);
    std::ofstream meta_out = open_output(o.meta.empty() ? cfg.output + ".meta" : o.meta);
    cmd_preprocess(in, data_out, meta_out);
  } else if (cmd == "report") {
    require(o.input, "--input", "report");
    std::ifstream in = open_input(o.input);
    with_output(cfg.output, [&](std::ostream& out) { cmd_report(in, out); });
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dpem: private gradient EM experiments"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config_path, "key = value configuration file");
  app.add_option("--seed", o.seed, "single seed (overrides seeds)");
  app.add_option("--out", o.out, "output path (overrides output.path)");
  app.add_option("--threads", o.threads, "worker threads (overrides threads)");
  app.add_flag("--unsafe-no-noise", o.no_noise, "test only: disable privacy noise");
  app.add_flag("--timing", o.timing, "record wall-clock time per run in wall_ms");
  app.add_option("--data", o.data, "dataset CSV (run)");
  app.add_option("--meta", o.meta, "metadata path (default: <dataset>.meta)");
  app.add_option("--input", o.input, "labeled CSV (preprocess) or result CSV (report)");
  for (std::string_view key : kConfigKeys) {
    if (key == "threads" || key == "timing") continue;  // dedicated flags above
    const std::string k(key);
    app.add_option_function<std::string>(
        "--" + k, [&o, k](const std::string& v) { o.overrides[k] = v; }, "override " + k);
  }
  app.fallthrough();
  app.add_subcommand("gen", "generate a synthetic dataset and its metadata");
  app.add_subcommand("run", "run the configured algorithms on a dataset");
  app.add_subcommand("sweep", "run the configured grid on synthetic data");
  app.add_subcommand("preprocess", "turn labeled rows into a GMM dataset");
  app.add_subcommand("report", "summarize result rows per cell and iteration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    return dispatch(cmd, o);
  } catch (const ConvergenceError& e) {
    std::cerr << "dpem: " << e.what() << '\n';
    return 4;
  } catch (const DataError& e) {
    std::cerr << "dpem: data error: " << e.what() << '\n';
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "dpem: config error: " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "dpem: invalid argument: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "dpem: error: " << e.what() << '\n';
    return 2;
  }
}
