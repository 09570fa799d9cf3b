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

// Text formats of the benchmark harness.
//
//   dataset CSV     GMM: y1,...,yd   MRM/RMC: x1,...,xd,y (RMC: hidden x cells
//                   are empty)
//   labeled CSV     f1,...,fd,label with label in {0,1}
//   metadata        key = value lines next to a dataset (<dataset>.meta)
//   result rows     model,algorithm,eps,delta,d,n,T,C,seed,iter,error,wall_ms
//   summary         model,algorithm,eps,delta,d,n,T,C,iter,runs,median,q25,q75
//
// Numbers are printed in shortest round-trip form, so parse(print(x)) == x.

#ifndef DPEM_BENCH_CSV_HPP_
#define DPEM_BENCH_CSV_HPP_

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <tuple>
#include <vector>

#include "dpem/errors.hpp"
#include "dpem/models.hpp"
#include "dpem/numeric.hpp"

namespace dpem::bench {

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(std::string_view text, std::size_t line) {
  const std::string_view s = trim(text);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError("expected a number, got '" + std::string(s) + "'", line);
  return v;
}

template <typename Int>
Int parse_int(std::string_view text, std::size_t line) {
  const std::string_view s = trim(text);
  Int v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError("expected an integer, got '" + std::string(s) + "'", line);
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

// Reads the next line, dropping a trailing '\r'. Returns false at EOF.
inline bool next_line(std::istream& in, std::string& line, std::size_t& lineno) {
  if (!std::getline(in, line)) return false;
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

inline std::string join_doubles(std::span<const double> v, char sep = ',') {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += format_double(v[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Datasets.

inline void write_dataset(std::ostream& out, const ObservationSet& data) {
  data.validate();
  const std::size_t d = data.d;
  const char* col = data.kind == ModelKind::kGmm ? "y" : "x";
  for (std::size_t j = 0; j < d; ++j) out << (j ? "," : "") << col << (j + 1);
  if (data.kind != ModelKind::kGmm) out << ",y";
  out << '\n';
  for (std::size_t i = 0; i < data.n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      if (j) out << ',';
      if (data.kind == ModelKind::kRmc && !data.observed[i * d + j]) continue;
      out << format_double(data.features[i * d + j]);
    }
    if (data.kind != ModelKind::kGmm) out << ',' << format_double(data.responses[i]);
    out << '\n';
  }
}

inline ObservationSet read_dataset(std::istream& in, ModelKind kind) {
  std::string line;
  std::size_t lineno = 0;
  if (!next_line(in, line, lineno)) throw ParseError("empty dataset", 1);
  const auto header = split(line);
  const bool has_y = kind != ModelKind::kGmm;
  if (header.size() < (has_y ? 2u : 1u)) throw ParseError("header has too few columns", lineno);
  const std::size_t d = header.size() - (has_y ? 1 : 0);
  const char* col = has_y ? "x" : "y";
  for (std::size_t j = 0; j < d; ++j)
    if (trim(header[j]) != col + std::to_string(j + 1))
      throw ParseError("unexpected header column '" + std::string(header[j]) + "'", lineno);
  if (has_y && trim(header.back()) != "y") throw ParseError("last header column must be 'y'", lineno);

  ObservationSet data;
  data.kind = kind;
  data.d = d;
  while (next_line(in, line, lineno)) {
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " cells, got " +
                           std::to_string(cells.size()), lineno);
    for (std::size_t j = 0; j < d; ++j) {
      if (kind == ModelKind::kRmc && trim(cells[j]).empty()) {
        data.features.push_back(0.0);
        data.observed.push_back(0);
        continue;
      }
      data.features.push_back(parse_double(cells[j], lineno));
      if (kind == ModelKind::kRmc) data.observed.push_back(1);
    }
    if (has_y) data.responses.push_back(parse_double(cells[d], lineno));
    ++data.n;
  }
  if (data.n == 0) throw DataError("dataset has no rows");
  return data;
}

inline std::vector<LabeledRow> read_labeled(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!next_line(in, line, lineno)) throw ParseError("empty labeled file", 1);
  const auto header = split(line);
  const auto label_it =
      std::find_if(header.begin(), header.end(), [](std::string_view h) { return trim(h) == "label"; });
  if (label_it == header.end()) throw ConfigError("labeled CSV is missing the 'label' column");
  const std::size_t label_col = static_cast<std::size_t>(label_it - header.begin());
  if (header.size() < 2) throw ParseError("labeled CSV needs at least one feature column", lineno);

  std::vector<LabeledRow> rows;
  while (next_line(in, line, lineno)) {
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " cells, got " +
                           std::to_string(cells.size()), lineno);
    LabeledRow row;
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (j == label_col) {
        const int label = parse_int<int>(cells[j], lineno);
        if (label != 0 && label != 1) throw ParseError("label must be 0 or 1", lineno);
        row.label = label;
      } else {
        row.features.push_back(parse_double(cells[j], lineno));
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// key = value metadata.

using KeyValues = std::map<std::string, std::string>;

// Parses `key = value` lines. `# ...` comments and blank lines are skipped;
// `[section]` prefixes later keys with "section.".
inline std::vector<std::pair<std::string, std::string>> parse_key_values(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line, section;
  std::size_t lineno = 0;
  while (next_line(in, line, lineno)) {
    std::string_view s = trim(line);
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = trim(s.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ParseError("unterminated section header", lineno);
      section = std::string(trim(s.substr(1, s.size() - 2)));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", lineno);
    const std::string key(trim(s.substr(0, eq)));
    if (key.empty()) throw ParseError("empty key", lineno);
    out.emplace_back(section.empty() ? key : section + "." + key, std::string(trim(s.substr(eq + 1))));
  }
  return out;
}

struct DatasetMeta {
  ModelKind kind = ModelKind::kGmm;
  std::size_t n = 0;
  std::size_t d = 0;
  double sigma = 1.0;
  double missing_prob = 0.0;
  double snr = 0.0;
  std::uint64_t seed = 0;
  Vec beta_star;
  KeyValues extra;  // provenance fields (preprocessing diagnostics)
};

inline void write_meta(std::ostream& out, const DatasetMeta& m) {
  out << "model = " << to_string(m.kind) << '\n'
      << "n = " << m.n << '\n'
      << "d = " << m.d << '\n'
      << "sigma = " << format_double(m.sigma) << '\n'
      << "missing_prob = " << format_double(m.missing_prob) << '\n'
      << "snr = " << format_double(m.snr) << '\n'
      << "seed = " << m.seed << '\n'
      << "beta_star = " << join_doubles(m.beta_star) << '\n';
  for (const auto& [k, v] : m.extra) out << k << " = " << v << '\n';
}

inline DatasetMeta read_meta(std::istream& in) {
  DatasetMeta m;
  bool have_beta = false, have_sigma = false, have_model = false;
  for (const auto& [k, v] : parse_key_values(in)) {
    if (k == "model") {
      m.kind = parse_model_kind(v);
      have_model = true;
    } else if (k == "n") {
      m.n = parse_int<std::size_t>(v, 0);
    } else if (k == "d") {
      m.d = parse_int<std::size_t>(v, 0);
    } else if (k == "sigma") {
      m.sigma = parse_double(v, 0);
      have_sigma = true;
    } else if (k == "missing_prob") {
      m.missing_prob = parse_double(v, 0);
    } else if (k == "snr") {
      m.snr = parse_double(v, 0);
    } else if (k == "seed") {
      m.seed = parse_int<std::uint64_t>(v, 0);
    } else if (k == "beta_star") {
      for (auto cell : split(v)) m.beta_star.push_back(parse_double(cell, 0));
      have_beta = true;
    } else {
      m.extra[k] = v;
    }
  }
  if (!have_model || !have_beta || !have_sigma)
    throw DataError("metadata must define model, sigma and beta_star");
  if (m.d != 0 && m.beta_star.size() != m.d) throw DataError("metadata: beta_star length differs from d");
  m.d = m.beta_star.size();
  return m;
}

// ---------------------------------------------------------------------------
// Result rows.

struct ResultRow {
  std::string model;
  std::string algorithm;
  double eps = 0.0;
  double delta = 0.0;
  std::size_t d = 0;
  std::size_t n = 0;
  std::size_t T = 0;
  double C = 0.0;
  std::uint64_t seed = 0;
  std::size_t iter = 0;
  double error = 0.0;
  double wall_ms = 0.0;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

inline constexpr std::string_view kResultHeader =
    "model,algorithm,eps,delta,d,n,T,C,seed,iter,error,wall_ms";

inline void write_result_header(std::ostream& out) { out << kResultHeader << '\n'; }

inline void write_result_row(std::ostream& out, const ResultRow& r) {
  out << r.model << ',' << r.algorithm << ',' << format_double(r.eps) << ','
      << format_double(r.delta) << ',' << r.d << ',' << r.n << ',' << r.T << ','
      << format_double(r.C) << ',' << r.seed << ',' << r.iter << ',' << format_double(r.error)
      << ',' << format_double(r.wall_ms) << '\n';
}

inline std::vector<ResultRow> read_result_rows(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!next_line(in, line, lineno)) throw ParseError("empty result file", 1);
  if (trim(line) != kResultHeader) throw ParseError("unexpected result header", lineno);
  std::vector<ResultRow> rows;
  while (next_line(in, line, lineno)) {
    if (trim(line).empty()) continue;
    const auto c = split(line);
    if (c.size() != 12) throw ParseError("expected 12 cells, got " + std::to_string(c.size()), lineno);
    ResultRow r;
    r.model = std::string(trim(c[0]));
    r.algorithm = std::string(trim(c[1]));
    r.eps = parse_double(c[2], lineno);
    r.delta = parse_double(c[3], lineno);
    r.d = parse_int<std::size_t>(c[4], lineno);
    r.n = parse_int<std::size_t>(c[5], lineno);
    r.T = parse_int<std::size_t>(c[6], lineno);
    r.C = parse_double(c[7], lineno);
    r.seed = parse_int<std::uint64_t>(c[8], lineno);
    r.iter = parse_int<std::size_t>(c[9], lineno);
    r.error = parse_double(c[10], lineno);
    r.wall_ms = parse_double(c[11], lineno);
    if (r.model.empty() || r.algorithm.empty()) throw ParseError("empty model or algorithm", lineno);
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Summary.

// Linear-interpolation quantile of a non-empty sample.
inline double quantile(Vec v, double q) {
  if (v.empty()) throw DomainError("quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct SummaryRow {
  std::string model;
  std::string algorithm;
  double eps = 0.0;
  double delta = 0.0;
  std::size_t d = 0;
  std::size_t n = 0;
  std::size_t T = 0;
  double C = 0.0;
  std::size_t iter = 0;
  std::size_t runs = 0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

inline constexpr std::string_view kSummaryHeader =
    "model,algorithm,eps,delta,d,n,T,C,iter,runs,median,q25,q75";

// Groups rows by (cell, iter) across seeds. Cells keep their order of first
// appearance; iterations are ascending within a cell.
inline std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
  using CellKey = std::tuple<std::string, std::string, double, double, std::size_t, std::size_t,
                             std::size_t, double>;
  std::vector<CellKey> order;
  std::map<CellKey, std::map<std::size_t, Vec>> groups;
  for (const auto& r : rows) {
    CellKey key{r.model, r.algorithm, r.eps, r.delta, r.d, r.n, r.T, r.C};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second[r.iter].push_back(r.error);
  }
  std::vector<SummaryRow> out;
  for (const auto& key : order) {
    for (const auto& [iter, errors] : groups[key]) {
      SummaryRow s;
      std::tie(s.model, s.algorithm, s.eps, s.delta, s.d, s.n, s.T, s.C) = key;
      s.iter = iter;
      s.runs = errors.size();
      s.median = quantile(errors, 0.5);
      s.q25 = quantile(errors, 0.25);
      s.q75 = quantile(errors, 0.75);
      out.push_back(std::move(s));
    }
  }
  return out;
}

inline void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << kSummaryHeader << '\n';
  for (const auto& s : rows) {
    out << s.model << ',' << s.algorithm << ',' << format_double(s.eps) << ','
        << format_double(s.delta) << ',' << s.d << ',' << s.n << ',' << s.T << ','
        << format_double(s.C) << ',' << s.iter << ',' << s.runs << ',' << format_double(s.median)
        << ',' << format_double(s.q25) << ',' << format_double(s.q75) << '\n';
  }
}

}  // namespace dpem::bench

#endif  // DPEM_BENCH_CSV_HPP_
