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

#ifndef DPEM_ERRORS_HPP_
#define DPEM_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dpem {

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// An iterative method hit its iteration cap. Carries the last iterate so the
// caller can decide whether it is usable.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_value,
                   std::vector<double> last_vector)
      : std::runtime_error(what),
        last_value_(last_value),
        last_vector_(std::move(last_vector)) {}

  double last_value() const { return last_value_; }
  const std::vector<double>& last_vector() const { return last_vector_; }

 private:
  double last_value_;
  std::vector<double> last_vector_;
};

// Inconsistent or invalid experiment configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data that cannot be used: missing labels, malformed rows, too few
// records (CLI exit code 3).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed CSV or key/value text. `line` is 1-based.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace dpem

#endif  // DPEM_ERRORS_HPP_
