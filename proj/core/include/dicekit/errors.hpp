// Copyright 2026 The dicekit Authors
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

#ifndef DICEKIT_ERRORS_HPP_
#define DICEKIT_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace dicekit {

// Invalid sizes, out-of-range hyperparameters, shape mismatches.
class ParameterError : public std::invalid_argument {
 public:
  explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

// Inputs that are well-formed but violate a solver precondition.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

// Singular systems, failed root brackets.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed JSON / CSV input. Carries the offending line when known.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what, long line = -1)
      : std::runtime_error(line >= 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

}  // namespace dicekit

#endif  // DICEKIT_ERRORS_HPP_
