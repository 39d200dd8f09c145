// Copyright 2026 The XSDC Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef XSDC_ERRORS_HPP_
#define XSDC_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace xsdc {

// Base of every error raised by the library. The CLI maps the concrete
// subclasses onto its exit-code contract.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller passed arguments that violate a documented precondition.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// An object was used against its contract (e.g. a feature cache whose
// inputs changed since the forward pass).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Feature normalization is undefined because the centered features vanish.
class ScaleUndefined : public Error {
 public:
  using Error::Error;
};

// Instance exceeds a hard size guard (brute-force enumeration).
class Refused : public Error {
 public:
  using Error::Error;
};

// Malformed input file. `line` is 1-based; 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Numerical breakdown: non-finite values or a non-decreasing objective.
// `iteration` is the training or balancing round where it was detected.
class Diverged : public Error {
 public:
  Diverged(const std::string& what, std::size_t iteration)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

}  // namespace xsdc

#endif  // XSDC_ERRORS_HPP_
