// Copyright 2026 The rscmjp Authors.
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

#ifndef RSCMJP_ERROR_HPP_
#define RSCMJP_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <vector>

namespace rscmjp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter set or configuration violates one or more invariants.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "invalid parameters:";
    for (const auto& s : v) {
      out += "\n  - ";
      out += s;
    }
    return out;
  }

  std::vector<std::string> violations_;
};

/// A matrix that must be inverted is singular (or numerically so).
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Loewner-ordering precondition failed (e.g. Jx - Jy not positive definite).
class OrderingError : public Error {
 public:
  using Error::Error;
};

/// A fitted regime lost all posterior mass, or a parameter hit the boundary.
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

/// Input/output or parse failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace rscmjp

#endif  // RSCMJP_ERROR_HPP_
