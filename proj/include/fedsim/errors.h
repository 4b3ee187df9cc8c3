// Copyright 2026 The fedsim Authors
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

#ifndef FEDSIM_ERRORS_H_
#define FEDSIM_ERRORS_H_

#include <stdexcept>
#include <string>

namespace fedsim {

// Invalid configuration or mismatched shapes. Not recoverable by retrying.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Malformed input file (IDX, config text).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// A NaN or Inf showed up where finite values are required.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// A learning-rate condition needed by a convergence bound does not hold.
class ConditionError : public std::domain_error {
 public:
  explicit ConditionError(const std::string& what) : std::domain_error(what) {}
};

}  // namespace fedsim

#endif  // FEDSIM_ERRORS_H_
