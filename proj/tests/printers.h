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

#ifndef FEDSIM_TESTS_PRINTERS_H_
#define FEDSIM_TESTS_PRINTERS_H_

#include <cstddef>
#include <ostream>

#include "fedsim/param.h"

namespace fedsim {

// Readable gtest output for vector comparisons.
inline void PrintTo(const ParamVector& v, std::ostream* os) {
  const auto old = os->precision(17);
  *os << "(";
  for (std::size_t j = 0; j < v.size(); ++j) *os << (j ? ", " : "") << v[j];
  *os << ")";
  os->precision(old);
}

}  // namespace fedsim

#endif  // FEDSIM_TESTS_PRINTERS_H_
