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

#include "fedsim/param.h"

#include <cmath>
#include <string>

#include "fedsim/errors.h"

namespace fedsim {

void ParamVector::add_scaled(double alpha, const ParamVector& other) {
  require_same_dim(*this, other, "add_scaled");
  for (std::size_t j = 0; j < data_.size(); ++j) data_[j] += alpha * other.data_[j];
  require_finite(*this, "add_scaled");
}

void ParamVector::scale(double alpha) {
  for (double& v : data_) v *= alpha;
  require_finite(*this, "scale");
}

void require_same_dim(const ParamVector& a, const ParamVector& b, const char* context) {
  if (a.size() != b.size()) {
    throw ConfigError(std::string(context) + ": dimension mismatch (" +
                      std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
}

bool all_finite(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool all_finite(const ParamVector& x) { return all_finite(x.values()); }

void require_finite(const ParamVector& x, const char* context) {
  if (!all_finite(x)) throw NumericError(std::string(context) + ": non-finite value");
}

ParamVector axpy(double alpha, const ParamVector& x, const ParamVector& y) {
  require_same_dim(x, y, "axpy");
  ParamVector out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = alpha * x[j] + y[j];
  require_finite(out, "axpy");
  return out;
}

ParamVector operator+(const ParamVector& a, const ParamVector& b) {
  require_same_dim(a, b, "operator+");
  ParamVector out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = a[j] + b[j];
  require_finite(out, "operator+");
  return out;
}

ParamVector operator-(const ParamVector& a, const ParamVector& b) {
  require_same_dim(a, b, "operator-");
  ParamVector out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = a[j] - b[j];
  require_finite(out, "operator-");
  return out;
}

ParamVector scaled(double alpha, const ParamVector& x) {
  ParamVector out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = alpha * x[j];
  require_finite(out, "scaled");
  return out;
}

double dot(const ParamVector& a, const ParamVector& b) {
  require_same_dim(a, b, "dot");
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

double sq_norm(const ParamVector& x) {
  double s = 0.0;
  for (double v : x.values()) s += v * v;
  return s;
}

double norm(const ParamVector& x) { return std::sqrt(sq_norm(x)); }

ParamVector mean(std::span<const ParamVector> vectors) {
  if (vectors.empty()) throw ConfigError("mean: no vectors");
  ParamVector sum = vectors.front();
  for (std::size_t i = 1; i < vectors.size(); ++i) {
    require_same_dim(sum, vectors[i], "mean");
    for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += vectors[i][j];
  }
  const auto count = static_cast<double>(vectors.size());
  for (std::size_t j = 0; j < sum.size(); ++j) sum[j] /= count;
  require_finite(sum, "mean");
  return sum;
}

}  // namespace fedsim
