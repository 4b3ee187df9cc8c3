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

#ifndef FEDSIM_PARAM_H_
#define FEDSIM_PARAM_H_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace fedsim {

// Flat model parameter vector. All reductions run left to right over the
// coordinates so results are bit-reproducible regardless of threading.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
  explicit ParamVector(std::vector<double> data) : data_(std::move(data)) {}
  ParamVector(std::initializer_list<double> values) : data_(values) {}

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double operator[](std::size_t j) const { return data_[j]; }
  double& operator[](std::size_t j) { return data_[j]; }

  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  // this += alpha * other
  void add_scaled(double alpha, const ParamVector& other);
  void scale(double alpha);

  bool operator==(const ParamVector&) const = default;

 private:
  std::vector<double> data_;
};

// Throws ConfigError when the two vectors have different dimension.
void require_same_dim(const ParamVector& a, const ParamVector& b, const char* context);

// Throws NumericError naming `context` when any entry is NaN or Inf.
void require_finite(const ParamVector& x, const char* context);
bool all_finite(const ParamVector& x);
bool all_finite(std::span<const double> x);

// Returns alpha * x + y.
ParamVector axpy(double alpha, const ParamVector& x, const ParamVector& y);
ParamVector operator+(const ParamVector& a, const ParamVector& b);
ParamVector operator-(const ParamVector& a, const ParamVector& b);
ParamVector scaled(double alpha, const ParamVector& x);

double dot(const ParamVector& a, const ParamVector& b);
double sq_norm(const ParamVector& x);
double norm(const ParamVector& x);

// Uniform average in index order: (v[0] + v[1] + ...) / v.size().
ParamVector mean(std::span<const ParamVector> vectors);

}  // namespace fedsim

#endif  // FEDSIM_PARAM_H_
