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

// Independent reference computations shared by the test suites. Nothing here
// calls into the code paths it is used to check.

#ifndef FEDSIM_TESTS_ORACLES_H_
#define FEDSIM_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace fedsim::oracle {

using Vec = std::vector<double>;

// Central differences (f(x + h e_j) - f(x - h e_j)) / 2h for the listed
// coordinates; other entries stay 0.
inline Vec finite_difference(const std::function<double(const Vec&)>& f, const Vec& x, double h,
                             const std::vector<std::size_t>& coords) {
  Vec out(x.size(), 0.0);
  Vec probe = x;
  for (std::size_t j : coords) {
    probe[j] = x[j] + h;
    const double up = f(probe);
    probe[j] = x[j] - h;
    const double down = f(probe);
    probe[j] = x[j];
    out[j] = (up - down) / (2.0 * h);
  }
  return out;
}

// |a - b| / max(|a|, |b|, tiny) over the listed coordinates.
inline double relative_error(const Vec& a, const Vec& b, const std::vector<std::size_t>& coords) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t j : coords) {
    diff += (a[j] - b[j]) * (a[j] - b[j]);
    na += a[j] * a[j];
    nb += b[j] * b[j];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-300});
}

// One full-participation round on diagonal quadratics with exact
// gradients, in closed form: worker i ends its K steps at
// r^K x + eta_L * sum_{j<K} r^j b_i with r = 1 - eta_L a_i (per coordinate).
inline Vec quadratic_round(const std::vector<Vec>& curvature, const std::vector<Vec>& linear, const Vec& x,
                           int K, double eta_L, double eta) {
  const std::size_t m = curvature.size();
  Vec avg_delta(x.size(), 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double r = 1.0 - eta_L * curvature[i][j];
      double geometric = 0.0;
      for (int k = 0; k < K; ++k) geometric += std::pow(r, k);
      const double end = std::pow(r, K) * x[j] + eta_L * geometric * linear[i][j];
      avg_delta[j] += (end - x[j]) / static_cast<double>(m);
    }
  }
  Vec next = x;
  for (std::size_t j = 0; j < x.size(); ++j) next[j] += eta * avg_delta[j];
  return next;
}

// Every size-n subset of [m] as a bit mask.
inline std::vector<std::vector<std::size_t>> all_subsets(std::size_t m, std::size_t n) {
  std::vector<std::vector<std::size_t>> out;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcountll(mask)) != n) continue;
    std::vector<std::size_t> s;
    for (std::size_t i = 0; i < m; ++i) {
      if (mask >> i & 1) s.push_back(i);
    }
    out.push_back(s);
  }
  return out;
}

// Every ordered sequence of n draws from [m].
inline std::vector<std::vector<std::size_t>> all_sequences(std::size_t m, std::size_t n) {
  std::size_t total = 1;
  for (std::size_t k = 0; k < n; ++k) total *= m;
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t code = 0; code < total; ++code) {
    std::vector<std::size_t> s(n);
    std::size_t rest = code;
    for (std::size_t k = 0; k < n; ++k) {
      s[k] = rest % m;
      rest /= m;
    }
    out.push_back(s);
  }
  return out;
}

// Mean over outcomes of the multiset average of deltas.
inline Vec expected_average(const std::vector<std::vector<std::size_t>>& outcomes, const std::vector<Vec>& deltas) {
  Vec out(deltas.front().size(), 0.0);
  for (const auto& s : outcomes) {
    for (std::size_t j = 0; j < out.size(); ++j) {
      double avg = 0.0;
      for (std::size_t i : s) avg += deltas[i][j];
      out[j] += avg / static_cast<double>(s.size());
    }
  }
  for (double& v : out) v /= static_cast<double>(outcomes.size());
  return out;
}

}  // namespace fedsim::oracle

#endif  // FEDSIM_TESTS_ORACLES_H_
