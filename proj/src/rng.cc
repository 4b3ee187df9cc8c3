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

#include "fedsim/rng.h"

#include <cmath>
#include <numbers>

#include "fedsim/errors.h"

namespace fedsim {
namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

std::uint64_t absorb(std::uint64_t h, std::uint64_t v) { return mix64(h ^ mix64(v + kGamma)); }

}  // namespace

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGamma);
}

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t RngStream::uniform_index(std::uint64_t bound) {
  if (bound == 0) throw ConfigError("uniform_index: bound must be positive");
  // Lemire's multiply-shift with rejection.
  std::uint64_t x = next_u64();
  __uint128_t product = static_cast<__uint128_t>(x) * bound;
  auto low = static_cast<std::uint64_t>(product);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      x = next_u64();
      product = static_cast<__uint128_t>(x) * bound;
      low = static_cast<std::uint64_t>(product);
    }
  }
  return static_cast<std::uint64_t>(product >> 64);
}

double RngStream::normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = radius * std::sin(angle);
  has_spare_normal_ = true;
  return radius * std::cos(angle);
}

RngStream RngStream::fork(std::uint64_t salt) const { return RngStream(absorb(key_, salt)); }

RngStream derive_stream(std::uint64_t root_seed, std::uint64_t round, std::uint64_t worker,
                        std::uint64_t step, StreamPurpose purpose) {
  std::uint64_t h = mix64(root_seed ^ 0x6A09E667F3BCC908ULL);
  h = absorb(h, static_cast<std::uint64_t>(purpose));
  h = absorb(h, round);
  h = absorb(h, worker);
  h = absorb(h, step);
  return RngStream(h);
}

}  // namespace fedsim
