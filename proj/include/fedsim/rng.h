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

#ifndef FEDSIM_RNG_H_
#define FEDSIM_RNG_H_

#include <cstdint>
#include <limits>

namespace fedsim {

// What a stream is used for. Part of the stream key, so two purposes at the
// same (round, worker, step) never share draws.
enum class StreamPurpose : std::uint32_t {
  kLocalGradient = 1,
  kSampling = 2,
  kPartition = 3,
  kDataset = 4,
  kInit = 5,
  kInstance = 6,
  kProbe = 7,
  kMonteCarlo = 8,
};

// Coordinate used when a stream is not tied to a worker or a step.
inline constexpr std::uint64_t kNoIndex = std::numeric_limits<std::uint64_t>::max();

// Counter-based generator: the n-th draw is mix(key + n * gamma), i.e. a
// SplitMix64 sequence whose seed is a keyed hash of the stream coordinates.
// Draw n depends only on (key, n), so streams are index-addressable and need
// no shared state between threads. Satisfies UniformRandomBitGenerator.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t key) : key_(key) {}

  std::uint64_t key() const { return key_; }

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer on [0, bound); bound must be positive. Unbiased.
  std::uint64_t uniform_index(std::uint64_t bound);
  // Standard normal via Box-Muller (pure libm, no std::distribution so the
  // sequence does not depend on the standard library vendor).
  double normal();

  // Child stream keyed by this stream's key and `salt`; does not advance this.
  RngStream fork(std::uint64_t salt) const;

  result_type operator()() { return next_u64(); }
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

// Stream for coordinates (root_seed, round, worker, step, purpose). A pure
// function of its arguments.
RngStream derive_stream(std::uint64_t root_seed, std::uint64_t round, std::uint64_t worker,
                        std::uint64_t step, StreamPurpose purpose);

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z);

}  // namespace fedsim

#endif  // FEDSIM_RNG_H_
