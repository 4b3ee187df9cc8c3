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

#ifndef FEDSIM_SAMPLING_H_
#define FEDSIM_SAMPLING_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fedsim/param.h"
#include "fedsim/rng.h"

namespace fedsim {

enum class SamplingKind {
  kFull,
  kWithReplacement,     // "Strategy 1": n i.i.d. uniform draws, duplicates allowed
  kWithoutReplacement,  // "Strategy 2": uniform n-subset
};

std::string to_string(SamplingKind kind);
SamplingKind parse_sampling_kind(const std::string& name);

struct SamplingStrategy {
  SamplingKind kind = SamplingKind::kFull;
  std::size_t num_workers = 0;       // m
  std::size_t num_participants = 0;  // n (equals m for kFull)
  // Optional per-round participant counts (round t uses entry t mod size).
  // Each entry must lie in [n, m] for kWithoutReplacement and be >= n for
  // kWithReplacement; aggregation divides by the realized count.
  std::vector<std::size_t> round_counts;

  static SamplingStrategy full(std::size_t m);
  static SamplingStrategy with_replacement(std::size_t m, std::size_t n);
  static SamplingStrategy without_replacement(std::size_t m, std::size_t n);

  // Throws ConfigError unless 0 < n <= m (and the round counts are valid).
  void validate() const;
  std::size_t count_for_round(std::uint64_t round) const;

  bool operator==(const SamplingStrategy&) const = default;
};

// Multiset of worker indices, sorted ascending.
using ParticipantSet = std::vector<std::size_t>;

// Pure function of (strategy, round, stream key).
ParticipantSet sample(const SamplingStrategy& strategy, std::uint64_t round, RngStream stream);
// Same, with the stream derived from (root_seed, round, kSampling).
ParticipantSet sample(const SamplingStrategy& strategy, std::uint64_t round, std::uint64_t root_seed);

// Uniform average over the multiset: repeated workers count with
// multiplicity. Throws ConfigError when a participant has no delta.
ParamVector aggregate(const std::map<std::size_t, ParamVector>& deltas, const ParticipantSet& participants);

// E_S[aggregate] by enumerating every outcome of the sampler: all C(m, n)
// subsets for kWithoutReplacement, all m^n ordered draws for
// kWithReplacement. Exponential; meant for m, n small.
ParamVector exact_expected_aggregate(const SamplingStrategy& strategy, std::span<const ParamVector> deltas);

struct UnbiasednessReport {
  std::size_t trials = 0;
  ParamVector target;     // (1/m) sum_i delta_i
  ParamVector mc_mean;    // mean of aggregate over trials
  ParamVector deviation;  // |mc_mean - target| per coordinate
  ParamVector tolerance;  // 4 * empirical std / sqrt(trials) per coordinate
  bool passed = false;
};

// Monte Carlo check that the sampled average is an unbiased estimate of the
// full average. Coordinates with zero empirical variance must match to
// 1e-12 relative.
UnbiasednessReport verify_unbiasedness(const SamplingStrategy& strategy, std::span<const ParamVector> deltas,
                                       std::size_t num_trials, std::uint64_t root_seed);

}  // namespace fedsim

#endif  // FEDSIM_SAMPLING_H_
