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

#include "fedsim/sampling.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedsim/errors.h"

namespace fedsim {

std::string to_string(SamplingKind kind) {
  switch (kind) {
    case SamplingKind::kFull:
      return "full";
    case SamplingKind::kWithReplacement:
      return "with_replacement";
    case SamplingKind::kWithoutReplacement:
      return "without_replacement";
  }
  return "unknown";
}

SamplingKind parse_sampling_kind(const std::string& name) {
  if (name == "full") return SamplingKind::kFull;
  if (name == "with_replacement" || name == "strategy1") return SamplingKind::kWithReplacement;
  if (name == "without_replacement" || name == "strategy2") return SamplingKind::kWithoutReplacement;
  throw ConfigError("unknown sampling '" + name + "' (expected full, with_replacement or without_replacement)");
}

SamplingStrategy SamplingStrategy::full(std::size_t m) { return {SamplingKind::kFull, m, m, {}}; }

SamplingStrategy SamplingStrategy::with_replacement(std::size_t m, std::size_t n) {
  return {SamplingKind::kWithReplacement, m, n, {}};
}

SamplingStrategy SamplingStrategy::without_replacement(std::size_t m, std::size_t n) {
  return {SamplingKind::kWithoutReplacement, m, n, {}};
}

void SamplingStrategy::validate() const {
  if (num_workers == 0) throw ConfigError("sampling: m must be positive");
  if (kind == SamplingKind::kFull) {
    if (num_participants != num_workers) throw ConfigError("sampling: full participation requires n = m");
    if (!round_counts.empty()) throw ConfigError("sampling: round counts need a partial strategy");
    return;
  }
  if (num_participants == 0 || num_participants > num_workers) {
    throw ConfigError("sampling: n must lie in (0, m], got n=" + std::to_string(num_participants) +
                      " m=" + std::to_string(num_workers));
  }
  for (std::size_t count : round_counts) {
    if (count < num_participants) throw ConfigError("sampling: round count below n");
    if (kind == SamplingKind::kWithoutReplacement && count > num_workers) {
      throw ConfigError("sampling: round count above m without replacement");
    }
  }
}

std::size_t SamplingStrategy::count_for_round(std::uint64_t round) const {
  if (round_counts.empty()) return num_participants;
  return round_counts[round % round_counts.size()];
}

ParticipantSet sample(const SamplingStrategy& strategy, std::uint64_t round, RngStream stream) {
  strategy.validate();
  const std::size_t m = strategy.num_workers;
  ParticipantSet out;
  switch (strategy.kind) {
    case SamplingKind::kFull:
      out.resize(m);
      std::iota(out.begin(), out.end(), 0);
      return out;
    case SamplingKind::kWithReplacement: {
      const std::size_t n = strategy.count_for_round(round);
      out.resize(n);
      for (auto& w : out) w = stream.uniform_index(m);
      break;
    }
    case SamplingKind::kWithoutReplacement: {
      const std::size_t n = strategy.count_for_round(round);
      // Partial Fisher-Yates: the first n slots are a uniform n-subset.
      std::vector<std::size_t> pool(m);
      std::iota(pool.begin(), pool.end(), 0);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + stream.uniform_index(m - i);
        std::swap(pool[i], pool[j]);
      }
      out.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
      break;
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

ParticipantSet sample(const SamplingStrategy& strategy, std::uint64_t round, std::uint64_t root_seed) {
  return sample(strategy, round, derive_stream(root_seed, round, kNoIndex, 0, StreamPurpose::kSampling));
}

ParamVector aggregate(const std::map<std::size_t, ParamVector>& deltas, const ParticipantSet& participants) {
  if (participants.empty()) throw ConfigError("aggregate: empty participant set");
  ParamVector sum;
  for (std::size_t w : participants) {
    const auto it = deltas.find(w);
    if (it == deltas.end()) throw ConfigError("aggregate: missing delta for worker " + std::to_string(w));
    if (sum.empty()) {
      sum = ParamVector(it->second.size(), 0.0);
    }
    require_same_dim(sum, it->second, "aggregate");
    for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += it->second[j];
  }
  const auto count = static_cast<double>(participants.size());
  for (double& v : sum.values()) v /= count;
  require_finite(sum, "aggregate");
  return sum;
}

namespace {

std::map<std::size_t, ParamVector> as_map(std::span<const ParamVector> deltas) {
  std::map<std::size_t, ParamVector> out;
  for (std::size_t i = 0; i < deltas.size(); ++i) out.emplace(i, deltas[i]);
  return out;
}

}  // namespace

ParamVector exact_expected_aggregate(const SamplingStrategy& strategy, std::span<const ParamVector> deltas) {
  strategy.validate();
  const std::size_t m = strategy.num_workers;
  const std::size_t n = strategy.num_participants;
  if (deltas.size() != m) throw ConfigError("exact_expected_aggregate: need one delta per worker");
  const auto table = as_map(deltas);
  ParamVector total(deltas.front().size(), 0.0);
  std::size_t outcomes = 0;
  auto accumulate = [&](const ParticipantSet& s) {
    const ParamVector agg = aggregate(table, s);
    for (std::size_t j = 0; j < total.size(); ++j) total[j] += agg[j];
    ++outcomes;
  };

  switch (strategy.kind) {
    case SamplingKind::kFull: {
      ParticipantSet all(m);
      std::iota(all.begin(), all.end(), 0);
      accumulate(all);
      break;
    }
    case SamplingKind::kWithReplacement: {
      // Odometer over [m]^n; each ordered draw has probability m^-n.
      ParticipantSet draw(n, 0);
      while (true) {
        ParticipantSet sorted = draw;
        std::sort(sorted.begin(), sorted.end());
        accumulate(sorted);
        std::size_t pos = 0;
        while (pos < n && ++draw[pos] == m) draw[pos++] = 0;
        if (pos == n) break;
      }
      break;
    }
    case SamplingKind::kWithoutReplacement: {
      // Lexicographic n-combinations; each subset has probability 1/C(m, n).
      ParticipantSet subset(n);
      std::iota(subset.begin(), subset.end(), 0);
      while (true) {
        accumulate(subset);
        std::size_t i = n;
        while (i > 0 && subset[i - 1] == m - n + (i - 1)) --i;
        if (i == 0) break;
        ++subset[i - 1];
        for (std::size_t j = i; j < n; ++j) subset[j] = subset[j - 1] + 1;
      }
      break;
    }
  }
  for (double& v : total.values()) v /= static_cast<double>(outcomes);
  return total;
}

UnbiasednessReport verify_unbiasedness(const SamplingStrategy& strategy, std::span<const ParamVector> deltas,
                                       std::size_t num_trials, std::uint64_t root_seed) {
  strategy.validate();
  if (deltas.size() != strategy.num_workers) throw ConfigError("verify_unbiasedness: need one delta per worker");
  if (num_trials < 2) throw ConfigError("verify_unbiasedness: need at least two trials");
  const auto table = as_map(deltas);
  const std::size_t d = deltas.front().size();

  UnbiasednessReport report;
  report.trials = num_trials;
  report.target = mean(deltas);

  // Welford accumulation keeps the variance stable for 1e5+ trials.
  std::vector<double> running_mean(d, 0.0), m2(d, 0.0);
  for (std::size_t trial = 0; trial < num_trials; ++trial) {
    const ParamVector agg = aggregate(table, sample(strategy, trial, root_seed));
    const auto k = static_cast<double>(trial + 1);
    for (std::size_t j = 0; j < d; ++j) {
      const double delta = agg[j] - running_mean[j];
      running_mean[j] += delta / k;
      m2[j] += delta * (agg[j] - running_mean[j]);
    }
  }
  report.mc_mean = ParamVector(running_mean);
  report.deviation = ParamVector(d);
  report.tolerance = ParamVector(d);
  report.passed = true;
  const auto trials = static_cast<double>(num_trials);
  for (std::size_t j = 0; j < d; ++j) {
    const double std_dev = std::sqrt(m2[j] / (trials - 1.0));
    report.deviation[j] = std::abs(report.mc_mean[j] - report.target[j]);
    report.tolerance[j] = std::max(4.0 * std_dev / std::sqrt(trials),
                                   1e-12 * std::max(1.0, std::abs(report.target[j])));
    if (report.deviation[j] > report.tolerance[j]) report.passed = false;
  }
  return report;
}

}  // namespace fedsim
