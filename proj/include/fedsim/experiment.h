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

#ifndef FEDSIM_EXPERIMENT_H_
#define FEDSIM_EXPERIMENT_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedsim/config.h"
#include "fedsim/engine.h"
#include "fedsim/theory.h"

namespace fedsim {

// A single seed's problem instance, ready for the engine.
struct PreparedRun {
  ModelShape shape;
  ObjectiveSet objectives;
  ParamVector x0;
  std::shared_ptr<const LabeledDataset> test_set;  // null for quadratics
  FedAvgConfig engine;
  std::optional<double> smoothness;
};

// Builds data, partition, objectives, the initial point and the resolved
// engine settings (epochs turned into steps, Corollary rates if asked).
PreparedRun prepare_run(const ExperimentConfig& config, std::uint64_t seed);

struct SeedRun {
  std::uint64_t seed = 0;
  RunResult result;
  std::filesystem::path trace_file;  // empty when nothing was written
};

struct ExperimentResult {
  std::vector<SeedRun> runs;
  FedAvgConfig engine;  // resolved settings of the first seed
  std::size_t num_params = 0;
  CommunicationReport communication;
  std::optional<BoundReport> bound;
  nlohmann::json summary;
};

struct RunOptions {
  bool write_files = true;
};

// Runs every seed, then writes <output>/trace_seed<N>.csv and
// <output>/summary.json. Seeds run one after another; each run is
// internally parallel over config.threads.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

// Header plus one row per evaluated round; reals use 17 significant digits.
void write_trace_csv(std::ostream& out, const std::vector<RoundTrace>& trace);
inline constexpr const char* kTraceCsvHeader =
    "round,loss,grad_sq_norm,min_grad_sq_norm,test_accuracy,participants,round_bytes,cumulative_bytes,"
    "comm_seconds";

nlohmann::json to_json(const BoundReport& report);

// Outcome of one named check in the built-in suites.
struct CheckOutcome {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Drift lemma on a grid of heterogeneous quadratics plus exact and Monte
// Carlo unbiasedness of both samplers.
std::vector<CheckOutcome> lemma_suite(std::uint64_t seed, int threads);

// The sigma_G = 0 quadratic family used to measure linear speedup: full mode
// sweeps m in {4, 8, 16, 32}, partial mode sweeps n in {4, 8, 16, 32} of
// m = 32 without replacement.
SpeedupOptions standard_speedup_options(ParticipationMode mode, std::uint64_t seed, int threads);

}  // namespace fedsim

#endif  // FEDSIM_EXPERIMENT_H_
