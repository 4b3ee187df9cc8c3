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

#ifndef FEDSIM_CONFIG_H_
#define FEDSIM_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fedsim/cost.h"
#include "fedsim/datasets.h"
#include "fedsim/objectives.h"
#include "fedsim/sampling.h"

namespace fedsim {

enum class DatasetSource { kSynthetic, kMnist };
enum class LocalStepUnit { kSteps, kEpochs };
enum class LrSchedule { kFixed, kCorollary };

// Experiment description read from a flat "key = value" file. See
// docs/config.md for every key and its default.
struct ExperimentConfig {
  ModelKind objective = ModelKind::kQuadratic;

  DatasetSource dataset = DatasetSource::kSynthetic;
  std::string mnist_dir;
  std::size_t synthetic_train = 6000;
  std::size_t synthetic_test = 1000;
  std::size_t synthetic_features = 20;
  std::size_t synthetic_classes = 10;
  double class_separation = 3.0;
  std::size_t hidden = 200;

  std::size_t quad_dim = 10;
  double quad_sigma_g = 1.0;
  double quad_sigma_l = 0.5;
  std::size_t quad_noise_samples = 32;
  double quad_mean_norm = 1.0;

  PartitionScheme partition = PartitionScheme::kIid;
  std::size_t partition_p = 0;  // 0: all classes
  std::size_t shards_per_worker = 2;

  std::size_t workers = 0;
  std::size_t participants = 0;  // 0: all workers
  SamplingKind sampling = SamplingKind::kFull;
  std::size_t local_steps = 5;
  LocalStepUnit local_step_unit = LocalStepUnit::kEpochs;
  std::size_t rounds = 0;
  double eta_local = 0.1;
  double eta_global = 1.0;
  std::size_t batch_size = 64;
  std::size_t eval_every = 1;
  Algorithm algorithm = Algorithm::kFedAvg;
  double bandwidth_mbps = kDefaultBandwidthMBps;
  LrSchedule lr_schedule = LrSchedule::kFixed;

  std::vector<std::uint64_t> seeds{0};
  std::uint64_t data_seed = 0;
  bool vary_data_with_seed = false;
  bool verify_bound = false;
  std::string output = "out";
  int threads = 1;

  std::size_t num_participants() const { return participants == 0 ? workers : participants; }
  std::size_t num_classes() const;
  SamplingStrategy strategy() const;
  // Throws ConfigError naming the offending key.
  void validate() const;

  bool operator==(const ExperimentConfig&) const = default;
};

// Strict parser: unknown or repeated keys and malformed values are errors
// that carry the line number. `objective`, `workers` and `rounds` are
// required. Relative mnist_dir paths resolve against `base_dir`.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

// Every key with its resolved value; parse_config(emit_config(c)) == c.
std::string emit_config(const ExperimentConfig& config);

// FEDSIM_OUT_DIR and FEDSIM_THREADS, when set, replace output and threads.
void apply_environment(ExperimentConfig& config);

std::string to_string(DatasetSource source);
std::string to_string(LocalStepUnit unit);
std::string to_string(LrSchedule schedule);

}  // namespace fedsim

#endif  // FEDSIM_CONFIG_H_
