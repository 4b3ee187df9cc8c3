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

#ifndef FEDSIM_COST_H_
#define FEDSIM_COST_H_

#include <cstddef>
#include <cstdint>
#include <string>

namespace fedsim {

enum class Algorithm { kFedAvg, kScaffold };

std::string to_string(Algorithm algorithm);
Algorithm parse_algorithm(const std::string& name);

// Parameters travel as 32-bit floats.
inline constexpr std::uint64_t kBytesPerParam = 4;
inline constexpr double kBytesPerMegabyte = 1048576.0;  // MiB
inline constexpr double kDefaultBandwidthMBps = 20.0;

// One download plus one upload of the model per round, from a single
// worker's point of view; SCAFFOLD also ships its control variate both ways.
std::uint64_t bytes_per_round(std::size_t num_params, Algorithm algorithm);

struct CommunicationReport {
  double megabytes = 0.0;
  // Transfer time at the given bandwidth. Compute time is not modelled.
  double seconds = 0.0;
};

CommunicationReport communication_report(std::size_t num_params, std::size_t rounds, Algorithm algorithm,
                                         double bandwidth_mbps = kDefaultBandwidthMBps);

// Parameter counts of the reference MNIST models:
//   "lr"  multinomial logistic regression 784 -> 10          (7,850)
//   "2nn" 784 -> 200 -> 200 -> 10 with ReLU                 (199,210)
//   "cnn" conv5x5x32, pool, conv5x5x64, pool, fc 1024x512, fc 512x10 (582,026)
std::size_t reference_model_params(const std::string& model);

// "0.18 MB": two decimals, as printed in the comparison table.
std::string format_megabytes(double megabytes);

}  // namespace fedsim

#endif  // FEDSIM_COST_H_
