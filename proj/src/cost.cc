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

#include "fedsim/cost.h"

#include <cstdio>

#include "fedsim/errors.h"
#include "fedsim/objectives.h"

namespace fedsim {
namespace {

std::size_t conv_params(std::size_t kernel, std::size_t in_channels, std::size_t out_channels) {
  return kernel * kernel * in_channels * out_channels + out_channels;
}

std::size_t dense_params(std::size_t in, std::size_t out) { return in * out + out; }

}  // namespace

std::string to_string(Algorithm algorithm) {
  return algorithm == Algorithm::kFedAvg ? "fedavg" : "scaffold";
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "fedavg") return Algorithm::kFedAvg;
  if (name == "scaffold") return Algorithm::kScaffold;
  throw ConfigError("unknown algorithm '" + name + "' (expected fedavg or scaffold)");
}

std::uint64_t bytes_per_round(std::size_t num_params, Algorithm algorithm) {
  const std::uint64_t model_both_ways = 2 * kBytesPerParam * num_params;
  return algorithm == Algorithm::kScaffold ? 2 * model_both_ways : model_both_ways;
}

CommunicationReport communication_report(std::size_t num_params, std::size_t rounds, Algorithm algorithm,
                                         double bandwidth_mbps) {
  if (num_params == 0) throw ConfigError("communication_report: parameter count must be positive");
  if (!(bandwidth_mbps > 0.0)) throw ConfigError("communication_report: bandwidth must be positive");
  CommunicationReport report;
  const auto bytes = static_cast<double>(bytes_per_round(num_params, algorithm)) * static_cast<double>(rounds);
  report.megabytes = bytes / kBytesPerMegabyte;
  report.seconds = report.megabytes / bandwidth_mbps;
  return report;
}

std::size_t reference_model_params(const std::string& model) {
  if (model == "lr" || model == "logistic") {
    return ModelShape{ModelKind::kLogistic, 784, 10, 0}.param_count();
  }
  if (model == "2nn" || model == "mlp2") {
    return ModelShape{ModelKind::kMlp2, 784, 10, 200}.param_count();
  }
  if (model == "cnn") {
    // 28x28 -> conv/pool -> 14x14x32 -> conv/pool -> 7x7x64; the table lists
    // the first dense layer as 1024 x 512.
    return conv_params(5, 1, 32) + conv_params(5, 32, 64) + dense_params(1024, 512) + dense_params(512, 10);
  }
  throw ConfigError("unknown model '" + model + "' (expected lr, 2nn or cnn)");
}

std::string format_megabytes(double megabytes) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f MB", megabytes);
  return buf;
}

}  // namespace fedsim
