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

#ifndef FEDSIM_ENGINE_H_
#define FEDSIM_ENGINE_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/cost.h"
#include "fedsim/objectives.h"
#include "fedsim/param.h"
#include "fedsim/sampling.h"

namespace fedsim {

struct FedAvgConfig {
  SamplingStrategy strategy;  // carries m and n
  int local_steps = 1;        // K
  std::size_t rounds = 1;     // T
  double eta_local = 0.1;     // local (worker) learning rate
  double eta_global = 1.0;    // global (server) learning rate
  // Mini-batch size for local SGD; 0 means the exact local gradient.
  std::size_t batch_size = 64;
  std::uint64_t root_seed = 0;
  std::size_t eval_every = 1;
  int threads = 1;
  double bandwidth_mbps = kDefaultBandwidthMBps;
  // Smoothness constant, when known, enables the learning-rate warnings.
  std::optional<double> smoothness;

  std::size_t num_workers() const { return strategy.num_workers; }
  // Throws ConfigError on eta_local <= 0, eta_global <= 0, K < 1, T < 1 or
  // an invalid sampling strategy.
  void validate() const;
  // Non-fatal notes when eta_L > 1/(8LK) or eta*eta_L > 1/(KL).
  std::vector<std::string> warnings() const;
};

// One evaluated round. Row t describes x_t; `participants` is S_t (the set
// that produces x_{t+1}) and is empty for the final row t = T.
struct RoundTrace {
  std::size_t round = 0;
  double loss = 0.0;
  double grad_sq_norm = 0.0;
  double min_grad_sq_norm = 0.0;  // min over evaluated rows so far
  std::optional<double> test_accuracy;
  ParticipantSet participants;
  std::uint64_t round_bytes = 0;  // spent in the round that produced x_t
  std::uint64_t cumulative_bytes = 0;
  double comm_seconds = 0.0;  // cumulative transfer time at the configured bandwidth
};

using Evaluator = std::function<std::optional<double>(const ParamVector&)>;

// Receives x_{t,k} for k = 1..K during a local update.
using StepProbe = std::function<void(int step, const ParamVector& x)>;

struct RunResult {
  std::vector<RoundTrace> trace;
  ParamVector final_params;
};

// Identifies the random streams of one worker in one round.
struct WorkerStreams {
  std::uint64_t root_seed = 0;
  std::uint64_t round = 0;
  std::uint64_t worker = 0;
};

// K steps x <- x - eta_L * g from x_t; returns x_{t,K} - x_t. Step k draws
// its mini-batch from derive_stream(root_seed, round, worker, k, kLocalGradient).
// Throws NumericError on a non-finite gradient.
ParamVector local_update(const LocalObjective& objective, const ParamVector& x_t, int local_steps,
                         double eta_local, std::size_t batch_size, const WorkerStreams& streams,
                         const StepProbe& probe = {});

// x_t + eta * delta
ParamVector server_update(const ParamVector& x_t, const ParamVector& delta, double eta);

// Runs T rounds from x0. Metrics use exact full gradients over all m
// workers at rounds 0, eval_every, 2*eval_every, ... and T. Local updates of
// one round may run on several threads; aggregation always sums in
// ascending worker order, so the result does not depend on `threads`.
RunResult run_fedavg(const FedAvgConfig& config, const ObjectiveSet& objectives, const ParamVector& x0,
                     const Evaluator& evaluator = {});

// Thrown when a round fails; the message carries round and worker.
class RoundError : public std::runtime_error {
 public:
  RoundError(std::size_t round, std::size_t worker, const std::string& cause);
  std::size_t round() const { return round_; }
  std::size_t worker() const { return worker_; }

 private:
  std::size_t round_;
  std::size_t worker_;
};

namespace internal {

// Shared metric bookkeeping for FedAvg-style loops.
class TraceRecorder {
 public:
  TraceRecorder(const FedAvgConfig& config, const ObjectiveSet& objectives, const Evaluator& evaluator,
                std::uint64_t bytes_per_round);
  bool due(std::size_t round) const;
  void record(std::size_t round, const ParamVector& x, const ParticipantSet& participants);
  std::vector<RoundTrace> take() { return std::move(trace_); }

 private:
  const FedAvgConfig& config_;
  const ObjectiveSet& objectives_;
  const Evaluator& evaluator_;
  std::uint64_t bytes_per_round_;
  double best_ = 0.0;
  std::vector<RoundTrace> trace_;
};

void check_objectives(const FedAvgConfig& config, const ObjectiveSet& objectives, const ParamVector& x0);

}  // namespace internal

}  // namespace fedsim

#endif  // FEDSIM_ENGINE_H_
