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

#include "fedsim/engine.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "fedsim/errors.h"
#include "fedsim/parallel.h"

namespace fedsim {

void FedAvgConfig::validate() const {
  strategy.validate();
  if (!(eta_local > 0.0) || !std::isfinite(eta_local)) throw ConfigError("fedavg: eta_local must be positive");
  if (!(eta_global > 0.0) || !std::isfinite(eta_global)) throw ConfigError("fedavg: eta_global must be positive");
  if (local_steps < 1) throw ConfigError("fedavg: local_steps must be >= 1");
  if (rounds < 1) throw ConfigError("fedavg: rounds must be >= 1");
  if (eval_every < 1) throw ConfigError("fedavg: eval_every must be >= 1");
  if (!(bandwidth_mbps > 0.0)) throw ConfigError("fedavg: bandwidth must be positive");
}

std::vector<std::string> FedAvgConfig::warnings() const {
  std::vector<std::string> out;
  if (!smoothness || *smoothness <= 0.0) return out;
  const double lk = *smoothness * local_steps;
  if (eta_local > 1.0 / (8.0 * lk)) {
    std::ostringstream msg;
    msg << "eta_local=" << eta_local << " exceeds 1/(8LK)=" << 1.0 / (8.0 * lk);
    out.push_back(msg.str());
  }
  if (eta_global * eta_local > 1.0 / lk) {
    std::ostringstream msg;
    msg << "eta*eta_local=" << eta_global * eta_local << " exceeds 1/(KL)=" << 1.0 / lk;
    out.push_back(msg.str());
  }
  return out;
}

RoundError::RoundError(std::size_t round, std::size_t worker, const std::string& cause)
    : std::runtime_error("round " + std::to_string(round) + ", worker " + std::to_string(worker) + ": " + cause),
      round_(round),
      worker_(worker) {}

ParamVector local_update(const LocalObjective& objective, const ParamVector& x_t, int local_steps,
                         double eta_local, std::size_t batch_size, const WorkerStreams& streams,
                         const StepProbe& probe) {
  if (local_steps < 1) throw ConfigError("local_update: local_steps must be >= 1");
  ParamVector x = x_t;
  for (int k = 0; k < local_steps; ++k) {
    ParamVector g;
    if (batch_size == 0) {
      g = objective.full_gradient(x);
    } else {
      RngStream stream = derive_stream(streams.root_seed, streams.round, streams.worker,
                                       static_cast<std::uint64_t>(k), StreamPurpose::kLocalGradient);
      g = objective.stochastic_gradient(x, batch_size, stream);
    }
    if (!all_finite(g)) {
      throw NumericError("non-finite gradient at local step " + std::to_string(k));
    }
    for (std::size_t j = 0; j < x.size(); ++j) x[j] -= eta_local * g[j];
    require_finite(x, "local_update");
    if (probe) probe(k + 1, x);
  }
  return x - x_t;
}

ParamVector server_update(const ParamVector& x_t, const ParamVector& delta, double eta) {
  return axpy(eta, delta, x_t);
}

namespace internal {

void check_objectives(const FedAvgConfig& config, const ObjectiveSet& objectives, const ParamVector& x0) {
  if (objectives.size() != config.num_workers()) {
    throw ConfigError("run: " + std::to_string(objectives.size()) + " objectives for m=" +
                      std::to_string(config.num_workers()));
  }
  for (const auto& obj : objectives) {
    if (!obj) throw ConfigError("run: null objective");
    if (obj->dim() != x0.size()) throw ConfigError("run: objectives and x0 disagree on dimension");
  }
  require_finite(x0, "run: x0");
}

TraceRecorder::TraceRecorder(const FedAvgConfig& config, const ObjectiveSet& objectives,
                             const Evaluator& evaluator, std::uint64_t bytes_per_round)
    : config_(config),
      objectives_(objectives),
      evaluator_(evaluator),
      bytes_per_round_(bytes_per_round),
      best_(std::numeric_limits<double>::infinity()) {}

bool TraceRecorder::due(std::size_t round) const {
  return round % config_.eval_every == 0 || round == config_.rounds;
}

void TraceRecorder::record(std::size_t round, const ParamVector& x, const ParticipantSet& participants) {
  RoundTrace row;
  row.round = round;
  const auto [loss, grad] = global_loss_and_grad(objectives_, x);
  row.loss = loss;
  row.grad_sq_norm = sq_norm(grad);
  best_ = std::min(best_, row.grad_sq_norm);
  row.min_grad_sq_norm = best_;
  if (evaluator_) row.test_accuracy = evaluator_(x);
  row.participants = participants;
  row.round_bytes = round == 0 ? 0 : bytes_per_round_;
  row.cumulative_bytes = bytes_per_round_ * round;
  row.comm_seconds = static_cast<double>(row.cumulative_bytes) / kBytesPerMegabyte / config_.bandwidth_mbps;
  trace_.push_back(std::move(row));
}

}  // namespace internal

RunResult run_fedavg(const FedAvgConfig& config, const ObjectiveSet& objectives, const ParamVector& x0,
                     const Evaluator& evaluator) {
  config.validate();
  internal::check_objectives(config, objectives, x0);
  internal::TraceRecorder recorder(config, objectives, evaluator,
                                   bytes_per_round(x0.size(), Algorithm::kFedAvg));

  ParamVector x = x0;
  for (std::size_t t = 0; t < config.rounds; ++t) {
    const ParticipantSet participants = sample(config.strategy, t, config.root_seed);
    if (recorder.due(t)) recorder.record(t, x, participants);

    // Duplicate draws (with replacement) share one local update: the worker's
    // streams are keyed by (seed, t, i, k), so a second run would be identical.
    ParticipantSet unique = participants;
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    std::vector<ParamVector> deltas(unique.size());
    std::vector<std::string> failures(unique.size());
    parallel_for(unique.size(), config.threads, [&](std::size_t slot) {
      const std::size_t worker = unique[slot];
      try {
        deltas[slot] = local_update(*objectives[worker], x, config.local_steps, config.eta_local,
                                    config.batch_size, WorkerStreams{config.root_seed, t, worker});
      } catch (const std::exception& e) {
        failures[slot] = e.what();
      }
    });
    for (std::size_t slot = 0; slot < unique.size(); ++slot) {
      if (!failures[slot].empty()) throw RoundError(t, unique[slot], failures[slot]);
    }

    std::map<std::size_t, ParamVector> table;
    for (std::size_t slot = 0; slot < unique.size(); ++slot) table.emplace(unique[slot], std::move(deltas[slot]));
    x = server_update(x, aggregate(table, participants), config.eta_global);
  }
  recorder.record(config.rounds, x, {});
  return {recorder.take(), std::move(x)};
}

}  // namespace fedsim
