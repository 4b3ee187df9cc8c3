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

#include "fedsim/scaffold.h"

#include <algorithm>

#include "fedsim/errors.h"
#include "fedsim/parallel.h"

namespace fedsim {

ScaffoldState ScaffoldState::initial(const ParamVector& x0, std::size_t num_workers) {
  ScaffoldState state;
  state.x = x0;
  state.c = ParamVector(x0.size(), 0.0);
  state.worker_c.assign(num_workers, ParamVector(x0.size(), 0.0));
  return state;
}

ScaffoldLocalResult scaffold_local_update(const LocalObjective& objective, const ParamVector& x_t,
                                          const ParamVector& c, const ParamVector& worker_c, int local_steps,
                                          double eta_local, std::size_t batch_size,
                                          const WorkerStreams& streams) {
  if (local_steps < 1) throw ConfigError("scaffold_local_update: local_steps must be >= 1");
  if (!(eta_local > 0.0)) throw ConfigError("scaffold_local_update: eta_local must be positive");
  require_same_dim(x_t, c, "scaffold_local_update");
  require_same_dim(x_t, worker_c, "scaffold_local_update");

  ParamVector y = x_t;
  for (int k = 0; k < local_steps; ++k) {
    ParamVector g;
    if (batch_size == 0) {
      g = objective.full_gradient(y);
    } else {
      RngStream stream = derive_stream(streams.root_seed, streams.round, streams.worker,
                                       static_cast<std::uint64_t>(k), StreamPurpose::kLocalGradient);
      g = objective.stochastic_gradient(y, batch_size, stream);
    }
    if (!all_finite(g)) throw NumericError("non-finite gradient at local step " + std::to_string(k));
    for (std::size_t j = 0; j < y.size(); ++j) y[j] -= eta_local * (g[j] - worker_c[j] + c[j]);
    require_finite(y, "scaffold_local_update");
  }

  ScaffoldLocalResult result;
  result.delta_x = y - x_t;
  const double scale = 1.0 / (static_cast<double>(local_steps) * eta_local);
  result.new_worker_c = ParamVector(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) {
    result.new_worker_c[j] = worker_c[j] - c[j] + (x_t[j] - y[j]) * scale;
  }
  require_finite(result.new_worker_c, "scaffold_local_update");
  result.delta_c = result.new_worker_c - worker_c;
  return result;
}

ScaffoldState scaffold_round(const ScaffoldState& state, const ParticipantSet& participants,
                             const std::map<std::size_t, ScaffoldLocalResult>& results, double eta) {
  if (participants.empty()) throw ConfigError("scaffold_round: no participants");
  const std::size_t m = state.worker_c.size();
  std::map<std::size_t, ParamVector> dx;
  for (const auto& [worker, r] : results) dx.emplace(worker, r.delta_x);

  ScaffoldState next = state;
  next.x = server_update(state.x, aggregate(dx, participants), eta);

  ParticipantSet unique = participants;
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  ParamVector dc_sum(state.c.size(), 0.0);
  for (std::size_t worker : unique) {
    if (worker >= m) throw ConfigError("scaffold_round: worker index out of range");
    const ScaffoldLocalResult& r = results.at(worker);
    for (std::size_t j = 0; j < dc_sum.size(); ++j) dc_sum[j] += r.delta_c[j];
    next.worker_c[worker] = r.new_worker_c;
  }
  for (std::size_t j = 0; j < dc_sum.size(); ++j) next.c[j] += dc_sum[j] / static_cast<double>(m);
  require_finite(next.c, "scaffold_round");
  return next;
}

RunResult run_scaffold(const FedAvgConfig& config, const ObjectiveSet& objectives, const ParamVector& x0,
                       const Evaluator& evaluator, const ScaffoldOptions& options) {
  config.validate();
  internal::check_objectives(config, objectives, x0);
  internal::TraceRecorder recorder(config, objectives, evaluator,
                                   bytes_per_round(x0.size(), Algorithm::kScaffold));

  ScaffoldState state = ScaffoldState::initial(x0, config.num_workers());
  for (std::size_t t = 0; t < config.rounds; ++t) {
    const ParticipantSet participants = sample(config.strategy, t, config.root_seed);
    if (recorder.due(t)) recorder.record(t, state.x, participants);

    ParticipantSet unique = participants;
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    std::vector<ScaffoldLocalResult> results(unique.size());
    std::vector<std::string> failures(unique.size());
    parallel_for(unique.size(), config.threads, [&](std::size_t slot) {
      const std::size_t worker = unique[slot];
      const WorkerStreams streams{config.root_seed, t, worker};
      try {
        if (options.freeze_control_variates) {
          ScaffoldLocalResult r;
          r.delta_x = local_update(*objectives[worker], state.x, config.local_steps, config.eta_local,
                                   config.batch_size, streams);
          r.delta_c = ParamVector(state.x.size(), 0.0);
          r.new_worker_c = ParamVector(state.x.size(), 0.0);
          results[slot] = std::move(r);
        } else {
          results[slot] = scaffold_local_update(*objectives[worker], state.x, state.c, state.worker_c[worker],
                                                config.local_steps, config.eta_local, config.batch_size, streams);
        }
      } catch (const std::exception& e) {
        failures[slot] = e.what();
      }
    });
    for (std::size_t slot = 0; slot < unique.size(); ++slot) {
      if (!failures[slot].empty()) throw RoundError(t, unique[slot], failures[slot]);
    }

    std::map<std::size_t, ScaffoldLocalResult> table;
    for (std::size_t slot = 0; slot < unique.size(); ++slot) table.emplace(unique[slot], std::move(results[slot]));
    state = scaffold_round(state, participants, table, config.eta_global);
  }
  recorder.record(config.rounds, state.x, {});
  return {recorder.take(), std::move(state.x)};
}

}  // namespace fedsim
