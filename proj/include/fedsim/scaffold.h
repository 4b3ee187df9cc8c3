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

#ifndef FEDSIM_SCAFFOLD_H_
#define FEDSIM_SCAFFOLD_H_

#include <cstddef>
#include <map>
#include <vector>

#include "fedsim/engine.h"

namespace fedsim {

// SCAFFOLD baseline with "option II" control variates. The server variate c
// stays the average of the worker variates c_i; workers not yet seen hold
// c_i = 0.
struct ScaffoldState {
  ParamVector x;
  ParamVector c;
  std::vector<ParamVector> worker_c;

  static ScaffoldState initial(const ParamVector& x0, std::size_t num_workers);
};

struct ScaffoldLocalResult {
  ParamVector delta_x;
  ParamVector delta_c;
  ParamVector new_worker_c;
};

// y <- x_t; K times y <- y - eta_L (g(y) - c_i + c);
// c_i+ = c_i - c + (x_t - y) / (K eta_L).
// Uses the same mini-batch streams as local_update, so with zero variates
// the trajectory matches FedAvg.
ScaffoldLocalResult scaffold_local_update(const LocalObjective& objective, const ParamVector& x_t,
                                          const ParamVector& c, const ParamVector& worker_c, int local_steps,
                                          double eta_local, std::size_t batch_size,
                                          const WorkerStreams& streams);

// x <- x + eta * mean(delta_x over the multiset), c <- c + (1/m) sum of
// delta_c over distinct participants, c_i <- c_i+.
ScaffoldState scaffold_round(const ScaffoldState& state, const ParticipantSet& participants,
                             const std::map<std::size_t, ScaffoldLocalResult>& results, double eta);

struct ScaffoldOptions {
  // Keep every control variate at zero; the run then reproduces FedAvg.
  bool freeze_control_variates = false;
};

// Same trace contract as run_fedavg; communication counts the control
// variate, i.e. twice the FedAvg bytes per round.
RunResult run_scaffold(const FedAvgConfig& config, const ObjectiveSet& objectives, const ParamVector& x0,
                       const Evaluator& evaluator = {}, const ScaffoldOptions& options = {});

}  // namespace fedsim

#endif  // FEDSIM_SCAFFOLD_H_
