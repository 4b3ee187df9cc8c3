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

#include <cmath>
#include <map>
#include <memory>
#include <optional>

#include <gtest/gtest.h>

#include "printers.h"

#include "fedsim/errors.h"
#include "fedsim/scaffold.h"

namespace fedsim {
namespace {

FedAvgConfig exact_config(std::size_t m, int K, std::size_t T, double eta_L, double eta) {
  FedAvgConfig c;
  c.strategy = SamplingStrategy::full(m);
  c.local_steps = K;
  c.rounds = T;
  c.eta_local = eta_L;
  c.eta_global = eta;
  c.batch_size = 0;
  return c;
}

std::optional<std::size_t> first_hit(const RunResult& r, double threshold) {
  for (const auto& row : r.trace) {
    if (row.grad_sq_norm <= threshold) return row.round;
  }
  return std::nullopt;
}

TEST(ScaffoldLocalTest, ZeroVariatesMatchFedAvg) {
  const ObjectiveSet objs = make_heterogeneous_quadratics(2, 5, 1.0, 0.5, RngStream(1));
  const ParamVector x(5, 0.7);
  const ParamVector zero(5, 0.0);
  const WorkerStreams streams{3, 4, 0};
  const auto r = scaffold_local_update(*objs[0], x, zero, zero, 6, 0.05, 2, streams);
  EXPECT_EQ(r.delta_x, local_update(*objs[0], x, 6, 0.05, 2, streams));
}

TEST(ScaffoldLocalTest, HandUnrolledTwoSteps) {
  // F(x) = x^2 - 0.5 x, so g(y) = 2y - 0.5.
  const QuadraticObjective obj(0, {2.0}, {0.5});
  const double c = 0.3, ci = 0.1, eta_L = 0.1;
  const double y1 = 1.0 - eta_L * (2.0 * 1.0 - 0.5 - ci + c);
  const double y2 = y1 - eta_L * (2.0 * y1 - 0.5 - ci + c);
  const double ci_next = ci - c + (1.0 - y2) / (2.0 * eta_L);
  const auto r = scaffold_local_update(obj, {1.0}, {c}, {ci}, 2, eta_L, 0, {});
  EXPECT_NEAR(r.delta_x[0], y2 - 1.0, 1e-15);
  EXPECT_NEAR(r.new_worker_c[0], ci_next, 1e-14);
  EXPECT_NEAR(r.delta_c[0], ci_next - ci, 1e-14);
}

TEST(ScaffoldRoundTest, UpdatesModelAndServerVariate) {
  ScaffoldState s = ScaffoldState::initial({0.0, 0.0}, 4);
  std::map<std::size_t, ScaffoldLocalResult> results;
  results[1] = {{2.0, 0.0}, {0.4, 0.0}, {0.4, 0.0}};
  results[3] = {{0.0, 2.0}, {0.0, 0.8}, {0.0, 0.8}};
  const ScaffoldState next = scaffold_round(s, {1, 3}, results, 0.5);
  EXPECT_EQ(next.x, (ParamVector{0.5, 0.5}));
  EXPECT_NEAR(next.c[0], 0.1, 1e-15);
  EXPECT_NEAR(next.c[1], 0.2, 1e-15);
  EXPECT_EQ(next.worker_c[1], (ParamVector{0.4, 0.0}));
  EXPECT_EQ(next.worker_c[0], (ParamVector{0.0, 0.0}));
  EXPECT_THROW(scaffold_round(s, {}, results, 0.5), ConfigError);
}

TEST(ScaffoldRunTest, FrozenVariatesReproduceFedAvgBitExactly) {
  const ObjectiveSet objs = make_heterogeneous_quadratics(6, 4, 1.0, 0.5, RngStream(2));
  FedAvgConfig c = exact_config(6, 3, 25, 0.05, 1.2);
  c.strategy = SamplingStrategy::with_replacement(6, 3);
  c.batch_size = 2;
  c.root_seed = 5;
  const RunResult fed = run_fedavg(c, objs, ParamVector(4, 1.0));
  const RunResult sca = run_scaffold(c, objs, ParamVector(4, 1.0), {}, {.freeze_control_variates = true});
  EXPECT_EQ(fed.final_params, sca.final_params);
  ASSERT_EQ(fed.trace.size(), sca.trace.size());
  for (std::size_t t = 0; t < fed.trace.size(); ++t) {
    EXPECT_EQ(fed.trace[t].grad_sq_norm, sca.trace[t].grad_sq_norm);
    EXPECT_EQ(2 * fed.trace[t].cumulative_bytes, sca.trace[t].cumulative_bytes);
  }
}

TEST(ScaffoldRunTest, ConvergesToSharedMinimizer) {
  const ObjectiveSet objs = make_heterogeneous_quadratics(5, 4, 2.0, 0.0, RngStream(3));
  const auto [f_star, x_star] = quadratic_minimum(objs);
  const RunResult r = run_scaffold(exact_config(5, 5, 400, 0.02, 1.0), objs, ParamVector(4, 1.0));
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(r.final_params[j], x_star[j], 1e-6);
  (void)f_star;
}

TEST(ScaffoldRunTest, IdenticalWorkersKeepEqualVariates) {
  const auto a = std::make_shared<QuadraticObjective>(0, ParamVector{1.0, 2.0}, ParamVector{0.5, 0.5});
  const auto b = std::make_shared<QuadraticObjective>(1, ParamVector{1.0, 2.0}, ParamVector{0.5, 0.5});
  ScaffoldState s = ScaffoldState::initial({1.0, -1.0}, 2);
  for (std::uint64_t t = 0; t < 10; ++t) {
    std::map<std::size_t, ScaffoldLocalResult> results;
    results[0] = scaffold_local_update(*a, s.x, s.c, s.worker_c[0], 3, 0.1, 0, {0, t, 0});
    results[1] = scaffold_local_update(*b, s.x, s.c, s.worker_c[1], 3, 0.1, 0, {0, t, 1});
    s = scaffold_round(s, {0, 1}, results, 1.0);
    EXPECT_EQ(s.worker_c[0], s.worker_c[1]);
  }
}

TEST(ScaffoldRunTest, ServerVariateStaysTheWorkerAverage) {
  const ObjectiveSet objs = make_heterogeneous_quadratics(6, 3, 1.5, 0.3, RngStream(4));
  ScaffoldState s = ScaffoldState::initial(ParamVector(3, 0.5), 6);
  const auto strategy = SamplingStrategy::with_replacement(6, 4);
  for (std::uint64_t t = 0; t < 20; ++t) {
    const ParticipantSet p = sample(strategy, t, 1);
    std::map<std::size_t, ScaffoldLocalResult> results;
    for (std::size_t i : p) {
      results[i] = scaffold_local_update(*objs[i], s.x, s.c, s.worker_c[i], 4, 0.05, 1, {1, t, i});
    }
    s = scaffold_round(s, p, results, 1.0);
    const ParamVector avg = mean(s.worker_c);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(s.c[j], avg[j], 1e-12);
  }
}

TEST(ScaffoldRunTest, ReachesThresholdNoLaterThanFedAvgOnHeterogeneousData) {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ObjectiveSet objs = make_heterogeneous_quadratics(10, 5, 2.0, 0.0, RngStream(100 + seed));
    const FedAvgConfig c = exact_config(10, 10, 300, 0.02, 1.0);
    const auto fed = first_hit(run_fedavg(c, objs, ParamVector(5, 1.0)), 1e-6);
    const auto sca = first_hit(run_scaffold(c, objs, ParamVector(5, 1.0)), 1e-6);
    if (sca && (!fed || *sca <= *fed)) ++wins;
  }
  EXPECT_GE(wins, 8);
}

}  // namespace
}  // namespace fedsim
