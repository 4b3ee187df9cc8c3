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

// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. Arguments restrict the run to the named
// criteria (for example "AC3 AC7").

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fedsim/cost.h"
#include "fedsim/engine.h"
#include "fedsim/experiment.h"
#include "fedsim/objectives.h"
#include "fedsim/sampling.h"
#include "fedsim/theory.h"
#include "oracles.h"

namespace fedsim {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string id;
  std::string title;
  double budget_seconds;  // 0: no runtime limit
  std::function<Outcome()> run;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), pattern, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// --- AC1 / AC2 ----------------------------------------------------------------

Outcome lemma_checks(const std::string& prefix) {
  Outcome out{true, ""};
  int count = 0;
  double worst_detail = 0.0;
  for (const CheckOutcome& c : lemma_suite(0, 1)) {
    if (c.name.rfind(prefix, 0) != 0 && c.name.find(prefix) == std::string::npos) continue;
    ++count;
    if (!c.pass) {
      out.pass = false;
      out.detail += c.name + " (" + c.detail + "); ";
    }
    const auto eq = c.detail.rfind("= ");
    if (eq != std::string::npos) worst_detail = std::max(worst_detail, std::atof(c.detail.c_str() + eq + 2));
  }
  if (count == 0) return {false, "no checks ran"};
  if (out.pass) out.detail = fmt("%d checks, worst ratio %.4g", count, worst_detail);
  return out;
}

Outcome ac1() {
  Outcome exact = lemma_checks("exact unbiasedness");
  Outcome mc = lemma_checks("monte carlo unbiasedness");
  return {exact.pass && mc.pass, "exact: " + exact.detail + "; monte carlo: " + mc.detail};
}

Outcome ac2() { return lemma_checks("drift"); }

// --- AC3 / AC4 ----------------------------------------------------------------

constexpr std::size_t kBoundWorkers = 16;
constexpr std::size_t kBoundDim = 10;
constexpr int kBoundK = 5;
constexpr std::size_t kBoundRounds = 500;
constexpr std::size_t kBoundSeeds = 20;

struct BoundCase {
  double sigma_l;
  double sigma_g;
  BoundReport report;
};

std::vector<BoundCase> bound_grid(const SamplingStrategy& strategy) {
  const ParticipationMode mode = participation_mode(strategy);
  std::vector<BoundCase> out;
  for (double sigma_l : {0.0, 0.5, 1.0}) {
    for (double sigma_g : {0.0, 1.0, 2.0}) {
      const ObjectiveSet objs = make_heterogeneous_quadratics(
          kBoundWorkers, kBoundDim, sigma_g, sigma_l, derive_stream(0, 0, kNoIndex, 0, StreamPurpose::kInstance));
      const ParamVector x0(kBoundDim, 0.0);
      TheoryConstants consts =
          measure_constants(objs, x0, 10, derive_stream(0, 0, kNoIndex, 0, StreamPurpose::kProbe));
      const RateSetting rates = corollary_learning_rates(kBoundWorkers, strategy.num_participants, kBoundK,
                                                         kBoundRounds, consts.L, mode);
      FedAvgConfig config;
      config.strategy = strategy;
      config.local_steps = kBoundK;
      config.rounds = kBoundRounds;
      config.eta_local = rates.eta_L;
      config.eta_global = rates.eta;
      config.batch_size = 1;
      std::vector<std::vector<RoundTrace>> traces;
      for (std::uint64_t seed = 0; seed < kBoundSeeds; ++seed) {
        config.root_seed = seed;
        traces.push_back(run_fedavg(config, objs, x0).trace);
      }
      out.push_back({sigma_l, sigma_g, check_bound(traces, consts, {rates, kBoundRounds, mode, kBoundSeeds})});
    }
  }
  return out;
}

Outcome summarize_bounds(const std::vector<BoundCase>& cases) {
  Outcome out{true, ""};
  double tightest = 0.0;
  for (const BoundCase& c : cases) {
    const BoundReport& r = c.report;
    if (!r.evaluable || !r.satisfied) {
      out.pass = false;
      out.detail += fmt("sigma_L=%g sigma_G=%g %s lhs=%.4g rhs=%.4g; ", c.sigma_l, c.sigma_g,
                        r.evaluable ? "violated" : "conditions failed", r.lhs, r.rhs);
    } else {
      tightest = std::max(tightest, r.lhs / r.rhs);
    }
  }
  if (out.pass) out.detail = fmt("%zu cases, zero violations, max lhs/rhs %.4g", cases.size(), tightest);
  return out;
}

Outcome ac3() { return summarize_bounds(bound_grid(SamplingStrategy::full(kBoundWorkers))); }

Outcome ac4() {
  const Outcome s1 = summarize_bounds(bound_grid(SamplingStrategy::with_replacement(kBoundWorkers, 4)));
  const Outcome s2 = summarize_bounds(bound_grid(SamplingStrategy::without_replacement(kBoundWorkers, 4)));
  return {s1.pass && s2.pass, "strategy 1: " + s1.detail + "; strategy 2: " + s2.detail};
}

// --- AC5 ----------------------------------------------------------------------

Outcome speedup(ParticipationMode mode) {
  const SpeedupResult r = speedup_sweep(standard_speedup_options(mode, 0, 1));
  std::string points;
  bool reached = true;
  for (const SpeedupPoint& p : r.points) {
    points += fmt(" %zu:%s", p.size, p.rounds ? std::to_string(*p.rounds).c_str() : "unreached");
    reached = reached && p.rounds.has_value();
  }
  const bool pass = reached && r.slope >= -1.3 && r.slope <= -0.7;
  return {pass, fmt("slope %.3f, rounds", r.slope) + points};
}

Outcome ac5() { return speedup(ParticipationMode::kFull); }
Outcome ac5_partial() { return speedup(ParticipationMode::kStrategy2); }

// --- AC6 ----------------------------------------------------------------------

Outcome ac6() {
  struct Row {
    const char* model;
    std::size_t rounds;
    Algorithm algorithm;
    double expected;
  };
  const Row rows[] = {{"lr", 3, Algorithm::kFedAvg, 0.18},
                      {"2nn", 3, Algorithm::kFedAvg, 4.56},
                      {"2nn", 3, Algorithm::kScaffold, 9.12},
                      {"cnn", 1, Algorithm::kFedAvg, 4.44},
                      {"cnn", 1, Algorithm::kScaffold, 8.88}};
  Outcome out{true, ""};
  for (const Row& r : rows) {
    const double mb = communication_report(reference_model_params(r.model), r.rounds, r.algorithm).megabytes;
    const bool ok = std::abs(mb - r.expected) <= 0.01 + 1e-12;
    out.pass = out.pass && ok;
    out.detail += fmt("%s %s x%zu = %s%s; ", to_string(r.algorithm).c_str(), r.model, r.rounds,
                      format_megabytes(mb).c_str(), ok ? "" : fmt(" (expected %.2f)", r.expected).c_str());
  }
  return out;
}

// --- AC7 ----------------------------------------------------------------------

ExperimentConfig digit_config(std::size_t p) {
  ExperimentConfig c = parse_config(
      "objective = logistic\n"
      "dataset = synthetic\n"
      "workers = 20\n"
      "rounds = 100\n"
      "eta_local = 0.1\n"
      "eta_global = 1.0\n"
      "partition = digit\n"
      "eval_every = 100\n"
      "vary_data_with_seed = true\n"
      "seeds = 0,1,2,3,4\n");
  c.partition_p = p;
  return c;
}

Outcome ac7() {
  std::vector<double> acc, loss;
  for (std::size_t p : {1, 5, 10}) {
    const ExperimentResult r = run_experiment(digit_config(p), {.write_files = false});
    std::vector<double> finals, losses;
    for (const SeedRun& run : r.runs) {
      finals.push_back(*run.result.trace.back().test_accuracy);
      losses.push_back(run.result.trace.back().loss);
    }
    acc.push_back(median(finals));
    loss.push_back(median(losses));
  }
  const bool pass = acc[2] >= acc[1] && acc[1] >= acc[0] && acc[2] > acc[0];
  return {pass, fmt("median final accuracy p=1 %.4f, p=5 %.4f, p=10 %.4f (training loss %.4f, %.4f, %.4f)", acc[0],
                    acc[1], acc[2], loss[0], loss[1], loss[2])};
}

// --- AC8 ----------------------------------------------------------------------

constexpr double kLocalStepsThreshold = 1e-3;

std::optional<std::size_t> rounds_to_threshold(int K, std::uint64_t seed) {
  const std::size_t m = 8, T = 400;
  const ObjectiveSet objs =
      make_heterogeneous_quadratics(m, 10, 0.0, 0.5, derive_stream(seed, 0, kNoIndex, 0, StreamPurpose::kInstance));
  const RateSetting rates = corollary_learning_rates(m, m, K, T, 1.0, ParticipationMode::kFull);
  FedAvgConfig config;
  config.strategy = SamplingStrategy::full(m);
  config.local_steps = K;
  config.rounds = T;
  config.eta_local = rates.eta_L;
  config.eta_global = rates.eta;
  config.batch_size = 1;
  config.root_seed = seed;
  for (const RoundTrace& row : run_fedavg(config, objs, ParamVector(10, 0.0)).trace) {
    if (row.grad_sq_norm <= kLocalStepsThreshold) return row.round;
  }
  return std::nullopt;
}

Outcome ac8() {
  std::vector<double> one, five;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto a = rounds_to_threshold(1, seed);
    const auto b = rounds_to_threshold(5, seed);
    one.push_back(a ? static_cast<double>(*a) : INFINITY);
    five.push_back(b ? static_cast<double>(*b) : INFINITY);
  }
  const double m1 = median(one), m5 = median(five);
  return {m5 < m1, fmt("median rounds to |grad f|^2 <= %g: K=1 %g, K=5 %g", kLocalStepsThreshold, m1, m5)};
}

// --- AC9 ----------------------------------------------------------------------

std::string csv_of(const ExperimentResult& r) {
  std::ostringstream out;
  for (const SeedRun& run : r.runs) write_trace_csv(out, run.result.trace);
  return out.str();
}

Outcome ac9() {
  std::vector<ExperimentConfig> configs;
  configs.push_back(digit_config(2));
  configs.back().rounds = 20;
  configs.back().eval_every = 1;
  configs.back().participants = 8;
  configs.back().sampling = SamplingKind::kWithReplacement;
  configs.push_back(parse_config(
      "objective = quadratic\nworkers = 16\nparticipants = 4\nsampling = without_replacement\nrounds = 200\n"
      "local_steps = 5\nlocal_step_unit = steps\nbatch_size = 1\nlr_schedule = corollary\nseeds = 0,1,2\n"));
  configs.push_back(parse_config(
      "objective = mlp2\nhidden = 32\nworkers = 10\nrounds = 5\nsynthetic_train = 1000\nsynthetic_test = 200\n"
      "local_steps = 1\nalgorithm = scaffold\n"));
  std::size_t bytes = 0;
  for (ExperimentConfig c : configs) {
    c.threads = 1;
    const std::string one = csv_of(run_experiment(c, {.write_files = false}));
    c.threads = 8;
    const std::string eight = csv_of(run_experiment(c, {.write_files = false}));
    if (one != eight) return {false, "traces differ for " + to_string(c.objective) + " run"};
    bytes += one.size();
  }
  return {true, fmt("%zu runs, %zu CSV bytes identical across 1 and 8 threads", configs.size(), bytes)};
}

// --- AC10 ---------------------------------------------------------------------

std::vector<std::size_t> all_coords(std::size_t d) {
  std::vector<std::size_t> out(d);
  for (std::size_t j = 0; j < d; ++j) out[j] = j;
  return out;
}

double fd_error(const LocalObjective& obj, const ParamVector& x, const std::vector<std::size_t>& coords) {
  const auto f = [&obj](const oracle::Vec& v) { return obj.loss(ParamVector(v)); };
  return oracle::relative_error(oracle::finite_difference(f, x.raw(), 1e-6, coords), obj.full_gradient(x).raw(),
                                coords);
}

Outcome ac10() {
  RngStream stream(2026);
  auto small = std::make_shared<const LabeledDataset>(
      make_synthetic_classification(32, 20, 10, derive_stream(1, 0, kNoIndex, 0, StreamPurpose::kInstance)));
  auto wide = std::make_shared<const LabeledDataset>(
      make_synthetic_classification(10, 784, 10, derive_stream(2, 0, kNoIndex, 0, StreamPurpose::kInstance)));
  const ObjectiveSet quad = make_heterogeneous_quadratics(2, 10, 1.0, 0.5, RngStream(3));
  const LogisticObjective logistic(0, small, all_coords(32));
  const Mlp2Objective mlp(0, small, all_coords(32), 32);
  const Mlp2Objective two_nn(0, wide, all_coords(10), 200);

  // The 784-200-200-10 network is checked on a coordinate sample that covers
  // every layer; the narrower networks are checked on every coordinate.
  std::vector<std::size_t> sample;
  for (std::size_t j = 0; j < two_nn.dim(); j += 1999) sample.push_back(j);
  sample.push_back(two_nn.dim() - 1);

  struct Family {
    const char* name;
    const LocalObjective* obj;
    std::vector<std::size_t> coords;
    double scale;
  };
  const Family families[] = {{"quadratic", quad[0].get(), all_coords(quad[0]->dim()), 1.0},
                             {"logistic", &logistic, all_coords(logistic.dim()), 0.5},
                             {"mlp2 (hidden 32)", &mlp, all_coords(mlp.dim()), 0.3},
                             {"mlp2 (784-200-200-10)", &two_nn, sample, 0.05}};
  Outcome out{true, ""};
  for (const Family& f : families) {
    double worst = 0.0;
    for (int point = 0; point < 20; ++point) {
      ParamVector x(f.obj->dim());
      for (double& v : x.values()) v = f.scale * stream.normal();
      worst = std::max(worst, fd_error(*f.obj, x, f.coords));
    }
    out.pass = out.pass && worst < 1e-5;
    out.detail += fmt("%s max rel err %.2e; ", f.name, worst);
  }
  return out;
}

}  // namespace
}  // namespace fedsim

int main(int argc, char** argv) {
  using fedsim::Criterion;
  const std::vector<Criterion> criteria = {
      {"AC1", "unbiased sampling", 10, fedsim::ac1},
      {"AC2", "local drift bound", 60, fedsim::ac2},
      {"AC3", "full participation bound", 300, fedsim::ac3},
      {"AC4", "partial participation bound", 300, fedsim::ac4},
      {"AC5", "linear speedup in m", 300, fedsim::ac5},
      {"AC5-partial", "linear speedup in n", 300, fedsim::ac5_partial},
      {"AC6", "communication cost", 1, fedsim::ac6},
      {"AC7", "non-iid ordering", 300, fedsim::ac7},
      {"AC8", "local steps benefit", 120, fedsim::ac8},
      {"AC9", "thread determinism", 0, fedsim::ac9},
      {"AC10", "gradient correctness", 30, fedsim::ac10},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    fedsim::Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("error: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0 && seconds > c.budget_seconds) {
      outcome.pass = false;
      outcome.detail += fedsim::fmt(" over the %.0f s budget", c.budget_seconds);
    }
    while (!outcome.detail.empty() && (outcome.detail.back() == ' ' || outcome.detail.back() == ';')) {
      outcome.detail.pop_back();
    }
    failures += !outcome.pass;
    std::printf("%s %s  %s: %s [%.2f s]\n", c.id.c_str(), outcome.pass ? "PASS" : "FAIL", c.title.c_str(),
                outcome.detail.c_str(), seconds);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
