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

#include "fedsim/experiment.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "fedsim/errors.h"
#include "fedsim/scaffold.h"

namespace fedsim {

namespace {

std::string real17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

RngStream data_stream(std::uint64_t data_seed, StreamPurpose purpose) {
  return derive_stream(data_seed, 0, kNoIndex, 0, purpose);
}

PartitionPlan make_partition(const ExperimentConfig& config, const LabeledDataset& train, RngStream stream) {
  const std::size_t m = config.workers;
  switch (config.partition) {
    case PartitionScheme::kIid:
      return partition_iid(train, m, stream);
    case PartitionScheme::kDigit: {
      const std::size_t p = config.partition_p == 0 ? train.num_classes : config.partition_p;
      return partition_digit_based(train, m, p, stream);
    }
    case PartitionScheme::kShards: {
      const std::size_t shards = m * config.shards_per_worker;
      const std::size_t shard_size = train.size() / shards;
      if (shard_size == 0) throw ConfigError("key 'shards_per_worker': more shards than samples");
      return partition_shards(train, m, shards, shard_size, config.shards_per_worker, stream);
    }
  }
  throw ConfigError("unknown partition scheme");
}

nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json config_json(const ExperimentConfig& c) {
  return {{"objective", to_string(c.objective)},
          {"dataset", to_string(c.dataset)},
          {"mnist_dir", c.mnist_dir},
          {"synthetic_train", c.synthetic_train},
          {"synthetic_test", c.synthetic_test},
          {"synthetic_features", c.synthetic_features},
          {"synthetic_classes", c.synthetic_classes},
          {"class_separation", c.class_separation},
          {"hidden", c.hidden},
          {"quad_dim", c.quad_dim},
          {"quad_sigma_g", c.quad_sigma_g},
          {"quad_sigma_l", c.quad_sigma_l},
          {"quad_noise_samples", c.quad_noise_samples},
          {"quad_mean_norm", c.quad_mean_norm},
          {"partition", to_string(c.partition)},
          {"partition_p", c.partition_p},
          {"shards_per_worker", c.shards_per_worker},
          {"workers", c.workers},
          {"participants", c.num_participants()},
          {"sampling", to_string(c.sampling)},
          {"local_steps", c.local_steps},
          {"local_step_unit", to_string(c.local_step_unit)},
          {"rounds", c.rounds},
          {"eta_local", c.eta_local},
          {"eta_global", c.eta_global},
          {"batch_size", c.batch_size},
          {"eval_every", c.eval_every},
          {"algorithm", to_string(c.algorithm)},
          {"bandwidth_mbps", c.bandwidth_mbps},
          {"lr_schedule", to_string(c.lr_schedule)},
          {"seeds", c.seeds},
          {"data_seed", c.data_seed},
          {"vary_data_with_seed", c.vary_data_with_seed},
          {"verify_bound", c.verify_bound},
          {"output", c.output},
          {"threads", c.threads}};
}

}  // namespace

PreparedRun prepare_run(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  const std::uint64_t data_seed = config.vary_data_with_seed ? seed : config.data_seed;
  PreparedRun run;

  if (config.objective == ModelKind::kQuadratic) {
    run.shape = {ModelKind::kQuadratic, config.quad_dim, 0, 0};
    run.objectives = make_heterogeneous_quadratics(config.workers, config.quad_dim, config.quad_sigma_g,
                                                   config.quad_sigma_l, data_stream(data_seed, StreamPurpose::kInstance),
                                                   {config.quad_noise_samples, config.quad_mean_norm});
    run.x0 = ParamVector(config.quad_dim, 0.0);
  } else {
    auto train = std::make_shared<LabeledDataset>();
    auto test = std::make_shared<LabeledDataset>();
    if (config.dataset == DatasetSource::kMnist) {
      TrainTestSplit split = load_mnist_dir(config.mnist_dir);
      *train = std::move(split.train);
      *test = std::move(split.test);
    } else {
      const std::size_t total = config.synthetic_train + config.synthetic_test;
      LabeledDataset all = make_synthetic_classification(total, config.synthetic_features, config.synthetic_classes,
                                                         data_stream(data_seed, StreamPurpose::kDataset),
                                                         {config.class_separation});
      const std::size_t d = all.num_features;
      for (LabeledDataset* part : {train.get(), test.get()}) {
        part->num_features = d;
        part->num_classes = all.num_classes;
      }
      train->features.assign(all.features.begin(), all.features.begin() + config.synthetic_train * d);
      train->labels.assign(all.labels.begin(), all.labels.begin() + config.synthetic_train);
      test->features.assign(all.features.begin() + config.synthetic_train * d, all.features.end());
      test->labels.assign(all.labels.begin() + config.synthetic_train, all.labels.end());
    }
    const std::size_t classes = std::max(train->num_classes, config.num_classes());
    train->num_classes = classes;
    test->num_classes = classes;
    if (config.partition == PartitionScheme::kDigit && config.partition_p > classes) {
      throw ConfigError("key 'partition_p': must lie in [1, " + std::to_string(classes) + "]");
    }
    run.shape = {config.objective, train->num_features, classes, config.hidden};
    const PartitionPlan plan = make_partition(config, *train, data_stream(data_seed, StreamPurpose::kPartition));
    run.objectives = make_classifier_objectives(run.shape, train, plan);
    run.x0 = initial_point(run.shape, data_stream(data_seed, StreamPurpose::kInit));
    run.test_set = test;
  }

  bool all_known = true;
  double L = 0.0;
  std::size_t largest = 0;
  for (const auto& obj : run.objectives) {
    const auto s = obj->smoothness();
    all_known = all_known && s.has_value();
    if (s) L = std::max(L, *s);
    largest = std::max(largest, obj->num_samples());
  }
  if (all_known) run.smoothness = L;

  FedAvgConfig& e = run.engine;
  e.strategy = config.strategy();
  std::size_t steps = config.local_steps;
  if (config.local_step_unit == LocalStepUnit::kEpochs) steps = ceil_div(largest, config.batch_size) * config.local_steps;
  if (steps > static_cast<std::size_t>(std::numeric_limits<int>::max())) throw ConfigError("local_steps too large");
  e.local_steps = static_cast<int>(steps);
  e.rounds = config.rounds;
  e.eta_local = config.eta_local;
  e.eta_global = config.eta_global;
  e.batch_size = config.batch_size;
  e.root_seed = seed;
  e.eval_every = config.eval_every;
  e.threads = config.threads;
  e.bandwidth_mbps = config.bandwidth_mbps;
  e.smoothness = run.smoothness;

  if (config.lr_schedule == LrSchedule::kCorollary) {
    double lip = run.smoothness.value_or(0.0);
    if (!run.smoothness) {
      lip = measure_constants(run.objectives, run.x0, 10, data_stream(data_seed, StreamPurpose::kProbe)).L;
    }
    if (!(lip > 0.0)) throw ConfigError("lr_schedule = corollary needs a positive smoothness constant");
    const RateSetting r = corollary_learning_rates(config.workers, config.num_participants(), e.local_steps,
                                                   config.rounds, lip, participation_mode(e.strategy));
    e.eta_local = r.eta_L;
    e.eta_global = r.eta;
  }
  return run;
}

void write_trace_csv(std::ostream& out, const std::vector<RoundTrace>& trace) {
  out << kTraceCsvHeader << "\n";
  for (const RoundTrace& row : trace) {
    out << row.round << ',' << real17(row.loss) << ',' << real17(row.grad_sq_norm) << ','
        << real17(row.min_grad_sq_norm) << ',' << (row.test_accuracy ? real17(*row.test_accuracy) : "nan") << ',';
    for (std::size_t j = 0; j < row.participants.size(); ++j) out << (j ? " " : "") << row.participants[j];
    out << ',' << row.round_bytes << ',' << row.cumulative_bytes << ',' << real17(row.comm_seconds) << "\n";
  }
}

nlohmann::json to_json(const BoundReport& report) {
  nlohmann::json conditions = nlohmann::json::array();
  for (const ConditionCheck& c : report.conditions) {
    conditions.push_back({{"name", c.name},
                          {"value", c.value},
                          {"threshold", c.threshold},
                          {"inclusive", c.inclusive},
                          {"pass", c.pass}});
  }
  return {{"lhs", report.lhs},         {"argmin_round", report.argmin_round}, {"vanishing", report.vanishing},
          {"phi", report.phi},         {"rhs", report.rhs},                   {"c", report.c},
          {"conditions", conditions},  {"evaluable", report.evaluable},       {"satisfied", report.satisfied}};
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  if (config.verify_bound && config.vary_data_with_seed) {
    throw ConfigError("key 'verify_bound': needs one instance for all seeds (vary_data_with_seed = false)");
  }
  if (config.verify_bound && config.algorithm != Algorithm::kFedAvg) {
    throw ConfigError("key 'verify_bound': only defined for algorithm = fedavg");
  }
  const auto started = std::chrono::steady_clock::now();
  const std::filesystem::path out_dir = config.output;
  if (options.write_files) std::filesystem::create_directories(out_dir);

  ExperimentResult result;
  std::vector<std::string> warnings;
  std::optional<PreparedRun> first;
  for (std::uint64_t seed : config.seeds) {
    PreparedRun prepared = prepare_run(config, seed);
    Evaluator evaluator;
    if (prepared.test_set) {
      evaluator = [&prepared](const ParamVector& x) -> std::optional<double> {
        return classification_accuracy(prepared.shape, x, *prepared.test_set);
      };
    }
    SeedRun run;
    run.seed = seed;
    run.result = config.algorithm == Algorithm::kScaffold
                     ? run_scaffold(prepared.engine, prepared.objectives, prepared.x0, evaluator)
                     : run_fedavg(prepared.engine, prepared.objectives, prepared.x0, evaluator);
    if (options.write_files) {
      run.trace_file = out_dir / ("trace_seed" + std::to_string(seed) + ".csv");
      std::ofstream csv(run.trace_file, std::ios::binary);
      write_trace_csv(csv, run.result.trace);
      if (!csv) throw FormatError("cannot write " + run.trace_file.string());
    }
    result.runs.push_back(std::move(run));
    if (!first) {
      warnings = prepared.engine.warnings();
      first = std::move(prepared);
    }
  }

  result.engine = first->engine;
  result.num_params = first->x0.size();
  result.communication =
      communication_report(result.num_params, config.rounds, config.algorithm, config.bandwidth_mbps);

  if (config.verify_bound) {
    const TheoryConstants consts = measure_constants(first->objectives, first->x0, 10,
                                                     data_stream(config.data_seed, StreamPurpose::kProbe));
    BoundSetup setup;
    setup.rates = {config.workers, config.num_participants(), result.engine.local_steps, result.engine.eta_global,
                   result.engine.eta_local};
    setup.rounds = config.rounds;
    setup.mode = participation_mode(result.engine.strategy);
    std::vector<std::vector<RoundTrace>> traces;
    for (const SeedRun& r : result.runs) traces.push_back(r.result.trace);
    result.bound = check_bound(traces, consts, setup);
  }

  nlohmann::json seeds = nlohmann::json::array();
  for (const SeedRun& r : result.runs) {
    const RoundTrace& last = r.result.trace.back();
    seeds.push_back({{"seed", r.seed},
                     {"trace_file", r.trace_file.filename().string()},
                     {"final_loss", last.loss},
                     {"final_grad_sq_norm", last.grad_sq_norm},
                     {"min_grad_sq_norm", last.min_grad_sq_norm},
                     {"final_test_accuracy", optional_number(last.test_accuracy)}});
  }
  nlohmann::json& s = result.summary;
  s["config"] = config_json(config);
  s["resolved"] = {{"local_steps", result.engine.local_steps},
                   {"eta_local", result.engine.eta_local},
                   {"eta_global", result.engine.eta_global},
                   {"num_params", result.num_params},
                   {"smoothness", optional_number(first->smoothness)}};
  s["communication"] = {{"bytes_per_round", bytes_per_round(result.num_params, config.algorithm)},
                        {"megabytes", result.communication.megabytes},
                        {"seconds", result.communication.seconds},
                        {"bandwidth_mbps", config.bandwidth_mbps}};
  s["seeds"] = seeds;
  s["bound"] = result.bound ? to_json(*result.bound) : nlohmann::json(nullptr);
  s["warnings"] = warnings;
  s["simulator_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  if (options.write_files) {
    std::ofstream json(out_dir / "summary.json");
    json << s.dump(2) << "\n";
    if (!json) throw FormatError("cannot write summary.json");
  }
  return result;
}

std::vector<CheckOutcome> lemma_suite(std::uint64_t seed, int threads) {
  std::vector<CheckOutcome> out;
  char buf[256];

  const std::size_t m = 8;
  const std::size_t d = 10;
  for (double sigma_g : {0.0, 1.0, 2.0}) {
    for (double sigma_l : {0.0, 0.5}) {
      const ObjectiveSet objs = make_heterogeneous_quadratics(
          m, d, sigma_g, sigma_l, derive_stream(seed, 0, kNoIndex, 0, StreamPurpose::kInstance));
      const ParamVector origin(d, 0.0);
      const TheoryConstants consts =
          measure_constants(objs, origin, 10, derive_stream(seed, 0, kNoIndex, 0, StreamPurpose::kProbe));
      RngStream point_stream = derive_stream(seed, 1, kNoIndex, 0, StreamPurpose::kProbe);
      ParamVector away(d);
      for (std::size_t j = 0; j < d; ++j) away[j] = point_stream.normal();
      for (int K : {2, 8}) {
        const ParamVector* points[] = {&origin, &away};
        for (const ParamVector* x_t : points) {
          DriftProbeSetup setup{objs, *x_t, 1, 200, seed, threads};
          const DriftReport report = check_drift_lemma(setup, consts, 1.0 / (8.0 * K), K);
          double worst = 0.0;
          for (const DriftRow& row : report.rows) worst = std::max(worst, row.measured / row.bound);
          std::snprintf(buf, sizeof(buf), "drift sigma_G=%g sigma_L=%g K=%d x_t=%s", sigma_g, sigma_l, K,
                        x_t == &origin ? "origin" : "random");
          std::string detail(64, '\0');
          detail.resize(std::snprintf(detail.data(), detail.size(), "max measured/bound = %.4f", worst));
          out.push_back({buf, report.all_pass, detail});
        }
      }
    }
  }

  RngStream delta_stream = derive_stream(seed, 0, kNoIndex, 0, StreamPurpose::kMonteCarlo);
  auto random_deltas = [&delta_stream](std::size_t count) {
    std::vector<ParamVector> deltas(count, ParamVector(3));
    for (auto& v : deltas) {
      for (double& x : v.values()) x = delta_stream.normal();
    }
    return deltas;
  };
  const auto small = random_deltas(4);
  const ParamVector target_small = mean(small);
  for (const SamplingStrategy& s :
       {SamplingStrategy::with_replacement(4, 2), SamplingStrategy::without_replacement(4, 2)}) {
    const ParamVector expected = exact_expected_aggregate(s, small);
    double err = 0.0;
    for (std::size_t j = 0; j < expected.size(); ++j) err = std::max(err, std::abs(expected[j] - target_small[j]));
    std::snprintf(buf, sizeof(buf), "max |E[aggregate] - mean| = %.3g", err);
    out.push_back({"exact unbiasedness " + to_string(s.kind) + " m=4 n=2", err <= 1e-12, buf});
  }
  const auto large = random_deltas(100);
  for (const SamplingStrategy& s :
       {SamplingStrategy::with_replacement(100, 10), SamplingStrategy::without_replacement(100, 10)}) {
    const UnbiasednessReport report = verify_unbiasedness(s, large, 100000, seed);
    double worst = 0.0;
    for (std::size_t j = 0; j < report.deviation.size(); ++j) {
      worst = std::max(worst, report.deviation[j] / report.tolerance[j]);
    }
    std::snprintf(buf, sizeof(buf), "max deviation/tolerance = %.3f over %zu trials", worst, report.trials);
    out.push_back({"monte carlo unbiasedness " + to_string(s.kind) + " m=100 n=10", report.passed, buf});
  }
  return out;
}

SpeedupOptions standard_speedup_options(ParticipationMode mode, std::uint64_t seed, int threads) {
  SpeedupOptions o;
  o.mode = mode;
  o.sizes = {4, 8, 16, 32};
  o.fixed_workers = 32;
  o.K = 2;
  o.target_eps = 1e-4;
  o.L = 1.0;
  o.num_seeds = 20;
  o.batch_size = 1;
  o.root_seed = seed;
  o.threads = threads;
  // Many noise samples keep the gradient noise close to isotropic, so the
  // stationary error has the same shape for every m.
  o.make_instance = [](std::size_t m, std::uint64_t instance_seed) {
    return make_heterogeneous_quadratics(m, 20, 0.0, 0.3,
                                         derive_stream(instance_seed, 0, kNoIndex, 0, StreamPurpose::kInstance),
                                         {512, 1.0});
  };
  return o;
}

}  // namespace fedsim
