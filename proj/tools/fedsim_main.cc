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

// fedsim command line: run experiments, check the convergence theory, and
// print communication costs.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "fedsim/config.h"
#include "fedsim/cost.h"
#include "fedsim/experiment.h"
#include "fedsim/theory.h"

namespace {

struct GlobalFlags {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
};

fedsim::ExperimentConfig load_with_overrides(const std::string& path, const GlobalFlags& flags) {
  fedsim::ExperimentConfig config = fedsim::load_config(path);
  fedsim::apply_environment(config);
  if (flags.seed) config.seeds = {*flags.seed};
  if (flags.threads) config.threads = *flags.threads;
  if (flags.out) config.output = *flags.out;
  config.validate();
  return config;
}

int threads_or_env(const GlobalFlags& flags) {
  if (flags.threads) return *flags.threads;
  fedsim::ExperimentConfig probe;
  fedsim::apply_environment(probe);
  return probe.threads;
}

int cmd_run(const std::string& path, const GlobalFlags& flags) {
  const fedsim::ExperimentConfig config = load_with_overrides(path, flags);
  const fedsim::ExperimentResult result = fedsim::run_experiment(config);
  for (const std::string& w : result.summary["warnings"].get<std::vector<std::string>>()) {
    std::fprintf(stderr, "warning: %s\n", w.c_str());
  }
  for (const fedsim::SeedRun& run : result.runs) {
    const fedsim::RoundTrace& last = run.result.trace.back();
    std::printf("seed %llu: loss %.6g, |grad f|^2 %.6g", static_cast<unsigned long long>(run.seed), last.loss,
                last.grad_sq_norm);
    if (last.test_accuracy) std::printf(", test accuracy %.4f", *last.test_accuracy);
    std::printf(" -> %s\n", run.trace_file.string().c_str());
  }
  std::printf("communication: %s, %.3f s at %g MB/s\n",
              fedsim::format_megabytes(result.communication.megabytes).c_str(), result.communication.seconds,
              config.bandwidth_mbps);
  return 0;
}

int cmd_verify_bounds(const std::string& path, const GlobalFlags& flags) {
  fedsim::ExperimentConfig config = load_with_overrides(path, flags);
  config.verify_bound = true;
  const fedsim::ExperimentResult result = fedsim::run_experiment(config);
  const fedsim::BoundReport& b = *result.bound;
  for (const fedsim::ConditionCheck& c : b.conditions) {
    std::printf("%s %s: %.6g vs %.6g\n", c.pass ? "ok  " : "FAIL", c.name.c_str(), c.value, c.threshold);
  }
  if (!b.evaluable) {
    std::printf("bound not evaluable: learning-rate conditions fail\n");
    return 1;
  }
  std::printf("min_t avg |grad f|^2 = %.6g (round %zu)\n", b.lhs, b.argmin_round);
  std::printf("bound = %.6g (vanishing %.6g + phi %.6g, c = %.6g)\n", b.rhs, b.vanishing, b.phi, b.c);
  std::printf("%s\n", b.satisfied ? "bound satisfied" : "bound VIOLATED");
  return b.satisfied ? 0 : 1;
}

int cmd_verify_lemmas(const GlobalFlags& flags) {
  bool ok = true;
  for (const fedsim::CheckOutcome& c : fedsim::lemma_suite(flags.seed.value_or(0), threads_or_env(flags))) {
    std::printf("%s %s: %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    ok = ok && c.pass;
  }
  return ok ? 0 : 1;
}

int cmd_speedup(const std::string& mode, const GlobalFlags& flags) {
  const auto pm = mode == "full" ? fedsim::ParticipationMode::kFull : fedsim::ParticipationMode::kStrategy2;
  const fedsim::SpeedupOptions options =
      fedsim::standard_speedup_options(pm, flags.seed.value_or(0), threads_or_env(flags));
  const fedsim::SpeedupResult result = fedsim::speedup_sweep(options);
  for (const fedsim::SpeedupPoint& p : result.points) {
    if (p.rounds) {
      std::printf("%s=%zu: %zu rounds\n", mode == "full" ? "m" : "n", p.size, *p.rounds);
    } else {
      std::printf("%s=%zu: target not reached within %zu rounds\n", mode == "full" ? "m" : "n", p.size,
                  options.max_rounds);
    }
  }
  const bool ok = result.slope >= -1.3 && result.slope <= -0.7;
  std::printf("slope %.4f (%s)\n", result.slope, ok ? "linear speedup" : "outside [-1.3, -0.7]");
  return ok ? 0 : 1;
}

int cmd_cost(const std::string& model, std::size_t rounds, const std::string& algo, double bandwidth) {
  const std::size_t d = fedsim::reference_model_params(model);
  const fedsim::CommunicationReport r =
      fedsim::communication_report(d, rounds, fedsim::parse_algorithm(algo), bandwidth);
  std::printf("%s\n", fedsim::format_megabytes(r.megabytes).c_str());
  std::printf("params %zu, rounds %zu, %s, %.4f s at %g MB/s\n", d, rounds, algo.c_str(), r.seconds, bandwidth);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated averaging simulator with two-sided learning rates"};
  app.fallthrough();
  GlobalFlags flags;
  app.add_option("--seed", flags.seed, "Root seed (replaces the config's seed list)");
  app.add_option("--threads", flags.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", flags.out, "Output directory");

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  auto* verify = app.add_subcommand("verify-bounds", "Run a config and check the convergence bound");
  verify->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  auto* lemmas = app.add_subcommand("verify-lemmas", "Check the drift lemma and sampler unbiasedness");
  std::string mode = "full";
  auto* speedup = app.add_subcommand("speedup", "Measure the linear speedup slope");
  speedup->add_option("--mode", mode, "full or partial")->check(CLI::IsMember({"full", "partial"}));
  std::string model = "lr";
  std::size_t rounds = 1;
  std::string algo = "fedavg";
  double bandwidth = fedsim::kDefaultBandwidthMBps;
  auto* cost = app.add_subcommand("cost", "Communication cost of a reference model");
  cost->add_option("--model", model, "lr, 2nn or cnn")->check(CLI::IsMember({"lr", "2nn", "cnn"}));
  cost->add_option("--rounds", rounds, "Communication rounds")->check(CLI::PositiveNumber);
  cost->add_option("--algo", algo, "fedavg or scaffold")->check(CLI::IsMember({"fedavg", "scaffold"}));
  cost->add_option("--bandwidth", bandwidth, "MB/s")->check(CLI::PositiveNumber);
  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*run) return cmd_run(config_path, flags);
    if (*verify) return cmd_verify_bounds(config_path, flags);
    if (*lemmas) return cmd_verify_lemmas(flags);
    if (*speedup) return cmd_speedup(mode, flags);
    if (*cost) return cmd_cost(model, rounds, algo, bandwidth);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << app.help();
  return 2;
}
