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

#include "fedsim/config.h"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "fedsim/errors.h"

namespace fedsim {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T>
T parse_integer(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("key '" + key + "': expected an integer, got '" + value + "'");
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  double out = 0.0;
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("key '" + key + "': expected a number, got '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + value + "'");
}

std::vector<std::uint64_t> parse_seeds(const std::string& key, const std::string& value) {
  std::string spaced = value;
  for (char& ch : spaced) {
    if (ch == ',') ch = ' ';
  }
  std::istringstream in(spaced);
  std::vector<std::uint64_t> out;
  std::string token;
  while (in >> token) out.push_back(parse_integer<std::uint64_t>(key, token));
  if (out.empty()) throw ConfigError("key '" + key + "': needs at least one seed");
  return out;
}

PartitionScheme parse_partition(const std::string& value) {
  if (value == "iid") return PartitionScheme::kIid;
  if (value == "digit") return PartitionScheme::kDigit;
  if (value == "shards") return PartitionScheme::kShards;
  throw ConfigError("key 'partition': expected iid, digit or shards, got '" + value + "'");
}

DatasetSource parse_dataset(const std::string& value) {
  if (value == "synthetic") return DatasetSource::kSynthetic;
  if (value == "mnist") return DatasetSource::kMnist;
  throw ConfigError("key 'dataset': expected synthetic or mnist, got '" + value + "'");
}

LocalStepUnit parse_unit(const std::string& value) {
  if (value == "steps") return LocalStepUnit::kSteps;
  if (value == "epochs") return LocalStepUnit::kEpochs;
  throw ConfigError("key 'local_step_unit': expected steps or epochs, got '" + value + "'");
}

LrSchedule parse_schedule(const std::string& value) {
  if (value == "fixed") return LrSchedule::kFixed;
  if (value == "corollary") return LrSchedule::kCorollary;
  throw ConfigError("key 'lr_schedule': expected fixed or corollary, got '" + value + "'");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto size_key = [&t](const std::string& key, std::size_t ExperimentConfig::*field) {
      t[key] = [key, field](ExperimentConfig& c, const std::string& v) { c.*field = parse_integer<std::size_t>(key, v); };
    };
    auto real_key = [&t](const std::string& key, double ExperimentConfig::*field) {
      t[key] = [key, field](ExperimentConfig& c, const std::string& v) { c.*field = parse_real(key, v); };
    };
    t["objective"] = [](ExperimentConfig& c, const std::string& v) { c.objective = parse_model_kind(v); };
    t["dataset"] = [](ExperimentConfig& c, const std::string& v) { c.dataset = parse_dataset(v); };
    t["mnist_dir"] = [](ExperimentConfig& c, const std::string& v) { c.mnist_dir = v; };
    size_key("synthetic_train", &ExperimentConfig::synthetic_train);
    size_key("synthetic_test", &ExperimentConfig::synthetic_test);
    size_key("synthetic_features", &ExperimentConfig::synthetic_features);
    size_key("synthetic_classes", &ExperimentConfig::synthetic_classes);
    real_key("class_separation", &ExperimentConfig::class_separation);
    size_key("hidden", &ExperimentConfig::hidden);
    size_key("quad_dim", &ExperimentConfig::quad_dim);
    real_key("quad_sigma_g", &ExperimentConfig::quad_sigma_g);
    real_key("quad_sigma_l", &ExperimentConfig::quad_sigma_l);
    size_key("quad_noise_samples", &ExperimentConfig::quad_noise_samples);
    real_key("quad_mean_norm", &ExperimentConfig::quad_mean_norm);
    t["partition"] = [](ExperimentConfig& c, const std::string& v) { c.partition = parse_partition(v); };
    size_key("partition_p", &ExperimentConfig::partition_p);
    size_key("shards_per_worker", &ExperimentConfig::shards_per_worker);
    size_key("workers", &ExperimentConfig::workers);
    size_key("participants", &ExperimentConfig::participants);
    t["sampling"] = [](ExperimentConfig& c, const std::string& v) { c.sampling = parse_sampling_kind(v); };
    size_key("local_steps", &ExperimentConfig::local_steps);
    t["local_step_unit"] = [](ExperimentConfig& c, const std::string& v) { c.local_step_unit = parse_unit(v); };
    size_key("rounds", &ExperimentConfig::rounds);
    real_key("eta_local", &ExperimentConfig::eta_local);
    real_key("eta_global", &ExperimentConfig::eta_global);
    size_key("batch_size", &ExperimentConfig::batch_size);
    size_key("eval_every", &ExperimentConfig::eval_every);
    t["algorithm"] = [](ExperimentConfig& c, const std::string& v) { c.algorithm = parse_algorithm(v); };
    real_key("bandwidth_mbps", &ExperimentConfig::bandwidth_mbps);
    t["lr_schedule"] = [](ExperimentConfig& c, const std::string& v) { c.lr_schedule = parse_schedule(v); };
    t["seeds"] = [](ExperimentConfig& c, const std::string& v) { c.seeds = parse_seeds("seeds", v); };
    t["data_seed"] = [](ExperimentConfig& c, const std::string& v) {
      c.data_seed = parse_integer<std::uint64_t>("data_seed", v);
    };
    t["vary_data_with_seed"] = [](ExperimentConfig& c, const std::string& v) {
      c.vary_data_with_seed = parse_bool("vary_data_with_seed", v);
    };
    t["verify_bound"] = [](ExperimentConfig& c, const std::string& v) { c.verify_bound = parse_bool("verify_bound", v); };
    t["output"] = [](ExperimentConfig& c, const std::string& v) { c.output = v; };
    t["threads"] = [](ExperimentConfig& c, const std::string& v) { c.threads = parse_integer<int>("threads", v); };
    return t;
  }();
  return table;
}

}  // namespace

std::string to_string(DatasetSource source) { return source == DatasetSource::kMnist ? "mnist" : "synthetic"; }
std::string to_string(LocalStepUnit unit) { return unit == LocalStepUnit::kEpochs ? "epochs" : "steps"; }
std::string to_string(LrSchedule schedule) { return schedule == LrSchedule::kCorollary ? "corollary" : "fixed"; }

std::size_t ExperimentConfig::num_classes() const {
  if (objective == ModelKind::kQuadratic) return 0;
  return dataset == DatasetSource::kMnist ? 10 : synthetic_classes;
}

SamplingStrategy ExperimentConfig::strategy() const {
  switch (sampling) {
    case SamplingKind::kFull:
      return SamplingStrategy::full(workers);
    case SamplingKind::kWithReplacement:
      return SamplingStrategy::with_replacement(workers, num_participants());
    case SamplingKind::kWithoutReplacement:
      return SamplingStrategy::without_replacement(workers, num_participants());
  }
  return SamplingStrategy::full(workers);
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) { throw ConfigError("key '" + key + "': " + why); };
  if (workers < 1) fail("workers", "must be >= 1");
  if (rounds < 1) fail("rounds", "must be >= 1");
  if (num_participants() > workers) fail("participants", "must not exceed workers");
  if (sampling == SamplingKind::kFull && num_participants() != workers) {
    fail("participants", "full sampling uses every worker; choose with_replacement or without_replacement");
  }
  if (local_steps < 1) fail("local_steps", "must be >= 1");
  if (!(eta_local > 0.0)) fail("eta_local", "must be positive");
  if (!(eta_global > 0.0)) fail("eta_global", "must be positive");
  if (eval_every < 1) fail("eval_every", "must be >= 1");
  if (!(bandwidth_mbps > 0.0)) fail("bandwidth_mbps", "must be positive");
  if (threads < 1) fail("threads", "must be >= 1");
  if (seeds.empty()) fail("seeds", "needs at least one seed");
  if (local_step_unit == LocalStepUnit::kEpochs && batch_size == 0) {
    fail("batch_size", "epochs need a positive batch size");
  }

  if (objective == ModelKind::kQuadratic) {
    if (quad_dim < 1) fail("quad_dim", "must be >= 1");
    if (!(quad_sigma_g >= 0.0)) fail("quad_sigma_g", "must be >= 0");
    if (!(quad_sigma_l >= 0.0)) fail("quad_sigma_l", "must be >= 0");
    if (quad_sigma_g > 0.0 && workers < 2) fail("quad_sigma_g", "heterogeneity needs at least two workers");
    if (quad_sigma_l > 0.0 && quad_noise_samples < 2) fail("quad_noise_samples", "must be >= 2");
    return;
  }

  if (objective == ModelKind::kMlp2 && hidden < 1) fail("hidden", "must be >= 1");
  const std::size_t c = num_classes();
  if (dataset == DatasetSource::kMnist) {
    if (mnist_dir.empty()) fail("mnist_dir", "required for dataset = mnist");
    for (const char* name : {"train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte",
                             "t10k-labels-idx1-ubyte"}) {
      if (!std::filesystem::exists(std::filesystem::path(mnist_dir) / name)) {
        fail("mnist_dir", "missing " + (std::filesystem::path(mnist_dir) / name).string());
      }
    }
  } else {
    if (synthetic_classes < 2) fail("synthetic_classes", "must be >= 2");
    if (synthetic_features < 1) fail("synthetic_features", "must be >= 1");
    if (synthetic_train < workers) fail("synthetic_train", "needs at least one sample per worker");
    if (synthetic_test < 1) fail("synthetic_test", "must be >= 1");
  }
  if (partition == PartitionScheme::kDigit && partition_p != 0 && (partition_p < 1 || partition_p > c)) {
    fail("partition_p", "must lie in [1, " + std::to_string(c) + "], got " + std::to_string(partition_p));
  }
  if (partition == PartitionScheme::kShards && shards_per_worker < 1) fail("shards_per_worker", "must be >= 1");
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  ExperimentConfig config;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + "repeated key '" + key + "'");
    if (value.empty()) throw ConfigError(where + "key '" + key + "' has no value");
    try {
      it->second(config, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  for (const char* required : {"objective", "workers", "rounds"}) {
    if (!seen.count(required)) throw ConfigError(std::string("missing required key '") + required + "'");
  }
  if (!config.mnist_dir.empty() && !base_dir.empty() && std::filesystem::path(config.mnist_dir).is_relative()) {
    config.mnist_dir = (base_dir / config.mnist_dir).lexically_normal().string();
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path());
}

std::string emit_config(const ExperimentConfig& c) {
  std::ostringstream out;
  auto put = [&out](const char* key, const std::string& value) { out << key << " = " << value << "\n"; };
  put("objective", to_string(c.objective));
  put("dataset", to_string(c.dataset));
  if (!c.mnist_dir.empty()) put("mnist_dir", c.mnist_dir);
  put("synthetic_train", std::to_string(c.synthetic_train));
  put("synthetic_test", std::to_string(c.synthetic_test));
  put("synthetic_features", std::to_string(c.synthetic_features));
  put("synthetic_classes", std::to_string(c.synthetic_classes));
  put("class_separation", format_real(c.class_separation));
  put("hidden", std::to_string(c.hidden));
  put("quad_dim", std::to_string(c.quad_dim));
  put("quad_sigma_g", format_real(c.quad_sigma_g));
  put("quad_sigma_l", format_real(c.quad_sigma_l));
  put("quad_noise_samples", std::to_string(c.quad_noise_samples));
  put("quad_mean_norm", format_real(c.quad_mean_norm));
  put("partition", to_string(c.partition));
  put("partition_p", std::to_string(c.partition_p));
  put("shards_per_worker", std::to_string(c.shards_per_worker));
  put("workers", std::to_string(c.workers));
  put("participants", std::to_string(c.participants));
  put("sampling", to_string(c.sampling));
  put("local_steps", std::to_string(c.local_steps));
  put("local_step_unit", to_string(c.local_step_unit));
  put("rounds", std::to_string(c.rounds));
  put("eta_local", format_real(c.eta_local));
  put("eta_global", format_real(c.eta_global));
  put("batch_size", std::to_string(c.batch_size));
  put("eval_every", std::to_string(c.eval_every));
  put("algorithm", to_string(c.algorithm));
  put("bandwidth_mbps", format_real(c.bandwidth_mbps));
  put("lr_schedule", to_string(c.lr_schedule));
  std::string seeds;
  for (std::size_t j = 0; j < c.seeds.size(); ++j) seeds += (j ? "," : "") + std::to_string(c.seeds[j]);
  put("seeds", seeds);
  put("data_seed", std::to_string(c.data_seed));
  put("vary_data_with_seed", c.vary_data_with_seed ? "true" : "false");
  put("verify_bound", c.verify_bound ? "true" : "false");
  put("output", c.output);
  put("threads", std::to_string(c.threads));
  return out.str();
}

void apply_environment(ExperimentConfig& config) {
  if (const char* dir = std::getenv("FEDSIM_OUT_DIR"); dir && *dir) config.output = dir;
  if (const char* threads = std::getenv("FEDSIM_THREADS"); threads && *threads) {
    config.threads = parse_integer<int>("FEDSIM_THREADS", threads);
    if (config.threads < 1) throw ConfigError("FEDSIM_THREADS must be >= 1");
  }
}

}  // namespace fedsim
