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

#ifndef FEDSIM_THEORY_H_
#define FEDSIM_THEORY_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/engine.h"
#include "fedsim/objectives.h"
#include "fedsim/rng.h"

namespace fedsim {

struct TheoryConstants {
  double L = 0.0;
  double sigma_L = 0.0;  // per-sample local gradient deviation bound
  double sigma_G = 0.0;  // uniform bound on |grad F_i - grad f|
  double f0 = 0.0;
  double f_star = 0.0;
  double c = 0.0;  // filled by design_constant_c
};

enum class ParticipationMode { kFull, kStrategy1, kStrategy2 };

std::string to_string(ParticipationMode mode);
ParticipationMode participation_mode(const SamplingStrategy& strategy);

// Scalars of a bound evaluation. n is ignored for kFull.
struct RateSetting {
  std::size_t m = 1;
  std::size_t n = 1;
  int K = 1;
  double eta = 1.0;
  double eta_L = 0.1;
};

struct MeasureOptions {
  double probe_radius = 1.0;
  double safety_factor = 1.5;  // applied to the sampled Lipschitz ratio
  std::size_t sample_cap = 256;  // per-sample gradients inspected per worker and probe
  std::size_t solve_steps = 1000;  // full-gradient descent steps for f_star
  double solve_tolerance = 1e-8;
};

// Probes are x0 and x0 + probe_radius * gaussian directions. Quadratics
// get exact L, sigma_L, and closed-form f_star. Otherwise L is the largest
// observed |grad F_i(x) - grad F_i(y)| / |x - y| times the safety factor
// (or the analytic bound, whichever is larger), sigma_L is the largest
// per-sample deviation, and f_star is the best value of a gradient
// descent run minus the tolerance. sigma_G is a max over probes in both
// cases. The returned c is 0.
TheoryConstants measure_constants(const ObjectiveSet& objectives, const ParamVector& x0,
                                  std::size_t probe_count, RngStream stream,
                                  const MeasureOptions& options = {});

// max over the probe points and workers of |grad F_i(x) - grad f(x)|.
double measure_sigma_g(const ObjectiveSet& objectives, const std::vector<ParamVector>& probes);

// Half of the slack in the theorem's c-inequality. May be <= 0 when the
// rates are too large; callers must check.
double design_constant_c(double L, const RateSetting& rates, ParticipationMode mode);

// One inequality of a theorem: pass iff value < threshold (or <= when
// inclusive).
struct ConditionCheck {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool inclusive = true;
  bool pass = false;
};

std::vector<ConditionCheck> check_conditions(const TheoryConstants& consts, const RateSetting& rates,
                                             ParticipationMode mode);

// Non-vanishing term of the full-participation bound, using consts.c.
// Throws ConditionError naming the failed inequality, or when c <= 0.
double phi_full(const TheoryConstants& consts, std::size_t m, int K, double eta, double eta_L);

// Same for partial participation; mode must be kStrategy1 or kStrategy2.
double phi_partial(const TheoryConstants& consts, std::size_t m, std::size_t n, int K, double eta,
                   double eta_L, ParticipationMode mode);

double phi(const TheoryConstants& consts, const RateSetting& rates, ParticipationMode mode);

struct CorollaryRates {
  double statistical = 0.0;  // 1/sqrt(mKT) or sqrt(K)/sqrt(nT)
  double optimization = 0.0;  // 1/T
  bool statistical_dominates = false;
};

CorollaryRates corollary_rates(std::size_t m, std::size_t n, int K, std::size_t T, ParticipationMode mode);

// eta_L = 1/(sqrt(T) K L); eta = sqrt(K m) for full participation and
// sqrt(K n) otherwise.
RateSetting corollary_learning_rates(std::size_t m, std::size_t n, int K, std::size_t T, double L,
                                     ParticipationMode mode);

struct BoundReport {
  double lhs = 0.0;  // min over t < T of the seed-averaged |grad f(x_t)|^2
  std::size_t argmin_round = 0;
  double vanishing = 0.0;  // (f0 - f_star) / (c eta eta_L K T)
  double phi = 0.0;
  double rhs = 0.0;
  double c = 0.0;
  std::vector<ConditionCheck> conditions;
  bool evaluable = false;  // all conditions pass and c > 0
  bool satisfied = false;  // evaluable and lhs <= rhs
};

struct BoundSetup {
  RateSetting rates;
  std::size_t rounds = 1;  // T
  ParticipationMode mode = ParticipationMode::kFull;
  std::size_t min_seeds = 20;
};

// `traces` holds one run per seed, all evaluated at the same rounds. c is
// chosen by design_constant_c and reported.
BoundReport check_bound(const std::vector<std::vector<RoundTrace>>& traces, const TheoryConstants& consts,
                        const BoundSetup& setup);

struct DriftProbeSetup {
  ObjectiveSet objectives;
  ParamVector x_t;
  std::size_t batch_size = 1;
  std::size_t num_seeds = 200;
  std::uint64_t root_seed = 0;
  int threads = 1;
};

struct DriftRow {
  int step = 0;  // k
  double measured = 0.0;  // (1/m) sum_i mean over seeds of |x_{t,k}^i - x_t|^2
  double bound = 0.0;
  bool pass = false;
};

struct DriftReport {
  double grad_sq_norm = 0.0;  // |grad f(x_t)|^2
  std::vector<DriftRow> rows;
  bool all_pass = false;
};

// Requires eta_L <= 1/(8LK); throws ConditionError otherwise.
DriftReport check_drift_lemma(const DriftProbeSetup& setup, const TheoryConstants& consts, double eta_L, int K);

struct SpeedupOptions {
  ParticipationMode mode = ParticipationMode::kFull;
  // Values of m (full) or n (partial) to sweep; at least three.
  std::vector<std::size_t> sizes;
  std::size_t fixed_workers = 0;  // m in partial mode
  int K = 2;
  double target_eps = 1e-4;
  double L = 1.0;
  std::size_t num_seeds = 5;
  std::size_t batch_size = 1;
  std::size_t min_rounds = 64;
  std::size_t max_rounds = 1u << 16;
  double grid_ratio = 1.1;
  std::uint64_t root_seed = 0;
  int threads = 1;
  // Builds the m-worker instance for one seed.
  std::function<ObjectiveSet(std::size_t m, std::uint64_t seed)> make_instance;
  std::function<ParamVector(std::size_t dim)> make_x0;
};

struct SpeedupPoint {
  std::size_t size = 0;
  std::optional<std::size_t> rounds;  // empty when unreachable within max_rounds
};

struct SpeedupResult {
  std::vector<SpeedupPoint> points;
  double slope = 0.0;  // least squares fit of log(rounds) on log(size)
};

// For each size the horizon T is scanned over a geometric grid; at each T
// the Corollary rates for that T are used and the size succeeds once the
// seed-median of |grad f(x_t)|^2, minimized over t <= T, reaches eps.
// Throws ConfigError with fewer than three sizes and NumericError when
// fewer than two sizes reach the target.
SpeedupResult speedup_sweep(const SpeedupOptions& options);

// Ordinary least squares slope of y on x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace fedsim

#endif  // FEDSIM_THEORY_H_
