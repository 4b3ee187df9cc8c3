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

#include "fedsim/theory.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fedsim/errors.h"
#include "fedsim/parallel.h"

namespace fedsim {

namespace {

double sq(double v) { return v * v; }

// (m - n) / (n (m - 1)), defined as 0 when n == m.
double without_replacement_factor(std::size_t m, std::size_t n) {
  if (n >= m) return 0.0;
  return static_cast<double>(m - n) / (static_cast<double>(n) * static_cast<double>(m - 1));
}

void require_rates(const RateSetting& r, ParticipationMode mode) {
  if (r.m < 1 || r.K < 1) throw ConfigError("theory: m and K must be positive");
  if (!(r.eta > 0.0) || !(r.eta_L >= 0.0)) throw ConfigError("theory: learning rates must be positive");
  if (mode != ParticipationMode::kFull) {
    if (r.n < 1) throw ConfigError("theory: n must be positive");
    if (mode == ParticipationMode::kStrategy2 && r.n > r.m) throw ConfigError("theory: n must not exceed m");
  }
}

std::string describe(const ConditionCheck& c) {
  std::ostringstream out;
  out.precision(6);
  out << c.name << " violated: " << c.value << (c.inclusive ? " > " : " >= ") << c.threshold;
  return out.str();
}

void require_evaluable(const TheoryConstants& consts, const RateSetting& rates, ParticipationMode mode) {
  for (const ConditionCheck& c : check_conditions(consts, rates, mode)) {
    if (!c.pass) throw ConditionError(describe(c));
  }
  if (!(consts.c > 0.0)) throw ConditionError("constant c must be positive");
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

ParamVector gaussian_point(const ParamVector& center, double radius, RngStream& stream) {
  ParamVector dir(center.size());
  for (std::size_t j = 0; j < dir.size(); ++j) dir[j] = stream.normal();
  const double n = norm(dir);
  if (n == 0.0) return center;
  return axpy(radius / n, dir, center);
}

}  // namespace

std::string to_string(ParticipationMode mode) {
  switch (mode) {
    case ParticipationMode::kFull:
      return "full";
    case ParticipationMode::kStrategy1:
      return "strategy1";
    case ParticipationMode::kStrategy2:
      return "strategy2";
  }
  return "unknown";
}

ParticipationMode participation_mode(const SamplingStrategy& strategy) {
  switch (strategy.kind) {
    case SamplingKind::kFull:
      return ParticipationMode::kFull;
    case SamplingKind::kWithReplacement:
      return ParticipationMode::kStrategy1;
    case SamplingKind::kWithoutReplacement:
      return ParticipationMode::kStrategy2;
  }
  return ParticipationMode::kFull;
}

double measure_sigma_g(const ObjectiveSet& objectives, const std::vector<ParamVector>& probes) {
  double worst = 0.0;
  for (const ParamVector& x : probes) {
    const ParamVector g = global_loss_and_grad(objectives, x).second;
    for (const auto& obj : objectives) worst = std::max(worst, norm(obj->full_gradient(x) - g));
  }
  return worst;
}

TheoryConstants measure_constants(const ObjectiveSet& objectives, const ParamVector& x0,
                                  std::size_t probe_count, RngStream stream, const MeasureOptions& options) {
  if (probe_count < 10) throw ConfigError("measure_constants: probe_count must be >= 10");
  if (objectives.empty()) throw ConfigError("measure_constants: no objectives");

  std::vector<ParamVector> probes{x0};
  while (probes.size() < probe_count) probes.push_back(gaussian_point(x0, options.probe_radius, stream));

  TheoryConstants consts;
  consts.f0 = global_loss_and_grad(objectives, x0).first;
  consts.sigma_G = measure_sigma_g(objectives, probes);

  bool all_quadratic = true;
  for (const auto& obj : objectives) all_quadratic = all_quadratic && obj->kind() == ModelKind::kQuadratic;

  if (all_quadratic) {
    for (const auto& obj : objectives) {
      const auto& q = dynamic_cast<const QuadraticObjective&>(*obj);
      consts.L = std::max(consts.L, *q.smoothness());
      consts.sigma_L = std::max(consts.sigma_L, q.noise_std());
    }
    consts.f_star = quadratic_minimum(objectives).first;
    return consts;
  }

  double ratio = 0.0;
  double analytic = 0.0;
  for (const auto& obj : objectives) {
    if (auto s = obj->smoothness()) analytic = std::max(analytic, *s);
  }
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const ParamVector& x = probes[p];
    const ParamVector y_near = gaussian_point(x, 1e-3 * options.probe_radius, stream);
    const ParamVector& y_far = probes[(p + 1) % probes.size()];
    for (const auto& obj : objectives) {
      const ParamVector gx = obj->full_gradient(x);
      for (const ParamVector* y : {&y_near, &y_far}) {
        const double dist = norm(*y - x);
        if (dist == 0.0) continue;
        ratio = std::max(ratio, norm(obj->full_gradient(*y) - gx) / dist);
      }
      const std::size_t count = obj->num_samples();
      const std::size_t inspect = std::min(count, options.sample_cap);
      for (std::size_t s = 0; s < inspect; ++s) {
        const std::size_t idx = inspect == count ? s : static_cast<std::size_t>(stream.uniform_index(count));
        const std::size_t one[1] = {idx};
        consts.sigma_L = std::max(consts.sigma_L, norm(obj->batch_gradient(x, one) - gx));
      }
    }
  }
  consts.L = std::max(ratio * options.safety_factor, analytic);

  ParamVector x = x0;
  double best = consts.f0;
  const double step = consts.L > 0.0 ? 1.0 / consts.L : 0.0;
  for (std::size_t it = 0; it < options.solve_steps && step > 0.0; ++it) {
    auto [f, g] = global_loss_and_grad(objectives, x);
    best = std::min(best, f);
    x = axpy(-step, g, x);
    if (!all_finite(x)) break;
  }
  if (all_finite(x)) best = std::min(best, global_loss_and_grad(objectives, x).first);
  consts.f_star = best - options.solve_tolerance;
  return consts;
}

double design_constant_c(double L, const RateSetting& r, ParticipationMode mode) {
  require_rates(r, mode);
  const double K = r.K;
  const double drift = 15.0 * K * K * sq(r.eta_L) * sq(L);
  const double inner = 90.0 * K * K * K * sq(L) * sq(r.eta_L) + 3.0 * K;
  switch (mode) {
    case ParticipationMode::kFull:
      return 0.5 * (0.5 - drift);
    case ParticipationMode::kStrategy1:
      return 0.5 * (0.5 - drift - L * r.eta * r.eta_L / (2.0 * r.n) * inner);
    case ParticipationMode::kStrategy2: {
      const double f = without_replacement_factor(r.m, r.n);
      return 0.5 * (0.5 - drift - L * r.eta * r.eta_L * f / 2.0 * inner);
    }
  }
  return 0.0;
}

std::vector<ConditionCheck> check_conditions(const TheoryConstants& consts, const RateSetting& r,
                                             ParticipationMode mode) {
  require_rates(r, mode);
  const double L = consts.L;
  const double K = r.K;
  const double n = static_cast<double>(r.n);
  const double m = static_cast<double>(r.m);
  const double lr = r.eta * r.eta_L;
  const double inner = 90.0 * K * K * K * sq(L) * sq(r.eta_L) + 3.0 * K;
  const double inf = std::numeric_limits<double>::infinity();

  std::vector<ConditionCheck> out;
  auto add = [&out](std::string name, double value, double threshold, bool inclusive) {
    const bool pass = inclusive ? value <= threshold : value < threshold;
    out.push_back({std::move(name), value, threshold, inclusive, pass});
  };
  add("eta_L <= 1/(8LK)", r.eta_L, L > 0.0 ? 1.0 / (8.0 * L * K) : inf, true);

  switch (mode) {
    case ParticipationMode::kFull:
      add("eta*eta_L <= 1/(KL)", lr, L > 0.0 ? 1.0 / (K * L) : inf, true);
      break;
    case ParticipationMode::kStrategy1:
      add("eta*eta_L*K*L < (n-1)/n", lr * K * L, (n - 1.0) / n, false);
      add("30K^2 eta_L^2 L^2 - (L eta eta_L/n)(90K^3 L^2 eta_L^2 + 3K) < 1",
          30.0 * K * K * sq(r.eta_L) * sq(L) - L * lr / n * inner, 1.0, false);
      break;
    case ParticipationMode::kStrategy2: {
      const double f = without_replacement_factor(r.m, r.n);
      add("eta*eta_L*K*L <= n(m-1)/(m(n-1))", lr * K * L, r.n > 1 ? n * (m - 1.0) / (m * (n - 1.0)) : inf, true);
      add("10K^2 eta_L^2 L^2 - L eta eta_L (m-n)/(n(m-1)) (90K^3 eta_L^2 L^2 + 3K) < 1",
          10.0 * K * K * sq(r.eta_L) * sq(L) - L * lr * f * inner, 1.0, false);
      break;
    }
  }
  // Positivity of the theorem constant: the penalty terms must stay below 1/2.
  add("c-inequality penalty < 1/2", 0.5 - 2.0 * design_constant_c(L, r, mode), 0.5, false);
  return out;
}

double phi_full(const TheoryConstants& consts, std::size_t m, int K, double eta, double eta_L) {
  const RateSetting r{m, m, K, eta, eta_L};
  require_evaluable(consts, r, ParticipationMode::kFull);
  const double L = consts.L;
  const double sl2 = sq(consts.sigma_L);
  const double sg2 = sq(consts.sigma_G);
  const double k = K;
  const double sampling = L * eta * eta_L / (2.0 * static_cast<double>(m)) * sl2;
  const double drift = 5.0 * k * sq(eta_L) * sq(L) / 2.0 * (sl2 + 6.0 * k * sg2);
  return (sampling + drift) / consts.c;
}

double phi_partial(const TheoryConstants& consts, std::size_t m, std::size_t n, int K, double eta,
                   double eta_L, ParticipationMode mode) {
  if (mode == ParticipationMode::kFull) throw ConfigError("phi_partial: mode must be a sampling strategy");
  const RateSetting r{m, n, K, eta, eta_L};
  require_evaluable(consts, r, mode);
  const double L = consts.L;
  const double sl2 = sq(consts.sigma_L);
  const double sg2 = sq(consts.sigma_G);
  const double k = K;
  const double nn = static_cast<double>(n);
  // Strategy 1 samples with factor 1/n, Strategy 2 with (m-n)/(n(m-1)).
  const double f = mode == ParticipationMode::kStrategy1 ? 1.0 / nn : without_replacement_factor(m, n);
  const double t1 = L * eta * eta_L / (2.0 * nn) * sl2;
  const double t2 = 3.0 * L * k * eta * eta_L * f / 2.0 * sg2;
  const double t3 = (5.0 * k * sq(eta_L) * sq(L) / 2.0 + 15.0 * k * k * eta * eta_L * eta_L * eta_L * L * L * L * f / 2.0) *
                    (sl2 + 6.0 * k * sg2);
  return (t1 + t2 + t3) / consts.c;
}

double phi(const TheoryConstants& consts, const RateSetting& rates, ParticipationMode mode) {
  if (mode == ParticipationMode::kFull) return phi_full(consts, rates.m, rates.K, rates.eta, rates.eta_L);
  return phi_partial(consts, rates.m, rates.n, rates.K, rates.eta, rates.eta_L, mode);
}

CorollaryRates corollary_rates(std::size_t m, std::size_t n, int K, std::size_t T, ParticipationMode mode) {
  if (m < 1 || K < 1 || T < 1) throw ConfigError("corollary_rates: m, K and T must be positive");
  if (mode != ParticipationMode::kFull && n < 1) throw ConfigError("corollary_rates: n must be positive");
  CorollaryRates out;
  const double t = static_cast<double>(T);
  if (mode == ParticipationMode::kFull) {
    out.statistical = 1.0 / std::sqrt(static_cast<double>(m) * K * t);
  } else {
    out.statistical = std::sqrt(static_cast<double>(K)) / std::sqrt(static_cast<double>(n) * t);
  }
  out.optimization = 1.0 / t;
  out.statistical_dominates = out.statistical >= out.optimization;
  return out;
}

RateSetting corollary_learning_rates(std::size_t m, std::size_t n, int K, std::size_t T, double L,
                                     ParticipationMode mode) {
  if (m < 1 || K < 1 || T < 1 || !(L > 0.0)) throw ConfigError("corollary_learning_rates: invalid arguments");
  RateSetting r;
  r.m = m;
  r.n = mode == ParticipationMode::kFull ? m : n;
  r.K = K;
  r.eta_L = 1.0 / (std::sqrt(static_cast<double>(T)) * K * L);
  r.eta = std::sqrt(static_cast<double>(K) * static_cast<double>(r.n));
  return r;
}

BoundReport check_bound(const std::vector<std::vector<RoundTrace>>& traces, const TheoryConstants& consts,
                        const BoundSetup& setup) {
  if (traces.size() < setup.min_seeds) {
    throw ConfigError("check_bound: " + std::to_string(traces.size()) + " seeds, need " +
                      std::to_string(setup.min_seeds));
  }
  if (traces.empty()) throw ConfigError("check_bound: no traces");
  const std::vector<RoundTrace>& first = traces.front();
  for (const auto& tr : traces) {
    if (tr.size() != first.size()) throw ConfigError("check_bound: traces evaluated at different rounds");
    for (std::size_t j = 0; j < tr.size(); ++j) {
      if (tr[j].round != first[j].round) throw ConfigError("check_bound: traces evaluated at different rounds");
    }
  }

  BoundReport report;
  report.lhs = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < first.size(); ++j) {
    if (first[j].round >= setup.rounds) continue;
    double sum = 0.0;
    for (const auto& tr : traces) sum += tr[j].grad_sq_norm;
    const double avg = sum / static_cast<double>(traces.size());
    if (avg < report.lhs) {
      report.lhs = avg;
      report.argmin_round = first[j].round;
    }
  }
  if (!std::isfinite(report.lhs)) throw ConfigError("check_bound: no evaluated round before T");

  TheoryConstants c = consts;
  c.c = design_constant_c(consts.L, setup.rates, setup.mode);
  report.c = c.c;
  report.conditions = check_conditions(c, setup.rates, setup.mode);
  report.evaluable = c.c > 0.0 && std::all_of(report.conditions.begin(), report.conditions.end(),
                                               [](const ConditionCheck& k) { return k.pass; });
  if (!report.evaluable) return report;

  const RateSetting& r = setup.rates;
  report.vanishing = (c.f0 - c.f_star) / (c.c * r.eta * r.eta_L * r.K * static_cast<double>(setup.rounds));
  report.phi = phi(c, r, setup.mode);
  report.rhs = report.vanishing + report.phi;
  report.satisfied = report.lhs <= report.rhs;
  return report;
}

DriftReport check_drift_lemma(const DriftProbeSetup& setup, const TheoryConstants& consts, double eta_L, int K) {
  if (K < 1) throw ConfigError("check_drift_lemma: K must be >= 1");
  if (setup.objectives.empty()) throw ConfigError("check_drift_lemma: no objectives");
  if (setup.num_seeds < 1) throw ConfigError("check_drift_lemma: need at least one seed");
  if (eta_L < 0.0 || eta_L > 1.0 / (8.0 * consts.L * K)) {
    throw ConditionError("check_drift_lemma: eta_L must lie in [0, 1/(8LK)]");
  }

  const std::size_t m = setup.objectives.size();
  DriftReport report;
  report.grad_sq_norm = sq_norm(global_loss_and_grad(setup.objectives, setup.x_t).second);

  // acc[s][k-1]: sum over workers of |x_{t,k}^i - x_t|^2 for seed s.
  std::vector<std::vector<double>> acc(setup.num_seeds, std::vector<double>(K, 0.0));
  parallel_for(setup.num_seeds, setup.threads, [&](std::size_t s) {
    for (std::size_t i = 0; i < m; ++i) {
      const WorkerStreams streams{setup.root_seed, s, i};
      local_update(*setup.objectives[i], setup.x_t, K, eta_L, setup.batch_size, streams,
                   [&](int k, const ParamVector& x) { acc[s][k - 1] += sq_norm(x - setup.x_t); });
    }
  });

  const double k = K;
  const double bound = 5.0 * k * sq(eta_L) * (sq(consts.sigma_L) + 6.0 * k * sq(consts.sigma_G)) +
                       30.0 * k * k * sq(eta_L) * report.grad_sq_norm;
  report.all_pass = true;
  for (int step = 1; step <= K; ++step) {
    double total = 0.0;
    for (std::size_t s = 0; s < setup.num_seeds; ++s) total += acc[s][step - 1];
    DriftRow row;
    row.step = step;
    row.measured = total / (static_cast<double>(m) * static_cast<double>(setup.num_seeds));
    row.bound = bound;
    row.pass = row.measured <= row.bound;
    report.all_pass = report.all_pass && row.pass;
    report.rows.push_back(row);
  }
  return report;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("fit_slope: need two or more paired points");
  double mx = 0.0, my = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    mx += x[j];
    my += y[j];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    sxy += (x[j] - mx) * (y[j] - my);
    sxx += (x[j] - mx) * (x[j] - mx);
  }
  if (sxx == 0.0) throw NumericError("fit_slope: x values are all equal");
  return sxy / sxx;
}

SpeedupResult speedup_sweep(const SpeedupOptions& o) {
  if (o.sizes.size() < 3) throw ConfigError("speedup_sweep: need at least three sizes");
  if (!o.make_instance) throw ConfigError("speedup_sweep: make_instance is required");
  if (o.num_seeds < 1 || o.K < 1 || !(o.target_eps > 0.0) || !(o.grid_ratio > 1.0)) {
    throw ConfigError("speedup_sweep: invalid options");
  }
  const bool partial = o.mode != ParticipationMode::kFull;
  if (partial && o.fixed_workers < 1) throw ConfigError("speedup_sweep: partial mode needs fixed_workers");

  SpeedupResult result;
  for (std::size_t size : o.sizes) {
    const std::size_t m = partial ? o.fixed_workers : size;
    if (size < 1 || (partial && size > m)) throw ConfigError("speedup_sweep: size out of range");

    std::vector<ObjectiveSet> instances;
    for (std::size_t s = 0; s < o.num_seeds; ++s) instances.push_back(o.make_instance(m, o.root_seed + s));
    const std::size_t dim = instances.front().front()->dim();
    const ParamVector x0 = o.make_x0 ? o.make_x0(dim) : ParamVector(dim, 0.0);

    SpeedupPoint point{size, std::nullopt};
    std::size_t T = std::max<std::size_t>(o.min_rounds, static_cast<std::size_t>(o.K) * size);
    while (T <= o.max_rounds) {
      const RateSetting r = corollary_learning_rates(m, size, o.K, T, o.L, o.mode);
      FedAvgConfig cfg;
      if (o.mode == ParticipationMode::kFull) {
        cfg.strategy = SamplingStrategy::full(m);
      } else if (o.mode == ParticipationMode::kStrategy1) {
        cfg.strategy = SamplingStrategy::with_replacement(m, size);
      } else {
        cfg.strategy = SamplingStrategy::without_replacement(m, size);
      }
      cfg.local_steps = o.K;
      cfg.rounds = T;
      cfg.eta_local = r.eta_L;
      cfg.eta_global = r.eta;
      cfg.batch_size = o.batch_size;

      std::vector<std::vector<double>> norms(o.num_seeds);
      parallel_for(o.num_seeds, o.threads, [&](std::size_t s) {
        FedAvgConfig local = cfg;
        local.root_seed = mix64(o.root_seed + s);
        for (const RoundTrace& row : run_fedavg(local, instances[s], x0).trace) norms[s].push_back(row.grad_sq_norm);
      });

      double best = std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t <= T; ++t) {
        std::vector<double> at_t;
        for (const auto& v : norms) at_t.push_back(v[t]);
        best = std::min(best, median_of(std::move(at_t)));
      }
      if (best <= o.target_eps) {
        point.rounds = T;
        break;
      }
      T = std::max(T + 1, static_cast<std::size_t>(std::ceil(static_cast<double>(T) * o.grid_ratio)));
    }
    result.points.push_back(point);
  }

  std::vector<double> lx, ly;
  for (const SpeedupPoint& p : result.points) {
    if (!p.rounds) continue;
    lx.push_back(std::log(static_cast<double>(p.size)));
    ly.push_back(std::log(static_cast<double>(*p.rounds)));
  }
  if (lx.size() < 2) throw NumericError("speedup_sweep: fewer than two sizes reached the target");
  result.slope = fit_slope(lx, ly);
  return result;
}

}  // namespace fedsim
