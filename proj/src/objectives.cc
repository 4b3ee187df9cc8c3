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

#include "fedsim/objectives.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedsim/errors.h"

namespace fedsim {
namespace {

std::vector<std::size_t> all_samples(std::size_t count) {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

void check_samples(std::span<const std::size_t> samples, std::size_t count) {
  if (samples.empty()) throw ConfigError("objective: empty sample batch");
  for (std::size_t s : samples) {
    if (s >= count) throw ConfigError("objective: sample index out of range");
  }
}

// Writes softmax(logits) into probs and returns log-sum-exp(logits).
double softmax(std::span<const double> logits, std::span<double> probs) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    probs[c] = std::exp(logits[c] - peak);
    total += probs[c];
  }
  for (double& p : probs) p /= total;
  return peak + std::log(total);
}

void divide(ParamVector& v, std::size_t count) {
  const auto n = static_cast<double>(count);
  for (double& x : v.values()) x /= n;
}

// Dense layer y = W x + b where W is rows x cols, row-major.
void affine(const double* w, const double* b, std::span<const double> in, std::span<double> out) {
  const std::size_t cols = in.size();
  for (std::size_t r = 0; r < out.size(); ++r) {
    double acc = b[r];
    const double* row = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * in[c];
    out[r] = acc;
  }
}

struct Mlp2Layout {
  std::size_t w1, b1, w2, b2, w3, b3, total;
  explicit Mlp2Layout(const ModelShape& s) {
    w1 = 0;
    b1 = w1 + s.hidden * s.input_dim;
    w2 = b1 + s.hidden;
    b2 = w2 + s.hidden * s.hidden;
    w3 = b2 + s.hidden;
    b3 = w3 + s.num_classes * s.hidden;
    total = b3 + s.num_classes;
  }
};

// Scratch buffers for one forward/backward pass of the 2-hidden-layer net.
struct Mlp2Pass {
  std::vector<double> a1, h1, a2, h2, logits, probs, d2, d1;
  explicit Mlp2Pass(const ModelShape& s)
      : a1(s.hidden), h1(s.hidden), a2(s.hidden), h2(s.hidden), logits(s.num_classes),
        probs(s.num_classes), d2(s.hidden), d1(s.hidden) {}

  // Returns the cross-entropy loss for `label`.
  double forward(const ModelShape& s, const Mlp2Layout& lay, const double* p,
                 std::span<const double> input, int label) {
    affine(p + lay.w1, p + lay.b1, input, a1);
    for (std::size_t j = 0; j < s.hidden; ++j) h1[j] = a1[j] > 0.0 ? a1[j] : 0.0;
    affine(p + lay.w2, p + lay.b2, h1, a2);
    for (std::size_t j = 0; j < s.hidden; ++j) h2[j] = a2[j] > 0.0 ? a2[j] : 0.0;
    affine(p + lay.w3, p + lay.b3, h2, logits);
    const double lse = softmax(logits, probs);
    return lse - logits[static_cast<std::size_t>(label)];
  }

  void backward(const ModelShape& s, const Mlp2Layout& lay, const double* p,
                std::span<const double> input, int label, double* g) {
    const std::size_t hidden = s.hidden;
    const std::size_t in = s.input_dim;
    probs[static_cast<std::size_t>(label)] -= 1.0;  // d loss / d logits
    std::fill(d2.begin(), d2.end(), 0.0);
    for (std::size_t c = 0; c < s.num_classes; ++c) {
      const double dz = probs[c];
      double* gw = g + lay.w3 + c * hidden;
      const double* w = p + lay.w3 + c * hidden;
      for (std::size_t j = 0; j < hidden; ++j) {
        gw[j] += dz * h2[j];
        d2[j] += w[j] * dz;
      }
      g[lay.b3 + c] += dz;
    }
    for (std::size_t j = 0; j < hidden; ++j) d2[j] = a2[j] > 0.0 ? d2[j] : 0.0;
    std::fill(d1.begin(), d1.end(), 0.0);
    for (std::size_t r = 0; r < hidden; ++r) {
      const double dz = d2[r];
      if (dz == 0.0) continue;
      double* gw = g + lay.w2 + r * hidden;
      const double* w = p + lay.w2 + r * hidden;
      for (std::size_t j = 0; j < hidden; ++j) {
        gw[j] += dz * h1[j];
        d1[j] += w[j] * dz;
      }
      g[lay.b2 + r] += dz;
    }
    for (std::size_t j = 0; j < hidden; ++j) d1[j] = a1[j] > 0.0 ? d1[j] : 0.0;
    for (std::size_t r = 0; r < hidden; ++r) {
      const double dz = d1[r];
      if (dz == 0.0) continue;
      double* gw = g + lay.w1 + r * in;
      for (std::size_t j = 0; j < in; ++j) gw[j] += dz * input[j];
      g[lay.b1 + r] += dz;
    }
  }
};

std::size_t predict(const ModelShape& shape, const ParamVector& x, std::span<const double> input) {
  std::vector<double> logits(shape.num_classes);
  if (shape.kind == ModelKind::kLogistic) {
    const double* p = x.values().data();
    affine(p, p + shape.num_classes * shape.input_dim, input, logits);
  } else if (shape.kind == ModelKind::kMlp2) {
    const Mlp2Layout lay(shape);
    Mlp2Pass pass(shape);
    pass.forward(shape, lay, x.values().data(), input, 0);
    logits = pass.logits;
  } else {
    throw ConfigError("predict: quadratic objectives are not classifiers");
  }
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

ModelShape shape_for(ModelKind kind, const LabeledDataset& data, std::size_t hidden) {
  ModelShape s;
  s.kind = kind;
  s.input_dim = data.num_features;
  s.num_classes = data.num_classes;
  s.hidden = hidden;
  return s;
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kQuadratic:
      return "quadratic";
    case ModelKind::kLogistic:
      return "logistic";
    case ModelKind::kMlp2:
      return "mlp2";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "quadratic") return ModelKind::kQuadratic;
  if (name == "logistic") return ModelKind::kLogistic;
  if (name == "mlp2") return ModelKind::kMlp2;
  throw ConfigError("unknown objective '" + name + "' (expected quadratic, logistic or mlp2)");
}

std::size_t ModelShape::param_count() const {
  switch (kind) {
    case ModelKind::kQuadratic:
      return input_dim;
    case ModelKind::kLogistic:
      return num_classes * (input_dim + 1);
    case ModelKind::kMlp2:
      return Mlp2Layout(*this).total;
  }
  return 0;
}

// --- LocalObjective ---------------------------------------------------------

void LocalObjective::check_input(const ParamVector& x) const {
  if (x.size() != dim()) {
    throw ConfigError("objective " + std::to_string(worker_id_) + ": expected dimension " +
                      std::to_string(dim()) + ", got " + std::to_string(x.size()));
  }
  require_finite(x, "objective input");
}

double LocalObjective::loss(const ParamVector& x) const {
  const auto idx = all_samples(num_samples());
  return batch_loss(x, idx);
}

ParamVector LocalObjective::full_gradient(const ParamVector& x) const {
  const auto idx = all_samples(num_samples());
  return batch_gradient(x, idx);
}

ParamVector LocalObjective::stochastic_gradient(const ParamVector& x, std::size_t batch_size,
                                                RngStream& stream) const {
  if (num_samples() == 0) throw ConfigError("stochastic_gradient: empty local dataset");
  if (batch_size == 0) throw ConfigError("stochastic_gradient: batch size must be positive");
  std::vector<std::size_t> batch(batch_size);
  for (auto& s : batch) s = stream.uniform_index(num_samples());
  return batch_gradient(x, batch);
}

// --- QuadraticObjective ------------------------------------------------------

QuadraticObjective::QuadraticObjective(std::size_t worker_id, ParamVector curvature,
                                       ParamVector linear, double noise_std,
                                       std::size_t noise_samples,
                                       std::optional<RngStream> noise_stream)
    : LocalObjective(worker_id),
      curvature_(std::move(curvature)),
      linear_(std::move(linear)),
      noise_std_(noise_std) {
  require_same_dim(curvature_, linear_, "QuadraticObjective");
  for (double a : curvature_.values()) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("QuadraticObjective: curvature must be >= 0");
  }
  require_finite(linear_, "QuadraticObjective");
  if (!(noise_std >= 0.0)) throw ConfigError("QuadraticObjective: noise_std must be >= 0");
  if (noise_std == 0.0) return;
  if (noise_samples < 2) throw ConfigError("QuadraticObjective: noise needs at least 2 samples");
  if (!noise_stream) throw ConfigError("QuadraticObjective: noise needs a stream");

  const std::size_t d = linear_.size();
  noise_.assign(noise_samples, ParamVector(d));
  for (auto& z : noise_) {
    for (double& v : z.values()) v = noise_stream->normal();
  }
  const ParamVector centre = mean(noise_);
  double spread = 0.0;
  for (auto& z : noise_) {
    for (std::size_t j = 0; j < d; ++j) z[j] -= centre[j];
    spread += sq_norm(z);
  }
  spread /= static_cast<double>(noise_samples);
  const double factor = noise_std / std::sqrt(spread);
  for (auto& z : noise_) z.scale(factor);
  std::vector<std::size_t> all(noise_samples);
  for (std::size_t s = 0; s < noise_samples; ++s) all[s] = s;
  full_noise_mean_ = noise_mean(all);
}

double QuadraticObjective::batch_loss(const ParamVector& x, std::span<const std::size_t> samples) const {
  check_input(x);
  check_samples(samples, num_samples());
  double curvature_term = 0.0;
  double linear_term = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    curvature_term += curvature_[j] * x[j] * x[j];
    linear_term += linear_[j] * x[j];
  }
  double noise_term = 0.0;
  if (!noise_.empty()) {
    for (std::size_t s : samples) noise_term += dot(noise_[s], x);
    noise_term /= static_cast<double>(samples.size());
  }
  return 0.5 * curvature_term - linear_term - noise_term;
}

ParamVector QuadraticObjective::batch_gradient(const ParamVector& x,
                                               std::span<const std::size_t> samples) const {
  check_input(x);
  check_samples(samples, num_samples());
  ParamVector g(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) g[j] = curvature_[j] * x[j] - linear_[j];
  if (noise_.empty()) return g;
  const ParamVector z = noise_mean(samples);
  for (std::size_t j = 0; j < x.size(); ++j) g[j] -= z[j];
  return g;
}

ParamVector QuadraticObjective::noise_mean(std::span<const std::size_t> samples) const {
  ParamVector sum(linear_.size(), 0.0);
  for (std::size_t s : samples) {
    const ParamVector& z = noise_[s];
    for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += z[j];
  }
  divide(sum, samples.size());
  return sum;
}

double QuadraticObjective::loss(const ParamVector& x) const {
  check_input(x);
  double curvature_term = 0.0;
  double linear_term = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    curvature_term += curvature_[j] * x[j] * x[j];
    linear_term += linear_[j] * x[j];
  }
  return 0.5 * curvature_term - linear_term - (noise_.empty() ? 0.0 : dot(full_noise_mean_, x));
}

ParamVector QuadraticObjective::full_gradient(const ParamVector& x) const {
  check_input(x);
  ParamVector g(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) g[j] = curvature_[j] * x[j] - linear_[j];
  if (noise_.empty()) return g;
  for (std::size_t j = 0; j < x.size(); ++j) g[j] -= full_noise_mean_[j];
  return g;
}

std::optional<double> QuadraticObjective::smoothness() const {
  double peak = 0.0;
  for (double a : curvature_.values()) peak = std::max(peak, a);
  return peak;
}

// --- LogisticObjective -------------------------------------------------------

LogisticObjective::LogisticObjective(std::size_t worker_id, std::shared_ptr<const LabeledDataset> data,
                                     std::vector<std::size_t> indices)
    : LocalObjective(worker_id), data_(std::move(data)), indices_(std::move(indices)) {
  if (!data_) throw ConfigError("LogisticObjective: null dataset");
  if (indices_.empty()) throw ConfigError("LogisticObjective: empty local dataset");
  shape_ = shape_for(ModelKind::kLogistic, *data_, 0);
  double widest = 0.0;
  for (std::size_t idx : indices_) {
    if (idx >= data_->size()) throw ConfigError("LogisticObjective: sample index out of range");
    double len = 1.0;
    for (double v : data_->row(idx)) len += v * v;
    widest = std::max(widest, len);
  }
  smoothness_ = 0.5 * widest;
}

double LogisticObjective::batch_loss(const ParamVector& x, std::span<const std::size_t> samples) const {
  check_input(x);
  check_samples(samples, num_samples());
  const std::size_t classes = shape_.num_classes;
  const double* p = x.values().data();
  std::vector<double> logits(classes), probs(classes);
  double total = 0.0;
  for (std::size_t s : samples) {
    const std::size_t idx = indices_[s];
    affine(p, p + classes * shape_.input_dim, data_->row(idx), logits);
    const double lse = softmax(logits, probs);
    total += lse - logits[static_cast<std::size_t>(data_->labels[idx])];
  }
  return total / static_cast<double>(samples.size());
}

ParamVector LogisticObjective::batch_gradient(const ParamVector& x,
                                              std::span<const std::size_t> samples) const {
  check_input(x);
  check_samples(samples, num_samples());
  const std::size_t classes = shape_.num_classes;
  const std::size_t in = shape_.input_dim;
  const double* p = x.values().data();
  ParamVector grad(dim(), 0.0);
  double* g = grad.values().data();
  std::vector<double> logits(classes), probs(classes);
  for (std::size_t s : samples) {
    const std::size_t idx = indices_[s];
    const auto input = data_->row(idx);
    affine(p, p + classes * in, input, logits);
    softmax(logits, probs);
    probs[static_cast<std::size_t>(data_->labels[idx])] -= 1.0;
    for (std::size_t c = 0; c < classes; ++c) {
      double* gw = g + c * in;
      for (std::size_t j = 0; j < in; ++j) gw[j] += probs[c] * input[j];
      g[classes * in + c] += probs[c];
    }
  }
  divide(grad, samples.size());
  return grad;
}

// --- Mlp2Objective -----------------------------------------------------------

Mlp2Objective::Mlp2Objective(std::size_t worker_id, std::shared_ptr<const LabeledDataset> data,
                             std::vector<std::size_t> indices, std::size_t hidden)
    : LocalObjective(worker_id), data_(std::move(data)), indices_(std::move(indices)) {
  if (!data_) throw ConfigError("Mlp2Objective: null dataset");
  if (indices_.empty()) throw ConfigError("Mlp2Objective: empty local dataset");
  if (hidden == 0) throw ConfigError("Mlp2Objective: hidden width must be positive");
  for (std::size_t idx : indices_) {
    if (idx >= data_->size()) throw ConfigError("Mlp2Objective: sample index out of range");
  }
  shape_ = shape_for(ModelKind::kMlp2, *data_, hidden);
}

double Mlp2Objective::batch_loss(const ParamVector& x, std::span<const std::size_t> samples) const {
  check_input(x);
  check_samples(samples, num_samples());
  const Mlp2Layout lay(shape_);
  Mlp2Pass pass(shape_);
  double total = 0.0;
  for (std::size_t s : samples) {
    const std::size_t idx = indices_[s];
    total += pass.forward(shape_, lay, x.values().data(), data_->row(idx), data_->labels[idx]);
  }
  return total / static_cast<double>(samples.size());
}

ParamVector Mlp2Objective::batch_gradient(const ParamVector& x,
                                          std::span<const std::size_t> samples) const {
  check_input(x);
  check_samples(samples, num_samples());
  const Mlp2Layout lay(shape_);
  Mlp2Pass pass(shape_);
  ParamVector grad(dim(), 0.0);
  for (std::size_t s : samples) {
    const std::size_t idx = indices_[s];
    const auto input = data_->row(idx);
    pass.forward(shape_, lay, x.values().data(), input, data_->labels[idx]);
    pass.backward(shape_, lay, x.values().data(), input, data_->labels[idx], grad.values().data());
  }
  divide(grad, samples.size());
  return grad;
}

// --- free functions ----------------------------------------------------------

std::pair<double, ParamVector> global_loss_and_grad(const ObjectiveSet& objectives,
                                                    const ParamVector& x) {
  if (objectives.empty()) throw ConfigError("global_loss_and_grad: no workers");
  double loss = 0.0;
  ParamVector grad(x.size(), 0.0);
  for (const auto& obj : objectives) {
    if (obj->dim() != x.size()) throw ConfigError("global_loss_and_grad: objectives disagree on dimension");
    loss += obj->loss(x);
    const ParamVector g = obj->full_gradient(x);
    for (std::size_t j = 0; j < x.size(); ++j) grad[j] += g[j];
  }
  const auto m = static_cast<double>(objectives.size());
  divide(grad, objectives.size());
  return {loss / m, std::move(grad)};
}

ObjectiveSet make_heterogeneous_quadratics(std::size_t m, std::size_t d, double sigma_g,
                                           double noise_std, RngStream stream,
                                           const QuadraticFamilyOptions& options) {
  if (m == 0 || d == 0) throw ConfigError("make_heterogeneous_quadratics: m and d must be positive");
  if (!(sigma_g >= 0.0)) throw ConfigError("make_heterogeneous_quadratics: sigma_G must be >= 0");
  if (sigma_g > 0.0 && m == 1) {
    throw ConfigError("make_heterogeneous_quadratics: a single worker has no global variability");
  }

  ParamVector centre(d);
  for (double& v : centre.values()) v = stream.normal();
  if (options.mean_norm > 0.0) {
    centre.scale(options.mean_norm / norm(centre));
  } else {
    centre = ParamVector(d, 0.0);
  }

  std::vector<ParamVector> offsets(m, ParamVector(d, 0.0));
  if (sigma_g > 0.0) {
    for (auto& u : offsets) {
      for (double& v : u.values()) v = stream.normal();
    }
    const ParamVector offset_mean = mean(offsets);
    double widest = 0.0;
    for (auto& u : offsets) {
      for (std::size_t j = 0; j < d; ++j) u[j] -= offset_mean[j];
      widest = std::max(widest, norm(u));
    }
    for (auto& u : offsets) u.scale(sigma_g / widest);
  }

  ObjectiveSet out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    std::optional<RngStream> noise_stream;
    if (noise_std > 0.0) noise_stream = stream.fork(i);
    out.push_back(std::make_shared<QuadraticObjective>(i, ParamVector(d, 1.0), centre + offsets[i],
                                                       noise_std, noise_std > 0.0 ? options.noise_samples : 0,
                                                       noise_stream));
  }
  return out;
}

ObjectiveSet make_classifier_objectives(const ModelShape& shape,
                                        std::shared_ptr<const LabeledDataset> data,
                                        const PartitionPlan& plan) {
  ObjectiveSet out;
  out.reserve(plan.num_workers);
  for (std::size_t w = 0; w < plan.num_workers; ++w) {
    switch (shape.kind) {
      case ModelKind::kLogistic:
        out.push_back(std::make_shared<LogisticObjective>(w, data, plan.assignment[w]));
        break;
      case ModelKind::kMlp2:
        out.push_back(std::make_shared<Mlp2Objective>(w, data, plan.assignment[w], shape.hidden));
        break;
      case ModelKind::kQuadratic:
        throw ConfigError("make_classifier_objectives: quadratic is not a classifier");
    }
  }
  return out;
}

ParamVector initial_point(const ModelShape& shape, RngStream stream) {
  ParamVector x(shape.param_count(), 0.0);
  if (shape.kind != ModelKind::kMlp2) return x;
  const Mlp2Layout lay(shape);
  auto fill = [&](std::size_t begin, std::size_t end, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t j = begin; j < end; ++j) x[j] = (2.0 * stream.uniform() - 1.0) * bound;
  };
  fill(lay.w1, lay.b1, shape.input_dim);
  fill(lay.w2, lay.b2, shape.hidden);
  fill(lay.w3, lay.b3, shape.hidden);
  return x;
}

double classification_accuracy(const ModelShape& shape, const ParamVector& x,
                               const LabeledDataset& ds) {
  if (x.size() != shape.param_count()) throw ConfigError("classification_accuracy: dimension mismatch");
  if (ds.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (predict(shape, x, ds.row(i)) == static_cast<std::size_t>(ds.labels[i])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

std::pair<double, ParamVector> quadratic_minimum(const ObjectiveSet& objectives) {
  if (objectives.empty()) throw ConfigError("quadratic_minimum: no workers");
  const std::size_t d = objectives.front()->dim();
  ParamVector curvature_sum(d, 0.0);
  ParamVector linear_sum(d, 0.0);
  for (const auto& obj : objectives) {
    const auto* quad = dynamic_cast<const QuadraticObjective*>(obj.get());
    if (quad == nullptr) throw ConfigError("quadratic_minimum: objective is not quadratic");
    for (std::size_t j = 0; j < d; ++j) {
      curvature_sum[j] += quad->curvature()[j];
      linear_sum[j] += quad->linear()[j];
    }
  }
  ParamVector argmin(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    if (curvature_sum[j] > 0.0) {
      argmin[j] = linear_sum[j] / curvature_sum[j];
    } else if (linear_sum[j] != 0.0) {
      throw ConfigError("quadratic_minimum: f is unbounded below");
    }
  }
  double value = 0.0;
  for (const auto& obj : objectives) value += obj->loss(argmin);
  return {value / static_cast<double>(objectives.size()), std::move(argmin)};
}

}  // namespace fedsim
