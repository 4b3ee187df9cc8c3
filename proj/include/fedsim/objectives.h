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

#ifndef FEDSIM_OBJECTIVES_H_
#define FEDSIM_OBJECTIVES_H_

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedsim/datasets.h"
#include "fedsim/param.h"
#include "fedsim/rng.h"

namespace fedsim {

enum class ModelKind { kQuadratic, kLogistic, kMlp2 };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

// Architecture of a classifier. `hidden` only applies to kMlp2.
struct ModelShape {
  ModelKind kind = ModelKind::kLogistic;
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;
  std::size_t hidden = 200;

  std::size_t param_count() const;
};

// A worker's loss F_i as a finite sum over its local samples. By default the
// full gradient is the mean of per-sample gradients accumulated in sample
// order, so a stochastic gradient averaged over every sample equals it.
//
// Implementations are immutable after construction and safe to evaluate from
// several threads at once.
class LocalObjective {
 public:
  explicit LocalObjective(std::size_t worker_id) : worker_id_(worker_id) {}
  virtual ~LocalObjective() = default;

  std::size_t worker_id() const { return worker_id_; }

  virtual ModelKind kind() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::size_t num_samples() const = 0;

  // Mean loss / gradient over `samples` (indices into [0, num_samples())).
  virtual double batch_loss(const ParamVector& x, std::span<const std::size_t> samples) const = 0;
  virtual ParamVector batch_gradient(const ParamVector& x,
                                     std::span<const std::size_t> samples) const = 0;

  // Gradient Lipschitz constant when known in closed form or by a
  // guaranteed analytic bound.
  virtual std::optional<double> smoothness() const { return std::nullopt; }

  virtual double loss(const ParamVector& x) const;
  virtual ParamVector full_gradient(const ParamVector& x) const;

  // Mean gradient over `batch_size` samples drawn uniformly with replacement.
  ParamVector stochastic_gradient(const ParamVector& x, std::size_t batch_size,
                                  RngStream& stream) const;

 protected:
  // Throws ConfigError on a dimension mismatch and NumericError on
  // non-finite input.
  void check_input(const ParamVector& x) const;

 private:
  std::size_t worker_id_;
};

using ObjectivePtr = std::shared_ptr<const LocalObjective>;
using ObjectiveSet = std::vector<ObjectivePtr>;

// F(x) = 1/2 x^T diag(A) x - (b + z_s)^T x averaged over noise samples z_s.
// The z_s are centred and rescaled so that their mean squared norm is
// noise_std^2, which makes the per-sample gradient variance exactly
// noise_std^2. With noise_std == 0 there is a single noiseless sample.
// The full gradient reuses a cached mean of all noise samples, which keeps
// it cheap and bit-identical to a full pass over the samples.
class QuadraticObjective final : public LocalObjective {
 public:
  QuadraticObjective(std::size_t worker_id, ParamVector curvature, ParamVector linear,
                     double noise_std = 0.0, std::size_t noise_samples = 0,
                     std::optional<RngStream> noise_stream = std::nullopt);

  ModelKind kind() const override { return ModelKind::kQuadratic; }
  std::size_t dim() const override { return linear_.size(); }
  std::size_t num_samples() const override { return noise_.empty() ? 1 : noise_.size(); }
  double batch_loss(const ParamVector& x, std::span<const std::size_t> samples) const override;
  ParamVector batch_gradient(const ParamVector& x,
                             std::span<const std::size_t> samples) const override;
  std::optional<double> smoothness() const override;
  double loss(const ParamVector& x) const override;
  ParamVector full_gradient(const ParamVector& x) const override;

  const ParamVector& curvature() const { return curvature_; }
  const ParamVector& linear() const { return linear_; }
  double noise_std() const { return noise_std_; }

 private:
  ParamVector curvature_;
  ParamVector linear_;
  double noise_std_;
  std::vector<ParamVector> noise_;
  ParamVector full_noise_mean_;

  ParamVector noise_mean(std::span<const std::size_t> samples) const;
};

// Multinomial logistic regression (softmax + cross-entropy) on a subset of a
// shared dataset. Parameters: weights (C x d_in, row-major) then biases (C).
class LogisticObjective final : public LocalObjective {
 public:
  LogisticObjective(std::size_t worker_id, std::shared_ptr<const LabeledDataset> data,
                    std::vector<std::size_t> indices);

  ModelKind kind() const override { return ModelKind::kLogistic; }
  std::size_t dim() const override { return shape_.param_count(); }
  std::size_t num_samples() const override { return indices_.size(); }
  double batch_loss(const ParamVector& x, std::span<const std::size_t> samples) const override;
  ParamVector batch_gradient(const ParamVector& x,
                             std::span<const std::size_t> samples) const override;
  // 1/2 max_s (|a_s|^2 + 1): the softmax Hessian block has norm <= 1/2.
  std::optional<double> smoothness() const override { return smoothness_; }

  const ModelShape& shape() const { return shape_; }

 private:
  std::shared_ptr<const LabeledDataset> data_;
  std::vector<std::size_t> indices_;
  ModelShape shape_;
  double smoothness_ = 0.0;
};

// Two hidden ReLU layers: d_in -> H -> H -> C. Parameter blocks in order:
// W1 (H x d_in), b1, W2 (H x H), b2, W3 (C x H), b3.
class Mlp2Objective final : public LocalObjective {
 public:
  Mlp2Objective(std::size_t worker_id, std::shared_ptr<const LabeledDataset> data,
                std::vector<std::size_t> indices, std::size_t hidden = 200);

  ModelKind kind() const override { return ModelKind::kMlp2; }
  std::size_t dim() const override { return shape_.param_count(); }
  std::size_t num_samples() const override { return indices_.size(); }
  double batch_loss(const ParamVector& x, std::span<const std::size_t> samples) const override;
  ParamVector batch_gradient(const ParamVector& x,
                             std::span<const std::size_t> samples) const override;

  const ModelShape& shape() const { return shape_; }

 private:
  std::shared_ptr<const LabeledDataset> data_;
  std::vector<std::size_t> indices_;
  ModelShape shape_;
};

// f(x) = (1/m) sum_i F_i(x) and its gradient, accumulated in worker order.
std::pair<double, ParamVector> global_loss_and_grad(const ObjectiveSet& objectives,
                                                    const ParamVector& x);

struct QuadraticFamilyOptions {
  std::size_t noise_samples = 32;
  // Norm of the mean linear term b-bar; sets the distance from 0 to the optimum.
  double mean_norm = 1.0;
};

// m quadratics with A_i = I (so L = 1) and b_i = b-bar + u_i, where the u_i
// are centred and scaled so max_i |u_i| = sigma_g. Since
// grad F_i - grad f = b-bar - b_i, the global variability bound is exactly
// sigma_g at every x.
ObjectiveSet make_heterogeneous_quadratics(std::size_t m, std::size_t d, double sigma_g,
                                           double noise_std, RngStream stream,
                                           const QuadraticFamilyOptions& options = {});

// One objective per worker of `plan`.
ObjectiveSet make_classifier_objectives(const ModelShape& shape,
                                        std::shared_ptr<const LabeledDataset> data,
                                        const PartitionPlan& plan);

// Zero for quadratic and logistic models; fan-in scaled uniform weights
// (U[-1/sqrt(fan_in), 1/sqrt(fan_in)]) and zero biases for mlp2.
ParamVector initial_point(const ModelShape& shape, RngStream stream);

// Fraction of `ds` rows whose argmax prediction equals the label.
double classification_accuracy(const ModelShape& shape, const ParamVector& x,
                               const LabeledDataset& ds);

// Exact minimum of the average of diagonal quadratics. Throws ConfigError if
// any objective is not a QuadraticObjective or f is unbounded below.
std::pair<double, ParamVector> quadratic_minimum(const ObjectiveSet& objectives);

}  // namespace fedsim

#endif  // FEDSIM_OBJECTIVES_H_
