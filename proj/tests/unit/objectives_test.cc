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
#include <memory>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "printers.h"

#include "fedsim/errors.h"
#include "fedsim/objectives.h"
#include "fedsim/theory.h"
#include "oracles.h"

namespace fedsim {
namespace {

std::vector<std::size_t> iota_n(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

std::shared_ptr<const LabeledDataset> toy_data(std::size_t n, std::size_t d_in, std::size_t classes,
                                               std::uint64_t seed) {
  return std::make_shared<LabeledDataset>(make_synthetic_classification(n, d_in, classes, RngStream(seed)));
}

ParamVector random_point(std::size_t d, double scale, RngStream& s) {
  ParamVector x(d);
  for (std::size_t j = 0; j < d; ++j) x[j] = scale * s.normal();
  return x;
}

double fd_relative_error(const LocalObjective& obj, const ParamVector& x, const std::vector<std::size_t>& coords) {
  const auto f = [&obj](const oracle::Vec& v) { return obj.loss(ParamVector(v)); };
  const oracle::Vec fd = oracle::finite_difference(f, x.raw(), 1e-6, coords);
  return oracle::relative_error(fd, obj.full_gradient(x).raw(), coords);
}

TEST(QuadraticTest, GradientIsXMinusB) {
  const QuadraticObjective q(0, {1.0, 1.0}, {1.0, 0.0});
  EXPECT_EQ(q.full_gradient({0.0, 0.0}), (ParamVector{-1.0, 0.0}));
  EXPECT_EQ(q.loss({1.0, 0.0}), -0.5);
  EXPECT_EQ(*q.smoothness(), 1.0);
  EXPECT_EQ(q.num_samples(), 1u);
}

TEST(QuadraticTest, RejectsBadInput) {
  const QuadraticObjective q(0, {1.0}, {0.0});
  EXPECT_THROW(q.full_gradient({1.0, 2.0}), ConfigError);
  EXPECT_THROW(q.full_gradient({std::nan("")}), NumericError);
  EXPECT_THROW(QuadraticObjective(0, {-1.0}, {0.0}), ConfigError);
  EXPECT_THROW(QuadraticObjective(0, {1.0}, {0.0}, 0.5, 8), ConfigError);  // noise without a stream
}

TEST(QuadraticTest, NoiseVarianceIsExact) {
  const QuadraticObjective q(0, {1.0, 2.0, 0.5}, {0.3, -0.2, 1.0}, 0.5, 64, RngStream(5));
  const ParamVector x{0.1, 0.2, 0.3};
  const ParamVector g = q.full_gradient(x);
  double spread = 0.0;
  for (std::size_t s = 0; s < q.num_samples(); ++s) {
    const std::size_t one[1] = {s};
    spread += sq_norm(q.batch_gradient(x, one) - g);
  }
  EXPECT_NEAR(spread / static_cast<double>(q.num_samples()), 0.25, 1e-12);
}

TEST(LogisticTest, SymmetricToyHasZeroGradientAtOrigin) {
  auto ds = std::make_shared<LabeledDataset>();
  ds->num_features = 2;
  ds->num_classes = 2;
  ds->features = {1, 0, -1, 0, 0, 1, 0, -1};
  ds->labels = {0, 0, 1, 1};
  const LogisticObjective obj(0, ds, {0, 1, 2, 3});
  const ParamVector g = obj.full_gradient(ParamVector(obj.dim(), 0.0));
  for (double v : g.values()) EXPECT_EQ(v, 0.0);
  EXPECT_NEAR(obj.loss(ParamVector(obj.dim(), 0.0)), std::log(2.0), 1e-15);
}

TEST(LogisticTest, AnalyticSmoothnessBoundsGradientChange) {
  auto ds = toy_data(60, 5, 3, 11);
  const LogisticObjective obj(0, ds, iota_n(60));
  RngStream s(12);
  for (int trial = 0; trial < 20; ++trial) {
    const ParamVector x = random_point(obj.dim(), 1.0, s);
    const ParamVector y = random_point(obj.dim(), 1.0, s);
    EXPECT_LE(norm(obj.full_gradient(x) - obj.full_gradient(y)), *obj.smoothness() * norm(x - y) * (1 + 1e-12));
  }
}

TEST(Mlp2Test, ParameterCountMatchesArchitecture) {
  const ModelShape two_nn{ModelKind::kMlp2, 784, 10, 200};
  EXPECT_EQ(two_nn.param_count(), 199210u);
  const ModelShape lr{ModelKind::kLogistic, 784, 10};
  EXPECT_EQ(lr.param_count(), 7850u);
}

TEST(Mlp2Test, FiveSampleGradientMatchesFiniteDifferences) {
  auto ds = toy_data(5, 4, 3, 21);
  const Mlp2Objective obj(0, ds, iota_n(5), 16);
  RngStream s(22);
  const ParamVector x = initial_point(obj.shape(), RngStream(23));
  EXPECT_LT(fd_relative_error(obj, x, iota_n(obj.dim())), 1e-5);
  const ParamVector y = random_point(obj.dim(), 0.5, s);
  EXPECT_LT(fd_relative_error(obj, y, iota_n(obj.dim())), 1e-5);
}

TEST(GradientCheckTest, AllFamiliesAtRandomPoints) {
  auto ds = toy_data(30, 6, 4, 31);
  const QuadraticObjective quad(0, {1.0, 2.0, 3.0, 0.5}, {1.0, -1.0, 0.5, 0.0}, 0.3, 16, RngStream(32));
  const LogisticObjective logistic(0, ds, iota_n(30));
  const Mlp2Objective mlp(0, ds, iota_n(30), 12);
  RngStream s(33);
  for (const LocalObjective* obj : {static_cast<const LocalObjective*>(&quad),
                                    static_cast<const LocalObjective*>(&logistic),
                                    static_cast<const LocalObjective*>(&mlp)}) {
    for (int point = 0; point < 5; ++point) {
      const ParamVector x = random_point(obj->dim(), 0.7, s);
      EXPECT_LT(fd_relative_error(*obj, x, iota_n(obj->dim())), 1e-5) << to_string(obj->kind());
    }
  }
}

TEST(FiniteSumTest, FullPassEqualsFullGradientBitExactly) {
  auto ds = toy_data(17, 3, 3, 41);
  const QuadraticObjective quad(0, {1.0, 0.5, 2.0}, {0.2, 0.1, -0.4}, 0.7, 23, RngStream(42));
  const LogisticObjective logistic(0, ds, iota_n(17));
  const Mlp2Objective mlp(0, ds, iota_n(17), 8);
  RngStream s(43);
  for (const LocalObjective* obj : {static_cast<const LocalObjective*>(&quad),
                                    static_cast<const LocalObjective*>(&logistic),
                                    static_cast<const LocalObjective*>(&mlp)}) {
    const ParamVector x = random_point(obj->dim(), 0.5, s);
    const auto all = iota_n(obj->num_samples());
    EXPECT_EQ(obj->batch_gradient(x, all), obj->full_gradient(x)) << to_string(obj->kind());
  }
}

TEST(FiniteSumTest, StochasticGradientIsUnbiased) {
  const QuadraticObjective q(0, {1.0, 1.0}, {0.5, -0.5}, 0.5, 32, RngStream(51));
  const ParamVector x{0.3, 0.1};
  const ParamVector g = q.full_gradient(x);
  const int n = 100000;
  RngStream s(52);
  std::vector<double> sum(2, 0.0), sum_sq(2, 0.0);
  for (int i = 0; i < n; ++i) {
    const ParamVector sg = q.stochastic_gradient(x, 1, s);
    for (std::size_t j = 0; j < 2; ++j) {
      sum[j] += sg[j];
      sum_sq[j] += sg[j] * sg[j];
    }
  }
  for (std::size_t j = 0; j < 2; ++j) {
    const double mean = sum[j] / n;
    const double var = sum_sq[j] / n - mean * mean;
    EXPECT_LE(std::abs(mean - g[j]), 4.0 * std::sqrt(var / n));
  }
}

TEST(FiniteSumTest, SameStreamSameStochasticGradient) {
  auto ds = toy_data(40, 3, 2, 61);
  const LogisticObjective obj(0, ds, iota_n(40));
  const ParamVector x(obj.dim(), 0.1);
  RngStream a = derive_stream(1, 2, 3, 4, StreamPurpose::kLocalGradient);
  RngStream b = derive_stream(1, 2, 3, 4, StreamPurpose::kLocalGradient);
  EXPECT_EQ(obj.stochastic_gradient(x, 8, a), obj.stochastic_gradient(x, 8, b));
  EXPECT_THROW(obj.stochastic_gradient(x, 0, a), ConfigError);
}

TEST(GlobalObjectiveTest, Examples) {
  ObjectiveSet two{std::make_shared<QuadraticObjective>(0, ParamVector{1.0, 1.0}, ParamVector{1.0, 0.0}),
                   std::make_shared<QuadraticObjective>(1, ParamVector{1.0, 1.0}, ParamVector{-1.0, 0.0})};
  EXPECT_EQ(global_loss_and_grad(two, {0.0, 0.0}).second, (ParamVector{0.0, 0.0}));

  ObjectiveSet one{two[0]};
  const ParamVector x{0.4, -0.3};
  EXPECT_EQ(global_loss_and_grad(one, x).first, two[0]->loss(x));
  EXPECT_EQ(global_loss_and_grad(one, x).second, two[0]->full_gradient(x));
  EXPECT_THROW(global_loss_and_grad({}, x), ConfigError);
}

TEST(GlobalObjectiveTest, MatchesDirectSummation) {
  const ObjectiveSet objs = make_heterogeneous_quadratics(3, 4, 1.5, 0.2, RngStream(71));
  const ParamVector x{0.1, 0.2, -0.3, 0.4};
  // Per-sample evaluation, summed independently of global_loss_and_grad.
  double f = 0.0;
  ParamVector g(4, 0.0);
  for (const auto& obj : objs) {
    double fi = 0.0;
    ParamVector gi(4, 0.0);
    for (std::size_t s = 0; s < obj->num_samples(); ++s) {
      const std::size_t one[1] = {s};
      fi += obj->batch_loss(x, one);
      gi = gi + obj->batch_gradient(x, one);
    }
    f += fi / static_cast<double>(obj->num_samples());
    g = g + scaled(1.0 / static_cast<double>(obj->num_samples()), gi);
  }
  const auto [gf, gg] = global_loss_and_grad(objs, x);
  EXPECT_NEAR(gf, f / 3.0, 1e-12);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(gg[j], g[j] / 3.0, 1e-12);
}

TEST(HeterogeneousQuadraticsTest, ZeroVariabilityGivesIdenticalWorkers) {
  const ObjectiveSet objs = make_heterogeneous_quadratics(5, 3, 0.0, 0.0, RngStream(81));
  const auto& first = dynamic_cast<const QuadraticObjective&>(*objs[0]);
  for (const auto& obj : objs) {
    const auto& q = dynamic_cast<const QuadraticObjective&>(*obj);
    EXPECT_EQ(q.linear(), first.linear());
    EXPECT_EQ(q.curvature(), ParamVector(3, 1.0));
  }
  EXPECT_LE(measure_sigma_g(objs, {ParamVector(3, 0.0), ParamVector{1.0, 2.0, 3.0}}), 1e-12);
}

TEST(HeterogeneousQuadraticsTest, TwoWorkersSitSymmetricallyAroundTheMean) {
  const ObjectiveSet objs = make_heterogeneous_quadratics(2, 1, 1.0, 0.0, RngStream(82));
  const double b0 = dynamic_cast<const QuadraticObjective&>(*objs[0]).linear()[0];
  const double b1 = dynamic_cast<const QuadraticObjective&>(*objs[1]).linear()[0];
  const double bar = 0.5 * (b0 + b1);
  EXPECT_NEAR(std::abs(b0 - bar), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(b1 - bar), 1.0, 1e-12);
  EXPECT_NEAR(measure_sigma_g(objs, {ParamVector{0.0}}), 1.0, 1e-12);
}

TEST(HeterogeneousQuadraticsTest, MeasuredVariabilityMatchesTarget) {
  for (double target : {0.5, 1.0, 2.0}) {
    const ObjectiveSet objs = make_heterogeneous_quadratics(16, 10, target, 0.5, RngStream(83));
    RngStream s(84);
    std::vector<ParamVector> probes;
    for (int p = 0; p < 10; ++p) probes.push_back(random_point(10, 2.0, s));
    EXPECT_NEAR(measure_sigma_g(objs, probes), target, 1e-12);
  }
  EXPECT_THROW(make_heterogeneous_quadratics(1, 3, 1.0, 0.0, RngStream(85)), ConfigError);
}

TEST(QuadraticMinimumTest, ClosedFormMinimizer) {
  ObjectiveSet objs{std::make_shared<QuadraticObjective>(0, ParamVector{1.0}, ParamVector{2.0}),
                    std::make_shared<QuadraticObjective>(1, ParamVector{3.0}, ParamVector{0.0})};
  // f = (1/2)(0.5 x^2 - 2x + 1.5 x^2) = x^2 - x, minimized at x = 0.5.
  const auto [f_star, x_star] = quadratic_minimum(objs);
  EXPECT_DOUBLE_EQ(x_star[0], 0.5);
  EXPECT_DOUBLE_EQ(f_star, -0.25);
}

TEST(InitialPointTest, FanInScaledForMlp) {
  const ModelShape shape{ModelKind::kMlp2, 9, 3, 4};
  const ParamVector x = initial_point(shape, RngStream(91));
  ASSERT_EQ(x.size(), shape.param_count());
  // W1 occupies the first 4 x 9 entries with bound 1/3.
  for (std::size_t j = 0; j < 36; ++j) EXPECT_LE(std::abs(x[j]), 1.0 / 3.0);
  for (std::size_t j = 36; j < 40; ++j) EXPECT_EQ(x[j], 0.0);  // b1
  EXPECT_EQ(initial_point({ModelKind::kLogistic, 9, 3}, RngStream(91)), ParamVector(30, 0.0));
}

}  // namespace
}  // namespace fedsim
