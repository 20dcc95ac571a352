// Copyright 2026 The Offline MPC Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "offline_mpc/value_net.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace ompc {
namespace {

using testing::TempDir;

MlpValueFunction random_net(std::mt19937_64& rng, FeatureMap map, int state_dim) {
  const int in = feature_dim(map, state_dim);
  std::uniform_int_distribution<int> width(2, 12);
  std::vector<int> widths{in, width(rng), width(rng), 1};
  Normalizer norm;
  norm.mean = testing::random_vec(rng, in, 0.5);
  norm.stddev = testing::random_vec(rng, in).cwiseAbs().array() + 0.3;
  MlpValueFunction net = MlpValueFunction::random(widths, map, norm, 2.5, rng());
  // Nonzero biases so every code path is exercised.
  Vec w = net.flat_weights();
  w += testing::random_vec(rng, w.size(), 0.1);
  net.set_flat_weights(w);
  return net;
}

TEST(MlpForward, ZeroNetworkIsZero) {
  std::mt19937_64 rng(1);
  MlpValueFunction net = random_net(rng, FeatureMap::kIdentity, 3);
  net.set_flat_weights(Vec::Zero(net.num_weights()));
  for (int i = 0; i < 10; ++i) {
    const Vec s = testing::random_vec(rng, 3, 5.0);
    EXPECT_EQ(net.forward(s), 0.0);
    EXPECT_EQ(net.grad_input(s), Vec::Zero(3));
  }
}

TEST(MlpForward, SingleAffineLayer) {
  DenseLayer layer{Mat::Constant(1, 1, 2.0), Vec::Constant(1, 1.0)};
  const MlpValueFunction net({layer}, FeatureMap::kIdentity, Normalizer::identity(1));
  EXPECT_EQ(net.forward(Vec::Constant(1, 3.0)), 7.0);
  EXPECT_EQ(net.grad_input(Vec::Constant(1, 3.0)), Vec::Constant(1, 2.0));
}

TEST(MlpForward, MatchesStraightLineReevaluation) {
  std::mt19937_64 rng(2);
  for (auto [map, n] : {std::pair{FeatureMap::kIdentity, 4}, std::pair{FeatureMap::kPendulumAngles, 2},
                        std::pair{FeatureMap::kCartpoleAngles, 4}}) {
    for (int k = 0; k < 10; ++k) {
      const MlpValueFunction net = random_net(rng, map, n);
      for (int i = 0; i < 20; ++i) {
        const Vec s = testing::random_vec(rng, n, 2.0);
        const double ref = testing::reference_forward(net, s);
        EXPECT_NEAR(net.forward(s), ref, 1e-12 * (1.0 + std::abs(ref)));
      }
    }
  }
}

TEST(MlpForward, DimensionMismatchIsDomainError) {
  std::mt19937_64 rng(3);
  const MlpValueFunction net = random_net(rng, FeatureMap::kIdentity, 3);
  EXPECT_THROW(net.forward(Vec::Zero(2)), DomainError);
}

TEST(MlpGradients, InputGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 20; ++k) {
    const MlpValueFunction net = random_net(rng, FeatureMap::kIdentity, 4);
    const Vec sigma = net.normalizer().stddev;
    for (int i = 0; i < 5; ++i) {
      const Vec s = testing::random_vec(rng, 4);
      // Step 1e-6 in normalized units.
      Vec fd(4);
      for (Eigen::Index c = 0; c < 4; ++c) {
        Vec sp = s, sm = s;
        sp(c) += 1e-6 * sigma(c);
        sm(c) -= 1e-6 * sigma(c);
        fd(c) = (net.forward(sp) - net.forward(sm)) / (2e-6 * sigma(c));
      }
      EXPECT_LT(testing::gradient_rel_error(net.grad_input(s), fd), 1e-5);
    }
  }
}

TEST(MlpGradients, InputGradientThroughAngleFeatures) {
  std::mt19937_64 rng(5);
  for (auto [map, n] : {std::pair{FeatureMap::kPendulumAngles, 2}, std::pair{FeatureMap::kCartpoleAngles, 4}}) {
    for (int k = 0; k < 10; ++k) {
      const MlpValueFunction net = random_net(rng, map, n);
      const Vec s = testing::random_vec(rng, n);
      const Vec fd = testing::central_difference([&](const Vec& x) { return net.forward(x); }, s, 1e-6);
      EXPECT_LT(testing::gradient_rel_error(net.grad_input(s), fd), 1e-5);
    }
  }
}

TEST(MlpGradients, WeightGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  for (int k = 0; k < 20; ++k) {
    MlpValueFunction net = random_net(rng, k % 2 ? FeatureMap::kPendulumAngles : FeatureMap::kIdentity, 2);
    const Vec s = testing::random_vec(rng, 2);
    const Vec w0 = net.flat_weights();
    const Vec fd = testing::central_difference(
        [&](const Vec& w) {
          net.set_flat_weights(w);
          return net.forward(s);
        },
        w0, 1e-6);
    net.set_flat_weights(w0);
    EXPECT_LT(testing::gradient_rel_error(net.grad_weights(s), fd), 1e-5);
  }
}

TEST(MlpGradients, BatchEvaluationMatchesColumns) {
  std::mt19937_64 rng(7);
  const MlpValueFunction net = random_net(rng, FeatureMap::kCartpoleAngles, 4);
  const Mat states = testing::random_mat(rng, 4, 9);
  Vec values;
  Mat grads;
  net.evaluate_batch(states, values, &grads);
  for (Eigen::Index c = 0; c < states.cols(); ++c) {
    EXPECT_NEAR(values(c), net.forward(states.col(c)), 1e-12);
    EXPECT_LT((grads.col(c) - net.grad_input(states.col(c))).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(FeatureMaps, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  for (auto [map, n] : {std::pair{FeatureMap::kPendulumAngles, 2}, std::pair{FeatureMap::kCartpoleAngles, 4}}) {
    const Vec s = testing::random_vec(rng, n);
    const Mat jac = feature_jacobian(map, s);
    for (Eigen::Index c = 0; c < n; ++c) {
      Vec sp = s, sm = s;
      sp(c) += 1e-6;
      sm(c) -= 1e-6;
      EXPECT_LT(((apply_features(map, sp) - apply_features(map, sm)) / 2e-6 - jac.col(c)).cwiseAbs().maxCoeff(),
                1e-8);
    }
  }
  EXPECT_EQ(default_feature_map(EnvId::kLinear), FeatureMap::kIdentity);
  EXPECT_EQ(default_feature_map(EnvId::kPendulum), FeatureMap::kPendulumAngles);
  EXPECT_EQ(default_feature_map(EnvId::kPendulum, false), FeatureMap::kIdentity);
}

TEST(NetworkJson, RoundTripIsBitExact) {
  TempDir dir;
  std::mt19937_64 rng(9);
  const MlpValueFunction net = random_net(rng, FeatureMap::kCartpoleAngles, 4);
  save_network(net, dir / "net.json");
  const MlpValueFunction back = load_network(dir / "net.json");
  EXPECT_TRUE(back == net);
  EXPECT_TRUE(same_bits(back.flat_weights(), net.flat_weights()));
  EXPECT_EQ(back.layer_widths(), net.layer_widths());
  EXPECT_THROW(network_from_json("{\"layers\": 3}"), SchemaError);
  EXPECT_THROW(network_from_json("{"), ParseError);
}

Dataset zero_cost_dataset() {
  Dataset d = testing::scalar_contraction_dataset(512, 3);
  for (Transition& t : d.transitions) {
    t.next_state = t.state;
    t.cost = 0.0;
  }
  return d;
}

TEST(FitTd, ZeroCostSelfLoopKeepsZeroNetwork) {
  const Dataset d = zero_cost_dataset();
  MlpValueFunction net = make_value_network(d, FeatureMap::kIdentity, {8, 8}, 1);
  net.set_flat_weights(Vec::Zero(net.num_weights()));
  TdFitConfig cfg;
  cfg.epochs = 20;
  const TdFitResult fit = fit_td(net, d, cfg);
  for (double loss : fit.epoch_loss) EXPECT_LE(loss, 1e-8);
  for (const Transition& t : d.transitions) EXPECT_LE(std::abs(fit.network.forward(t.state)), 1e-4);
}

TEST(FitTd, ZeroLearningRateReturnsInitialNetwork) {
  const Dataset d = testing::scalar_contraction_dataset(300, 4);
  const MlpValueFunction net = make_value_network(d, FeatureMap::kIdentity, {8}, 2);
  TdFitConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 3;
  EXPECT_TRUE(fit_td(net, d, cfg).network == net);
}

TEST(FitTd, DeterministicUnderFixedSeed) {
  const Dataset d = testing::scalar_contraction_dataset(600, 5);
  const MlpValueFunction net = make_value_network(d, FeatureMap::kIdentity, {16, 16}, 3);
  TdFitConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 11;
  const TdFitResult a = fit_td(net, d, cfg);
  const TdFitResult b = fit_td(net, d, cfg);
  EXPECT_TRUE(same_bits(a.network.flat_weights(), b.network.flat_weights()));
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
  cfg.seed = 12;
  EXPECT_FALSE(same_bits(fit_td(net, d, cfg).network.flat_weights(), a.network.flat_weights()));
}

TEST(FitTd, NonFiniteLossIsTrainingDivergence) {
  Dataset d = testing::scalar_contraction_dataset(64, 6);
  d.transitions[10].cost = 1e308;
  const MlpValueFunction net = make_value_network(testing::scalar_contraction_dataset(64, 6), FeatureMap::kIdentity,
                                                  {4}, 4);
  TdFitConfig cfg;
  cfg.epochs = 2;
  try {
    fit_td(net, d, cfg);
    FAIL() << "expected TrainingDivergence";
  } catch (const TrainingDivergence& e) {
    EXPECT_GE(e.step(), 0);
  }
}

TEST(FitTd, RejectsBadConfig) {
  const Dataset d = testing::scalar_contraction_dataset(16, 7);
  const MlpValueFunction net = make_value_network(d, FeatureMap::kIdentity, {4}, 4);
  TdFitConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(fit_td(net, d, cfg), DomainError);
  EXPECT_THROW(fit_td(net, Dataset{}, TdFitConfig{}), DomainError);
}

TEST(FitTd, ScalarContractionOracle) {
  const Dataset d = testing::scalar_contraction_dataset(10'000, 1);
  const MlpValueFunction init = make_value_network(d, FeatureMap::kIdentity, {64, 64}, 1);
  TdFitConfig cfg;
  cfg.seed = 1;
  const TdFitResult fit = fit_td(init, d, cfg);
  for (double loss : fit.epoch_loss) ASSERT_TRUE(std::isfinite(loss));
  const auto err = testing::scalar_fit_error(fit.network);
  RecordProperty("max_pointwise_rel_abs_s_ge_0_3", std::to_string(err.max_pointwise));
  EXPECT_LT(err.relative_l2, 0.10);
}

TEST(FitTd, LinearTaskPolicyEvaluationOracle) {
  const DiscountedLqr lqr = testing::linear_task_lqr();
  const Dataset d = testing::lqr_policy_dataset(lqr, 1000, 10, 1);
  const MlpValueFunction init = make_value_network(d, FeatureMap::kIdentity, {64, 64}, 1);
  TdFitConfig cfg;
  cfg.seed = 1;
  const TdFitResult fit = fit_td(init, d, cfg);
  // The policy is optimal, so its value matrix is the Riccati solution.
  const Mat p_pi = policy_evaluation(lqr.a, lqr.b, lqr.q, lqr.r, lqr.k, lqr.gamma);
  EXPECT_LT(testing::median_relative_error(fit.network, p_pi, d), 0.10);
}

}  // namespace
}  // namespace ompc
