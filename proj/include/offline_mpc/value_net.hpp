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

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "offline_mpc/core.hpp"
#include "offline_mpc/envs.hpp"

namespace ompc {

// Input feature map applied to the plant state before normalization.
// The angle maps replace phi by (cos phi, sin phi), removing the 2 pi jump.
enum class FeatureMap { kIdentity, kPendulumAngles, kCartpoleAngles };

std::string_view to_string(FeatureMap map);
FeatureMap parse_feature_map(std::string_view name);
FeatureMap default_feature_map(EnvId env, bool expand_angles = true);
int feature_dim(FeatureMap map, int state_dim);
Vec apply_features(FeatureMap map, const Vec& state);
Mat feature_jacobian(FeatureMap map, const Vec& state);

struct Normalizer {
  Vec mean;
  Vec stddev;

  static Normalizer identity(int dim);
};

struct DenseLayer {
  Mat weight;  // out x in
  Vec bias;
};

// Fully connected value approximator: tanh hidden layers, identity output,
//   V(s) = output_scale * net((features(s) - mean) / stddev).
class MlpValueFunction final : public ValueFunction {
 public:
  MlpValueFunction() = default;
  MlpValueFunction(std::vector<DenseLayer> layers, FeatureMap feature_map, Normalizer normalizer,
                   double output_scale = 1.0);

  // Glorot-uniform weights, zero biases. widths = {feature_dim, hidden..., 1}.
  static MlpValueFunction random(const std::vector<int>& widths, FeatureMap feature_map, Normalizer normalizer,
                                 double output_scale, std::uint64_t seed);

  double forward(const Vec& state) const;
  // dV/ds through the feature map and normalizer.
  Vec grad_input(const Vec& state) const;
  // dV/dw in flat_weights() order.
  Vec grad_weights(const Vec& state) const;

  double value(const Vec& state) const override { return forward(state); }
  Vec gradient(const Vec& state) const override { return grad_input(state); }
  void evaluate_batch(const Mat& states, Vec& values, Mat* gradients) const override;

  // Normalized feature vector fed to the first layer.
  Vec normalized_input(const Vec& state) const;
  // Evaluates columns of normalized inputs.
  Eigen::RowVectorXd forward_normalized(const Mat& inputs) const;

  // Per layer: weight row-major, then bias.
  Vec flat_weights() const;
  void set_flat_weights(const Vec& flat);
  Eigen::Index num_weights() const;

  std::vector<int> layer_widths() const;
  int state_dim() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  FeatureMap feature_map() const { return feature_map_; }
  const Normalizer& normalizer() const { return normalizer_; }
  double output_scale() const { return output_scale_; }

  bool operator==(const MlpValueFunction& other) const;

 private:
  std::vector<DenseLayer> layers_;
  FeatureMap feature_map_ = FeatureMap::kIdentity;
  Normalizer normalizer_;
  double output_scale_ = 1.0;
};

std::string network_to_json(const MlpValueFunction& net);
MlpValueFunction network_from_json(std::string_view text);
void save_network(const MlpValueFunction& net, const std::filesystem::path& path);
MlpValueFunction load_network(const std::filesystem::path& path);

// Per-component mean/stddev of the features of all dataset states.
Normalizer fit_normalizer(FeatureMap map, const Dataset& dataset);
// Order-of-magnitude value scale: mean cost / (1 - gamma).
double default_output_scale(const Dataset& dataset);

// Randomly initialized network whose normalizer and output scale come from
// the dataset.
MlpValueFunction make_value_network(const Dataset& dataset, FeatureMap map, const std::vector<int>& hidden,
                                    std::uint64_t seed);

struct TdFitConfig {
  double learning_rate = 1e-3;
  int batch_size = 256;
  int epochs = 200;
  int target_refresh_interval = 100;
  std::uint64_t seed = 0;
};

class TrainingDivergence : public Error {
 public:
  TrainingDivergence(const std::string& message, long step);
  long step() const { return step_; }

 private:
  long step_;
};

struct TdFitResult {
  MlpValueFunction network;
  std::vector<double> epoch_loss;  // mean squared TD error per epoch
};

// Semi-gradient TD(0) regression of V toward cost + gamma * V_target(s+),
// with V_target a copy of V refreshed every target_refresh_interval steps.
TdFitResult fit_td(const MlpValueFunction& initial, const Dataset& dataset, const TdFitConfig& config);

}  // namespace ompc
