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
#include <optional>
#include <span>
#include <vector>

#include "offline_mpc/core.hpp"
#include "offline_mpc/mpc.hpp"

namespace ompc {

struct LearnConfig {
  bool learn_model = false;
  // Unset: 1e-3 divided by the number of learned parameters.
  std::optional<double> l2_weight;
  double learning_rate = 1e-3;
  // Exponential per-epoch decay toward this rate; unset keeps the rate fixed.
  std::optional<double> final_learning_rate;
  int batch_size = 256;
  int epochs = 100;
  std::uint64_t seed = 0;
  ParameterizedMpc theta_init;
};

double effective_l2_weight(const LearnConfig& config);

class LearnerError : public Error {
 public:
  using Error::Error;
};

// Flat theta: stage-cost params, then model params when learn_model is set.
Vec learnable_params(const ParameterizedMpc& mpc, bool learn_model);
ParameterizedMpc with_learnable_params(const ParameterizedMpc& mpc, const Vec& theta, bool learn_model);

struct ResidualSample {
  double target = 0.0;      // L + gamma V(s+) - gamma V(f(s, a))
  double prediction = 0.0;  // L_theta(s, a)
  double residual = 0.0;    // target - prediction
};

// gamma is the scheme's discount. `index` only labels errors.
ResidualSample residual(const ValueFunction& vphi, const ParameterizedMpc& mpc, const Transition& t,
                        std::size_t index = 0);

struct LossAndGrad {
  double loss = 0.0;         // mean residual^2 + reg_term
  double mean_squared = 0.0;
  double reg_term = 0.0;     // lambda |theta - theta_init|^2
  Vec grad;
};

// Loss and theta-gradient of the batch at the scheme's current parameters.
LossAndGrad loss_and_grad(const ValueFunction& vphi, const ParameterizedMpc& mpc, std::span<const Transition> batch,
                          const LearnConfig& config);

struct LossTraceRow {
  int epoch = 0;
  double loss = 0.0;
  double residual_rms = 0.0;
  double reg_term = 0.0;
};

struct LearnResult {
  ParameterizedMpc mpc;
  // Full-dataset loss at theta_init (epoch 0) and after each epoch.
  std::vector<LossTraceRow> trace;
};

LearnResult learn(const ValueFunction& vphi, const Dataset& dataset, const LearnConfig& config);

void save_loss_trace(const std::vector<LossTraceRow>& trace, const std::filesystem::path& path);
std::vector<LossTraceRow> load_loss_trace(const std::filesystem::path& path);

}  // namespace ompc
