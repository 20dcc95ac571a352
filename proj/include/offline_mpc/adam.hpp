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

#include <cmath>

#include "offline_mpc/core.hpp"

namespace ompc {

// Adaptive moment estimation with the usual decay constants. Shared by the
// value-network fit and the MPC parameter learner.
class Adam {
 public:
  explicit Adam(Eigen::Index size, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
      : m_(Vec::Zero(size)), v_(Vec::Zero(size)), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

  // params -= lr * mhat / (sqrt(vhat) + eps)
  void step(Vec& params, const Vec& grad, double learning_rate) {
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -= learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + epsilon_);
  }

  long steps() const { return t_; }

 private:
  Vec m_;
  Vec v_;
  double beta1_;
  double beta2_;
  double epsilon_;
  long t_ = 0;
};

}  // namespace ompc
