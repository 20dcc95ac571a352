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

#include <vector>

#include "offline_mpc/core.hpp"

namespace ompc {

// Infinite-horizon discounted LQR: V*(s) = s'Ps, pi*(s) = -Ks,
// Q*(s,a) = s'Qs + a'Ra + gamma (As+Ba)'P(As+Ba).
struct DiscountedLqr {
  Mat a;
  Mat b;
  Mat q;
  Mat r;
  double gamma = 0.0;
  Mat p;
  Mat k;
  int iterations = 0;
};

// Fixed-point iteration of the discounted Riccati map from P = Q until the
// max-norm change drops below 1e-12 (at most 1e5 iterations).
DiscountedLqr solve_riccati(const Mat& a, const Mat& b, const Mat& q, const Mat& r, double gamma);

// Frobenius norm of P - Ric(P).
double riccati_residual(const DiscountedLqr& lqr);

double optimal_value(const DiscountedLqr& lqr, const Vec& s);
double optimal_action_value(const DiscountedLqr& lqr, const Vec& s, const Vec& a);
Vec optimal_policy(const DiscountedLqr& lqr, const Vec& s);

struct RiccatiStage {
  Mat p;  // cost-to-go matrix at stage k
  Mat k;  // feedback gain at stage k, u_k = -K_k x_k
};

// Backward sweep of the discounted finite-horizon problem with terminal
// cost x'P_N x. Returns stages 0..N-1.
std::vector<RiccatiStage> finite_horizon_dp(const Mat& a, const Mat& b, const Mat& q, const Mat& r, double gamma,
                                            int horizon, const Mat& terminal_p);

// Discounted cost matrix of the linear policy u = -Kx:
// P = Q + K'RK + gamma (A-BK)' P (A-BK). Requires sqrt(gamma) rho(A-BK) < 1.
Mat policy_evaluation(const Mat& a, const Mat& b, const Mat& q, const Mat& r, const Mat& k, double gamma);

// s'Ps as a ValueFunction.
class QuadraticValueFunction final : public ValueFunction {
 public:
  explicit QuadraticValueFunction(Mat p) : p_(std::move(p)) {}
  double value(const Vec& state) const override { return state.dot(p_ * state); }
  Vec gradient(const Vec& state) const override { return (p_ + p_.transpose()) * state; }
  const Mat& matrix() const { return p_; }

 private:
  Mat p_;
};

}  // namespace ompc
