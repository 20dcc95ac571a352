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

#include <algorithm>
#include <cmath>
#include <random>

#include "offline_mpc/mpc.hpp"

namespace ompc {

namespace {

Mat gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  Mat m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

double spectral_radius(const Mat& m) { return m.eigenvalues().cwiseAbs().maxCoeff(); }

}  // namespace

ModifiedMpcCheck check_modified_mpc(int dim, int instances, int states_per_instance, std::uint64_t seed) {
  if (dim < 1 || instances < 1 || states_per_instance < 1) {
    throw DomainError("modified MPC check: dim, instances and states must be positive");
  }
  constexpr double kGamma = 0.9;
  const Eigen::Index n = dim;
  const Eigen::Index m = std::max<Eigen::Index>(1, n / 2);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> horizon_dist(1, 20);

  ModifiedMpcCheck out;
  for (int trial = 0; trial < instances; ++trial) {
    const Mat a = gaussian(rng, n, n, scale);
    const Mat b = gaussian(rng, n, m, scale);
    const Mat lq = gaussian(rng, n, n, scale);
    const Mat lr = gaussian(rng, m, m, scale);
    const Mat q = lq * lq.transpose() + 0.1 * Mat::Identity(n, n);
    const Mat r = lr * lr.transpose() + 0.1 * Mat::Identity(m, m);
    const DiscountedLqr lqr = solve_riccati(a, b, q, r, kGamma);

    LinearPlant wrong;
    wrong.alpha = 0.0;
    for (int attempt = 0;; ++attempt) {
      if (attempt == 1000) throw NumericalError("modified MPC check: no stabilizable perturbation found");
      wrong.a = a + gaussian(rng, n, n, 0.2 * scale);
      wrong.b = b + gaussian(rng, n, m, 0.2 * scale);
      if (std::sqrt(kGamma) * spectral_radius(wrong.a - wrong.b * lqr.k) < 1.0) break;
    }
    const ParameterizedMpc mpc = make_modified_mpc(lqr, wrong, horizon_dist(rng));

    for (int i = 0; i < states_per_instance; ++i) {
      const Vec s = gaussian(rng, n, 1, 1.0);
      const Vec u = gaussian(rng, m, 1, 1.0);
      const MpcSolution sol = solve(mpc, s);
      out.max_policy_error =
          std::max(out.max_policy_error, (sol.actions.front() - optimal_policy(lqr, s)).cwiseAbs().maxCoeff());
      out.max_value_error = std::max(out.max_value_error, std::abs(sol.objective - optimal_value(lqr, s)));
      out.max_action_value_error = std::max(
          out.max_action_value_error, std::abs(action_value(mpc, s, u) - optimal_action_value(lqr, s, u)));
    }
    out.instances += 1;
    out.states += states_per_instance;
  }
  return out;
}

}  // namespace ompc
