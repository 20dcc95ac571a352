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

#include "offline_mpc/lqr_oracle.hpp"

#include <cmath>
#include <string>

namespace ompc {

namespace {

constexpr int kMaxIterations = 100000;
constexpr double kTolerance = 1e-12;

void check_shapes(const Mat& a, const Mat& b, const Mat& q, const Mat& r, double gamma) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n || r.rows() != b.cols() ||
      r.cols() != b.cols()) {
    throw DomainError("LQR matrices have inconsistent shapes");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("LQR gamma must lie in [0, 1)");
}

// One application of the discounted Riccati map; also returns the gain.
Mat riccati_map(const Mat& a, const Mat& b, const Mat& q, const Mat& r, double gamma, const Mat& p, Mat* gain) {
  const Mat h = r + gamma * b.transpose() * p * b;
  Eigen::LLT<Mat> llt(h);
  if (llt.info() != Eigen::Success) throw NumericalError("R + gamma B'PB is not positive definite");
  const Mat k = gamma * llt.solve(b.transpose() * p * a);
  Mat next = q + gamma * a.transpose() * p * a - gamma * a.transpose() * p * b * k;
  next = 0.5 * (next + next.transpose()).eval();
  if (gain) *gain = k;
  return next;
}

}  // namespace

DiscountedLqr solve_riccati(const Mat& a, const Mat& b, const Mat& q, const Mat& r, double gamma) {
  check_shapes(a, b, q, r, gamma);
  DiscountedLqr lqr{a, b, q, r, gamma, q, Mat::Zero(b.cols(), a.rows()), 0};
  double change = 0.0;
  for (int it = 1; it <= kMaxIterations; ++it) {
    Mat gain;
    Mat next = riccati_map(a, b, q, r, gamma, lqr.p, &gain);
    if (!next.allFinite()) throw NumericalError("Riccati iteration diverged at iteration " + std::to_string(it));
    change = (next - lqr.p).cwiseAbs().maxCoeff();
    lqr.p = std::move(next);
    lqr.k = std::move(gain);
    lqr.iterations = it;
    if (change < kTolerance) {
      // gain consistent with the returned P
      riccati_map(a, b, q, r, gamma, lqr.p, &lqr.k);
      return lqr;
    }
  }
  throw NumericalError("Riccati iteration did not converge; last max-norm change " + std::to_string(change) +
                       ", residual " + std::to_string(riccati_residual(lqr)));
}

double riccati_residual(const DiscountedLqr& lqr) {
  return (lqr.p - riccati_map(lqr.a, lqr.b, lqr.q, lqr.r, lqr.gamma, lqr.p, nullptr)).norm();
}

double optimal_value(const DiscountedLqr& lqr, const Vec& s) { return s.dot(lqr.p * s); }

double optimal_action_value(const DiscountedLqr& lqr, const Vec& s, const Vec& a) {
  const Vec next = lqr.a * s + lqr.b * a;
  return s.dot(lqr.q * s) + a.dot(lqr.r * a) + lqr.gamma * next.dot(lqr.p * next);
}

Vec optimal_policy(const DiscountedLqr& lqr, const Vec& s) { return -lqr.k * s; }

std::vector<RiccatiStage> finite_horizon_dp(const Mat& a, const Mat& b, const Mat& q, const Mat& r, double gamma,
                                            int horizon, const Mat& terminal_p) {
  check_shapes(a, b, q, r, gamma);
  if (horizon < 1) throw DomainError("finite_horizon_dp: horizon must be at least 1");
  std::vector<RiccatiStage> stages(static_cast<std::size_t>(horizon));
  Mat p = terminal_p;
  for (int k = horizon - 1; k >= 0; --k) {
    const Mat h = r + gamma * b.transpose() * p * b;
    Eigen::LDLT<Mat> ldlt(h);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-14) {
      throw NumericalError("finite_horizon_dp: singular R + gamma B'PB at stage " + std::to_string(k));
    }
    const Mat gain = gamma * ldlt.solve(b.transpose() * p * a);
    Mat next = q + gamma * a.transpose() * p * a - gamma * a.transpose() * p * b * gain;
    p = 0.5 * (next + next.transpose());
    stages[static_cast<std::size_t>(k)] = RiccatiStage{p, gain};
  }
  return stages;
}

Mat policy_evaluation(const Mat& a, const Mat& b, const Mat& q, const Mat& r, const Mat& k, double gamma) {
  check_shapes(a, b, q, r, gamma);
  const Mat closed = a - b * k;
  const Mat stage = q + k.transpose() * r * k;
  Mat p = stage;
  for (int it = 0; it < kMaxIterations; ++it) {
    Mat next = stage + gamma * closed.transpose() * p * closed;
    next = 0.5 * (next + next.transpose()).eval();
    if (!next.allFinite()) break;
    const double change = (next - p).cwiseAbs().maxCoeff();
    p = std::move(next);
    if (change < kTolerance * std::max(1.0, p.cwiseAbs().maxCoeff())) return p;
  }
  throw NumericalError("policy_evaluation: Lyapunov iteration did not converge (closed loop not gamma-stable?)");
}

}  // namespace ompc
