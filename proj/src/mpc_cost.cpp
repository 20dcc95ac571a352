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

#include "offline_mpc/mpc.hpp"

namespace ompc {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

// Lower-triangular C with C C' = M for a symmetric PSD M.
Mat lower_factor(const Mat& m) {
  Eigen::LLT<Mat> llt(m);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Mat> eig(m);
  if (eig.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, m.norm())) {
    throw DomainError("stage-cost weight matrix is not positive semidefinite");
  }
  const Mat root = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  // root = C Q  =>  root' = Q' C' is a QR factorization of root'.
  Eigen::HouseholderQR<Mat> qr(root.transpose());
  Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  return r.transpose();
}

Eigen::Index tri(Eigen::Index n) { return n * (n + 1) / 2; }

}  // namespace

std::string_view to_string(CostSpace space) {
  return space == CostSpace::kState ? "state" : "observation";
}

CostSpace parse_cost_space(std::string_view name) {
  if (name == "state") return CostSpace::kState;
  if (name == "observation") return CostSpace::kObservation;
  throw DomainError("unknown cost space '" + std::string(name) + "'");
}

QuadraticStageCost QuadraticStageCost::from_weights(const Mat& w, const Mat& r, Vec ref, double offset) {
  if (w.rows() != w.cols() || r.rows() != r.cols() || ref.size() != w.rows()) {
    throw DomainError("stage-cost weights have inconsistent shapes");
  }
  return QuadraticStageCost{lower_factor(w), lower_factor(r), offset, std::move(ref)};
}

Eigen::Index QuadraticStageCost::num_params() const { return tri(chol_w.rows()) + tri(chol_r.rows()) + 1; }

Vec QuadraticStageCost::params() const {
  Vec theta(num_params());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < chol_w.rows(); ++i)
    for (Eigen::Index j = 0; j <= i; ++j) theta[k++] = chol_w(i, j);
  for (Eigen::Index i = 0; i < chol_r.rows(); ++i)
    for (Eigen::Index j = 0; j <= i; ++j) theta[k++] = chol_r(i, j);
  theta[k] = offset;
  return theta;
}

QuadraticStageCost QuadraticStageCost::with_params(const Vec& theta) const {
  if (theta.size() != num_params()) throw DomainError("stage-cost parameter vector has wrong size");
  QuadraticStageCost out = *this;
  out.chol_w.setZero();
  out.chol_r.setZero();
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < chol_w.rows(); ++i)
    for (Eigen::Index j = 0; j <= i; ++j) out.chol_w(i, j) = theta[k++];
  for (Eigen::Index i = 0; i < chol_r.rows(); ++i)
    for (Eigen::Index j = 0; j <= i; ++j) out.chol_r(i, j) = theta[k++];
  out.offset = theta[k];
  return out;
}

double eval_stage_cost(const QuadraticStageCost& cost, const Vec& y, const Vec& a) {
  if (y.size() != cost.chol_w.rows() || a.size() != cost.chol_r.rows()) {
    throw DomainError("eval_stage_cost: dimension mismatch");
  }
  const Vec we = cost.chol_w.transpose() * (y - cost.ref);
  const Vec ra = cost.chol_r.transpose() * a;
  return we.squaredNorm() + ra.squaredNorm() + cost.offset;
}

Vec grad_stage_cost_params(const QuadraticStageCost& cost, const Vec& y, const Vec& a) {
  if (y.size() != cost.chol_w.rows() || a.size() != cost.chol_r.rows()) {
    throw DomainError("grad_stage_cost_params: dimension mismatch");
  }
  const Vec e = y - cost.ref;
  // d(e' C C' e)/dC = 2 e e' C
  const Mat gw = 2.0 * e * (e.transpose() * cost.chol_w);
  const Mat gr = 2.0 * a * (a.transpose() * cost.chol_r);
  Vec grad(cost.num_params());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < gw.rows(); ++i)
    for (Eigen::Index j = 0; j <= i; ++j) grad[k++] = gw(i, j);
  for (Eigen::Index i = 0; i < gr.rows(); ++i)
    for (Eigen::Index j = 0; j <= i; ++j) grad[k++] = gr(i, j);
  grad[k] = 1.0;
  return grad;
}

double eval_general_cost(const GeneralQuadraticCost& cost, const Vec& x, const Vec& u) {
  Vec z(x.size() + u.size());
  z << x, u;
  if (z.size() != cost.h.rows()) throw DomainError("eval_general_cost: dimension mismatch");
  return z.dot(cost.h * z) + cost.g.dot(z) + cost.c;
}

void ParameterizedMpc::validate() const {
  if (horizon < 1) throw DomainError("MPC horizon must be at least 1");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("MPC gamma must lie in [0, 1)");
  const int n = state_dim(model);
  const int m = action_dim(model);
  const int ny = cost_space == CostSpace::kObservation ? observation_dim(model) : n;
  std::visit(Overloaded{[&](const QuadraticStageCost& c) {
                          if (c.chol_w.rows() != ny || c.chol_w.cols() != ny || c.ref.size() != ny ||
                              c.chol_r.rows() != m || c.chol_r.cols() != m) {
                            throw DomainError("stage cost does not match the model dimensions");
                          }
                        },
                        [&](const GeneralQuadraticCost& c) {
                          if (cost_space != CostSpace::kState || c.h.rows() != n + m || c.h.cols() != n + m ||
                              c.g.size() != n + m) {
                            throw DomainError("general quadratic cost does not match the model dimensions");
                          }
                        }},
             stage_cost);
  std::visit(Overloaded{[](const ZeroTerminal&) {},
                        [&](const SmoothedNormTerminal& t) {
                          if (t.ref.size() != ny) throw DomainError("terminal reference has wrong dimension");
                          if (!(t.eps > 0.0)) throw DomainError("terminal smoothing must be positive");
                        },
                        [&](const QuadraticTerminal& t) {
                          if (t.ref.size() != ny || t.p.rows() != ny || t.p.cols() != ny) {
                            throw DomainError("quadratic terminal cost has wrong dimension");
                          }
                        }},
             terminal_cost);
  if (input_bounds) {
    if (input_bounds->lower.size() != m || input_bounds->upper.size() != m) {
      throw DomainError("input bounds have wrong dimension");
    }
    if ((input_bounds->lower.array() > input_bounds->upper.array()).any()) {
      throw DomainError("input bounds are not well ordered");
    }
  }
}

Vec cost_input(const ParameterizedMpc& mpc, const Vec& state) {
  return mpc.cost_space == CostSpace::kObservation ? observe(mpc.model, state) : state;
}

double mpc_stage_cost(const ParameterizedMpc& mpc, const Vec& state, const Vec& action) {
  return std::visit(
      Overloaded{[&](const QuadraticStageCost& c) { return eval_stage_cost(c, cost_input(mpc, state), action); },
                 [&](const GeneralQuadraticCost& c) { return eval_general_cost(c, state, action); }},
      mpc.stage_cost);
}

double mpc_terminal_cost(const ParameterizedMpc& mpc, const Vec& state) {
  return std::visit(Overloaded{[](const ZeroTerminal&) { return 0.0; },
                               [&](const SmoothedNormTerminal& t) {
                                 const Vec e = cost_input(mpc, state) - t.ref;
                                 return std::sqrt(e.squaredNorm() + t.eps);
                               },
                               [&](const QuadraticTerminal& t) {
                                 const Vec e = cost_input(mpc, state) - t.ref;
                                 return e.dot(t.p * e);
                               }},
                    mpc.terminal_cost);
}

ParameterizedMpc make_nominal_mpc(EnvId env, const Plant& model) {
  if (env_of(model) != env) throw DomainError("make_nominal_mpc: model belongs to another environment");
  ParameterizedMpc mpc;
  mpc.gamma = 0.9;
  mpc.model = model;
  mpc.input_bounds = action_bounds(model);
  switch (env) {
    case EnvId::kLinear: {
      mpc.horizon = 100;
      mpc.cost_space = CostSpace::kState;
      const Mat w = Vec((Vec(4) << 9.0, 9.0, 1.0, 1.0).finished()).asDiagonal();
      const Mat r = 0.1 * Mat::Identity(2, 2);
      mpc.stage_cost = QuadraticStageCost::from_weights(w, r, Vec::Zero(4));
      mpc.terminal_cost = SmoothedNormTerminal{Vec::Zero(4)};
      break;
    }
    case EnvId::kPendulum: {
      mpc.horizon = 50;
      mpc.cost_space = CostSpace::kObservation;
      const Vec ref = (Vec(3) << 1.0, 0.0, 0.0).finished();
      const Mat w = Vec((Vec(3) << 1.0, 1.0, 0.1).finished()).asDiagonal();
      const Mat r = Mat::Constant(1, 1, 0.1);
      mpc.stage_cost = QuadraticStageCost::from_weights(w, r, ref);
      mpc.terminal_cost = SmoothedNormTerminal{ref};
      break;
    }
    case EnvId::kCartpole: {
      mpc.horizon = 50;
      mpc.cost_space = CostSpace::kObservation;
      const Vec ref = (Vec(5) << 0.0, 0.0, 1.0, 0.0, 0.0).finished();
      const Mat w = Vec((Vec(5) << 3.0, 0.01, 3.0, 1.0, 0.01).finished()).asDiagonal();
      const Mat r = Mat::Constant(1, 1, 0.001);
      mpc.stage_cost = QuadraticStageCost::from_weights(w, r, ref);
      mpc.terminal_cost = SmoothedNormTerminal{ref};
      break;
    }
  }
  mpc.validate();
  return mpc;
}

double modified_stage_cost(const DiscountedLqr& lqr, const LinearPlant& wrong_model, const Vec& s, const Vec& a) {
  const Vec predicted = wrong_model.a * s + wrong_model.b * a;
  return optimal_action_value(lqr, s, a) - lqr.gamma * optimal_value(lqr, predicted);
}

GeneralQuadraticCost modified_stage_cost_quadratic(const DiscountedLqr& lqr, const LinearPlant& wrong_model) {
  const Eigen::Index n = lqr.a.rows();
  const Eigen::Index m = lqr.b.cols();
  if (wrong_model.a.rows() != n || wrong_model.b.cols() != m) {
    throw DomainError("modified stage cost: model dimensions differ from the LQR problem");
  }
  Mat true_ab(n, n + m);
  true_ab << lqr.a, lqr.b;
  Mat model_ab(n, n + m);
  model_ab << wrong_model.a, wrong_model.b;
  Mat h = Mat::Zero(n + m, n + m);
  h.topLeftCorner(n, n) = lqr.q;
  h.bottomRightCorner(m, m) = lqr.r;
  h += lqr.gamma * (true_ab.transpose() * lqr.p * true_ab - model_ab.transpose() * lqr.p * model_ab);
  h = 0.5 * (h + h.transpose()).eval();
  return GeneralQuadraticCost{h, Vec::Zero(n + m), 0.0};
}

ParameterizedMpc make_modified_mpc(const DiscountedLqr& lqr, const LinearPlant& wrong_model, int horizon) {
  ParameterizedMpc mpc;
  mpc.horizon = horizon;
  mpc.gamma = lqr.gamma;
  mpc.stage_cost = modified_stage_cost_quadratic(lqr, wrong_model);
  mpc.terminal_cost = QuadraticTerminal{lqr.p, Vec::Zero(lqr.a.rows())};
  mpc.model = wrong_model;
  mpc.cost_space = CostSpace::kState;
  mpc.validate();
  return mpc;
}

}  // namespace ompc
