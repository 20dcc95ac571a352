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

#include "offline_mpc/offline_learner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "offline_mpc/adam.hpp"

namespace ompc {

namespace {

const QuadraticStageCost& learnable_cost(const ParameterizedMpc& mpc) {
  const auto* cost = std::get_if<QuadraticStageCost>(&mpc.stage_cost);
  if (!cost) throw DomainError("only quadratic stage costs can be learned");
  return *cost;
}

// Per-transition quantities that do not depend on theta.
struct Prepared {
  Vec y;               // cost-space input
  double base = 0.0;   // L + gamma V(s+)
  double v_model = 0.0;  // gamma V(f(s, a)), valid when the model is fixed
};

Prepared prepare(const ValueFunction& vphi, const ParameterizedMpc& mpc, const Transition& t, bool model_fixed,
                 std::size_t index) {
  Prepared p;
  p.y = cost_input(mpc, t.state);
  p.base = t.cost + mpc.gamma * vphi.value(t.next_state);
  if (model_fixed) p.v_model = mpc.gamma * vphi.value(propagate(mpc.model, t.state, t.action));
  if (!std::isfinite(p.base) || !std::isfinite(p.v_model) || !p.y.allFinite()) {
    throw LearnerError("non-finite residual target at transition " + std::to_string(index));
  }
  return p;
}

// d f / d theta_model (n x p) at one (s, a).
Mat model_jacobian(const Plant& model, const Vec& s, const Vec& a) {
  if (std::holds_alternative<LinearPlant>(model)) {
    const Eigen::Index n = s.size();
    const Eigen::Index m = a.size();
    Mat jac = Mat::Zero(n, n * n + n * m);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) jac(i, i * n + j) = s[j];
      for (Eigen::Index j = 0; j < m; ++j) jac(i, n * n + i * m + j) = a[j];
    }
    return jac;
  }
  const Vec params = model_params(model);
  Mat jac(s.size(), params.size());
  Vec shifted = params;
  for (Eigen::Index j = 0; j < params.size(); ++j) {
    const double h = params[j] != 0.0 ? 1e-6 * std::abs(params[j]) : 1e-6;
    shifted[j] = params[j] + h;
    const Vec plus = propagate(with_model_params(model, shifted), s, a);
    shifted[j] = params[j] - h;
    const Vec minus = propagate(with_model_params(model, shifted), s, a);
    shifted[j] = params[j];
    jac.col(j) = (plus - minus) / (2.0 * h);
  }
  return jac;
}

struct BatchTotals {
  double sum_squared = 0.0;
  Vec grad;  // of the mean squared residual
};

// Mean squared residual over `indices` and its gradient; `mpc` carries theta.
BatchTotals batch_residuals(const ValueFunction& vphi, const ParameterizedMpc& mpc, bool learn_model,
                            std::span<const Transition> data, std::span<const Prepared> prepared,
                            std::span<const std::size_t> indices, bool with_grad = true) {
  const QuadraticStageCost& cost = learnable_cost(mpc);
  const Eigen::Index n_cost = cost.num_params();
  const Eigen::Index n_model = learn_model ? model_params(mpc.model).size() : 0;
  BatchTotals totals;
  totals.grad = Vec::Zero(n_cost + n_model);
  const auto count_i = static_cast<Eigen::Index>(indices.size());
  Mat predicted;
  Vec v_pred;
  Mat dv_pred;
  if (learn_model) {
    predicted.resize(state_dim(mpc.model), count_i);
    for (Eigen::Index k = 0; k < count_i; ++k) {
      const Transition& t = data[indices[static_cast<std::size_t>(k)]];
      predicted.col(k) = propagate(mpc.model, t.state, t.action);
    }
    vphi.evaluate_batch(predicted, v_pred, with_grad ? &dv_pred : nullptr);
  }
  for (Eigen::Index k = 0; k < count_i; ++k) {
    const std::size_t i = indices[static_cast<std::size_t>(k)];
    const Transition& t = data[i];
    const Prepared& p = prepared[i];
    const double v_model = learn_model ? mpc.gamma * v_pred[k] : p.v_model;
    const double prediction = eval_stage_cost(cost, p.y, t.action);
    const double r = p.base - v_model - prediction;
    if (!std::isfinite(r)) throw LearnerError("non-finite residual at transition " + std::to_string(i));
    totals.sum_squared += r * r;
    if (!with_grad) continue;
    // d r / d theta_cost = -d L_theta / d theta_cost
    totals.grad.head(n_cost) -= 2.0 * r * grad_stage_cost_params(cost, p.y, t.action);
    if (learn_model) {
      // d r / d theta_model = -gamma grad V(f)' df/dtheta
      totals.grad.tail(n_model) -=
          2.0 * r * mpc.gamma * (model_jacobian(mpc.model, t.state, t.action).transpose() * dv_pred.col(k));
    }
  }
  const double count = static_cast<double>(indices.size());
  totals.sum_squared /= count;
  totals.grad /= count;
  return totals;
}

LossAndGrad finish(const BatchTotals& totals, const Vec& theta, const Vec& theta_init, double lambda) {
  LossAndGrad out;
  const Vec diff = theta - theta_init;
  out.mean_squared = totals.sum_squared;
  out.reg_term = lambda * diff.squaredNorm();
  out.loss = out.mean_squared + out.reg_term;
  out.grad = totals.grad + 2.0 * lambda * diff;
  return out;
}

}  // namespace

double effective_l2_weight(const LearnConfig& config) {
  if (config.l2_weight) {
    if (!(*config.l2_weight >= 0.0)) throw DomainError("l2 weight must be nonnegative");
    return *config.l2_weight;
  }
  return 1e-3 / static_cast<double>(learnable_params(config.theta_init, config.learn_model).size());
}

Vec learnable_params(const ParameterizedMpc& mpc, bool learn_model) {
  const Vec cost = learnable_cost(mpc).params();
  if (!learn_model) return cost;
  const Vec model = model_params(mpc.model);
  Vec theta(cost.size() + model.size());
  theta << cost, model;
  return theta;
}

ParameterizedMpc with_learnable_params(const ParameterizedMpc& mpc, const Vec& theta, bool learn_model) {
  const QuadraticStageCost& cost = learnable_cost(mpc);
  const Eigen::Index n_cost = cost.num_params();
  const Eigen::Index n_model = learn_model ? model_params(mpc.model).size() : 0;
  if (theta.size() != n_cost + n_model) throw DomainError("learnable parameter vector has wrong size");
  ParameterizedMpc out = mpc;
  out.stage_cost = cost.with_params(theta.head(n_cost));
  if (learn_model) out.model = with_model_params(mpc.model, theta.tail(n_model));
  return out;
}

ResidualSample residual(const ValueFunction& vphi, const ParameterizedMpc& mpc, const Transition& t,
                        std::size_t index) {
  const Vec predicted = propagate(mpc.model, t.state, t.action);
  ResidualSample out;
  out.target = t.cost + mpc.gamma * vphi.value(t.next_state) - mpc.gamma * vphi.value(predicted);
  out.prediction = mpc_stage_cost(mpc, t.state, t.action);
  out.residual = out.target - out.prediction;
  if (!std::isfinite(out.residual)) {
    throw LearnerError("non-finite residual at transition " + std::to_string(index));
  }
  return out;
}

LossAndGrad loss_and_grad(const ValueFunction& vphi, const ParameterizedMpc& mpc, std::span<const Transition> batch,
                          const LearnConfig& config) {
  if (batch.empty()) throw DomainError("loss_and_grad: empty batch");
  std::vector<Prepared> prepared;
  prepared.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) prepared.push_back(prepare(vphi, mpc, batch[i], !config.learn_model, i));
  std::vector<std::size_t> indices(batch.size());
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  const BatchTotals totals = batch_residuals(vphi, mpc, config.learn_model, batch, prepared, indices);
  return finish(totals, learnable_params(mpc, config.learn_model),
                learnable_params(config.theta_init, config.learn_model), effective_l2_weight(config));
}

LearnResult learn(const ValueFunction& vphi, const Dataset& dataset, const LearnConfig& config) {
  dataset.validate();
  config.theta_init.validate();
  if (config.batch_size < 1) throw DomainError("learn: batch size must be positive");
  if (config.epochs < 0) throw DomainError("learn: epochs must be nonnegative");
  if (!(config.learning_rate >= 0.0)) throw DomainError("learn: learning rate must be nonnegative");
  if (dataset.meta.state_dim != state_dim(config.theta_init.model) ||
      dataset.meta.action_dim != action_dim(config.theta_init.model)) {
    throw DomainError("learn: dataset dimensions do not match the scheme");
  }
  const double lambda = effective_l2_weight(config);
  const bool learn_model = config.learn_model;
  const std::span<const Transition> data(dataset.transitions);

  std::vector<Prepared> prepared;
  prepared.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    prepared.push_back(prepare(vphi, config.theta_init, data[i], !learn_model, i));
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const Vec theta_init = learnable_params(config.theta_init, learn_model);
  Vec theta = theta_init;
  ParameterizedMpc current = config.theta_init;
  LearnResult result;

  auto record = [&](int epoch) {
    const LossAndGrad full = finish(batch_residuals(vphi, current, learn_model, data, prepared, order, false), theta,
                                    theta_init, lambda);
    result.trace.push_back({epoch, full.loss, std::sqrt(full.mean_squared), full.reg_term});
    if (!std::isfinite(full.loss)) {
      std::ostringstream msg;
      msg << "learn: loss diverged at epoch " << epoch << "; trace:";
      for (const auto& row : result.trace) msg << ' ' << format_double(row.loss);
      throw LearnerError(msg.str());
    }
  };
  record(0);

  Adam adam(theta.size());
  std::mt19937_64 rng(config.seed);
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), data.size());
  const double decay =
      (config.final_learning_rate && config.epochs > 1)
          ? std::pow(*config.final_learning_rate / config.learning_rate, 1.0 / static_cast<double>(config.epochs - 1))
          : 1.0;
  double lr = config.learning_rate;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const LossAndGrad lg =
          finish(batch_residuals(vphi, current, learn_model, data, prepared, idx), theta, theta_init, lambda);
      if (!std::isfinite(lg.loss) || !lg.grad.allFinite()) {
        std::ostringstream msg;
        msg << "learn: non-finite batch loss in epoch " << epoch << "; trace:";
        for (const auto& row : result.trace) msg << ' ' << format_double(row.loss);
        throw LearnerError(msg.str());
      }
      adam.step(theta, lg.grad, lr);
      current = with_learnable_params(current, theta, learn_model);
    }
    lr *= decay;
    record(epoch);
  }
  result.mpc = std::move(current);
  return result;
}

void save_loss_trace(const std::vector<LossTraceRow>& trace, const std::filesystem::path& path) {
  std::string out = "epoch,loss,residual_rms,reg_term\n";
  for (const auto& row : trace) {
    out += std::to_string(row.epoch) + ',' + format_double(row.loss) + ',' + format_double(row.residual_rms) + ',' +
           format_double(row.reg_term) + '\n';
  }
  write_file(path, out);
}

std::vector<LossTraceRow> load_loss_trace(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "epoch,loss,residual_rms,reg_term") {
    throw SchemaError("loss trace: unexpected header");
  }
  std::vector<LossTraceRow> trace;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 4) throw SchemaError("loss trace: wrong field count on line " + std::to_string(line_no));
    try {
      trace.push_back({std::stoi(fields[0]), parse_double(fields[1]), parse_double(fields[2]), parse_double(fields[3])});
    } catch (const std::exception& e) {
      throw ParseError("loss trace: " + std::string(e.what()), line_no);
    }
  }
  return trace;
}

}  // namespace ompc
