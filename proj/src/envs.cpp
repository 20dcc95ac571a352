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

#include "offline_mpc/envs.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ompc {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

Mat nominal_a() {
  Mat a(4, 4);
  a << 1, 0, 0.1, 0,  //
      0, 1, 0, 0.1,   //
      0, 0, 0.9, 0,   //
      0, 0, 0, 0.9;
  return a;
}

Mat nominal_b() {
  Mat b(4, 2);
  b << 0, 0,  //
      0, 0,   //
      0.1, 0, //
      0, 0.1;
  return b;
}

// Unmodeled part of the point-mass dynamics (x 1e-2).
Mat perturbation_a() {
  Mat a(4, 4);
  a << 0.68, -1.15, -2.29, -2.42,  //
      1.57, 2.06, 0.53, 1.15,      //
      0.22, 2.17, 1.58, -2.49,     //
      1.79, -2.33, 1.15, -1.62;
  return a * 1e-2;
}

Mat perturbation_b() {
  Mat b(4, 2);
  b << 1.82, 0.21,  //
      -1.00, -0.39, //
      -2.36, -1.88, //
      0.85, 0.74;
  return b * 1e-2;
}

void check_state(const Plant& plant, const Vec& state) {
  if (state.size() != state_dim(plant)) throw DomainError("state has wrong dimension");
  if (!state.allFinite()) throw DomainError("state contains non-finite values");
}

void check_action(const Plant& plant, const Vec& action) {
  if (action.size() != action_dim(plant)) throw DomainError("action has wrong dimension");
}

Vec pendulum_rhs(const PendulumPlant& p, const Vec& s, double u) {
  Vec d(2);
  d[0] = s[1];
  d[1] = 3.0 * p.gravity / (2.0 * p.length) * std::sin(s[0]) +
         3.0 / (p.mass * p.length * p.length) * u;
  return d;
}

Vec cartpole_rhs(const CartpolePlant& p, const Vec& s, double u) {
  const double xdot = s[1];
  const double phi = s[2];
  const double phidot = s[3];
  const double total = p.cart_mass + p.pole_mass;
  const double sn = std::sin(phi);
  const double cs = std::cos(phi);
  const double phiddot =
      (p.gravity * sn + cs * ((p.friction * xdot - u - p.pole_mass * p.pole_length * phidot * phidot * sn) / total)) /
      (p.pole_length * (4.0 / 3.0 - p.pole_mass * cs * cs / total));
  const double xddot =
      (u - p.friction * xdot + p.pole_mass * p.pole_length * (phidot * phidot * sn - phiddot * cs)) / total;
  Vec d(4);
  d << xdot, xddot, phidot, phiddot;
  return d;
}

template <class Rhs>
Vec rk4(const Rhs& rhs, const Vec& s, double dt) {
  const Vec k1 = rhs(s);
  const Vec k2 = rhs(s + 0.5 * dt * k1);
  const Vec k3 = rhs(s + 0.5 * dt * k2);
  const Vec k4 = rhs(s + dt * k3);
  return s + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

std::string_view to_string(EnvId env) {
  switch (env) {
    case EnvId::kLinear:
      return "linear";
    case EnvId::kPendulum:
      return "pendulum";
    case EnvId::kCartpole:
      return "cartpole";
  }
  return "unknown";
}

EnvId parse_env_id(std::string_view name) {
  if (name == "linear") return EnvId::kLinear;
  if (name == "pendulum") return EnvId::kPendulum;
  if (name == "cartpole") return EnvId::kCartpole;
  throw DomainError("unknown environment '" + std::string(name) + "'");
}

LinearPlant LinearPlant::with_mismatch(double alpha) {
  LinearPlant p;
  p.a = nominal_a() + alpha * perturbation_a();
  p.b = nominal_b() + alpha * perturbation_b();
  p.alpha = alpha;
  return p;
}

double task_gamma(EnvId) { return 0.9; }

int task_episode_length(EnvId) { return 100; }

Plant make_plant(EnvId env, double alpha) {
  switch (env) {
    case EnvId::kLinear:
      return LinearPlant::with_mismatch(alpha);
    case EnvId::kPendulum:
      return PendulumPlant{};
    case EnvId::kCartpole:
      return CartpolePlant{};
  }
  throw DomainError("unknown environment");
}

EnvId env_of(const Plant& plant) {
  return std::visit(Overloaded{[](const LinearPlant&) { return EnvId::kLinear; },
                               [](const PendulumPlant&) { return EnvId::kPendulum; },
                               [](const CartpolePlant&) { return EnvId::kCartpole; }},
                    plant);
}

int state_dim(const Plant& plant) {
  return std::visit(Overloaded{[](const LinearPlant& p) { return static_cast<int>(p.a.rows()); },
                               [](const PendulumPlant&) { return 2; },
                               [](const CartpolePlant&) { return 4; }},
                    plant);
}

int action_dim(const Plant& plant) {
  return std::visit(Overloaded{[](const LinearPlant& p) { return static_cast<int>(p.b.cols()); },
                               [](const PendulumPlant&) { return 1; },
                               [](const CartpolePlant&) { return 1; }},
                    plant);
}

int observation_dim(const Plant& plant) {
  return std::visit(Overloaded{[](const LinearPlant& p) { return static_cast<int>(p.a.rows()); },
                               [](const PendulumPlant&) { return 3; },
                               [](const CartpolePlant&) { return 5; }},
                    plant);
}

double sampling_time(const Plant& plant) {
  return std::visit([](const auto& p) { return p.dt; }, plant);
}

std::optional<InputBounds> action_bounds(const Plant& plant) {
  return std::visit(Overloaded{[](const LinearPlant&) -> std::optional<InputBounds> { return std::nullopt; },
                               [](const auto& p) -> std::optional<InputBounds> {
                                 return InputBounds{Vec::Constant(1, -p.u_bound), Vec::Constant(1, p.u_bound)};
                               }},
                    plant);
}

Vec clamp_action(const Plant& plant, const Vec& action) {
  auto bounds = action_bounds(plant);
  if (!bounds) return action;
  return action.cwiseMax(bounds->lower).cwiseMin(bounds->upper);
}

Vec continuous_dynamics(const Plant& plant, const Vec& state, const Vec& action) {
  check_state(plant, state);
  check_action(plant, action);
  return std::visit(
      Overloaded{[](const LinearPlant&) -> Vec {
                   throw DomainError("continuous_dynamics: the linear plant is discrete-time");
                 },
                 [&](const PendulumPlant& p) -> Vec { return pendulum_rhs(p, state, action[0]); },
                 [&](const CartpolePlant& p) -> Vec { return cartpole_rhs(p, state, action[0]); }},
      plant);
}

Vec propagate(const Plant& plant, const Vec& state, const Vec& action) {
  return std::visit(
      Overloaded{[&](const LinearPlant& p) -> Vec { return p.a * state + p.b * action; },
                 [&](const PendulumPlant& p) -> Vec {
                   const double u = action[0];
                   return rk4([&](const Vec& s) { return pendulum_rhs(p, s, u); }, state, p.dt);
                 },
                 [&](const CartpolePlant& p) -> Vec {
                   const double u = action[0];
                   return rk4([&](const Vec& s) { return cartpole_rhs(p, s, u); }, state, p.dt);
                 }},
      plant);
}

Vec step(const Plant& plant, const Vec& state, const Vec& action) {
  check_state(plant, state);
  check_action(plant, action);
  if (!action.allFinite()) throw DomainError("action contains non-finite values");
  Vec next = propagate(plant, state, clamp_action(plant, action));
  switch (env_of(plant)) {
    case EnvId::kPendulum:
      next[0] = normalize_angle(next[0]);
      break;
    case EnvId::kCartpole:
      next[2] = normalize_angle(next[2]);
      break;
    case EnvId::kLinear:
      break;
  }
  if (!next.allFinite()) throw DomainError("step produced a non-finite state");
  return next;
}

double stage_cost(const Plant& plant, const Vec& state, const Vec& action) {
  check_state(plant, state);
  check_action(plant, action);
  switch (env_of(plant)) {
    case EnvId::kLinear:
      return 9.0 * (state[0] * state[0] + state[1] * state[1]) + (state[2] * state[2] + state[3] * state[3]) +
             0.1 * action.squaredNorm();
    case EnvId::kPendulum: {
      const double phi = normalize_angle(state[0]);
      return phi * phi + 0.1 * state[1] * state[1] + 0.1 * action[0] * action[0];
    }
    case EnvId::kCartpole: {
      const double phi = normalize_angle(state[2]);
      return 2.0 * state[0] * state[0] + phi * phi + 0.1 * state[1] * state[1] + 0.1 * state[3] * state[3] +
             0.1 * action[0] * action[0];
    }
  }
  return 0.0;
}

Vec observe(const Plant& plant, const Vec& state) {
  switch (env_of(plant)) {
    case EnvId::kLinear:
      return state;
    case EnvId::kPendulum: {
      Vec y(3);
      y << std::cos(state[0]), std::sin(state[0]), state[1];
      return y;
    }
    case EnvId::kCartpole: {
      Vec y(5);
      y << state[0], state[1], std::cos(state[2]), std::sin(state[2]), state[3];
      return y;
    }
  }
  return state;
}

Mat observe_jacobian(const Plant& plant, const Vec& state) {
  switch (env_of(plant)) {
    case EnvId::kLinear:
      return Mat::Identity(state.size(), state.size());
    case EnvId::kPendulum: {
      Mat j = Mat::Zero(3, 2);
      j(0, 0) = -std::sin(state[0]);
      j(1, 0) = std::cos(state[0]);
      j(2, 1) = 1.0;
      return j;
    }
    case EnvId::kCartpole: {
      Mat j = Mat::Zero(5, 4);
      j(0, 0) = 1.0;
      j(1, 1) = 1.0;
      j(2, 2) = -std::sin(state[2]);
      j(3, 2) = std::cos(state[2]);
      j(4, 3) = 1.0;
      return j;
    }
  }
  return Mat();
}

Vec model_params(const Plant& plant) {
  return std::visit(Overloaded{[](const LinearPlant& p) {
                                 const Eigen::Index n = p.a.size();
                                 Vec theta(n + p.b.size());
                                 for (Eigen::Index i = 0; i < p.a.rows(); ++i)
                                   for (Eigen::Index j = 0; j < p.a.cols(); ++j) theta[i * p.a.cols() + j] = p.a(i, j);
                                 for (Eigen::Index i = 0; i < p.b.rows(); ++i)
                                   for (Eigen::Index j = 0; j < p.b.cols(); ++j)
                                     theta[n + i * p.b.cols() + j] = p.b(i, j);
                                 return theta;
                               },
                               [](const PendulumPlant& p) {
                                 Vec theta(2);
                                 theta << p.mass, p.length;
                                 return theta;
                               },
                               [](const CartpolePlant& p) {
                                 Vec theta(4);
                                 theta << p.cart_mass, p.pole_mass, p.friction, p.pole_length;
                                 return theta;
                               }},
                    plant);
}

Plant with_model_params(const Plant& plant, const Vec& params) {
  if (params.size() != model_params(plant).size()) throw DomainError("model parameter vector has wrong size");
  return std::visit(Overloaded{[&](LinearPlant p) -> Plant {
                                 const Eigen::Index n = p.a.size();
                                 for (Eigen::Index i = 0; i < p.a.rows(); ++i)
                                   for (Eigen::Index j = 0; j < p.a.cols(); ++j) p.a(i, j) = params[i * p.a.cols() + j];
                                 for (Eigen::Index i = 0; i < p.b.rows(); ++i)
                                   for (Eigen::Index j = 0; j < p.b.cols(); ++j)
                                     p.b(i, j) = params[n + i * p.b.cols() + j];
                                 return p;
                               },
                               [&](PendulumPlant p) -> Plant {
                                 p.mass = params[0];
                                 p.length = params[1];
                                 return p;
                               },
                               [&](CartpolePlant p) -> Plant {
                                 p.cart_mass = params[0];
                                 p.pole_mass = params[1];
                                 p.friction = params[2];
                                 p.pole_length = params[3];
                                 return p;
                               }},
                    plant);
}

std::vector<double> ModelMismatch::offsets() const {
  std::vector<double> out(unit_draws.size());
  std::transform(unit_draws.begin(), unit_draws.end(), out.begin(), [this](double d) { return alpha * d; });
  return out;
}

ModelMismatch make_mismatch(EnvId env, double alpha, std::uint64_t seed) {
  if (!(alpha >= 0.0)) throw DomainError("mismatch alpha must be nonnegative");
  ModelMismatch mm;
  mm.env = env;
  mm.alpha = alpha;
  mm.seed = seed;
  std::vector<double> half_widths;
  switch (env) {
    case EnvId::kLinear:
      break;  // deterministic perturbation matrices
    case EnvId::kPendulum:
      half_widths = {0.5, 0.5};  // mass, length
      break;
    case EnvId::kCartpole:
      half_widths = {0.1, 0.1, 0.25, 0.25};  // cart mass, pole mass, friction, length
      break;
  }
  std::mt19937_64 rng(seed);
  for (double w : half_widths) {
    std::uniform_real_distribution<double> dist(-w, w);
    mm.unit_draws.push_back(dist(rng));
  }
  return mm;
}

Plant nominal_model(const Plant& plant, const ModelMismatch& mismatch) {
  if (!(mismatch.alpha >= 0.0)) throw DomainError("mismatch alpha must be nonnegative");
  if (std::holds_alternative<LinearPlant>(plant)) {
    LinearPlant nominal = LinearPlant::with_mismatch(0.0);
    nominal.dt = std::get<LinearPlant>(plant).dt;
    return nominal;
  }
  if (mismatch.env != env_of(plant)) throw DomainError("mismatch was drawn for a different environment");
  Vec theta = model_params(plant);
  const std::vector<double> offsets = mismatch.offsets();
  for (std::size_t i = 0; i < offsets.size(); ++i) theta[static_cast<Eigen::Index>(i)] += offsets[i];
  return with_model_params(plant, theta);
}

}  // namespace ompc
