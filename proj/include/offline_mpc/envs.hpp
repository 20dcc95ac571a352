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
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "offline_mpc/core.hpp"

namespace ompc {

enum class EnvId { kLinear, kPendulum, kCartpole };

std::string_view to_string(EnvId env);
// Accepts "linear", "pendulum", "cartpole"; throws DomainError otherwise.
EnvId parse_env_id(std::string_view name);

// Point mass on a plane, s = [x, y, xdot, ydot], a = [Fx, Fy].
// A and B carry the alpha-scaled unmodeled part; they are also the free
// model parameters when the linear model is learned.
struct LinearPlant {
  Mat a;
  Mat b;
  double alpha = 0.0;
  double dt = 0.1;

  static LinearPlant with_mismatch(double alpha);
};

// s = [phi, phidot], phi measured from the upright position.
struct PendulumPlant {
  double mass = 1.0;
  double length = 1.0;
  double gravity = 9.8;
  double u_bound = 2.0;
  double dt = 0.05;
};

// s = [x, xdot, phi, phidot].
struct CartpolePlant {
  double cart_mass = 0.2;
  double pole_mass = 0.2;
  double pole_length = 0.5;
  double friction = 0.5;
  double gravity = 9.8;
  double u_bound = 2.0;
  double dt = 0.05;
};

using Plant = std::variant<LinearPlant, PendulumPlant, CartpolePlant>;

struct InputBounds {
  Vec lower;
  Vec upper;
};

// Task discount and episode length (identical across the three tasks).
double task_gamma(EnvId env);
int task_episode_length(EnvId env);

// The true plant of each task. Only the linear plant depends on alpha.
Plant make_plant(EnvId env, double alpha = 0.0);

EnvId env_of(const Plant& plant);
int state_dim(const Plant& plant);
int action_dim(const Plant& plant);
int observation_dim(const Plant& plant);
double sampling_time(const Plant& plant);
// Symmetric torque/force bounds for the nonlinear plants, none for linear.
std::optional<InputBounds> action_bounds(const Plant& plant);
Vec clamp_action(const Plant& plant, const Vec& action);

// Continuous-time state derivative of a nonlinear plant (no clamping).
// Throws DomainError for the linear plant, which is discrete by definition.
Vec continuous_dynamics(const Plant& plant, const Vec& state, const Vec& action);

// One sampling interval of the model equations: no action clamping and no
// angle wrapping, so the map is smooth in state, action and parameters.
Vec propagate(const Plant& plant, const Vec& state, const Vec& action);

// One sampling interval of the plant: clamps the action to its bounds,
// integrates and re-normalizes angles into (-pi, pi].
Vec step(const Plant& plant, const Vec& state, const Vec& action);

// True stage cost of the task (angles normalized before squaring).
double stage_cost(const Plant& plant, const Vec& state, const Vec& action);

// Observation map: identity (linear), [cos, sin, phidot] (pendulum),
// [x, xdot, cos, sin, phidot] (cartpole).
Vec observe(const Plant& plant, const Vec& state);
Mat observe_jacobian(const Plant& plant, const Vec& state);

// Physical/model parameters as a flat vector. Linear: A row-major then B
// row-major. Pendulum: [mass, length]. Cartpole: [cart_mass, pole_mass,
// friction, pole_length].
Vec model_params(const Plant& plant);
Plant with_model_params(const Plant& plant, const Vec& params);

// Per-parameter estimate offsets. `unit_draws` are sampled once per seed
// from the task's uniform ranges; the applied offset is alpha * draw.
struct ModelMismatch {
  EnvId env = EnvId::kLinear;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> unit_draws;

  std::vector<double> offsets() const;
};

ModelMismatch make_mismatch(EnvId env, double alpha, std::uint64_t seed);

// The (wrong) model used by the nominal MPC. Linear: unperturbed (A, B)
// whatever the plant alpha. Nonlinear: parameters shifted by the offsets.
Plant nominal_model(const Plant& plant, const ModelMismatch& mismatch);

}  // namespace ompc
