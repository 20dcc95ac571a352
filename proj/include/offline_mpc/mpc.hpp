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
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "offline_mpc/core.hpp"
#include "offline_mpc/envs.hpp"
#include "offline_mpc/lqr_oracle.hpp"

namespace ompc {

// ----- costs ----- //

enum class CostSpace { kState, kObservation };

std::string_view to_string(CostSpace space);
CostSpace parse_cost_space(std::string_view name);

// (y - ref)' W (y - ref) + a' R a + offset with W = Cw Cw', R = Cr Cr'.
// Cw, Cr are lower triangular, so W and R are PSD for any parameter value.
struct QuadraticStageCost {
  Mat chol_w;
  Mat chol_r;
  double offset = 0.0;
  Vec ref;

  // Lower-triangular factors of the given PSD weights.
  static QuadraticStageCost from_weights(const Mat& w, const Mat& r, Vec ref, double offset = 0.0);

  Mat w() const { return chol_w * chol_w.transpose(); }
  Mat r() const { return chol_r * chol_r.transpose(); }

  // Parameter layout: lower triangle of Cw (row-major), lower triangle of
  // Cr (row-major), offset.
  Eigen::Index num_params() const;
  Vec params() const;
  QuadraticStageCost with_params(const Vec& theta) const;
};

double eval_stage_cost(const QuadraticStageCost& cost, const Vec& y, const Vec& a);
// Gradient of eval_stage_cost with respect to params().
Vec grad_stage_cost_params(const QuadraticStageCost& cost, const Vec& y, const Vec& a);

// z'Hz + g'z + c over z = [x; u], always in state coordinates. Carries the
// cross terms of the modified stage cost.
struct GeneralQuadraticCost {
  Mat h;
  Vec g;
  double c = 0.0;
};

double eval_general_cost(const GeneralQuadraticCost& cost, const Vec& x, const Vec& u);

using StageCost = std::variant<QuadraticStageCost, GeneralQuadraticCost>;

// sqrt(|y - ref|^2 + eps): the tracking-error norm, smoothed at the goal.
struct SmoothedNormTerminal {
  Vec ref;
  double eps = 1e-8;
};

// (y - ref)' P (y - ref)
struct QuadraticTerminal {
  Mat p;
  Vec ref;
};

struct ZeroTerminal {};

using TerminalCost = std::variant<ZeroTerminal, SmoothedNormTerminal, QuadraticTerminal>;

// ----- scheme ----- //

struct ParameterizedMpc {
  int horizon = 1;
  double gamma = 0.9;
  StageCost stage_cost;
  TerminalCost terminal_cost;
  Plant model;
  std::optional<InputBounds> input_bounds;
  CostSpace cost_space = CostSpace::kState;

  // Throws DomainError on inconsistent dimensions or bounds.
  void validate() const;
};

// Cost-space image of a model state (identity for CostSpace::kState).
Vec cost_input(const ParameterizedMpc& mpc, const Vec& state);
double mpc_stage_cost(const ParameterizedMpc& mpc, const Vec& state, const Vec& action);
double mpc_terminal_cost(const ParameterizedMpc& mpc, const Vec& state);

// The nominal scheme of each task built around `model`: true task cost in
// the task's cost space, smoothed-norm terminal, horizon, discount, bounds.
ParameterizedMpc make_nominal_mpc(EnvId env, const Plant& model);

// ----- solver ----- //

struct MpcSolution {
  std::vector<Vec> states;   // N + 1
  std::vector<Vec> actions;  // N
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

enum class SolverBackend { kAuto, kRiccati, kIlqr };

struct SolveOptions {
  SolverBackend backend = SolverBackend::kAuto;
  int max_iterations = 200;
  double tolerance = 1e-8;  // objective decrease
  // Initial action sequence for iLQR; cold start when empty.
  std::vector<Vec> warm_start;
};

// True when the exact Riccati sweep applies: linear model, quadratic stage
// and terminal costs, no input bounds.
bool riccati_applicable(const ParameterizedMpc& mpc);

// sum_k gamma^k L(x_k, u_k) + gamma^N T(x_N) along the model rollout.
double trajectory_objective(const ParameterizedMpc& mpc, const Vec& s0, const std::vector<Vec>& actions,
                            std::vector<Vec>* states = nullptr);

MpcSolution solve(const ParameterizedMpc& mpc, const Vec& s0, const SolveOptions& options = {});
// Same problem with u_0 fixed to a0.
MpcSolution solve_pinned(const ParameterizedMpc& mpc, const Vec& s0, const Vec& a0, const SolveOptions& options = {});

Vec policy(const ParameterizedMpc& mpc, const Vec& s0, const SolveOptions& options = {});
double value(const ParameterizedMpc& mpc, const Vec& s0, const SolveOptions& options = {});
double action_value(const ParameterizedMpc& mpc, const Vec& s0, const Vec& a0, const SolveOptions& options = {});

// Receding-horizon controller; successive solves are warm started with the
// previous action sequence shifted by one step.
class MpcController {
 public:
  explicit MpcController(ParameterizedMpc mpc, SolveOptions options = {});
  Vec operator()(const Vec& state);
  void reset() { previous_.clear(); }
  const ParameterizedMpc& scheme() const { return mpc_; }
  const MpcSolution& last_solution() const { return last_; }

 private:
  ParameterizedMpc mpc_;
  SolveOptions options_;
  std::vector<Vec> previous_;
  MpcSolution last_;
};

// ----- modified stage cost (optimal cost under a wrong model) ----- //

// Q*(s,a) - gamma V*(f_wrong(s,a)) with the analytic LQR quantities.
double modified_stage_cost(const DiscountedLqr& lqr, const LinearPlant& wrong_model, const Vec& s, const Vec& a);
// The same function as an explicit quadratic in z = [s; a].
GeneralQuadraticCost modified_stage_cost_quadratic(const DiscountedLqr& lqr, const LinearPlant& wrong_model);

// MPC on `wrong_model` with the modified stage cost and terminal cost V*.
ParameterizedMpc make_modified_mpc(const DiscountedLqr& lqr, const LinearPlant& wrong_model, int horizon);

// Random discounted LQ instances with perturbed models: the modified-cost
// MPC is compared against the analytic V*, Q* and pi* at random states.
struct ModifiedMpcCheck {
  int instances = 0;
  int states = 0;
  double max_policy_error = 0.0;
  double max_value_error = 0.0;
  double max_action_value_error = 0.0;
};

// `dim` states, max(1, dim / 2) inputs, gamma 0.9, horizons drawn from
// [1, 20]. Perturbations are redrawn until pi* stabilizes the model.
ModifiedMpcCheck check_modified_mpc(int dim, int instances, int states_per_instance, std::uint64_t seed);

// ----- persistence ----- //

std::string mpc_to_json(const ParameterizedMpc& mpc);
ParameterizedMpc mpc_from_json(std::string_view text);
void save_mpc(const ParameterizedMpc& mpc, const std::filesystem::path& path);
ParameterizedMpc load_mpc(const std::filesystem::path& path);
bool same_scheme(const ParameterizedMpc& a, const ParameterizedMpc& b);

}  // namespace ompc
