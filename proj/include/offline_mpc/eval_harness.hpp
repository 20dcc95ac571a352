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
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "offline_mpc/core.hpp"
#include "offline_mpc/datagen.hpp"
#include "offline_mpc/envs.hpp"
#include "offline_mpc/mpc.hpp"
#include "offline_mpc/offline_learner.hpp"
#include "offline_mpc/value_net.hpp"

namespace ompc {

// Maps the current plant state to an action. May keep internal state.
using Controller = std::function<Vec(const Vec&)>;

class RolloutError : public Error {
 public:
  RolloutError(const std::string& message, int step);
  int step() const { return step_; }

 private:
  int step_;
};

struct Rollout {
  DiscountedReturn ret;
  std::vector<Vec> states;   // steps + 1
  std::vector<Vec> actions;  // applied (clamped) actions
  std::vector<double> costs;
};

// Closed loop on the true plant; the return sums gamma^k times the true
// stage cost.
Rollout rollout(const Plant& plant, const Controller& controller, const Vec& s0, int steps, double gamma);

// J_ref / J. Throws DomainError unless both are positive.
double relative_performance(double j, double j_ref);

// Fixed evaluation start states of each task.
std::vector<Vec> evaluation_initial_states(EnvId env);

// Mean discounted return of a controller family over start states. The
// factory is called once per start state so each rollout starts fresh.
double mean_return(const Plant& plant, const std::function<Controller()>& factory, const std::vector<Vec>& starts,
                   int steps, double gamma);

Controller mpc_controller(const ParameterizedMpc& mpc);
Controller lqr_controller(const DiscountedLqr& lqr);

// LQR of the true linear plant with the task cost.
DiscountedLqr true_plant_lqr(const LinearPlant& plant);

enum class SchemeId { kMpc1, kMpc2, kMpc3 };
std::string_view to_string(SchemeId scheme);
SchemeId parse_scheme_id(std::string_view name);

struct SweepConfig {
  EnvId env = EnvId::kLinear;
  std::vector<double> alphas;
  std::vector<std::uint64_t> seeds;
  std::vector<SchemeId> schemes{SchemeId::kMpc1, SchemeId::kMpc2, SchemeId::kMpc3};
  int episodes = 100;
  int episode_length = 100;
  BehaviorPolicy behavior;
  std::vector<int> hidden{64, 64};
  TdFitConfig td;
  LearnConfig learn;  // theta_init and learn_model are set per scheme
  int eval_steps = 100;
  std::vector<Vec> initial_states;  // empty: evaluation_initial_states(env)
  int jobs = 1;
};

// Default alpha grid of each task.
std::vector<double> default_alpha_grid(EnvId env);

struct ReportRow {
  std::string task;
  std::string scheme;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  double j = 0.0;
  double j_ref = 0.0;
  double rel = 0.0;
  std::string error;  // non-empty when the cell failed

  bool failed() const { return !error.empty(); }
};

struct AggregateRow {
  std::string task;
  std::string scheme;
  double alpha = 0.0;
  double rel_mean = 0.0;
  double rel_std = 0.0;
  int n = 0;
};

struct EvalReport {
  std::vector<ReportRow> rows;

  // Per (scheme, alpha) in first-appearance order; failed cells excluded.
  std::vector<AggregateRow> aggregate() const;
};

// The learned schemes of one (alpha, seed) cell and the artifacts behind
// them. Exposed for the CLI and tests.
struct CellArtifacts {
  Plant plant;
  ParameterizedMpc mpc1;
  Dataset dataset;
  MlpValueFunction value;
  std::optional<LearnResult> mpc2;
  std::optional<LearnResult> mpc3;
};

// True plant of a cell: alpha only enters the linear task's plant.
Plant cell_plant(EnvId env, double alpha);

// Mean return of an MPC scheme on `plant` from the configured start states.
double scheme_return(const SweepConfig& config, const Plant& plant, const ParameterizedMpc& mpc);

CellArtifacts build_cell(const SweepConfig& config, double alpha, std::uint64_t seed);

// Reference return of a cell: LQR on the true plant (linear), MPC1 on the
// exact model (nonlinear).
double reference_return(const SweepConfig& config, const Plant& plant);

EvalReport sweep(const SweepConfig& config);

void save_report_csv(const EvalReport& report, const std::filesystem::path& path);
EvalReport load_report_csv(const std::filesystem::path& path);
void save_aggregate_csv(const std::vector<AggregateRow>& rows, const std::filesystem::path& path);
std::vector<AggregateRow> load_aggregate_csv(const std::filesystem::path& path);

// Mean rel vs alpha per scheme with a one-standard-deviation band.
std::string render_svg_plot(const std::vector<AggregateRow>& rows, std::string_view title);

}  // namespace ompc
