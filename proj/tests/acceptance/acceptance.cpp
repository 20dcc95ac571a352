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

// Acceptance suite. Usage: acceptance [criterion ...]
// where a criterion is 1..9 or "cartpole"; no arguments runs 1..9.
// Prints one PASS/FAIL line per criterion and exits nonzero on any FAIL.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "offline_mpc/datagen.hpp"
#include "offline_mpc/eval_harness.hpp"
#include "offline_mpc/lqr_oracle.hpp"
#include "offline_mpc/mpc.hpp"
#include "offline_mpc/offline_learner.hpp"
#include "offline_mpc/value_net.hpp"
#include "oracles.hpp"

namespace ompc {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ----- helpers ----- //

template <typename F>
Vec central_difference(F&& f, const Vec& x, double h) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

// Componentwise relative error; entries below 1e-3 of the largest analytic
// component are compared against that floor.
double gradient_rel_error(const Vec& analytic, const Vec& numeric) {
  const double floor = 1e-3 * std::max(analytic.cwiseAbs().maxCoeff(), 1e-12);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double den = std::max({std::abs(analytic(i)), std::abs(numeric(i)), floor});
    worst = std::max(worst, std::abs(analytic(i) - numeric(i)) / den);
  }
  return worst;
}

Vec random_vec(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

Mat random_mat(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = d(rng);
  return m;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

ParameterizedMpc lq_scheme(const Mat& a, const Mat& b, const Mat& q, const Mat& r, double gamma, int horizon,
                           const Mat& terminal) {
  ParameterizedMpc mpc;
  mpc.horizon = horizon;
  mpc.gamma = gamma;
  mpc.stage_cost = QuadraticStageCost::from_weights(q, r, Vec::Zero(a.rows()));
  mpc.terminal_cost = QuadraticTerminal{terminal, Vec::Zero(a.rows())};
  mpc.model = LinearPlant{a, b, 0.0, 0.1};
  mpc.cost_space = CostSpace::kState;
  mpc.validate();
  return mpc;
}

Dataset uniform_dataset(EnvId env, double alpha, int episodes, int length, std::uint64_t seed) {
  BehaviorPolicy behavior;
  behavior.kind = BehaviorKind::kUniformRandom;
  return generate(make_plant(env, alpha), behavior, episodes, length, seed);
}

// Mean rel per (scheme, alpha) from a report.
std::map<std::pair<std::string, double>, double> mean_rel(const EvalReport& report, int* failed) {
  std::map<std::pair<std::string, double>, double> out;
  for (const AggregateRow& a : report.aggregate()) out[{a.scheme, a.alpha}] = a.rel_mean;
  *failed = 0;
  for (const ReportRow& r : report.rows) *failed += r.failed() ? 1 : 0;
  return out;
}

// ----- criteria ----- //

// Modified-cost MPC on a wrong LQ model against the analytic optimum.
Outcome criterion1() {
  const ModifiedMpcCheck r = check_modified_mpc(2, 100, 100, 1);
  const bool pass = r.instances == 100 && r.states == 10000 && r.max_policy_error < 1e-6 &&
                    r.max_value_error < 1e-6 && r.max_action_value_error < 1e-6;
  return {pass, "instances=" + std::to_string(r.instances) + " states=" + std::to_string(r.states) +
                    " max_policy=" + fmt(r.max_policy_error) + " max_value=" + fmt(r.max_value_error) +
                    " max_action_value=" + fmt(r.max_action_value_error) + " (< 1e-6)"};
}

// iLQR vs Riccati, and horizon invariance under the stationary terminal.
Outcome criterion2() {
  std::mt19937_64 rng(2);
  SolveOptions ilqr, riccati;
  ilqr.backend = SolverBackend::kIlqr;
  riccati.backend = SolverBackend::kRiccati;
  double backend_gap = 0.0;
  int instances = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 3, m = 1 + trial % 2;
    const double s = 1.0 / std::sqrt(static_cast<double>(n));
    const Mat a = random_mat(rng, n, n, s), b = random_mat(rng, n, m, s);
    const Mat lq = random_mat(rng, n, n, s), lr = random_mat(rng, m, m, s), lp = random_mat(rng, n, n, s);
    const Mat q = lq * lq.transpose() + 0.1 * Mat::Identity(n, n);
    const Mat r = lr * lr.transpose() + 0.1 * Mat::Identity(m, m);
    const ParameterizedMpc mpc = lq_scheme(a, b, q, r, 0.9, 1 + trial % 40, lp * lp.transpose());
    const Vec s0 = random_vec(rng, n);
    const MpcSolution x = solve(mpc, s0, ilqr), y = solve(mpc, s0, riccati);
    for (std::size_t k = 0; k < x.actions.size(); ++k) {
      backend_gap = std::max(backend_gap, (x.actions[k] - y.actions[k]).cwiseAbs().maxCoeff());
    }
    ++instances;
  }
  double horizon_gap = 0.0;
  for (double alpha : default_alpha_grid(EnvId::kLinear)) {
    const DiscountedLqr lqr = testing::linear_task_lqr(alpha);
    for (int i = 0; i < 20; ++i) {
      const Vec s = random_vec(rng, 4);
      const Vec reference = -lqr.k * s;
      for (int horizon : {1, 5, 20, 100}) {
        const Vec u = policy(lq_scheme(lqr.a, lqr.b, lqr.q, lqr.r, lqr.gamma, horizon, lqr.p), s);
        horizon_gap = std::max(horizon_gap, (u - reference).cwiseAbs().maxCoeff());
      }
    }
  }
  return {backend_gap < 1e-6 && horizon_gap < 1e-6, "instances=" + std::to_string(instances) +
                                                        " max_backend_gap=" + fmt(backend_gap) +
                                                        " max_horizon_gap=" + fmt(horizon_gap) + " (< 1e-6)"};
}

// Finite-difference agreement of every analytic gradient.
Outcome criterion3() {
  std::mt19937_64 rng(3);
  double mlp_input = 0.0, mlp_weights = 0.0, cost_params = 0.0, learner = 0.0;
  const EnvId envs[] = {EnvId::kLinear, EnvId::kPendulum, EnvId::kCartpole};
  for (int trial = 0; trial < 100; ++trial) {
    const EnvId env = envs[trial % 3];
    const Plant plant = make_plant(env);
    const int n = state_dim(plant);
    const FeatureMap map = trial % 2 ? default_feature_map(env) : FeatureMap::kIdentity;
    Normalizer norm{random_vec(rng, feature_dim(map, n), 0.3),
                    (random_vec(rng, feature_dim(map, n), 0.3).array().abs() + 0.5).matrix()};
    const int width = 4 + trial % 13;
    const MlpValueFunction net = MlpValueFunction::random({feature_dim(map, n), width, width, 1}, map, norm,
                                                          1.0 + trial % 5, static_cast<std::uint64_t>(trial));
    const Vec s = random_vec(rng, n);
    mlp_input = std::max(mlp_input, gradient_rel_error(net.grad_input(s),
                                                       central_difference([&](const Vec& x) { return net.forward(x); },
                                                                          s, 1e-6)));
    MlpValueFunction probe = net;
    const Vec w = net.flat_weights();
    mlp_weights = std::max(mlp_weights, gradient_rel_error(net.grad_weights(s), central_difference(
                                                                                   [&](const Vec& x) {
                                                                                     probe.set_flat_weights(x);
                                                                                     return probe.forward(s);
                                                                                   },
                                                                                   w, 1e-6)));

    const int ny = 1 + trial % 5, m = 1 + trial % 2;
    QuadraticStageCost cost{random_mat(rng, ny, ny).triangularView<Eigen::Lower>(),
                            random_mat(rng, m, m).triangularView<Eigen::Lower>(), 0.5, random_vec(rng, ny)};
    const Vec y = random_vec(rng, ny), a = random_vec(rng, m);
    cost_params = std::max(
        cost_params, gradient_rel_error(grad_stage_cost_params(cost, y, a),
                                        central_difference([&](const Vec& th) { return eval_stage_cost(cost.with_params(th), y, a); },
                                                           cost.params(), 1e-6)));

    // Full learner loss over theta, cost only or cost and model.
    const bool learn_model = trial % 4 != 0;
    const Dataset d = uniform_dataset(env, 0.5, 2, 6, 1000 + trial);
    const MlpValueFunction v = make_value_network(d, default_feature_map(env), {8, 8}, trial);
    LearnConfig config;
    config.learn_model = learn_model;
    config.l2_weight = 0.1;
    config.theta_init = make_nominal_mpc(env, nominal_model(make_plant(env, 0.5), make_mismatch(env, 1.0, trial)));
    const Vec theta = learnable_params(config.theta_init, learn_model) +
                      random_vec(rng, learnable_params(config.theta_init, learn_model).size(), 0.05);
    auto loss = [&](const Vec& th) {
      return loss_and_grad(v, with_learnable_params(config.theta_init, th, learn_model), d.transitions, config).loss;
    };
    const Vec g = loss_and_grad(v, with_learnable_params(config.theta_init, theta, learn_model), d.transitions, config)
                      .grad;
    learner = std::max(learner, gradient_rel_error(g, central_difference(loss, theta, 1e-6)));
  }
  const bool pass = mlp_input < 1e-5 && mlp_weights < 1e-5 && cost_params < 1e-5 && learner < 1e-5;
  return {pass, "instances=100 each mlp_input=" + fmt(mlp_input) + " mlp_weights=" + fmt(mlp_weights) +
                    " cost_params=" + fmt(cost_params) + " learner_theta=" + fmt(learner) + " (< 1e-5)"};
}

// value = action_value(policy) and value <= action_value(a) on all plants.
Outcome criterion4() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double identity_gap = 0.0, minimality_violation = 0.0;
  int states = 0, pairs = 0;
  for (EnvId env : {EnvId::kLinear, EnvId::kPendulum, EnvId::kCartpole}) {
    for (double alpha : {0.0, 1.0}) {
      const Plant plant = make_plant(env, alpha);
      const ParameterizedMpc mpc = make_nominal_mpc(env, nominal_model(plant, make_mismatch(env, alpha, 4)));
      const InputBounds box = exploration_box(plant);
      for (int i = 0; i < 10; ++i) {
        std::mt19937_64 srng = episode_rng(4, states);
        const Vec s = sample_initial_state(plant, srng);
        const MpcSolution sol = solve(mpc, s);
        identity_gap = std::max(identity_gap, std::abs(action_value(mpc, s, sol.actions.front()) - sol.objective));
        for (int j = 0; j < 10; ++j) {
          Vec a(action_dim(plant));
          for (Eigen::Index c = 0; c < a.size(); ++c) a(c) = box.lower(c) + unit(rng) * (box.upper(c) - box.lower(c));
          minimality_violation = std::max(minimality_violation, sol.objective - action_value(mpc, s, a));
          ++pairs;
        }
        ++states;
      }
    }
  }
  return {identity_gap < 1e-6 && minimality_violation <= 1e-6,
          "states=" + std::to_string(states) + " pairs=" + std::to_string(pairs) + " max_identity_gap=" +
              fmt(identity_gap) + " (< 1e-6) max_minimality_violation=" + fmt(minimality_violation) + " (<= 1e-6)"};
}

// Learning a wrong linear model against the exact value function.
Outcome criterion5() {
  const Plant truth = make_plant(EnvId::kLinear, 0.0);
  const DiscountedLqr lqr = true_plant_lqr(std::get<LinearPlant>(truth));
  const Dataset d = uniform_dataset(EnvId::kLinear, 0.0, 20, 20, 1);
  const QuadraticValueFunction v(lqr.p);
  LearnConfig config;
  config.learn_model = true;
  config.l2_weight = 0.0;
  config.epochs = 2000;
  config.learning_rate = 3e-3;
  config.final_learning_rate = 1e-6;
  config.seed = 1;
  config.theta_init = make_nominal_mpc(EnvId::kLinear, make_plant(EnvId::kLinear, 1.0));
  const LearnResult r = learn(v, d, config);
  const double msr = r.trace.back().residual_rms * r.trace.back().residual_rms;
  const auto starts = evaluation_initial_states(EnvId::kLinear);
  const double j_opt = mean_return(truth, [&] { return lqr_controller(lqr); }, starts, 100, 0.9);
  const double j = mean_return(truth, [&] { return mpc_controller(r.mpc); }, starts, 100, 0.9);
  const double gap = std::abs(j - j_opt) / j_opt;
  return {msr < 1e-6 && gap < 0.01,
          "mean_sq_residual=" + fmt(msr) + " (< 1e-6) return_gap=" + fmt(gap) + " (< 0.01)"};
}

SweepConfig desk_config(EnvId env, std::vector<double> alphas) {
  SweepConfig c;
  c.env = env;
  c.alphas = std::move(alphas);
  c.seeds = {0, 1, 2};
  c.episodes = 100;
  c.episode_length = 100;
  c.hidden = {64, 64};
  return c;
}

std::string rel_table(const std::map<std::pair<std::string, double>, double>& rel, const std::vector<double>& alphas) {
  std::ostringstream out;
  for (const char* scheme : {"MPC1", "MPC2", "MPC3"}) {
    out << ' ' << scheme << '[';
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      auto it = rel.find({scheme, alphas[i]});
      out << (i ? " " : "") << (it == rel.end() ? std::string("-") : fmt(it->second));
    }
    out << ']';
  }
  return out.str();
}

// Linear task ordering across the alpha grid.
Outcome criterion6() {
  const std::vector<double> alphas = default_alpha_grid(EnvId::kLinear);
  const EvalReport report = sweep(desk_config(EnvId::kLinear, alphas));
  int failed = 0;
  const auto rel = mean_rel(report, &failed);
  auto at = [&](const char* s, double a) { return rel.at({s, a}); };
  const bool ordering = at("MPC3", 1.0) >= at("MPC2", 1.0) && at("MPC2", 1.0) >= at("MPC1", 1.0);
  bool monotone = true, floor = true;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (i > 0 && at("MPC1", alphas[i]) > at("MPC1", alphas[i - 1])) monotone = false;
    if (!(at("MPC3", alphas[i]) >= 0.9)) floor = false;
  }
  return {failed == 0 && ordering && monotone && floor,
          std::string("ordering_at_1=") + (ordering ? "ok" : "violated") + " mpc1_nonincreasing=" +
              (monotone ? "ok" : "violated") + " mpc3_ge_0.9=" + (floor ? "ok" : "violated") +
              " failed_cells=" + std::to_string(failed) + rel_table(rel, alphas)};
}

// Pendulum ordering at moderate and large mismatch.
Outcome criterion7() {
  const std::vector<double> alphas{0.5, 1.5};
  const EvalReport report = sweep(desk_config(EnvId::kPendulum, alphas));
  int failed = 0;
  const auto rel = mean_rel(report, &failed);
  auto at = [&](const char* s, double a) { return rel.at({s, a}); };
  const bool moderate = at("MPC2", 0.5) > at("MPC1", 0.5) && at("MPC3", 0.5) > at("MPC1", 0.5);
  const bool large = at("MPC3", 1.5) >= at("MPC2", 1.5);
  return {failed == 0 && moderate && large, std::string("learned_beat_nominal_at_0.5=") + (moderate ? "ok" : "violated") +
                                                " mpc3_ge_mpc2_at_1.5=" + (large ? "ok" : "violated") +
                                                " failed_cells=" + std::to_string(failed) + rel_table(rel, alphas)};
}

// Optional cartpole counterpart of criterion 7; not part of the gate.
Outcome cartpole() {
  const std::vector<double> alphas{0.5, 1.5};
  const EvalReport report = sweep(desk_config(EnvId::kCartpole, alphas));
  int failed = 0;
  const auto rel = mean_rel(report, &failed);
  auto at = [&](const char* s, double a) { return rel.at({s, a}); };
  const bool moderate = at("MPC2", 0.5) > at("MPC1", 0.5) && at("MPC3", 0.5) > at("MPC1", 0.5);
  const bool large = at("MPC3", 1.5) >= at("MPC2", 1.5);
  return {failed == 0 && moderate && large, std::string("learned_beat_nominal_at_0.5=") + (moderate ? "ok" : "violated") +
                                                " mpc3_ge_mpc2_at_1.5=" + (large ? "ok" : "violated") +
                                                " failed_cells=" + std::to_string(failed) + rel_table(rel, alphas)};
}

// TD fits against closed-form values.
Outcome criterion8() {
  const Dataset scalar = testing::scalar_contraction_dataset(10'000, 1);
  TdFitConfig cfg;
  cfg.seed = 1;
  const TdFitResult a = fit_td(make_value_network(scalar, FeatureMap::kIdentity, {64, 64}, 1), scalar, cfg);
  const double scalar_err = testing::scalar_fit_error(a.network).relative_l2;

  const DiscountedLqr lqr = testing::linear_task_lqr();
  const Dataset lin = testing::lqr_policy_dataset(lqr, 1000, 10, 1);
  const TdFitResult b = fit_td(make_value_network(lin, FeatureMap::kIdentity, {64, 64}, 1), lin, cfg);
  const Mat p_pi = policy_evaluation(lqr.a, lqr.b, lqr.q, lqr.r, lqr.k, lqr.gamma);
  const double lqr_err = testing::median_relative_error(b.network, p_pi, lin);
  return {scalar_err < 0.10 && lqr_err < 0.10,
          "scalar_relative_l2=" + fmt(scalar_err) + " lqr_median_relative=" + fmt(lqr_err) + " (< 0.10)"};
}

// Bit-identical reruns and lossless artifact round trips.
Outcome criterion9() {
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / ("ompc_acceptance_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  std::vector<std::string> problems;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  };
  for (EnvId env : {EnvId::kLinear, EnvId::kPendulum}) {
    const std::string tag(to_string(env));
    SweepConfig c;
    c.env = env;
    c.alphas = {1.0};
    c.seeds = {7};
    c.episodes = 10;
    c.episode_length = 50;
    c.hidden = {16, 16};
    c.td.epochs = 5;
    c.learn.epochs = 5;
    c.eval_steps = 50;
    const CellArtifacts x = build_cell(c, 1.0, 7), y = build_cell(c, 1.0, 7);
    check(x.dataset.transitions == y.dataset.transitions, tag + " dataset rerun");
    check(network_to_json(x.value) == network_to_json(y.value), tag + " network rerun");
    check(mpc_to_json(x.mpc2->mpc) == mpc_to_json(y.mpc2->mpc), tag + " MPC2 rerun");
    check(mpc_to_json(x.mpc3->mpc) == mpc_to_json(y.mpc3->mpc), tag + " MPC3 rerun");
    const EvalReport r1 = sweep(c), r2 = sweep(c);
    save_report_csv(r1, dir / "r1.csv");
    save_report_csv(r2, dir / "r2.csv");
    check(read_file(dir / "r1.csv") == read_file(dir / "r2.csv"), tag + " report rerun");

    save_dataset(x.dataset, dir / "d.csv");
    const Dataset d = load_dataset(dir / "d.csv");
    check(d.transitions == x.dataset.transitions && d.meta.seed == x.dataset.meta.seed, tag + " dataset round trip");
    save_network(x.value, dir / "v.json");
    check(load_network(dir / "v.json") == x.value, tag + " network round trip");
    save_mpc(x.mpc3->mpc, dir / "m.json");
    check(same_scheme(load_mpc(dir / "m.json"), x.mpc3->mpc), tag + " scheme round trip");
    save_loss_trace(x.mpc3->trace, dir / "t.csv");
    const auto trace = load_loss_trace(dir / "t.csv");
    bool trace_ok = trace.size() == x.mpc3->trace.size();
    for (std::size_t i = 0; trace_ok && i < trace.size(); ++i) {
      trace_ok = trace[i].epoch == x.mpc3->trace[i].epoch && trace[i].loss == x.mpc3->trace[i].loss &&
                 trace[i].residual_rms == x.mpc3->trace[i].residual_rms &&
                 trace[i].reg_term == x.mpc3->trace[i].reg_term;
    }
    check(trace_ok, tag + " loss trace round trip");
    const EvalReport back = load_report_csv(dir / "r1.csv");
    bool report_ok = back.rows.size() == r1.rows.size();
    for (std::size_t i = 0; report_ok && i < back.rows.size(); ++i) {
      report_ok = back.rows[i].scheme == r1.rows[i].scheme && back.rows[i].seed == r1.rows[i].seed &&
                  back.rows[i].j == r1.rows[i].j && back.rows[i].j_ref == r1.rows[i].j_ref &&
                  back.rows[i].rel == r1.rows[i].rel;
    }
    check(report_ok, tag + " report round trip");
    save_aggregate_csv(r1.aggregate(), dir / "a.csv");
    const auto agg = load_aggregate_csv(dir / "a.csv");
    const auto ref = r1.aggregate();
    bool agg_ok = agg.size() == ref.size();
    for (std::size_t i = 0; agg_ok && i < agg.size(); ++i) {
      agg_ok = agg[i].rel_mean == ref[i].rel_mean && agg[i].rel_std == ref[i].rel_std && agg[i].n == ref[i].n;
    }
    check(agg_ok, tag + " aggregate round trip");
  }
  std::filesystem::remove_all(dir);
  std::string detail = "checks=24";
  for (const auto& p : problems) detail += " mismatch:" + p;
  return {problems.empty(), detail};
}

}  // namespace
}  // namespace ompc

int main(int argc, char** argv) {
  const std::map<std::string, std::function<ompc::Outcome()>> criteria{
      {"1", ompc::criterion1}, {"2", ompc::criterion2}, {"3", ompc::criterion3},
      {"4", ompc::criterion4}, {"5", ompc::criterion5}, {"6", ompc::criterion6},
      {"7", ompc::criterion7}, {"8", ompc::criterion8}, {"9", ompc::criterion9},
      {"cartpole", ompc::cartpole}};
  std::vector<std::string> selected(argv + 1, argv + argc);
  if (selected.empty()) selected = {"1", "2", "3", "4", "5", "6", "7", "8", "9"};
  int failures = 0;
  for (const std::string& name : selected) {
    const auto it = criteria.find(name);
    if (it == criteria.end()) {
      std::fprintf(stderr, "unknown criterion '%s'\n", name.c_str());
      return 2;
    }
    const auto start = std::chrono::steady_clock::now();
    ompc::Outcome outcome;
    try {
      outcome = it->second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %s: %s %s [%.1fs]\n", name.c_str(), outcome.pass ? "PASS" : "FAIL", outcome.detail.c_str(),
                secs);
    std::fflush(stdout);
    failures += outcome.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
