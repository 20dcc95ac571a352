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
#include <numbers>

#include <gtest/gtest.h>

#include "offline_mpc/eval_harness.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace ompc {
namespace {

using testing::TempDir;

TEST(Rollout, ZeroStateAndZeroSteps) {
  const Plant plant = make_plant(EnvId::kLinear, 1.0);
  const Controller lqr = lqr_controller(true_plant_lqr(std::get<LinearPlant>(plant)));
  EXPECT_EQ(rollout(plant, lqr, Vec::Zero(4), 100, 0.9).ret.value, 0.0);
  const Rollout r = rollout(plant, lqr, Vec::Ones(4), 0, 0.9);
  EXPECT_EQ(r.ret.value, 0.0);
  EXPECT_EQ(r.states.size(), 1u);
  EXPECT_TRUE(r.actions.empty());
}

TEST(Rollout, StationaryTerminalMpcMatchesLyapunovRecursion) {
  const DiscountedLqr lqr = testing::linear_task_lqr(0.0);
  const Plant plant = make_plant(EnvId::kLinear, 0.0);
  ParameterizedMpc mpc = make_nominal_mpc(EnvId::kLinear, plant);
  mpc.terminal_cost = QuadraticTerminal{lqr.p, Vec::Zero(4)};
  // M_{k+1} = Q + K'RK + gamma Acl' M_k Acl: the cost of k closed-loop steps.
  const Mat acl = lqr.a - lqr.b * lqr.k;
  Mat m = Mat::Zero(4, 4);
  for (int k = 0; k < 100; ++k) m = lqr.q + lqr.k.transpose() * lqr.r * lqr.k + lqr.gamma * acl.transpose() * m * acl;
  for (const Vec& s0 : evaluation_initial_states(EnvId::kLinear)) {
    const double exact = s0.dot(m * s0);
    EXPECT_NEAR(rollout(plant, mpc_controller(mpc), s0, 100, 0.9).ret.value, exact, 1e-6);
  }
}

TEST(Rollout, ActionsAreClampedAndRecorded) {
  const Plant plant = make_plant(EnvId::kPendulum);
  const Rollout r = rollout(plant, [](const Vec&) { return Vec::Constant(1, 10.0); },
                            (Vec(2) << 0.1, 0.0).finished(), 20, 0.9);
  ASSERT_EQ(r.actions.size(), 20u);
  ASSERT_EQ(r.states.size(), 21u);
  double expected = 0.0, w = 1.0;
  for (std::size_t k = 0; k < r.actions.size(); ++k) {
    EXPECT_EQ(r.actions[k](0), 2.0);
    EXPECT_EQ(r.costs[k], stage_cost(plant, r.states[k], r.actions[k]));
    expected += w * r.costs[k];
    w *= 0.9;
  }
  EXPECT_NEAR(r.ret.value, expected, 1e-12 * expected);
}

TEST(Rollout, ControllerFailureCarriesStep) {
  const Plant plant = make_plant(EnvId::kLinear);
  int calls = 0;
  const Controller flaky = [&](const Vec&) -> Vec {
    if (++calls == 4) throw SolverError("no convergence");
    return Vec::Zero(2);
  };
  try {
    rollout(plant, flaky, Vec::Ones(4), 10, 0.9);
    FAIL() << "expected RolloutError";
  } catch (const RolloutError& e) {
    EXPECT_EQ(e.step(), 3);
  }
  try {
    rollout(plant, [](const Vec&) { return Vec::Zero(3); }, Vec::Ones(4), 10, 0.9);
    FAIL() << "expected RolloutError";
  } catch (const RolloutError& e) {
    EXPECT_EQ(e.step(), 0);
  }
}

TEST(RelativePerformance, Definition) {
  EXPECT_EQ(relative_performance(3.0, 3.0), 1.0);
  EXPECT_EQ(relative_performance(2.0, 1.0), 0.5);
  EXPECT_THROW(relative_performance(0.0, 1.0), DomainError);
  EXPECT_THROW(relative_performance(1.0, -1.0), DomainError);
  EXPECT_THROW(relative_performance(std::nan(""), 1.0), DomainError);
}

TEST(RelativePerformance, OptimalAgainstOptimalIsOne) {
  const Plant plant = make_plant(EnvId::kLinear, 0.0);
  const DiscountedLqr ours = true_plant_lqr(std::get<LinearPlant>(plant));
  const DiscountedLqr oracle = testing::linear_task_lqr(0.0);
  const auto starts = evaluation_initial_states(EnvId::kLinear);
  const double j = mean_return(plant, [&] { return lqr_controller(ours); }, starts, 100, 0.9);
  const double j_ref = mean_return(plant, [&] { return lqr_controller(oracle); }, starts, 100, 0.9);
  EXPECT_NEAR(relative_performance(j, j_ref), 1.0, 1e-6);
}

TEST(EvaluationStates, PublishedSets) {
  const auto lin = evaluation_initial_states(EnvId::kLinear);
  ASSERT_EQ(lin.size(), 8u);
  for (const Vec& s : lin) EXPECT_GT(s.norm(), 0.0);
  const auto pend = evaluation_initial_states(EnvId::kPendulum);
  ASSERT_EQ(pend.size(), 5u);
  EXPECT_EQ(pend[0](0), std::numbers::pi);
  const auto cart = evaluation_initial_states(EnvId::kCartpole);
  ASSERT_EQ(cart.size(), 3u);
  for (const Vec& s : cart) EXPECT_EQ(s(2), std::numbers::pi);
}

TEST(AlphaGrid, Defaults) {
  EXPECT_EQ(default_alpha_grid(EnvId::kLinear), (std::vector<double>{0, 0.25, 0.5, 1.0, 1.5, 2.0}));
  EXPECT_EQ(default_alpha_grid(EnvId::kPendulum), (std::vector<double>{0, 0.25, 0.5, 0.75, 1.0, 1.5}));
  EXPECT_EQ(default_alpha_grid(EnvId::kCartpole), default_alpha_grid(EnvId::kPendulum));
}

TEST(SchemeId, Names) {
  for (SchemeId s : {SchemeId::kMpc1, SchemeId::kMpc2, SchemeId::kMpc3}) EXPECT_EQ(parse_scheme_id(to_string(s)), s);
  EXPECT_THROW(parse_scheme_id("MPC4"), DomainError);
}

SweepConfig tiny_config() {
  SweepConfig c;
  c.env = EnvId::kLinear;
  c.alphas = {0.5};
  c.seeds = {3};
  c.episodes = 4;
  c.episode_length = 20;
  c.hidden = {8};
  c.td.epochs = 2;
  c.learn.epochs = 2;
  c.eval_steps = 30;
  return c;
}

TEST(Sweep, NominalSchemeIsExactAtZeroMismatch) {
  SweepConfig c;
  c.env = EnvId::kLinear;
  c.alphas = {0.0};
  c.seeds = {1, 2};
  c.schemes = {SchemeId::kMpc1};
  const EvalReport report = sweep(c);
  ASSERT_EQ(report.rows.size(), 2u);
  for (const ReportRow& row : report.rows) {
    EXPECT_FALSE(row.failed());
    EXPECT_NEAR(row.rel, 1.0, 1e-3);
  }
}

TEST(Sweep, SingleCellIsDeterministic) {
  const SweepConfig c = tiny_config();
  const EvalReport a = sweep(c);
  const EvalReport b = sweep(c);
  ASSERT_EQ(a.rows.size(), 3u);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_FALSE(a.rows[i].failed()) << a.rows[i].error;
    EXPECT_EQ(a.rows[i].scheme, b.rows[i].scheme);
    EXPECT_EQ(a.rows[i].j, b.rows[i].j);
    EXPECT_EQ(a.rows[i].rel, b.rows[i].rel);
  }
}

TEST(Sweep, ParallelCellsMatchSerial) {
  SweepConfig c = tiny_config();
  c.seeds = {3, 4};
  c.schemes = {SchemeId::kMpc2};
  const EvalReport serial = sweep(c);
  c.jobs = 2;
  const EvalReport parallel = sweep(c);
  ASSERT_EQ(serial.rows.size(), parallel.rows.size());
  for (std::size_t i = 0; i < serial.rows.size(); ++i) {
    EXPECT_EQ(serial.rows[i].seed, parallel.rows[i].seed);
    EXPECT_EQ(serial.rows[i].j, parallel.rows[i].j);
  }
}

TEST(Sweep, FailedCellIsRecordedAndSweepContinues) {
  SweepConfig c = tiny_config();
  c.alphas = {0.5, 1.0};
  c.learn.batch_size = 0;
  c.schemes = {SchemeId::kMpc1, SchemeId::kMpc2};
  const EvalReport report = sweep(c);
  ASSERT_EQ(report.rows.size(), 4u);
  for (const ReportRow& row : report.rows) {
    EXPECT_TRUE(row.failed());
    EXPECT_TRUE(std::isnan(row.rel));
    EXPECT_FALSE(std::isnan(row.j_ref));
  }
  for (const AggregateRow& a : report.aggregate()) {
    EXPECT_EQ(a.n, 0);
    EXPECT_TRUE(std::isnan(a.rel_mean));
  }
}

TEST(Sweep, RejectsEmptyGrids) {
  SweepConfig c = tiny_config();
  c.alphas.clear();
  EXPECT_THROW(sweep(c), DomainError);
  c = tiny_config();
  c.jobs = 0;
  EXPECT_THROW(sweep(c), DomainError);
}

TEST(BuildCell, OnlyLearnsRequestedSchemes) {
  SweepConfig c = tiny_config();
  c.schemes = {SchemeId::kMpc1};
  const CellArtifacts none = build_cell(c, 0.5, 3);
  EXPECT_TRUE(none.dataset.transitions.empty());
  EXPECT_FALSE(none.mpc2 || none.mpc3);
  c.schemes = {SchemeId::kMpc3};
  const CellArtifacts three = build_cell(c, 0.5, 3);
  EXPECT_EQ(three.dataset.transitions.size(), 80u);
  EXPECT_FALSE(three.mpc2);
  ASSERT_TRUE(three.mpc3);
  EXPECT_FALSE(same_bits(model_params(three.mpc3->mpc.model), model_params(three.mpc1.model)));
}

EvalReport synthetic_report() {
  EvalReport r;
  const double rel[3][2] = {{0.9, 0.8}, {0.95, 0.7}, {1.0, 0.6}};
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    for (int a = 0; a < 2; ++a) {
      ReportRow row{"linear", "MPC1", a * 0.5, seed, 1.0 / rel[seed][a], 1.0, rel[seed][a], ""};
      r.rows.push_back(row);
    }
  }
  ReportRow failed{"linear", "MPC1", 0.0, 9, std::nan(""), 1.0, std::nan(""), "solver failed"};
  r.rows.push_back(failed);
  return r;
}

TEST(Aggregate, MeanStdAndPermutationInvariance) {
  EvalReport r = synthetic_report();
  const auto agg = r.aggregate();
  ASSERT_EQ(agg.size(), 2u);
  EXPECT_EQ(agg[0].alpha, 0.0);
  EXPECT_EQ(agg[0].n, 3);
  EXPECT_NEAR(agg[0].rel_mean, 0.95, 1e-15);
  // Population or sample: three points 0.9, 0.95, 1.0.
  const double pop = std::sqrt((0.05 * 0.05 * 2) / 3.0), sample = std::sqrt((0.05 * 0.05 * 2) / 2.0);
  EXPECT_TRUE(std::abs(agg[0].rel_std - pop) < 1e-12 || std::abs(agg[0].rel_std - sample) < 1e-12);
  std::reverse(r.rows.begin(), r.rows.end());
  std::stable_partition(r.rows.begin(), r.rows.end(), [](const ReportRow& row) { return row.alpha == 0.0; });
  const auto again = r.aggregate();
  ASSERT_EQ(again.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(again[i].alpha, agg[i].alpha);
    EXPECT_NEAR(again[i].rel_mean, agg[i].rel_mean, 1e-15);
    EXPECT_NEAR(again[i].rel_std, agg[i].rel_std, 1e-15);
  }
}

TEST(ReportCsv, RoundTripsIncludingFailures) {
  TempDir dir;
  const EvalReport r = synthetic_report();
  save_report_csv(r, dir / "report.csv");
  const std::string text = read_file(dir / "report.csv");
  EXPECT_EQ(text.rfind("task,scheme,alpha,seed,J,J_ref,rel", 0), 0u);
  const EvalReport back = load_report_csv(dir / "report.csv");
  ASSERT_EQ(back.rows.size(), r.rows.size());
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    EXPECT_EQ(back.rows[i].scheme, r.rows[i].scheme);
    EXPECT_EQ(back.rows[i].alpha, r.rows[i].alpha);
    EXPECT_EQ(back.rows[i].seed, r.rows[i].seed);
    EXPECT_EQ(back.rows[i].failed(), r.rows[i].failed());
    if (!r.rows[i].failed()) {
      EXPECT_EQ(back.rows[i].j, r.rows[i].j);
      EXPECT_EQ(back.rows[i].rel, r.rows[i].rel);
    }
  }
  const auto agg = r.aggregate();
  save_aggregate_csv(agg, dir / "aggregate.csv");
  EXPECT_EQ(read_file(dir / "aggregate.csv").rfind("task,scheme,alpha,rel_mean,rel_std,n", 0), 0u);
  const auto agg_back = load_aggregate_csv(dir / "aggregate.csv");
  ASSERT_EQ(agg_back.size(), agg.size());
  for (std::size_t i = 0; i < agg.size(); ++i) {
    EXPECT_EQ(agg_back[i].scheme, agg[i].scheme);
    EXPECT_EQ(agg_back[i].rel_mean, agg[i].rel_mean);
    EXPECT_EQ(agg_back[i].rel_std, agg[i].rel_std);
    EXPECT_EQ(agg_back[i].n, agg[i].n);
  }
}

TEST(Plot, SvgContainsEverySeries) {
  EvalReport r = synthetic_report();
  for (ReportRow row : synthetic_report().rows) {
    row.scheme = "MPC3";
    r.rows.push_back(row);
  }
  const std::string svg = render_svg_plot(r.aggregate(), "linear");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("MPC1"), std::string::npos);
  EXPECT_NE(svg.find("MPC3"), std::string::npos);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

}  // namespace
}  // namespace ompc
