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

#include "offline_mpc/eval_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <thread>

namespace ompc {

RolloutError::RolloutError(const std::string& message, int step)
    : Error("step " + std::to_string(step) + ": " + message), step_(step) {}

Rollout rollout(const Plant& plant, const Controller& controller, const Vec& s0, int steps, double gamma) {
  if (steps < 0) throw DomainError("rollout: negative step count");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("rollout: gamma must lie in [0, 1)");
  Rollout out;
  out.ret.gamma = gamma;
  out.ret.horizon = steps;
  out.states.push_back(s0);
  Vec s = s0;
  for (int k = 0; k < steps; ++k) {
    Vec a;
    try {
      a = controller(s);
    } catch (const std::exception& e) {
      throw RolloutError(std::string("controller failed: ") + e.what(), k);
    }
    if (a.size() != action_dim(plant) || !a.allFinite()) throw RolloutError("controller returned an invalid action", k);
    a = clamp_action(plant, a);
    out.costs.push_back(stage_cost(plant, s, a));
    s = step(plant, s, a);
    out.actions.push_back(a);
    out.states.push_back(s);
  }
  out.ret.value = discounted_return(out.costs, gamma);
  return out;
}

double relative_performance(double j, double j_ref) {
  if (!(j > 0.0) || !(j_ref > 0.0)) throw DomainError("relative performance needs positive returns");
  return j_ref / j;
}

std::vector<Vec> evaluation_initial_states(EnvId env) {
  std::vector<Vec> starts;
  switch (env) {
    case EnvId::kLinear:
      for (double scale : {1.0, 0.5})
        for (double x : {-1.0, 1.0})
          for (double y : {-1.0, 1.0}) starts.push_back((Vec(4) << scale * x, scale * y, 0.0, 0.0).finished());
      break;
    case EnvId::kPendulum:
      for (double phi : {std::numbers::pi, 2.5, -2.5, 1.5, -1.5}) starts.push_back((Vec(2) << phi, 0.0).finished());
      break;
    case EnvId::kCartpole:
      for (double x : {0.0, 0.5, -0.5}) starts.push_back((Vec(4) << x, 0.0, std::numbers::pi, 0.0).finished());
      break;
  }
  return starts;
}

double mean_return(const Plant& plant, const std::function<Controller()>& factory, const std::vector<Vec>& starts,
                   int steps, double gamma) {
  if (starts.empty()) throw DomainError("mean_return: no start states");
  double total = 0.0;
  for (const Vec& s0 : starts) total += rollout(plant, factory(), s0, steps, gamma).ret.value;
  return total / static_cast<double>(starts.size());
}

Controller mpc_controller(const ParameterizedMpc& mpc) {
  auto controller = std::make_shared<MpcController>(mpc);
  return [controller](const Vec& s) { return (*controller)(s); };
}

Controller lqr_controller(const DiscountedLqr& lqr) {
  return [lqr](const Vec& s) { return optimal_policy(lqr, s); };
}

DiscountedLqr true_plant_lqr(const LinearPlant& plant) {
  const Mat q = Vec((Vec(4) << 9.0, 9.0, 1.0, 1.0).finished()).asDiagonal();
  const Mat r = 0.1 * Mat::Identity(2, 2);
  return solve_riccati(plant.a, plant.b, q, r, task_gamma(EnvId::kLinear));
}

std::string_view to_string(SchemeId scheme) {
  switch (scheme) {
    case SchemeId::kMpc1:
      return "MPC1";
    case SchemeId::kMpc2:
      return "MPC2";
    case SchemeId::kMpc3:
      return "MPC3";
  }
  return "MPC1";
}

SchemeId parse_scheme_id(std::string_view name) {
  if (name == "MPC1" || name == "mpc1") return SchemeId::kMpc1;
  if (name == "MPC2" || name == "mpc2") return SchemeId::kMpc2;
  if (name == "MPC3" || name == "mpc3") return SchemeId::kMpc3;
  throw DomainError("unknown scheme '" + std::string(name) + "'");
}

std::vector<double> default_alpha_grid(EnvId env) {
  if (env == EnvId::kLinear) return {0.0, 0.25, 0.5, 1.0, 1.5, 2.0};
  return {0.0, 0.25, 0.5, 0.75, 1.0, 1.5};
}

std::vector<AggregateRow> EvalReport::aggregate() const {
  std::vector<AggregateRow> out;
  std::vector<std::vector<double>> values;
  for (const ReportRow& row : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const AggregateRow& a) {
      return a.task == row.task && a.scheme == row.scheme && a.alpha == row.alpha;
    });
    if (it == out.end()) {
      out.push_back({row.task, row.scheme, row.alpha, 0.0, 0.0, 0});
      values.emplace_back();
      it = out.end() - 1;
    }
    if (!row.failed() && std::isfinite(row.rel)) values[static_cast<std::size_t>(it - out.begin())].push_back(row.rel);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    // Sorted so the reduction does not depend on seed order.
    std::vector<double>& v = values[i];
    std::sort(v.begin(), v.end());
    out[i].n = static_cast<int>(v.size());
    if (v.empty()) {
      out[i].rel_mean = std::numeric_limits<double>::quiet_NaN();
      out[i].rel_std = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / static_cast<double>(v.size());
    double sq = 0.0;
    for (double x : v) sq += (x - mean) * (x - mean);
    out[i].rel_mean = mean;
    out[i].rel_std = std::sqrt(sq / static_cast<double>(v.size()));
  }
  return out;
}

namespace {

std::vector<Vec> starts_of(const SweepConfig& config) {
  return config.initial_states.empty() ? evaluation_initial_states(config.env) : config.initial_states;
}

}  // namespace

Plant cell_plant(EnvId env, double alpha) {
  // Only the linear task's true plant depends on alpha.
  return make_plant(env, env == EnvId::kLinear ? alpha : 0.0);
}

double scheme_return(const SweepConfig& config, const Plant& plant, const ParameterizedMpc& mpc) {
  return mean_return(plant, [&] { return mpc_controller(mpc); }, starts_of(config), config.eval_steps,
                     task_gamma(config.env));
}

namespace {

bool wants(const SweepConfig& config, SchemeId id) {
  return std::find(config.schemes.begin(), config.schemes.end(), id) != config.schemes.end();
}

}  // namespace

CellArtifacts build_cell(const SweepConfig& config, double alpha, std::uint64_t seed) {
  const EnvId env = config.env;
  const Plant plant = cell_plant(env, alpha);
  const ModelMismatch mismatch = make_mismatch(env, alpha, seed);
  const ParameterizedMpc mpc1 = make_nominal_mpc(env, nominal_model(plant, mismatch));
  const bool learning = wants(config, SchemeId::kMpc2) || wants(config, SchemeId::kMpc3);
  CellArtifacts cell{plant, mpc1, Dataset{}, MlpValueFunction{}, std::nullopt, std::nullopt};
  if (!learning) return cell;
  cell.dataset = generate(plant, config.behavior, config.episodes, config.episode_length, seed, mpc1);
  TdFitConfig td = config.td;
  td.seed = seed;
  const MlpValueFunction init = make_value_network(cell.dataset, default_feature_map(env), config.hidden, seed);
  cell.value = fit_td(init, cell.dataset, td).network;
  LearnConfig learn = config.learn;
  learn.seed = seed;
  learn.theta_init = mpc1;
  if (wants(config, SchemeId::kMpc2)) {
    learn.learn_model = false;
    cell.mpc2 = ompc::learn(cell.value, cell.dataset, learn);
  }
  if (wants(config, SchemeId::kMpc3)) {
    learn.learn_model = true;
    cell.mpc3 = ompc::learn(cell.value, cell.dataset, learn);
  }
  return cell;
}

double reference_return(const SweepConfig& config, const Plant& plant) {
  const double gamma = task_gamma(config.env);
  if (const auto* lin = std::get_if<LinearPlant>(&plant)) {
    const DiscountedLqr lqr = true_plant_lqr(*lin);
    return mean_return(plant, [&] { return lqr_controller(lqr); }, starts_of(config), config.eval_steps, gamma);
  }
  return scheme_return(config, plant, make_nominal_mpc(config.env, plant));
}

EvalReport sweep(const SweepConfig& config) {
  if (config.alphas.empty() || config.seeds.empty() || config.schemes.empty()) {
    throw DomainError("sweep: alpha grid, seeds and schemes must be non-empty");
  }
  if (config.jobs < 1) throw DomainError("sweep: jobs must be positive");
  config.behavior.validate();
  const std::string task(to_string(config.env));

  // Reference returns per alpha (the nonlinear reference does not vary).
  std::map<double, double> reference;
  for (double alpha : config.alphas) {
    if (config.env != EnvId::kLinear && !reference.empty()) {
      reference[alpha] = reference.begin()->second;
      continue;
    }
    reference[alpha] = reference_return(config, cell_plant(config.env, alpha));
  }

  struct Cell {
    double alpha;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (double alpha : config.alphas)
    for (std::uint64_t seed : config.seeds) cells.push_back({alpha, seed});
  std::vector<std::vector<ReportRow>> results(cells.size());

  auto run_cell = [&](std::size_t index) {
    const Cell& c = cells[index];
    const double j_ref = reference.at(c.alpha);
    auto make_row = [&](SchemeId id) {
      ReportRow row;
      row.task = task;
      row.scheme = std::string(to_string(id));
      row.alpha = c.alpha;
      row.seed = c.seed;
      row.j_ref = j_ref;
      return row;
    };
    std::vector<ReportRow>& rows = results[index];
    try {
      const CellArtifacts art = build_cell(config, c.alpha, c.seed);
      for (SchemeId id : config.schemes) {
        ReportRow row = make_row(id);
        try {
          const ParameterizedMpc& mpc = id == SchemeId::kMpc1   ? art.mpc1
                                        : id == SchemeId::kMpc2 ? art.mpc2->mpc
                                                                : art.mpc3->mpc;
          row.j = scheme_return(config, art.plant, mpc);
          row.rel = relative_performance(row.j, row.j_ref);
        } catch (const std::exception& e) {
          row.error = e.what();
          row.j = row.rel = std::numeric_limits<double>::quiet_NaN();
        }
        rows.push_back(std::move(row));
      }
    } catch (const std::exception& e) {
      for (SchemeId id : config.schemes) {
        ReportRow row = make_row(id);
        row.error = e.what();
        row.j = row.rel = std::numeric_limits<double>::quiet_NaN();
        rows.push_back(std::move(row));
      }
    }
  };

  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(config.jobs), cells.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  EvalReport report;
  for (auto& rows : results)
    for (auto& row : rows) report.rows.push_back(std::move(row));
  return report;
}

void save_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::string out = "task,scheme,alpha,seed,J,J_ref,rel\n";
  for (const ReportRow& r : report.rows) {
    out += r.task + ',' + r.scheme + ',' + format_double(r.alpha) + ',' + std::to_string(r.seed) + ',' +
           format_double(r.j) + ',' + format_double(r.j_ref) + ',' + format_double(r.rel) + '\n';
  }
  write_file(path, out);
}

EvalReport load_report_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "task,scheme,alpha,seed,J,J_ref,rel") {
    throw SchemaError("report: unexpected header");
  }
  EvalReport report;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != 7) throw SchemaError("report: wrong field count on line " + std::to_string(line_no));
    try {
      ReportRow row{f[0], f[1], parse_double(f[2]), std::stoull(f[3]), parse_double(f[4]), parse_double(f[5]),
                    parse_double(f[6]), ""};
      if (!std::isfinite(row.rel)) row.error = "failed";
      report.rows.push_back(std::move(row));
    } catch (const std::exception& e) {
      throw ParseError(std::string("report: ") + e.what(), line_no);
    }
  }
  return report;
}

void save_aggregate_csv(const std::vector<AggregateRow>& rows, const std::filesystem::path& path) {
  std::string out = "task,scheme,alpha,rel_mean,rel_std,n\n";
  for (const AggregateRow& r : rows) {
    out += r.task + ',' + r.scheme + ',' + format_double(r.alpha) + ',' + format_double(r.rel_mean) + ',' +
           format_double(r.rel_std) + ',' + std::to_string(r.n) + '\n';
  }
  write_file(path, out);
}

std::vector<AggregateRow> load_aggregate_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "task,scheme,alpha,rel_mean,rel_std,n") {
    throw SchemaError("aggregate: unexpected header");
  }
  std::vector<AggregateRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != 6) throw SchemaError("aggregate: wrong field count on line " + std::to_string(line_no));
    try {
      rows.push_back({f[0], f[1], parse_double(f[2]), parse_double(f[3]), parse_double(f[4]), std::stoi(f[5])});
    } catch (const std::exception& e) {
      throw ParseError(std::string("aggregate: ") + e.what(), line_no);
    }
  }
  return rows;
}

std::string render_svg_plot(const std::vector<AggregateRow>& rows, std::string_view title) {
  constexpr double kWidth = 640, kHeight = 420, kLeft = 70, kRight = 130, kTop = 40, kBottom = 60;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  double a_min = std::numeric_limits<double>::infinity(), a_max = -a_min;
  double r_min = a_min, r_max = -a_min;
  std::vector<std::string> schemes;
  for (const auto& r : rows) {
    if (r.n == 0) continue;
    a_min = std::min(a_min, r.alpha);
    a_max = std::max(a_max, r.alpha);
    r_min = std::min(r_min, r.rel_mean - r.rel_std);
    r_max = std::max(r_max, r.rel_mean + r.rel_std);
    if (std::find(schemes.begin(), schemes.end(), r.scheme) == schemes.end()) schemes.push_back(r.scheme);
  }
  if (schemes.empty()) {
    a_min = 0.0;
    a_max = 1.0;
    r_min = 0.0;
    r_max = 1.0;
  }
  if (a_max <= a_min) a_max = a_min + 1.0;
  r_min = std::min(r_min, 0.0);
  r_max = std::max(r_max, 1.05);
  auto px = [&](double a) { return kLeft + (a - a_min) / (a_max - a_min) * plot_w; };
  auto py = [&](double r) { return kTop + (r_max - r) / (r_max - r_min) * plot_h; };
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

  std::ostringstream svg;
  svg.precision(6);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w << "\" height=\"" << plot_h
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double r = r_min + (r_max - r_min) * i / 5.0;
    const double a = a_min + (a_max - a_min) * i / 5.0;
    svg << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + plot_w << "\" y1=\"" << py(r) << "\" y2=\"" << py(r)
        << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << py(r) + 4 << "\" text-anchor=\"end\">" << r << "</text>\n";
    svg << "<text x=\"" << px(a) << "\" y=\"" << kTop + plot_h + 18 << "\" text-anchor=\"middle\">" << a
        << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 18 << "\" text-anchor=\"middle\">alpha</text>\n";
  svg << "<text x=\"18\" y=\"" << kTop + plot_h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << kTop + plot_h / 2 << ")\">relative performance</text>\n";
  for (std::size_t s = 0; s < schemes.size(); ++s) {
    std::vector<const AggregateRow*> pts;
    for (const auto& r : rows)
      if (r.scheme == schemes[s] && r.n > 0) pts.push_back(&r);
    std::sort(pts.begin(), pts.end(), [](const AggregateRow* a, const AggregateRow* b) { return a->alpha < b->alpha; });
    const char* color = colors[s % 5];
    std::ostringstream band, line;
    for (const auto* p : pts) band << px(p->alpha) << ',' << py(p->rel_mean + p->rel_std) << ' ';
    for (auto it = pts.rbegin(); it != pts.rend(); ++it)
      band << px((*it)->alpha) << ',' << py((*it)->rel_mean - (*it)->rel_std) << ' ';
    for (const auto* p : pts) line << px(p->alpha) << ',' << py(p->rel_mean) << ' ';
    svg << "<polygon points=\"" << band.str() << "\" fill=\"" << color << "\" fill-opacity=\"0.18\" stroke=\"none\"/>\n";
    svg << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    for (const auto* p : pts) {
      svg << "<circle cx=\"" << px(p->alpha) << "\" cy=\"" << py(p->rel_mean) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
    }
    const double ly = kTop + 10 + 20.0 * static_cast<double>(s);
    svg << "<line x1=\"" << kLeft + plot_w + 15 << "\" x2=\"" << kLeft + plot_w + 40 << "\" y1=\"" << ly
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << kLeft + plot_w + 46 << "\" y=\"" << ly + 4 << "\">" << schemes[s] << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace ompc
