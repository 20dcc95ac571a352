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

// offline-mpc: data generation, value fitting, MPC learning, evaluation,
// alpha sweeps and the modified-cost LQ check.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "offline_mpc/core.hpp"
#include "offline_mpc/datagen.hpp"
#include "offline_mpc/envs.hpp"
#include "offline_mpc/eval_harness.hpp"
#include "offline_mpc/mpc.hpp"
#include "offline_mpc/offline_learner.hpp"
#include "offline_mpc/value_net.hpp"

#ifndef OFFLINE_MPC_VERSION
#define OFFLINE_MPC_VERSION "0.0.0"
#endif

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Bad flags, config or input files: exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string g_stage = "startup";

// ----- config resolution: flag, then config file, then default ----- //

class Settings {
 public:
  Settings(const json& root, const char* block) : root_(root) {
    if (root.contains(block)) {
      if (!root.at(block).is_object()) throw UsageError(std::string("config block '") + block + "' is not an object");
      block_ = root.at(block);
    }
  }

  template <class T>
  T get(const CLI::Option* opt, const T& flag, const char* key, const T& fallback) {
    T out = fallback;
    if (opt->count() > 0) {
      out = flag;
    } else if (const json* j = find(key)) {
      try {
        out = j->get<T>();
      } catch (const json::exception& e) {
        throw UsageError(std::string("config key '") + key + "': " + e.what());
      }
    }
    resolved_[key] = out;
    return out;
  }

  const json& resolved() const { return resolved_; }

 private:
  // Stage block first, then the top level.
  const json* find(const char* key) const {
    if (block_.contains(key)) return &block_.at(key);
    if (root_.contains(key)) return &root_.at(key);
    return nullptr;
  }

  const json& root_;
  json block_ = json::object();
  json resolved_ = json::object();
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  if (!fs::exists(path)) throw UsageError("config file not found: " + path);
  try {
    json j = json::parse(ompc::read_file(path));
    if (!j.is_object()) throw UsageError("config file must hold a JSON object: " + path);
    return j;
  } catch (const json::parse_error& e) {
    throw UsageError("config file " + path + ": " + e.what());
  }
}

std::uint64_t fallback_seed() {
  const char* env = std::getenv("OFFLINE_MPC_SEED");
  if (env == nullptr || *env == '\0') return 0;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string("OFFLINE_MPC_SEED is not an unsigned integer: ") + env);
  }
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void write_provenance(const fs::path& output, const std::string& command, const json& resolved,
                      std::uint64_t seed) {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(resolved.dump())));
  const json sidecar{{"tool", "offline-mpc"}, {"version", OFFLINE_MPC_VERSION}, {"command", command},
                     {"config_hash", std::string("fnv1a64:") + hash}, {"seed", seed}, {"config", resolved}};
  ompc::write_file(fs::path(output.string() + ".provenance.json"), sidecar.dump(1) + "\n");
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing ") + what + " path");
  if (!fs::exists(path)) throw UsageError(std::string(what) + " not found: " + path);
}

void require_output(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing ") + what + " path");
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw UsageError(std::string(what) + " directory does not exist: " + parent.string());
  }
}

template <class F>
auto checked(F&& parse) {
  try {
    return parse();
  } catch (const ompc::DomainError& e) {
    throw UsageError(e.what());
  }
}

// ----- shared option groups ----- //

struct Common {
  std::string config;
  std::string env = "linear";
  double alpha = 0.0;
  std::uint64_t seed = 0;
  CLI::Option* config_opt = nullptr;
  CLI::Option* env_opt = nullptr;
  CLI::Option* alpha_opt = nullptr;
  CLI::Option* seed_opt = nullptr;

  void add(CLI::App* app, bool with_env, bool with_alpha) {
    config_opt = app->add_option("--config", config, "JSON config file; flags override its values");
    if (with_env) env_opt = app->add_option("--env", env, "Task: linear, pendulum or cartpole");
    if (with_alpha) alpha_opt = app->add_option("--alpha", alpha, "Model mismatch scale");
    seed_opt = app->add_option("--seed", seed, "Global seed (default: $OFFLINE_MPC_SEED, else 0)");
  }
};

std::uint64_t resolve_seed(Settings& s, const Common& c) { return s.get(c.seed_opt, c.seed, "seed", fallback_seed()); }

// ----- gen-data ----- //

struct GenDataArgs {
  Common common;
  int episodes = 100;
  int steps = 100;
  std::string behavior = "mixture";
  double noise = 0.5;
  double epsilon = 1.0;
  double epsilon_final = 0.2;
  bool no_anneal = false;
  std::string out;
  CLI::Option *episodes_opt, *steps_opt, *behavior_opt, *noise_opt, *epsilon_opt, *epsilon_final_opt, *anneal_opt,
      *out_opt;
};

void setup_gen_data(CLI::App& app, GenDataArgs& a) {
  auto* sub = app.add_subcommand("gen-data", "Roll out the behavior policy and write a dataset");
  a.common.add(sub, true, true);
  a.episodes_opt = sub->add_option("--episodes", a.episodes, "Number of episodes");
  a.steps_opt = sub->add_option("--steps", a.steps, "Steps per episode");
  a.behavior_opt = sub->add_option("--behavior", a.behavior, "uniform_random, noisy_mpc or mixture");
  a.noise_opt = sub->add_option("--noise-scale", a.noise, "Gaussian noise on MPC actions");
  a.epsilon_opt = sub->add_option("--epsilon", a.epsilon, "Initial random-action probability");
  a.epsilon_final_opt = sub->add_option("--epsilon-final", a.epsilon_final, "Final random-action probability");
  a.anneal_opt = sub->add_flag("--no-anneal", a.no_anneal, "Keep epsilon fixed");
  a.out_opt = sub->add_option("--out", a.out, "Dataset CSV (metadata JSON is written next to it)");
}

int run_gen_data(const GenDataArgs& a) {
  g_stage = "gen-data";
  const json root = load_config(a.common.config);
  Settings s(root, "gen_data");
  const std::string env_name = s.get(a.common.env_opt, a.common.env, "env", std::string("linear"));
  const ompc::EnvId env = checked([&] { return ompc::parse_env_id(env_name); });
  const double alpha = s.get(a.common.alpha_opt, a.common.alpha, "alpha", 0.0);
  const std::uint64_t seed = resolve_seed(s, a.common);
  const int episodes = s.get(a.episodes_opt, a.episodes, "episodes", 100);
  const int steps = s.get(a.steps_opt, a.steps, "steps", ompc::task_episode_length(env));
  ompc::BehaviorPolicy policy;
  policy.kind = checked([&] {
    return ompc::parse_behavior_kind(s.get(a.behavior_opt, a.behavior, "behavior", std::string("mixture")));
  });
  policy.noise_scale = s.get(a.noise_opt, a.noise, "noise_scale", policy.noise_scale);
  policy.epsilon = s.get(a.epsilon_opt, a.epsilon, "epsilon", policy.epsilon);
  policy.epsilon_final = s.get(a.epsilon_final_opt, a.epsilon_final, "epsilon_final", policy.epsilon_final);
  policy.anneal = !s.get(a.anneal_opt, a.no_anneal, "no_anneal", false);
  const std::string out = s.get(a.out_opt, a.out, "out", std::string());
  if (episodes < 1 || steps < 1) throw UsageError("episodes and steps must be positive");
  if (alpha < 0.0) throw UsageError("alpha must be nonnegative");
  checked([&] {
    policy.validate();
    return 0;
  });
  require_output(out, "dataset");

  const ompc::Plant plant = ompc::cell_plant(env, alpha);
  const ompc::ParameterizedMpc mpc1 =
      ompc::make_nominal_mpc(env, ompc::nominal_model(plant, ompc::make_mismatch(env, alpha, seed)));
  const ompc::Dataset data = ompc::generate(plant, policy, episodes, steps, seed, mpc1);
  ompc::save_dataset(data, out);
  write_provenance(out, "gen-data", s.resolved(), seed);
  std::cout << "wrote " << data.transitions.size() << " transitions to " << out << "\n";
  return 0;
}

// ----- fit-value ----- //

struct FitValueArgs {
  Common common;
  std::string data;
  std::string out;
  std::string trace;
  std::vector<int> hidden{64, 64};
  double lr = 1e-3;
  int batch = 256;
  int epochs = 200;
  int refresh = 100;
  bool raw_angles = false;
  CLI::Option *data_opt, *out_opt, *trace_opt, *hidden_opt, *lr_opt, *batch_opt, *epochs_opt, *refresh_opt,
      *raw_opt;
};

void setup_fit_value(CLI::App& app, FitValueArgs& a) {
  auto* sub = app.add_subcommand("fit-value", "Fit the value network to a dataset by TD(0)");
  a.common.add(sub, false, false);
  a.data_opt = sub->add_option("--data", a.data, "Dataset CSV");
  a.out_opt = sub->add_option("--out", a.out, "Network JSON");
  a.trace_opt = sub->add_option("--trace", a.trace, "Optional per-epoch loss CSV");
  a.hidden_opt = sub->add_option("--hidden", a.hidden, "Hidden layer widths");
  a.lr_opt = sub->add_option("--learning-rate", a.lr, "Adam step size");
  a.batch_opt = sub->add_option("--batch-size", a.batch, "Minibatch size");
  a.epochs_opt = sub->add_option("--epochs", a.epochs, "Passes over the dataset");
  a.refresh_opt = sub->add_option("--target-refresh", a.refresh, "Optimizer steps between target copies");
  a.raw_opt = sub->add_flag("--raw-angles", a.raw_angles, "Feed raw angles instead of cos/sin features");
}

int run_fit_value(const FitValueArgs& a) {
  g_stage = "fit-value";
  const json root = load_config(a.common.config);
  Settings s(root, "fit_value");
  const std::uint64_t seed = resolve_seed(s, a.common);
  const std::string data_path = s.get(a.data_opt, a.data, "data", std::string());
  const std::string out = s.get(a.out_opt, a.out, "out", std::string());
  const std::string trace = s.get(a.trace_opt, a.trace, "trace", std::string());
  const std::vector<int> hidden = s.get(a.hidden_opt, a.hidden, "hidden", std::vector<int>{64, 64});
  ompc::TdFitConfig td;
  td.learning_rate = s.get(a.lr_opt, a.lr, "learning_rate", td.learning_rate);
  td.batch_size = s.get(a.batch_opt, a.batch, "batch_size", td.batch_size);
  td.epochs = s.get(a.epochs_opt, a.epochs, "epochs", td.epochs);
  td.target_refresh_interval = s.get(a.refresh_opt, a.refresh, "target_refresh_interval", td.target_refresh_interval);
  td.seed = seed;
  const bool raw = s.get(a.raw_opt, a.raw_angles, "raw_angles", false);
  require_file(data_path, "dataset");
  require_output(out, "network");
  if (!trace.empty()) require_output(trace, "trace");
  if (td.learning_rate < 0.0 || td.batch_size < 1 || td.epochs < 0 || td.target_refresh_interval < 1) {
    throw UsageError("fit-value: learning_rate >= 0, batch_size >= 1, epochs >= 0, target_refresh >= 1 required");
  }
  for (int w : hidden)
    if (w < 1) throw UsageError("fit-value: hidden widths must be positive");

  g_stage = "fit-value/load";
  ompc::Dataset data;
  try {
    data = ompc::load_dataset(data_path);
  } catch (const ompc::Error& e) {
    throw UsageError(e.what());
  }
  if (data.transitions.empty()) throw UsageError("fit-value: dataset is empty");
  const ompc::EnvId env = checked([&] { return ompc::parse_env_id(data.meta.env_id); });
  g_stage = "fit-value/td";
  const ompc::MlpValueFunction init =
      ompc::make_value_network(data, ompc::default_feature_map(env, !raw), hidden, seed);
  const ompc::TdFitResult fit = ompc::fit_td(init, data, td);
  ompc::save_network(fit.network, out);
  write_provenance(out, "fit-value", s.resolved(), seed);
  if (!trace.empty()) {
    std::string csv = "epoch,td_loss\n";
    for (std::size_t i = 0; i < fit.epoch_loss.size(); ++i) {
      csv += std::to_string(i + 1) + ',' + ompc::format_double(fit.epoch_loss[i]) + '\n';
    }
    ompc::write_file(trace, csv);
  }
  std::cout << "final TD loss " << (fit.epoch_loss.empty() ? 0.0 : fit.epoch_loss.back()) << ", wrote " << out
            << "\n";
  return 0;
}

// ----- learn-mpc ----- //

struct LearnMpcArgs {
  Common common;
  std::string data;
  std::string value;
  std::string init;
  std::string out;
  std::string trace;
  bool learn_model = false;
  double l2 = 0.0;
  double lr = 1e-3;
  double final_lr = 0.0;
  int batch = 256;
  int epochs = 100;
  CLI::Option *data_opt, *value_opt, *init_opt, *out_opt, *trace_opt, *model_opt, *l2_opt, *lr_opt, *final_lr_opt,
      *batch_opt, *epochs_opt;
};

void setup_learn_mpc(CLI::App& app, LearnMpcArgs& a) {
  auto* sub = app.add_subcommand("learn-mpc", "Learn MPC parameters from a dataset and a value network");
  a.common.add(sub, false, true);
  a.data_opt = sub->add_option("--data", a.data, "Dataset CSV");
  a.value_opt = sub->add_option("--value", a.value, "Value network JSON");
  a.init_opt = sub->add_option("--init", a.init, "Initial scheme JSON (default: nominal scheme at alpha, seed)");
  a.out_opt = sub->add_option("--out", a.out, "Learned scheme JSON");
  a.trace_opt = sub->add_option("--trace", a.trace, "Optional loss trace CSV");
  a.model_opt = sub->add_flag("--learn-model", a.learn_model, "Also learn the model parameters");
  a.l2_opt = sub->add_option("--l2-weight", a.l2, "Regularization weight (default 1e-3 / #params)");
  a.lr_opt = sub->add_option("--learning-rate", a.lr, "Adam step size");
  a.final_lr_opt = sub->add_option("--final-learning-rate", a.final_lr, "Decay the step size toward this value");
  a.batch_opt = sub->add_option("--batch-size", a.batch, "Minibatch size");
  a.epochs_opt = sub->add_option("--epochs", a.epochs, "Passes over the dataset");
}

ompc::Dataset load_dataset_or_usage(const std::string& path) {
  try {
    return ompc::load_dataset(path);
  } catch (const ompc::Error& e) {
    throw UsageError(e.what());
  }
}

int run_learn_mpc(const LearnMpcArgs& a) {
  g_stage = "learn-mpc";
  const json root = load_config(a.common.config);
  Settings s(root, "learn_mpc");
  const std::uint64_t seed = resolve_seed(s, a.common);
  const double alpha = s.get(a.common.alpha_opt, a.common.alpha, "alpha", 0.0);
  const std::string data_path = s.get(a.data_opt, a.data, "data", std::string());
  const std::string value_path = s.get(a.value_opt, a.value, "value", std::string());
  const std::string init_path = s.get(a.init_opt, a.init, "init", std::string());
  const std::string out = s.get(a.out_opt, a.out, "out", std::string());
  const std::string trace = s.get(a.trace_opt, a.trace, "trace", std::string());
  ompc::LearnConfig cfg;
  cfg.learn_model = s.get(a.model_opt, a.learn_model, "learn_model", false);
  if (a.l2_opt->count() > 0 || root.value("learn_mpc", json::object()).contains("l2_weight")) {
    cfg.l2_weight = s.get(a.l2_opt, a.l2, "l2_weight", 0.0);
  }
  cfg.learning_rate = s.get(a.lr_opt, a.lr, "learning_rate", cfg.learning_rate);
  if (a.final_lr_opt->count() > 0 || root.value("learn_mpc", json::object()).contains("final_learning_rate")) {
    cfg.final_learning_rate = s.get(a.final_lr_opt, a.final_lr, "final_learning_rate", 0.0);
  }
  cfg.batch_size = s.get(a.batch_opt, a.batch, "batch_size", cfg.batch_size);
  cfg.epochs = s.get(a.epochs_opt, a.epochs, "epochs", cfg.epochs);
  cfg.seed = seed;
  require_file(data_path, "dataset");
  require_file(value_path, "value network");
  if (!init_path.empty()) require_file(init_path, "initial scheme");
  require_output(out, "scheme");
  if (!trace.empty()) require_output(trace, "trace");
  if (alpha < 0.0) throw UsageError("alpha must be nonnegative");
  if ((cfg.l2_weight && *cfg.l2_weight < 0.0) || cfg.learning_rate < 0.0 || cfg.batch_size < 1 || cfg.epochs < 0 ||
      (cfg.final_learning_rate && *cfg.final_learning_rate <= 0.0)) {
    throw UsageError("learn-mpc: invalid optimizer settings");
  }

  g_stage = "learn-mpc/load";
  const ompc::Dataset data = load_dataset_or_usage(data_path);
  if (data.transitions.empty()) throw UsageError("learn-mpc: dataset is empty");
  const ompc::EnvId env = checked([&] { return ompc::parse_env_id(data.meta.env_id); });
  ompc::MlpValueFunction vphi;
  try {
    vphi = ompc::load_network(value_path);
    if (init_path.empty()) {
      const ompc::Plant plant = ompc::cell_plant(env, alpha);
      cfg.theta_init =
          ompc::make_nominal_mpc(env, ompc::nominal_model(plant, ompc::make_mismatch(env, alpha, seed)));
    } else {
      cfg.theta_init = ompc::load_mpc(init_path);
    }
  } catch (const ompc::Error& e) {
    throw UsageError(e.what());
  }
  g_stage = "learn-mpc/learn";
  const ompc::LearnResult result = ompc::learn(vphi, data, cfg);
  ompc::save_mpc(result.mpc, out);
  write_provenance(out, "learn-mpc", s.resolved(), seed);
  if (!trace.empty()) ompc::save_loss_trace(result.trace, trace);
  std::cout << "loss " << result.trace.front().loss << " -> " << result.trace.back().loss << ", wrote " << out
            << "\n";
  return 0;
}

// ----- eval ----- //

struct EvalArgs {
  Common common;
  std::vector<std::string> schemes;
  int steps = 100;
  std::string out;
  std::string aggregate;
  CLI::Option *schemes_opt, *steps_opt, *out_opt, *aggregate_opt;
};

void setup_eval(CLI::App& app, EvalArgs& a) {
  auto* sub = app.add_subcommand("eval", "Closed-loop evaluation of MPC schemes on the true plant");
  a.common.add(sub, true, true);
  a.schemes_opt = sub->add_option("--scheme", a.schemes, "NAME=PATH of a scheme JSON (repeatable); default MPC1");
  a.steps_opt = sub->add_option("--steps", a.steps, "Rollout length");
  a.out_opt = sub->add_option("--out", a.out, "Report CSV");
  a.aggregate_opt = sub->add_option("--aggregate", a.aggregate, "Optional aggregate CSV");
}

int run_eval(const EvalArgs& a) {
  g_stage = "eval";
  const json root = load_config(a.common.config);
  Settings s(root, "eval");
  const std::string env_name = s.get(a.common.env_opt, a.common.env, "env", std::string("linear"));
  const ompc::EnvId env = checked([&] { return ompc::parse_env_id(env_name); });
  const double alpha = s.get(a.common.alpha_opt, a.common.alpha, "alpha", 0.0);
  const std::uint64_t seed = resolve_seed(s, a.common);
  const std::vector<std::string> specs = s.get(a.schemes_opt, a.schemes, "schemes", std::vector<std::string>{});
  const int steps = s.get(a.steps_opt, a.steps, "steps", ompc::task_episode_length(env));
  const std::string out = s.get(a.out_opt, a.out, "out", std::string());
  const std::string aggregate = s.get(a.aggregate_opt, a.aggregate, "aggregate", std::string());
  if (alpha < 0.0) throw UsageError("alpha must be nonnegative");
  if (steps < 1) throw UsageError("steps must be positive");
  require_output(out, "report");
  if (!aggregate.empty()) require_output(aggregate, "aggregate");

  const ompc::Plant plant = ompc::cell_plant(env, alpha);
  std::vector<std::pair<std::string, ompc::ParameterizedMpc>> schemes;
  if (specs.empty()) {
    schemes.emplace_back("MPC1", ompc::make_nominal_mpc(
                                     env, ompc::nominal_model(plant, ompc::make_mismatch(env, alpha, seed))));
  }
  for (const std::string& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
      throw UsageError("--scheme expects NAME=PATH, got '" + spec + "'");
    }
    const std::string path = spec.substr(eq + 1);
    require_file(path, "scheme");
    try {
      ompc::ParameterizedMpc mpc = ompc::load_mpc(path);
      if (ompc::env_of(mpc.model) != env) throw UsageError("scheme " + path + " belongs to another task");
      schemes.emplace_back(spec.substr(0, eq), std::move(mpc));
    } catch (const ompc::Error& e) {
      throw UsageError(e.what());
    }
  }

  ompc::SweepConfig config;
  config.env = env;
  config.eval_steps = steps;
  g_stage = "eval/reference";
  const double j_ref = ompc::reference_return(config, plant);
  ompc::EvalReport report;
  for (const auto& [name, mpc] : schemes) {
    g_stage = "eval/" + name;
    ompc::ReportRow row{std::string(ompc::to_string(env)), name, alpha, seed, 0.0, j_ref, 0.0, ""};
    row.j = ompc::scheme_return(config, plant, mpc);
    row.rel = ompc::relative_performance(row.j, row.j_ref);
    std::cout << name << " J=" << row.j << " J_ref=" << row.j_ref << " rel=" << row.rel << "\n";
    report.rows.push_back(std::move(row));
  }
  ompc::save_report_csv(report, out);
  write_provenance(out, "eval", s.resolved(), seed);
  if (!aggregate.empty()) ompc::save_aggregate_csv(report.aggregate(), aggregate);
  return 0;
}

// ----- sweep ----- //

struct SweepArgs {
  Common common;
  std::vector<double> alphas;
  std::vector<std::uint64_t> seeds;
  int num_seeds = 10;
  std::vector<std::string> schemes{"MPC1", "MPC2", "MPC3"};
  int episodes = 100;
  int steps = 100;
  std::vector<int> hidden{64, 64};
  int td_epochs = 200;
  int learn_epochs = 100;
  int jobs = 1;
  std::string out_dir;
  CLI::Option *alphas_opt, *seeds_opt, *num_seeds_opt, *schemes_opt, *episodes_opt, *steps_opt, *hidden_opt,
      *td_epochs_opt, *learn_epochs_opt, *jobs_opt, *out_dir_opt;
};

void setup_sweep(CLI::App& app, SweepArgs& a) {
  auto* sub = app.add_subcommand("sweep", "Full alpha sweep: data, value fit, learning and evaluation per cell");
  a.common.add(sub, true, false);
  a.alphas_opt = sub->add_option("--alphas", a.alphas, "Mismatch grid (default: the task grid)");
  a.seeds_opt = sub->add_option("--seeds", a.seeds, "Explicit seed list");
  a.num_seeds_opt = sub->add_option("--num-seeds", a.num_seeds, "Seeds seed, seed+1, ... when --seeds is absent");
  a.schemes_opt = sub->add_option("--schemes", a.schemes, "Subset of MPC1 MPC2 MPC3");
  a.episodes_opt = sub->add_option("--episodes", a.episodes, "Episodes per dataset");
  a.steps_opt = sub->add_option("--steps", a.steps, "Steps per episode and per evaluation rollout");
  a.hidden_opt = sub->add_option("--hidden", a.hidden, "Value network hidden widths");
  a.td_epochs_opt = sub->add_option("--td-epochs", a.td_epochs, "Value fit epochs");
  a.learn_epochs_opt = sub->add_option("--learn-epochs", a.learn_epochs, "MPC learning epochs");
  a.jobs_opt = sub->add_option("--jobs", a.jobs, "Concurrent cells");
  a.out_dir_opt = sub->add_option("--out-dir", a.out_dir, "Directory for report.csv, aggregate.csv, plot.svg");
}

int run_sweep(const SweepArgs& a) {
  g_stage = "sweep";
  const json root = load_config(a.common.config);
  Settings s(root, "sweep");
  const std::string env_name = s.get(a.common.env_opt, a.common.env, "env", std::string("linear"));
  ompc::SweepConfig config;
  config.env = checked([&] { return ompc::parse_env_id(env_name); });
  const std::uint64_t seed = resolve_seed(s, a.common);
  config.alphas = s.get(a.alphas_opt, a.alphas, "alphas", ompc::default_alpha_grid(config.env));
  const int num_seeds = s.get(a.num_seeds_opt, a.num_seeds, "num_seeds", 10);
  std::vector<std::uint64_t> generated;
  for (int i = 0; i < num_seeds; ++i) generated.push_back(seed + static_cast<std::uint64_t>(i));
  config.seeds = s.get(a.seeds_opt, a.seeds, "seeds", generated);
  const auto names = s.get(a.schemes_opt, a.schemes, "schemes", std::vector<std::string>{"MPC1", "MPC2", "MPC3"});
  config.schemes.clear();
  for (const std::string& n : names) config.schemes.push_back(checked([&] { return ompc::parse_scheme_id(n); }));
  config.episodes = s.get(a.episodes_opt, a.episodes, "episodes", 100);
  config.episode_length = s.get(a.steps_opt, a.steps, "steps", ompc::task_episode_length(config.env));
  config.eval_steps = config.episode_length;
  config.hidden = s.get(a.hidden_opt, a.hidden, "hidden", std::vector<int>{64, 64});
  config.td.epochs = s.get(a.td_epochs_opt, a.td_epochs, "td_epochs", config.td.epochs);
  config.learn.epochs = s.get(a.learn_epochs_opt, a.learn_epochs, "learn_epochs", config.learn.epochs);
  config.jobs = s.get(a.jobs_opt, a.jobs, "jobs", 1);
  const std::string out_dir = s.get(a.out_dir_opt, a.out_dir, "out_dir", std::string());
  if (out_dir.empty()) throw UsageError("missing --out-dir");
  if (config.alphas.empty() || config.seeds.empty() || config.schemes.empty()) {
    throw UsageError("sweep: alphas, seeds and schemes must be non-empty");
  }
  for (double alpha : config.alphas)
    if (alpha < 0.0) throw UsageError("sweep: alphas must be nonnegative");
  if (config.episodes < 1 || config.episode_length < 1 || config.jobs < 1 || config.td.epochs < 0 ||
      config.learn.epochs < 0) {
    throw UsageError("sweep: episodes, steps and jobs must be positive, epochs nonnegative");
  }

  fs::create_directories(out_dir);
  const ompc::EvalReport report = ompc::sweep(config);
  const fs::path dir(out_dir);
  ompc::save_report_csv(report, dir / "report.csv");
  const auto aggregate = report.aggregate();
  ompc::save_aggregate_csv(aggregate, dir / "aggregate.csv");
  ompc::write_file(dir / "plot.svg", ompc::render_svg_plot(aggregate, std::string(ompc::to_string(config.env))));
  write_provenance(dir / "report.csv", "sweep", s.resolved(), seed);
  int failed = 0;
  for (const auto& row : report.rows) failed += row.failed() ? 1 : 0;
  for (const auto& agg : aggregate) {
    std::cout << agg.scheme << " alpha=" << agg.alpha << " rel=" << agg.rel_mean << " +- " << agg.rel_std
              << " n=" << agg.n << "\n";
  }
  if (failed > 0) std::cout << failed << " failed cells (see report.csv)\n";
  return 0;
}

// ----- verify-theorem1 ----- //

struct VerifyArgs {
  Common common;
  int dim = 2;
  int trials = 100;
  int states = 100;
  double tolerance = 1e-6;
  CLI::Option *dim_opt, *trials_opt, *states_opt, *tol_opt;
};

void setup_verify(CLI::App& app, VerifyArgs& a) {
  auto* sub = app.add_subcommand("verify-theorem1",
                                 "Check that the modified-cost MPC on a wrong LQ model recovers the optimal policy");
  a.common.add(sub, false, false);
  a.dim_opt = sub->add_option("--dim", a.dim, "State dimension");
  a.trials_opt = sub->add_option("--trials", a.trials, "Random LQ instances");
  a.states_opt = sub->add_option("--states", a.states, "Random states per instance");
  a.tol_opt = sub->add_option("--tolerance", a.tolerance, "Pass threshold");
}

int run_verify(const VerifyArgs& a) {
  g_stage = "verify-theorem1";
  const json root = load_config(a.common.config);
  Settings s(root, "verify_theorem1");
  const std::uint64_t seed = resolve_seed(s, a.common);
  const int dim = s.get(a.dim_opt, a.dim, "dim", 2);
  const int trials = s.get(a.trials_opt, a.trials, "trials", 100);
  const int states = s.get(a.states_opt, a.states, "states", 100);
  const double tol = s.get(a.tol_opt, a.tolerance, "tolerance", 1e-6);
  if (dim < 1 || trials < 1 || states < 1 || !(tol > 0.0)) throw UsageError("dim, trials, states, tolerance > 0");
  const ompc::ModifiedMpcCheck r = ompc::check_modified_mpc(dim, trials, states, seed);
  const bool pass = r.max_policy_error < tol && r.max_value_error < tol && r.max_action_value_error < tol;
  std::cout << "instances=" << r.instances << " states=" << r.states
            << " max_policy_deviation=" << ompc::format_double(r.max_policy_error)
            << " max_value_deviation=" << ompc::format_double(r.max_value_error)
            << " max_action_value_deviation=" << ompc::format_double(r.max_action_value_error)
            << " result=" << (pass ? "pass" : "fail") << "\n";
  return pass ? 0 : 1;
}

// One line, key=value, message quoted.
void report_error(const char* kind, const std::string& message) {
  std::string escaped;
  for (char c : message) {
    if (c == '"' || c == '\\') escaped += '\\';
    escaped += (c == '\n') ? ' ' : c;
  }
  std::cerr << "error stage=" << g_stage << " kind=" << kind << " message=\"" << escaped << "\"\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline learning of MPC schemes from logged data"};
  app.set_version_flag("--version", OFFLINE_MPC_VERSION);
  app.require_subcommand(1);
  GenDataArgs gen;
  FitValueArgs fit;
  LearnMpcArgs learn;
  EvalArgs eval;
  SweepArgs sweep;
  VerifyArgs verify;
  setup_gen_data(app, gen);
  setup_fit_value(app, fit);
  setup_learn_mpc(app, learn);
  setup_eval(app, eval);
  setup_sweep(app, sweep);
  setup_verify(app, verify);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    g_stage = "usage";
    report_error("usage", e.what());
    return 2;
  }

  try {
    if (app.got_subcommand("gen-data")) return run_gen_data(gen);
    if (app.got_subcommand("fit-value")) return run_fit_value(fit);
    if (app.got_subcommand("learn-mpc")) return run_learn_mpc(learn);
    if (app.got_subcommand("eval")) return run_eval(eval);
    if (app.got_subcommand("sweep")) return run_sweep(sweep);
    if (app.got_subcommand("verify-theorem1")) return run_verify(verify);
  } catch (const UsageError& e) {
    report_error("usage", e.what());
    return 2;
  } catch (const ompc::TrainingDivergence& e) {
    report_error("divergence", e.what());
    return 1;
  } catch (const ompc::RolloutError& e) {
    report_error("rollout", e.what());
    return 1;
  } catch (const ompc::SolverError& e) {
    report_error("solver", e.what());
    return 1;
  } catch (const ompc::NumericalError& e) {
    report_error("numerical", e.what());
    return 1;
  } catch (const ompc::LearnerError& e) {
    report_error("learner", e.what());
    return 1;
  } catch (const std::exception& e) {
    report_error("runtime", e.what());
    return 1;
  }
  return 2;
}
