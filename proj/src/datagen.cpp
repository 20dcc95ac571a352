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

#include "offline_mpc/datagen.hpp"

#include <cmath>
#include <numbers>

namespace ompc {

std::string_view to_string(BehaviorKind kind) {
  switch (kind) {
    case BehaviorKind::kUniformRandom:
      return "uniform_random";
    case BehaviorKind::kNoisyMpc:
      return "noisy_mpc";
    case BehaviorKind::kMixture:
      return "mixture";
  }
  return "mixture";
}

BehaviorKind parse_behavior_kind(std::string_view name) {
  if (name == "uniform_random") return BehaviorKind::kUniformRandom;
  if (name == "noisy_mpc") return BehaviorKind::kNoisyMpc;
  if (name == "mixture") return BehaviorKind::kMixture;
  throw DomainError("unknown behavior policy '" + std::string(name) + "'");
}

void BehaviorPolicy::validate() const {
  if (!(epsilon >= 0.0 && epsilon <= 1.0) || !(epsilon_final >= 0.0 && epsilon_final <= 1.0)) {
    throw DomainError("behavior epsilon must lie in [0, 1]");
  }
  if (!(noise_scale >= 0.0)) throw DomainError("behavior noise scale must be nonnegative");
}

double BehaviorPolicy::epsilon_at(int episode, int episodes) const {
  switch (kind) {
    case BehaviorKind::kUniformRandom:
      return 1.0;
    case BehaviorKind::kNoisyMpc:
      return 0.0;
    case BehaviorKind::kMixture:
      break;
  }
  if (!anneal || episodes <= 1) return epsilon;
  const double frac = static_cast<double>(episode) / static_cast<double>(episodes - 1);
  return epsilon + (epsilon_final - epsilon) * frac;
}

InputBounds exploration_box(const Plant& plant) {
  if (auto bounds = action_bounds(plant)) return *bounds;
  const int m = action_dim(plant);
  return InputBounds{Vec::Constant(m, -5.0), Vec::Constant(m, 5.0)};
}

Vec sample_initial_state(const Plant& plant, std::mt19937_64& rng) {
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  switch (env_of(plant)) {
    case EnvId::kLinear: {
      Vec s(4);
      s << uniform(-1.0, 1.0), uniform(-1.0, 1.0), uniform(-0.5, 0.5), uniform(-0.5, 0.5);
      return s;
    }
    case EnvId::kPendulum: {
      Vec s(2);
      s << normalize_angle(uniform(-std::numbers::pi, std::numbers::pi)), uniform(-1.0, 1.0);
      return s;
    }
    case EnvId::kCartpole: {
      Vec s(4);
      s << uniform(-0.5, 0.5), uniform(-0.1, 0.1), normalize_angle(std::numbers::pi + uniform(-0.2, 0.2)),
          uniform(-0.1, 0.1);
      return s;
    }
  }
  throw DomainError("unknown plant");
}

std::mt19937_64 episode_rng(std::uint64_t seed, int episode) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(episode)};
  return std::mt19937_64(seq);
}

Dataset generate(const Plant& plant, const BehaviorPolicy& policy, int episodes, int episode_length,
                 std::uint64_t seed, const std::optional<ParameterizedMpc>& behavior_mpc) {
  if (episodes < 1 || episode_length < 1) throw DomainError("generate: episodes and episode length must be positive");
  policy.validate();
  const EnvId env = env_of(plant);
  const bool uses_mpc = policy.kind != BehaviorKind::kUniformRandom;
  ParameterizedMpc scheme = behavior_mpc ? *behavior_mpc : make_nominal_mpc(env, plant);
  if (uses_mpc && (state_dim(scheme.model) != state_dim(plant) || action_dim(scheme.model) != action_dim(plant))) {
    throw DomainError("generate: behavior scheme does not match the plant");
  }
  const InputBounds box = exploration_box(plant);
  const int m = action_dim(plant);

  Dataset data;
  data.meta.env_id = std::string(to_string(env));
  data.meta.gamma = task_gamma(env);
  data.meta.dt = sampling_time(plant);
  data.meta.seed = seed;
  data.meta.behavior_policy = std::string(to_string(policy.kind));
  data.meta.episode_length = episode_length;
  data.meta.episode_count = episodes;
  data.meta.state_dim = state_dim(plant);
  data.meta.action_dim = m;
  data.transitions.reserve(static_cast<std::size_t>(episodes) * static_cast<std::size_t>(episode_length));

  for (int e = 0; e < episodes; ++e) {
    std::mt19937_64 rng = episode_rng(seed, e);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    const double eps = policy.epsilon_at(e, episodes);
    MpcController controller(scheme);
    Vec s = sample_initial_state(plant, rng);
    for (int k = 0; k < episode_length; ++k) {
      Vec a(m);
      if (!uses_mpc || unit(rng) < eps) {
        for (int i = 0; i < m; ++i) a[i] = box.lower[i] + (box.upper[i] - box.lower[i]) * unit(rng);
      } else {
        a = controller(s);
        for (int i = 0; i < m; ++i) a[i] += policy.noise_scale * noise(rng);
      }
      a = clamp_action(plant, a);
      Transition t{s, a, step(plant, s, a), stage_cost(plant, s, a)};
      s = t.next_state;
      data.transitions.push_back(std::move(t));
    }
  }
  data.validate();
  return data;
}

}  // namespace ompc
