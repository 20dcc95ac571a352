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
#include <random>
#include <string>
#include <string_view>

#include "offline_mpc/core.hpp"
#include "offline_mpc/envs.hpp"
#include "offline_mpc/mpc.hpp"

namespace ompc {

enum class BehaviorKind { kUniformRandom, kNoisyMpc, kMixture };

std::string_view to_string(BehaviorKind kind);
BehaviorKind parse_behavior_kind(std::string_view name);

struct BehaviorPolicy {
  BehaviorKind kind = BehaviorKind::kMixture;
  double noise_scale = 0.5;  // Gaussian noise on the MPC action
  double epsilon = 1.0;      // random-action probability (mixture)
  bool anneal = true;        // linear decay of epsilon across episodes
  double epsilon_final = 0.2;

  void validate() const;
  // Random-action probability in episode `episode` of `episodes`.
  double epsilon_at(int episode, int episodes) const;
};

// Box for uniform random actions: the plant bounds, or [-5, 5] per input
// for the unbounded linear plant.
InputBounds exploration_box(const Plant& plant);

// Randomized initial state of a data-collection episode.
Vec sample_initial_state(const Plant& plant, std::mt19937_64& rng);

// Per-episode generator, derived from (seed, episode).
std::mt19937_64 episode_rng(std::uint64_t seed, int episode);

// Rolls out `episodes` episodes on the true plant. `behavior_mpc` is the
// scheme queried by the noisy-MPC part; defaults to the nominal scheme on
// the true plant.
Dataset generate(const Plant& plant, const BehaviorPolicy& policy, int episodes, int episode_length,
                 std::uint64_t seed, const std::optional<ParameterizedMpc>& behavior_mpc = std::nullopt);

}  // namespace ompc
