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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ompc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// ----- errors ----- //

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument value (non-finite input, wrong dimension, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

// Iterative numerical routine failed (non-convergence, singular system).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// ----- scalar helpers ----- //

// Maps an angle into (-pi, pi]. Throws DomainError for non-finite input.
double normalize_angle(double phi);

// Sum_k gamma^k costs[k].
double discounted_return(std::span<const double> costs, double gamma);

struct DiscountedReturn {
  double value = 0.0;
  double gamma = 0.0;
  int horizon = 0;
};

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);
// Strict parse of a full token; throws DomainError on trailing garbage.
double parse_double(std::string_view text);

// Bitwise equality of vectors (size and every coefficient).
bool same_bits(const Vec& a, const Vec& b);

// ----- value function interface ----- //

// A differentiable scalar function of the plant state. Implemented by the
// MLP value network and by analytic quadratic value functions.
class ValueFunction {
 public:
  virtual ~ValueFunction() = default;
  virtual double value(const Vec& state) const = 0;
  virtual Vec gradient(const Vec& state) const = 0;
  // Values (and optionally gradients, one column each) of the columns of
  // `states`. The default evaluates column by column.
  virtual void evaluate_batch(const Mat& states, Vec& values, Mat* gradients) const;
};

// ----- dataset ----- //

struct Transition {
  Vec state;
  Vec action;
  Vec next_state;
  double cost = 0.0;

  bool operator==(const Transition& other) const;
};

struct DatasetMeta {
  std::string env_id;
  double gamma = 0.9;
  double dt = 0.1;
  std::uint64_t seed = 0;
  std::string behavior_policy;
  int episode_length = 1;
  int episode_count = 1;
  int state_dim = 0;
  int action_dim = 0;

  bool operator==(const DatasetMeta&) const = default;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<Transition> transitions;

  // Throws SchemaError when an invariant is violated.
  void validate() const;
  bool operator==(const Dataset&) const = default;
};

// Sidecar metadata path for a transition table: "data.csv" -> "data.json".
std::filesystem::path metadata_path(const std::filesystem::path& csv_path);

// Writes the CSV transition table at `csv_path` and the JSON metadata next
// to it. Doubles are written in shortest round-trip form.
void save_dataset(const Dataset& dataset, const std::filesystem::path& csv_path);
Dataset load_dataset(const std::filesystem::path& csv_path);

// Reads a whole file; throws Error if it cannot be opened.
std::string read_file(const std::filesystem::path& path);
// Writes a whole file; throws Error if it cannot be opened.
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace ompc
