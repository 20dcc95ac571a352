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

#include "offline_mpc/core.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace ompc {

ParseError::ParseError(const std::string& message, std::size_t line)
    : Error("line " + std::to_string(line) + ": " + message), line_(line) {}

double normalize_angle(double phi) {
  if (!std::isfinite(phi)) {
    throw DomainError("normalize_angle: non-finite angle");
  }
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double r = std::remainder(phi, kTwoPi);  // [-pi, pi]
  if (r <= -std::numbers::pi) r += kTwoPi;
  return r;
}

double discounted_return(std::span<const double> costs, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw DomainError("discounted_return: gamma must lie in [0, 1)");
  }
  double total = 0.0;
  double weight = 1.0;
  for (double c : costs) {
    if (!std::isfinite(c)) throw DomainError("discounted_return: non-finite cost");
    total += weight * c;
    weight *= gamma;
  }
  return total;
}

std::string format_double(double value) {
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc()) throw Error("format_double: conversion failed");
  return std::string(buffer, end);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw DomainError("cannot parse number '" + std::string(text) + "'");
  }
  return value;
}

bool same_bits(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  }
  return true;
}

void ValueFunction::evaluate_batch(const Mat& states, Vec& values, Mat* gradients) const {
  values.resize(states.cols());
  if (gradients) gradients->resize(states.rows(), states.cols());
  for (Eigen::Index c = 0; c < states.cols(); ++c) {
    const Vec s = states.col(c);
    values[c] = value(s);
    if (gradients) gradients->col(c) = gradient(s);
  }
}

bool Transition::operator==(const Transition& other) const {
  return same_bits(state, other.state) && same_bits(action, other.action) &&
         same_bits(next_state, other.next_state) &&
         std::bit_cast<std::uint64_t>(cost) == std::bit_cast<std::uint64_t>(other.cost);
}

void Dataset::validate() const {
  if (!(meta.gamma >= 0.0 && meta.gamma < 1.0)) throw SchemaError("dataset: gamma outside [0, 1)");
  if (meta.episode_length < 1 || meta.episode_count < 1) {
    throw SchemaError("dataset: episode_length and episode_count must be positive");
  }
  if (meta.state_dim < 1 || meta.action_dim < 1) {
    throw SchemaError("dataset: state_dim and action_dim must be positive");
  }
  if (transitions.size() % static_cast<std::size_t>(meta.episode_length) != 0) {
    throw SchemaError("dataset: transition count is not a multiple of episode_length");
  }
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const Transition& t = transitions[i];
    if (t.state.size() != meta.state_dim || t.next_state.size() != meta.state_dim ||
        t.action.size() != meta.action_dim) {
      throw SchemaError("dataset: transition " + std::to_string(i) + " has wrong dimensions");
    }
  }
}

std::filesystem::path metadata_path(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  p.replace_extension(".json");
  if (p == csv_path) p += ".meta";
  return p;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

namespace {

std::string csv_header(int n, int m) {
  std::string header;
  auto add = [&header](const std::string& name) {
    if (!header.empty()) header += ',';
    header += name;
  };
  for (int i = 0; i < n; ++i) add("s" + std::to_string(i));
  for (int i = 0; i < m; ++i) add("a" + std::to_string(i));
  for (int i = 0; i < n; ++i) add("sn" + std::to_string(i));
  add("cost");
  return header;
}

nlohmann::json meta_to_json(const DatasetMeta& m) {
  return nlohmann::json{{"env_id", m.env_id},
                        {"gamma", m.gamma},
                        {"dt", m.dt},
                        {"seed", m.seed},
                        {"behavior_policy", m.behavior_policy},
                        {"episode_length", m.episode_length},
                        {"episode_count", m.episode_count},
                        {"state_dim", m.state_dim},
                        {"action_dim", m.action_dim}};
}

DatasetMeta meta_from_json(const nlohmann::json& j) {
  DatasetMeta m;
  try {
    m.env_id = j.at("env_id").get<std::string>();
    m.gamma = j.at("gamma").get<double>();
    m.dt = j.at("dt").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.behavior_policy = j.at("behavior_policy").get<std::string>();
    m.episode_length = j.at("episode_length").get<int>();
    m.episode_count = j.at("episode_count").get<int>();
    m.state_dim = j.at("state_dim").get<int>();
    m.action_dim = j.at("action_dim").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("dataset metadata: ") + e.what());
  }
  return m;
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::filesystem::path& csv_path) {
  dataset.validate();
  const int n = dataset.meta.state_dim;
  const int m = dataset.meta.action_dim;
  std::string out = csv_header(n, m);
  out += '\n';
  for (const Transition& t : dataset.transitions) {
    for (int i = 0; i < n; ++i) (out += format_double(t.state[i])) += ',';
    for (int i = 0; i < m; ++i) (out += format_double(t.action[i])) += ',';
    for (int i = 0; i < n; ++i) (out += format_double(t.next_state[i])) += ',';
    out += format_double(t.cost);
    out += '\n';
  }
  write_file(csv_path, out);
  write_file(metadata_path(csv_path), meta_to_json(dataset.meta).dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& csv_path) {
  Dataset dataset;
  {
    const std::string text = read_file(metadata_path(csv_path));
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("dataset metadata: ") + e.what(), 1);
    }
    dataset.meta = meta_from_json(j);
  }
  const int n = dataset.meta.state_dim;
  const int m = dataset.meta.action_dim;
  if (n < 1 || m < 1) throw SchemaError("dataset metadata: dimensions must be positive");
  const std::size_t columns = static_cast<std::size_t>(2 * n + m + 1);

  const std::string text = read_file(csv_path);
  std::size_t pos = 0;
  std::size_t line_no = 0;
  std::vector<double> row;
  row.reserve(columns);
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line(text.data() + pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1) {
      if (line != csv_header(n, m)) {
        throw SchemaError("dataset header does not match metadata dimensions (n=" +
                          std::to_string(n) + ", m=" + std::to_string(m) + ")");
      }
      continue;
    }
    if (line.empty()) continue;
    row.clear();
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      std::string_view field =
          line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
      try {
        row.push_back(parse_double(field));
      } catch (const DomainError& e) {
        throw ParseError(e.what(), line_no);
      }
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (row.size() != columns) {
      throw SchemaError("line " + std::to_string(line_no) + ": expected " + std::to_string(columns) +
                        " fields, found " + std::to_string(row.size()));
    }
    Transition t;
    t.state = Eigen::Map<const Vec>(row.data(), n);
    t.action = Eigen::Map<const Vec>(row.data() + n, m);
    t.next_state = Eigen::Map<const Vec>(row.data() + n + m, n);
    t.cost = row.back();
    dataset.transitions.push_back(std::move(t));
  }
  if (line_no == 0) throw ParseError("missing header row", 1);
  dataset.validate();
  return dataset;
}

}  // namespace ompc
