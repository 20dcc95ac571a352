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

#include "json.hpp"
#include "offline_mpc/mpc.hpp"

namespace ompc {

namespace {

using nlohmann::json;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Row-major nested arrays.
json mat_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i).transpose()));
  return rows;
}

Mat mat_from(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = rows.empty() ? Eigen::Index{0} : static_cast<Eigen::Index>(rows.front().size());
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != c) {
      throw SchemaError("MPC scheme: ragged matrix");
    }
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  }
  return m;
}

json model_json(const Plant& model) {
  return std::visit(Overloaded{[](const LinearPlant& p) {
                                 return json{{"env", "linear"},
                                             {"a", mat_json(p.a)},
                                             {"b", mat_json(p.b)},
                                             {"alpha", p.alpha},
                                             {"dt", p.dt}};
                               },
                               [](const PendulumPlant& p) {
                                 return json{{"env", "pendulum"}, {"mass", p.mass},       {"length", p.length},
                                             {"gravity", p.gravity}, {"u_bound", p.u_bound}, {"dt", p.dt}};
                               },
                               [](const CartpolePlant& p) {
                                 return json{{"env", "cartpole"},
                                             {"cart_mass", p.cart_mass},
                                             {"pole_mass", p.pole_mass},
                                             {"pole_length", p.pole_length},
                                             {"friction", p.friction},
                                             {"gravity", p.gravity},
                                             {"u_bound", p.u_bound},
                                             {"dt", p.dt}};
                               }},
                    model);
}

Plant model_from(const json& j) {
  switch (parse_env_id(j.at("env").get<std::string>())) {
    case EnvId::kLinear:
      return LinearPlant{mat_from(j.at("a")), mat_from(j.at("b")), j.at("alpha").get<double>(),
                         j.at("dt").get<double>()};
    case EnvId::kPendulum:
      return PendulumPlant{j.at("mass").get<double>(), j.at("length").get<double>(), j.at("gravity").get<double>(),
                           j.at("u_bound").get<double>(), j.at("dt").get<double>()};
    case EnvId::kCartpole:
      return CartpolePlant{j.at("cart_mass").get<double>(), j.at("pole_mass").get<double>(),
                           j.at("pole_length").get<double>(), j.at("friction").get<double>(),
                           j.at("gravity").get<double>(), j.at("u_bound").get<double>(), j.at("dt").get<double>()};
  }
  throw SchemaError("MPC scheme: unknown model");
}

}  // namespace

std::string mpc_to_json(const ParameterizedMpc& mpc) {
  json stage = std::visit(Overloaded{[](const QuadraticStageCost& c) {
                                       return json{{"type", "quadratic"},
                                                   {"chol_w", mat_json(c.chol_w)},
                                                   {"chol_r", mat_json(c.chol_r)},
                                                   {"offset", c.offset},
                                                   {"ref", vec_json(c.ref)}};
                                     },
                                     [](const GeneralQuadraticCost& c) {
                                       return json{{"type", "general"},
                                                   {"h", mat_json(c.h)},
                                                   {"g", vec_json(c.g)},
                                                   {"c", c.c}};
                                     }},
                          mpc.stage_cost);
  json terminal = std::visit(
      Overloaded{[](const ZeroTerminal&) { return json{{"type", "none"}}; },
                 [](const SmoothedNormTerminal& t) {
                   return json{{"type", "smoothed_norm"}, {"ref", vec_json(t.ref)}, {"eps", t.eps}};
                 },
                 [](const QuadraticTerminal& t) {
                   return json{{"type", "quadratic"}, {"p", mat_json(t.p)}, {"ref", vec_json(t.ref)}};
                 }},
      mpc.terminal_cost);
  json j{{"horizon", mpc.horizon},
         {"gamma", mpc.gamma},
         {"cost_space", std::string(to_string(mpc.cost_space))},
         {"stage_cost", stage},
         {"terminal_cost", terminal},
         {"model", model_json(mpc.model)},
         {"input_bounds", nullptr}};
  if (mpc.input_bounds) {
    j["input_bounds"] = json{{"lower", vec_json(mpc.input_bounds->lower)}, {"upper", vec_json(mpc.input_bounds->upper)}};
  }
  return j.dump(1) + "\n";
}

ParameterizedMpc mpc_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("MPC scheme: ") + e.what(), 1);
  }
  try {
    ParameterizedMpc mpc;
    mpc.horizon = j.at("horizon").get<int>();
    mpc.gamma = j.at("gamma").get<double>();
    mpc.cost_space = parse_cost_space(j.at("cost_space").get<std::string>());
    const json& stage = j.at("stage_cost");
    const auto stage_type = stage.at("type").get<std::string>();
    if (stage_type == "quadratic") {
      mpc.stage_cost = QuadraticStageCost{mat_from(stage.at("chol_w")), mat_from(stage.at("chol_r")),
                                          stage.at("offset").get<double>(), vec_from(stage.at("ref"))};
    } else if (stage_type == "general") {
      mpc.stage_cost =
          GeneralQuadraticCost{mat_from(stage.at("h")), vec_from(stage.at("g")), stage.at("c").get<double>()};
    } else {
      throw SchemaError("MPC scheme: unknown stage cost type '" + stage_type + "'");
    }
    const json& terminal = j.at("terminal_cost");
    const auto terminal_type = terminal.at("type").get<std::string>();
    if (terminal_type == "none") {
      mpc.terminal_cost = ZeroTerminal{};
    } else if (terminal_type == "smoothed_norm") {
      mpc.terminal_cost = SmoothedNormTerminal{vec_from(terminal.at("ref")), terminal.at("eps").get<double>()};
    } else if (terminal_type == "quadratic") {
      mpc.terminal_cost = QuadraticTerminal{mat_from(terminal.at("p")), vec_from(terminal.at("ref"))};
    } else {
      throw SchemaError("MPC scheme: unknown terminal cost type '" + terminal_type + "'");
    }
    mpc.model = model_from(j.at("model"));
    const json& bounds = j.at("input_bounds");
    if (!bounds.is_null()) mpc.input_bounds = InputBounds{vec_from(bounds.at("lower")), vec_from(bounds.at("upper"))};
    mpc.validate();
    return mpc;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("MPC scheme: ") + e.what());
  } catch (const DomainError& e) {
    throw SchemaError(std::string("MPC scheme: ") + e.what());
  }
}

void save_mpc(const ParameterizedMpc& mpc, const std::filesystem::path& path) { write_file(path, mpc_to_json(mpc)); }

ParameterizedMpc load_mpc(const std::filesystem::path& path) { return mpc_from_json(read_file(path)); }

bool same_scheme(const ParameterizedMpc& a, const ParameterizedMpc& b) { return mpc_to_json(a) == mpc_to_json(b); }

}  // namespace ompc
