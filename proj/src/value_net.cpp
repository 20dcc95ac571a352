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

#include "offline_mpc/value_net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"
#include "offline_mpc/adam.hpp"

namespace ompc {

namespace {

int angle_index(FeatureMap map) {
  switch (map) {
    case FeatureMap::kIdentity:
      return -1;
    case FeatureMap::kPendulumAngles:
      return 0;
    case FeatureMap::kCartpoleAngles:
      return 2;
  }
  return -1;
}

std::vector<double> to_std(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec from_std(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

}  // namespace

std::string_view to_string(FeatureMap map) {
  switch (map) {
    case FeatureMap::kIdentity:
      return "identity";
    case FeatureMap::kPendulumAngles:
      return "pendulum_angles";
    case FeatureMap::kCartpoleAngles:
      return "cartpole_angles";
  }
  return "identity";
}

FeatureMap parse_feature_map(std::string_view name) {
  if (name == "identity") return FeatureMap::kIdentity;
  if (name == "pendulum_angles") return FeatureMap::kPendulumAngles;
  if (name == "cartpole_angles") return FeatureMap::kCartpoleAngles;
  throw DomainError("unknown feature map '" + std::string(name) + "'");
}

FeatureMap default_feature_map(EnvId env, bool expand_angles) {
  if (!expand_angles) return FeatureMap::kIdentity;
  switch (env) {
    case EnvId::kLinear:
      return FeatureMap::kIdentity;
    case EnvId::kPendulum:
      return FeatureMap::kPendulumAngles;
    case EnvId::kCartpole:
      return FeatureMap::kCartpoleAngles;
  }
  return FeatureMap::kIdentity;
}

int feature_dim(FeatureMap map, int state_dim) { return angle_index(map) < 0 ? state_dim : state_dim + 1; }

// The angle component is replaced in place by (cos, sin).
Vec apply_features(FeatureMap map, const Vec& state) {
  const int k = angle_index(map);
  if (k < 0) return state;
  Vec out(state.size() + 1);
  out.head(k) = state.head(k);
  out[k] = std::cos(state[k]);
  out[k + 1] = std::sin(state[k]);
  out.tail(state.size() - k - 1) = state.tail(state.size() - k - 1);
  return out;
}

Mat feature_jacobian(FeatureMap map, const Vec& state) {
  const int k = angle_index(map);
  const Eigen::Index n = state.size();
  if (k < 0) return Mat::Identity(n, n);
  Mat j = Mat::Zero(n + 1, n);
  for (int i = 0; i < k; ++i) j(i, i) = 1.0;
  j(k, k) = -std::sin(state[k]);
  j(k + 1, k) = std::cos(state[k]);
  for (Eigen::Index i = k + 1; i < n; ++i) j(i + 1, i) = 1.0;
  return j;
}

Normalizer Normalizer::identity(int dim) { return Normalizer{Vec::Zero(dim), Vec::Ones(dim)}; }

MlpValueFunction::MlpValueFunction(std::vector<DenseLayer> layers, FeatureMap feature_map, Normalizer normalizer,
                                   double output_scale)
    : layers_(std::move(layers)),
      feature_map_(feature_map),
      normalizer_(std::move(normalizer)),
      output_scale_(output_scale) {
  if (layers_.empty()) throw DomainError("value network needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].bias.size() != layers_[l].weight.rows()) throw DomainError("layer bias/weight mismatch");
    if (l > 0 && layers_[l].weight.cols() != layers_[l - 1].weight.rows()) {
      throw DomainError("consecutive layer widths do not match");
    }
  }
  if (layers_.back().weight.rows() != 1) throw DomainError("value network output must be scalar");
  const Eigen::Index in = layers_.front().weight.cols();
  if (normalizer_.mean.size() != in || normalizer_.stddev.size() != in) {
    throw DomainError("normalizer dimension does not match the input layer");
  }
  if ((normalizer_.stddev.array() <= 0.0).any()) throw DomainError("normalizer stddev must be positive");
}

MlpValueFunction MlpValueFunction::random(const std::vector<int>& widths, FeatureMap feature_map,
                                          Normalizer normalizer, double output_scale, std::uint64_t seed) {
  if (widths.size() < 2 || widths.back() != 1) throw DomainError("layer widths must end with 1");
  std::mt19937_64 rng(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int in = widths[l];
    const int out = widths[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer layer{Mat(out, in), Vec::Zero(out)};
    for (int i = 0; i < out; ++i)
      for (int j = 0; j < in; ++j) layer.weight(i, j) = dist(rng);
    layers.push_back(std::move(layer));
  }
  return MlpValueFunction(std::move(layers), feature_map, std::move(normalizer), output_scale);
}

Vec MlpValueFunction::normalized_input(const Vec& state) const {
  if (state.size() != this->state_dim()) throw DomainError("value network: state has wrong dimension");
  return ((apply_features(feature_map_, state) - normalizer_.mean).array() / normalizer_.stddev.array()).matrix();
}

Eigen::RowVectorXd MlpValueFunction::forward_normalized(const Mat& inputs) const {
  Mat h = inputs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Mat pre = layers_[l].weight * h;
    pre.colwise() += layers_[l].bias;
    if (l + 1 < layers_.size()) {
      h = pre.array().tanh().matrix();
    } else {
      h = std::move(pre);
    }
  }
  return output_scale_ * h.row(0);
}

double MlpValueFunction::forward(const Vec& state) const {
  const Vec z = normalized_input(state);
  return forward_normalized(z)(0);
}

namespace {

// Backpropagates dV/d(output) = 1 for a single input column. Fills the
// per-layer deltas (dV/d preactivation) and activations.
void backprop_single(const std::vector<DenseLayer>& layers, double output_scale, const Vec& z,
                     std::vector<Vec>& activations, std::vector<Vec>& deltas) {
  const std::size_t n = layers.size();
  activations.assign(n + 1, Vec());
  deltas.assign(n, Vec());
  activations[0] = z;
  for (std::size_t l = 0; l < n; ++l) {
    Vec pre = layers[l].weight * activations[l] + layers[l].bias;
    activations[l + 1] = (l + 1 < n) ? Vec(pre.array().tanh()) : pre;
  }
  deltas[n - 1] = Vec::Constant(1, output_scale);
  for (std::size_t l = n - 1; l > 0; --l) {
    const Vec back = layers[l].weight.transpose() * deltas[l];
    deltas[l - 1] = (back.array() * (1.0 - activations[l].array().square())).matrix();
  }
}

}  // namespace

Vec MlpValueFunction::grad_input(const Vec& state) const {
  const Vec z = normalized_input(state);
  std::vector<Vec> activations, deltas;
  backprop_single(layers_, output_scale_, z, activations, deltas);
  const Vec dz = layers_.front().weight.transpose() * deltas.front();
  const Vec dfeat = (dz.array() / normalizer_.stddev.array()).matrix();
  return feature_jacobian(feature_map_, state).transpose() * dfeat;
}

void MlpValueFunction::evaluate_batch(const Mat& states, Vec& values, Mat* gradients) const {
  const Eigen::Index batch = states.cols();
  Mat z(layers_.front().weight.cols(), batch);
  for (Eigen::Index c = 0; c < batch; ++c) z.col(c) = normalized_input(states.col(c));
  const std::size_t n = layers_.size();
  std::vector<Mat> activations(n + 1);
  activations[0] = std::move(z);
  for (std::size_t l = 0; l < n; ++l) {
    Mat pre = layers_[l].weight * activations[l];
    pre.colwise() += layers_[l].bias;
    activations[l + 1] = (l + 1 < n) ? Mat(pre.array().tanh()) : std::move(pre);
  }
  values = output_scale_ * activations[n].row(0).transpose();
  if (!gradients) return;
  Mat delta = Mat::Constant(1, batch, output_scale_);
  for (std::size_t l = n - 1; l > 0; --l) {
    const Mat back = layers_[l].weight.transpose() * delta;
    delta = (back.array() * (1.0 - activations[l].array().square())).matrix();
  }
  const Mat dz = layers_.front().weight.transpose() * delta;
  gradients->resize(states.rows(), batch);
  for (Eigen::Index c = 0; c < batch; ++c) {
    const Vec dfeat = (dz.col(c).array() / normalizer_.stddev.array()).matrix();
    gradients->col(c) = feature_jacobian(feature_map_, states.col(c)).transpose() * dfeat;
  }
}

Vec MlpValueFunction::grad_weights(const Vec& state) const {
  const Vec z = normalized_input(state);
  std::vector<Vec> activations, deltas;
  backprop_single(layers_, output_scale_, z, activations, deltas);
  Vec flat(num_weights());
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Eigen::Index rows = layers_[l].weight.rows();
    const Eigen::Index cols = layers_[l].weight.cols();
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) flat[offset++] = deltas[l][i] * activations[l][j];
    flat.segment(offset, rows) = deltas[l];
    offset += rows;
  }
  return flat;
}

Vec MlpValueFunction::flat_weights() const {
  Vec flat(num_weights());
  Eigen::Index offset = 0;
  for (const DenseLayer& layer : layers_) {
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) flat[offset++] = layer.weight(i, j);
    flat.segment(offset, layer.bias.size()) = layer.bias;
    offset += layer.bias.size();
  }
  return flat;
}

void MlpValueFunction::set_flat_weights(const Vec& flat) {
  if (flat.size() != num_weights()) throw DomainError("flat weight vector has wrong size");
  Eigen::Index offset = 0;
  for (DenseLayer& layer : layers_) {
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) layer.weight(i, j) = flat[offset++];
    layer.bias = flat.segment(offset, layer.bias.size());
    offset += layer.bias.size();
  }
}

Eigen::Index MlpValueFunction::num_weights() const {
  Eigen::Index n = 0;
  for (const DenseLayer& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

std::vector<int> MlpValueFunction::layer_widths() const {
  std::vector<int> widths;
  if (layers_.empty()) return widths;
  widths.push_back(static_cast<int>(layers_.front().weight.cols()));
  for (const DenseLayer& layer : layers_) widths.push_back(static_cast<int>(layer.weight.rows()));
  return widths;
}

int MlpValueFunction::state_dim() const {
  if (layers_.empty()) return 0;
  const int in = static_cast<int>(layers_.front().weight.cols());
  return angle_index(feature_map_) < 0 ? in : in - 1;
}

bool MlpValueFunction::operator==(const MlpValueFunction& other) const {
  return feature_map_ == other.feature_map_ && output_scale_ == other.output_scale_ &&
         layer_widths() == other.layer_widths() && same_bits(flat_weights(), other.flat_weights()) &&
         same_bits(normalizer_.mean, other.normalizer_.mean) &&
         same_bits(normalizer_.stddev, other.normalizer_.stddev);
}

std::string network_to_json(const MlpValueFunction& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const DenseLayer& layer : net.layers()) {
    std::vector<double> w;
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) w.push_back(layer.weight(i, j));
    layers.push_back({{"weight", w}, {"bias", to_std(layer.bias)}});
  }
  nlohmann::json j{{"layer_widths", net.layer_widths()},
                   {"feature_map", std::string(to_string(net.feature_map()))},
                   {"normalizer", {{"mean", to_std(net.normalizer().mean)}, {"stddev", to_std(net.normalizer().stddev)}}},
                   {"output_scale", net.output_scale()},
                   {"activation", "tanh"},
                   {"layers", layers}};
  return j.dump(1) + "\n";
}

MlpValueFunction network_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("value network: ") + e.what(), 1);
  }
  try {
    const auto widths = j.at("layer_widths").get<std::vector<int>>();
    const auto& jl = j.at("layers");
    if (widths.size() != jl.size() + 1) throw SchemaError("value network: layer count does not match widths");
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l < jl.size(); ++l) {
      const auto w = jl[l].at("weight").get<std::vector<double>>();
      const auto b = jl[l].at("bias").get<std::vector<double>>();
      const int in = widths[l];
      const int out = widths[l + 1];
      if (w.size() != static_cast<std::size_t>(in) * static_cast<std::size_t>(out) ||
          b.size() != static_cast<std::size_t>(out)) {
        throw SchemaError("value network: layer " + std::to_string(l) + " has wrong size");
      }
      DenseLayer layer{Mat(out, in), from_std(b)};
      for (int i = 0; i < out; ++i)
        for (int c = 0; c < in; ++c) layer.weight(i, c) = w[static_cast<std::size_t>(i * in + c)];
      layers.push_back(std::move(layer));
    }
    Normalizer norm{from_std(j.at("normalizer").at("mean").get<std::vector<double>>()),
                    from_std(j.at("normalizer").at("stddev").get<std::vector<double>>())};
    return MlpValueFunction(std::move(layers), parse_feature_map(j.at("feature_map").get<std::string>()),
                            std::move(norm), j.at("output_scale").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("value network: ") + e.what());
  } catch (const DomainError& e) {
    throw SchemaError(std::string("value network: ") + e.what());
  }
}

void save_network(const MlpValueFunction& net, const std::filesystem::path& path) {
  write_file(path, network_to_json(net));
}

MlpValueFunction load_network(const std::filesystem::path& path) { return network_from_json(read_file(path)); }

Normalizer fit_normalizer(FeatureMap map, const Dataset& dataset) {
  const int dim = feature_dim(map, dataset.meta.state_dim);
  if (dataset.transitions.empty()) return Normalizer::identity(dim);
  Vec sum = Vec::Zero(dim);
  Vec sq = Vec::Zero(dim);
  for (const Transition& t : dataset.transitions) {
    const Vec f = apply_features(map, t.state);
    sum += f;
    sq += f.cwiseAbs2();
  }
  const double n = static_cast<double>(dataset.transitions.size());
  Normalizer norm;
  norm.mean = sum / n;
  norm.stddev = (sq / n - norm.mean.cwiseAbs2()).cwiseMax(0.0).cwiseSqrt();
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (!(norm.stddev[i] > 1e-8)) norm.stddev[i] = 1.0;
  }
  return norm;
}

double default_output_scale(const Dataset& dataset) {
  if (dataset.transitions.empty()) return 1.0;
  double total = 0.0;
  for (const Transition& t : dataset.transitions) total += t.cost;
  const double mean = total / static_cast<double>(dataset.transitions.size());
  const double scale = mean / (1.0 - dataset.meta.gamma);
  return scale > 1e-8 ? scale : 1.0;
}

MlpValueFunction make_value_network(const Dataset& dataset, FeatureMap map, const std::vector<int>& hidden,
                                    std::uint64_t seed) {
  std::vector<int> widths{feature_dim(map, dataset.meta.state_dim)};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(1);
  return MlpValueFunction::random(widths, map, fit_normalizer(map, dataset), default_output_scale(dataset), seed);
}

TrainingDivergence::TrainingDivergence(const std::string& message, long step)
    : Error(message + " (optimizer step " + std::to_string(step) + ")"), step_(step) {}

TdFitResult fit_td(const MlpValueFunction& initial, const Dataset& dataset, const TdFitConfig& config) {
  if (dataset.transitions.empty()) throw DomainError("fit_td: dataset is empty");
  if (!(config.learning_rate >= 0.0)) throw DomainError("fit_td: learning_rate must be nonnegative");
  if (config.batch_size < 1 || config.epochs < 0 || config.target_refresh_interval < 1) {
    throw DomainError("fit_td: batch_size and target_refresh_interval must be positive");
  }
  if (initial.state_dim() != dataset.meta.state_dim) throw DomainError("fit_td: network/dataset dimension mismatch");

  const double gamma = dataset.meta.gamma;
  const Eigen::Index count = static_cast<Eigen::Index>(dataset.transitions.size());
  const Eigen::Index in = initial.layers().front().weight.cols();
  Mat inputs(in, count);
  Mat next_inputs(in, count);
  Vec costs(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    const Transition& t = dataset.transitions[static_cast<std::size_t>(i)];
    inputs.col(i) = initial.normalized_input(t.state);
    next_inputs.col(i) = initial.normalized_input(t.next_state);
    costs[i] = t.cost;
  }

  MlpValueFunction net = initial;
  Vec weights = net.flat_weights();
  Adam adam(weights.size());
  std::mt19937_64 rng(config.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(count));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  Eigen::RowVectorXd targets;
  auto refresh_targets = [&]() { targets = costs.transpose() + gamma * net.forward_normalized(next_inputs); };
  refresh_targets();

  const std::size_t n_layers = net.layers().size();
  std::vector<Mat> acts(n_layers + 1);
  std::vector<Mat> deltas(n_layers);
  TdFitResult result;
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (Eigen::Index start = 0; start < count; start += config.batch_size) {
      const Eigen::Index b = std::min<Eigen::Index>(config.batch_size, count - start);
      Mat batch(in, b);
      Eigen::RowVectorXd y(b);
      for (Eigen::Index j = 0; j < b; ++j) {
        const Eigen::Index idx = order[static_cast<std::size_t>(start + j)];
        batch.col(j) = inputs.col(idx);
        y[j] = targets[idx];
      }
      // forward with cached activations
      const auto& layers = net.layers();
      acts[0] = std::move(batch);
      for (std::size_t l = 0; l < n_layers; ++l) {
        Mat pre = layers[l].weight * acts[l];
        pre.colwise() += layers[l].bias;
        acts[l + 1] = (l + 1 < n_layers) ? Mat(pre.array().tanh()) : std::move(pre);
      }
      const Eigen::RowVectorXd v = net.output_scale() * acts[n_layers].row(0);
      const Eigen::RowVectorXd err = y - v;
      const double loss = err.squaredNorm() / static_cast<double>(b);
      if (!std::isfinite(loss)) throw TrainingDivergence("fit_td: non-finite TD loss", step);
      epoch_loss += loss * static_cast<double>(b);

      // d loss / d output preactivation
      deltas[n_layers - 1] = (-2.0 * net.output_scale() / static_cast<double>(b)) * err;
      for (std::size_t l = n_layers - 1; l > 0; --l) {
        deltas[l - 1] =
            ((layers[l].weight.transpose() * deltas[l]).array() * (1.0 - acts[l].array().square())).matrix();
      }
      Vec grad(weights.size());
      Eigen::Index offset = 0;
      for (std::size_t l = 0; l < n_layers; ++l) {
        const Mat gw = deltas[l] * acts[l].transpose();
        for (Eigen::Index i = 0; i < gw.rows(); ++i)
          for (Eigen::Index c = 0; c < gw.cols(); ++c) grad[offset++] = gw(i, c);
        grad.segment(offset, gw.rows()) = deltas[l].rowwise().sum();
        offset += gw.rows();
      }
      adam.step(weights, grad, config.learning_rate);
      net.set_flat_weights(weights);
      ++step;
      if (step % config.target_refresh_interval == 0) refresh_targets();
    }
    const double mean_loss = epoch_loss / static_cast<double>(count);
    if (!std::isfinite(mean_loss)) throw TrainingDivergence("fit_td: non-finite epoch loss", step);
    result.epoch_loss.push_back(mean_loss);
  }
  result.network = std::move(net);
  return result;
}

}  // namespace ompc
