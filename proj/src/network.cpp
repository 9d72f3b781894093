/* Copyright (c) 2026 The seqtrain Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#include "seqtrain/network.hpp"

#include <cmath>

#include "seqtrain/error.hpp"
#include "seqtrain/layers.hpp"

namespace seqtrain {

struct Network::Pass {
  struct Layer {
    DropoutCache dropout;
    LinearCache linear;
    LstmCache lstm;
    std::vector<std::size_t> widths;
  };
  const SeqTensor* inputs = nullptr;
  std::map<std::string, SeqTensor> outputs;
  std::map<std::string, Layer> layers;
  std::map<std::string, SeqTensor> grads;
};

namespace {

LstmParams lstm_params(const ParamSet& params, const std::string& name) {
  return {params.at(name + "/W"), params.at(name + "/R"), params.at(name + "/b")};
}

void accumulate(std::map<std::string, SeqTensor>& grads, const std::string& name, SeqTensor g) {
  auto it = grads.find(name);
  if (it == grads.end()) {
    grads.emplace(name, std::move(g));
    return;
  }
  auto dst = it->second.values.data();
  auto src = g.values.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void glorot(Tensor& t, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(t.dim(0) + t.dim(1)));
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
}

}  // namespace

Network::Network(LayerGraph graph, std::size_t input_dim) : graph_(std::move(graph)), input_dim_(input_dim) {
  if (input_dim_ == 0) throw ConfigError("network input dimension must be positive");
  for (const auto& s : graph_.specs) {
    std::size_t in = 0;
    for (const auto& src : s.inputs) {
      if (src == kDataSource) {
        in += input_dim_;
        continue;
      }
      if (graph_.find(src).kind == "softmax") {
        throw ConfigError("layer '" + s.name + "': softmax layer '" + src + "' cannot feed other layers");
      }
      in += out_dims_.at(src);
    }
    if (s.kind == "softmax" && !s.has_loss()) {
      throw ConfigError("layer '" + s.name + "': softmax layers must carry a loss");
    }
    in_dims_[s.name] = in;
    out_dims_[s.name] = s.n_out;
  }
  for (const auto& name : graph_.outputs) {
    if (graph_.find(name).loss == "ce") {
      primary_ = name;
      break;
    }
  }
  if (primary_.empty() && !graph_.outputs.empty()) primary_ = graph_.outputs.front();
}

std::size_t Network::output_dim(const std::string& layer) const {
  auto it = out_dims_.find(layer);
  if (it == out_dims_.end()) throw ConfigError("unknown layer '" + layer + "'");
  return it->second;
}

std::map<std::string, Dims> Network::param_shapes() const {
  std::map<std::string, Dims> shapes;
  for (const auto& s : graph_.specs) {
    const std::size_t in = in_dims_.at(s.name), out = s.n_out;
    if (s.kind == "lstm") {
      shapes[s.name + "/W"] = {in, 4 * out};
      shapes[s.name + "/R"] = {out, 4 * out};
      shapes[s.name + "/b"] = {4 * out};
    } else {
      shapes[s.name + "/W"] = {in, out};
      shapes[s.name + "/b"] = {out};
    }
  }
  return shapes;
}

void Network::check_params(const ParamSet& params) const {
  const auto shapes = param_shapes();
  for (const auto& [name, dims] : shapes) {
    if (!params.contains(name)) throw ShapeError("parameter '" + name + "' missing");
    const auto& got = params.at(name).dims();
    if (got != dims) {
      throw ShapeError("parameter '" + name + "': expected dims " + dims_to_string(dims) + ", got " +
                       dims_to_string(got));
    }
  }
  for (const auto& [name, t] : params) {
    if (!shapes.count(name)) throw ShapeError("unexpected parameter '" + name + "'");
  }
}

void Network::check_dataset(const DatasetInfo& info) const {
  if (info.input_dim != input_dim_) {
    throw ConfigError("dataset input_dim " + std::to_string(info.input_dim) + " != network input_dim " +
                      std::to_string(input_dim_));
  }
  for (const auto& name : graph_.outputs) {
    const auto& s = graph_.find(name);
    const bool want_sparse = s.loss == "ce";
    if (want_sparse != (info.target_kind == TargetKind::sparse)) {
      throw ConfigError("layer '" + name + "': loss '" + s.loss + "' does not match dataset targets");
    }
    if (s.n_out != info.target_dim) {
      throw ConfigError("layer '" + name + "': n_out " + std::to_string(s.n_out) + " != dataset target dim " +
                        std::to_string(info.target_dim));
    }
  }
}

void Network::forward(const ParamSet& params, const SeqTensor& inputs, Rng* rng, Pass& pass) const {
  if (inputs.features() != input_dim_) {
    throw ShapeError("network input has " + std::to_string(inputs.features()) + " features, expected " +
                     std::to_string(input_dim_));
  }
  pass.inputs = &inputs;
  for (const auto& s : graph_.specs) {
    auto& st = pass.layers[s.name];
    std::vector<SeqTensor> parts;
    for (const auto& src : s.inputs) {
      parts.push_back(src == kDataSource ? inputs : pass.outputs.at(src));
      st.widths.push_back(parts.back().features());
    }
    SeqTensor x = parts.size() == 1 ? std::move(parts.front()) : concat_features(parts);
    if (rng && s.dropout > 0.0) {
      auto [dropped, cache] = dropout_forward(x, s.dropout, *rng, true);
      x = std::move(dropped);
      st.dropout = std::move(cache);
    }
    if (s.kind == "lstm") {
      auto [h, cache] = lstm_forward(x, lstm_params(params, s.name), parse_direction(s.direction));
      st.lstm = std::move(cache);
      pass.outputs[s.name] = std::move(h);
    } else {
      const auto act = s.kind == "softmax" || s.activation.empty() ? Activation::identity
                                                                   : parse_activation(s.activation);
      auto [y, cache] = linear_forward(x, params.at(s.name + "/W"), params.at(s.name + "/b"), act);
      st.linear = std::move(cache);
      pass.outputs[s.name] = std::move(y);
    }
  }
}

BatchStats Network::losses(const Batch& batch, Pass& pass, bool need_grad) const {
  BatchStats stats;
  for (const auto& name : graph_.outputs) {
    const auto& s = graph_.find(name);
    const auto& y = pass.outputs.at(name);
    LossResult r = s.loss == "ce" ? softmax_ce(y, batch.labels) : mse(y, batch.dense);
    if (!std::isfinite(r.loss)) throw TrainingError("non-finite loss at layer '" + name + "'");
    stats.loss += r.loss;
    if (name == primary_) {
      stats.frames = r.frames;
      stats.errors = r.frame_errors;
    }
    if (need_grad) accumulate(pass.grads, name, std::move(r.grad_wrt_input));
  }
  return stats;
}

void Network::backward(Pass& pass, ParamSet& grads) const {
  for (auto it = graph_.specs.rbegin(); it != graph_.specs.rend(); ++it) {
    const auto& s = *it;
    auto g = pass.grads.find(s.name);
    if (g == pass.grads.end()) continue;
    auto& st = pass.layers.at(s.name);
    SeqTensor dx;
    if (s.kind == "lstm") {
      auto lg = lstm_backward(st.lstm, g->second);
      grads.at(s.name + "/W") = std::move(lg.dW);
      grads.at(s.name + "/R") = std::move(lg.dR);
      grads.at(s.name + "/b") = std::move(lg.db);
      dx = std::move(lg.d_input);
    } else {
      auto lg = linear_backward(st.linear, g->second);
      grads.at(s.name + "/W") = std::move(lg.d_weights);
      grads.at(s.name + "/b") = std::move(lg.d_bias);
      dx = std::move(lg.d_input);
    }
    pass.grads.erase(g);
    dx = dropout_backward(st.dropout, dx);
    auto parts = s.inputs.size() == 1 ? std::vector<SeqTensor>{std::move(dx)} : split_features(dx, st.widths);
    for (std::size_t i = 0; i < s.inputs.size(); ++i) {
      if (s.inputs[i] != kDataSource) accumulate(pass.grads, s.inputs[i], std::move(parts[i]));
    }
  }
}

StepResult Network::train_step(const ParamSet& params, const Batch& batch, Rng& rng) const {
  Pass pass;
  forward(params, batch.inputs, &rng, pass);
  StepResult res;
  res.stats = losses(batch, pass, true);
  res.grads = params.zeros_like();
  backward(pass, res.grads);
  return res;
}

BatchStats Network::evaluate_batch(const ParamSet& params, const Batch& batch) const {
  Pass pass;
  forward(params, batch.inputs, nullptr, pass);
  return losses(batch, pass, false);
}

std::map<std::string, SeqTensor> Network::activations(const ParamSet& params, const SeqTensor& inputs,
                                                      std::span<const std::string> layers) const {
  for (const auto& name : layers) {
    if (!graph_.contains(name)) throw ConfigError("unknown layer '" + name + "'");
  }
  Pass pass;
  forward(params, inputs, nullptr, pass);
  std::map<std::string, SeqTensor> out;
  for (const auto& name : layers) {
    SeqTensor y = pass.outputs.at(name);
    if (graph_.find(name).kind == "softmax") {
      y.values = softmax_rows(y.values);
      y = apply_mask(std::move(y));
    }
    out.emplace(name, std::move(y));
  }
  return out;
}

std::pair<Network, ParamSet> build_network(const LayerGraph& graph, std::size_t input_dim, std::uint64_t seed) {
  Network net(graph, input_dim);
  ParamSet params;
  const auto shapes = net.param_shapes();
  for (const auto& s : graph.specs) {
    Rng rng(derive_seed({seed, hash_string(s.name)}));
    Tensor W(shapes.at(s.name + "/W"));
    glorot(W, rng);
    params.add(s.name + "/W", std::move(W));
    if (s.kind == "lstm") {
      Tensor R(shapes.at(s.name + "/R"));
      glorot(R, rng);
      params.add(s.name + "/R", std::move(R));
      Tensor b(shapes.at(s.name + "/b"));
      for (std::size_t j = s.n_out; j < 2 * s.n_out; ++j) b[j] = 1.0;
      params.add(s.name + "/b", std::move(b));
    } else {
      params.add(s.name + "/b", Tensor(shapes.at(s.name + "/b")));
    }
  }
  return {std::move(net), std::move(params)};
}

}  // namespace seqtrain
