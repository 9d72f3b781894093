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

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "seqtrain/data.hpp"
#include "seqtrain/net_config.hpp"
#include "seqtrain/param_set.hpp"
#include "seqtrain/rng.hpp"
#include "seqtrain/tensor.hpp"

namespace seqtrain {

// Loss and frame statistics of one batch. Frames and errors come from the
// primary output: the first "ce" layer, else the first output.
struct BatchStats {
  double loss = 0.0;
  std::size_t frames = 0;
  std::size_t errors = 0;
};

struct StepResult {
  BatchStats stats;
  ParamSet grads;
};

// Instantiated layer graph. Holds shapes only; parameters live in a
// ParamSet named "<layer>/<tensor>".
class Network {
 public:
  Network() = default;
  Network(LayerGraph graph, std::size_t input_dim);

  const LayerGraph& graph() const { return graph_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim(const std::string& layer) const;
  const std::string& primary_output() const { return primary_; }

  // Parameter shapes in canonical order.
  std::map<std::string, Dims> param_shapes() const;
  // Throws ShapeError naming the first missing, extra or misshaped tensor.
  void check_params(const ParamSet& params) const;
  // Throws ConfigError if the dataset cannot feed this network's losses.
  void check_dataset(const DatasetInfo& info) const;

  // Loss and gradients of the summed loss over all output layers. rng
  // drives dropout; pass training=false for the deterministic forward.
  StepResult train_step(const ParamSet& params, const Batch& batch, Rng& rng) const;
  BatchStats evaluate_batch(const ParamSet& params, const Batch& batch) const;
  // Layer outputs in evaluation mode. Softmax layers yield posteriors.
  std::map<std::string, SeqTensor> activations(const ParamSet& params, const SeqTensor& inputs,
                                               std::span<const std::string> layers) const;

 private:
  struct Pass;
  void forward(const ParamSet& params, const SeqTensor& inputs, Rng* rng, Pass& pass) const;
  BatchStats losses(const Batch& batch, Pass& pass, bool need_grad) const;
  void backward(Pass& pass, ParamSet& grads) const;

  LayerGraph graph_;
  std::size_t input_dim_ = 0;
  std::map<std::string, std::size_t> out_dims_;
  std::map<std::string, std::size_t> in_dims_;
  std::string primary_;
};

// Uniform Glorot initialisation; biases zero except LSTM forget gates at
// 1. Each layer draws from its own stream seeded by (seed, layer name).
std::pair<Network, ParamSet> build_network(const LayerGraph& graph, std::size_t input_dim,
                                           std::uint64_t seed);

}  // namespace seqtrain
