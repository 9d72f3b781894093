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
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace seqtrain {

// Name of the dataset input stream; never a layer name.
inline constexpr std::string_view kDataSource = "data";

// One entry of the network description. Recognised keys: "class", "from",
// "n_out", "direction", "loss", "dropout", "activation".
struct LayerSpec {
  std::string name;
  std::string kind;                 // linear | softmax | lstm
  std::vector<std::string> inputs;  // defaults to {"data"}
  std::size_t n_out = 0;
  int direction = 1;       // lstm only
  double dropout = 0.0;    // applied to the (concatenated) layer input
  std::string activation;  // linear only; empty means identity
  std::string loss;        // empty | ce (softmax) | mse (linear)

  bool has_loss() const { return !loss.empty(); }
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Layers reachable from a loss layer, in topological order. Ready layers
// are emitted lexicographically by name.
struct LayerGraph {
  std::vector<LayerSpec> specs;
  std::vector<std::string> outputs;  // loss-bearing layers, sorted

  const LayerSpec& find(std::string_view name) const;
  bool contains(std::string_view name) const;
  friend bool operator==(const LayerGraph&, const LayerGraph&) = default;
};

const std::vector<std::string>& registered_layer_kinds();

LayerGraph parse_network(std::string_view json_text);
// Canonical JSON for a graph; parse_network(serialize_network(g)) == g.
std::string serialize_network(const LayerGraph& graph);

enum class Task { train, eval, forward };
std::string task_name(Task task);

struct OptimizerConfig {
  std::string rule = "adam";  // sgd momentum nesterov adagrad adadelta adam
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double rho = 0.95;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct ConditioningConfig {
  double l2 = 0.0;
  double max_global_norm = 0.0;  // 0 disables clipping
  double gradient_noise = 0.0;   // stddev; 0 disables
  double max_norm = 0.0;         // row max-norm projection after update; 0 disables
};

struct ScheduleConfig {
  double decay = 0.7;
  double min_relative_improvement = 0.005;
  std::string key = "ce";  // ce | fer
};

struct ExperimentConfig {
  Task task = Task::train;
  LayerGraph network;
  std::string network_json;  // canonical description, stored in checkpoints

  std::string train;  // dataset path or "synth:" descriptor
  std::string dev;
  std::string eval;

  std::size_t num_epochs = 10;
  std::size_t max_chunks_per_batch = 16;
  std::size_t chunk_size = 250;
  std::size_t chunk_step = 250;

  OptimizerConfig optimizer;
  ConditioningConfig conditioning;
  ScheduleConfig schedule;

  std::uint64_t seed = 1;
  std::size_t num_workers = 1;
  std::size_t sync_interval_batches = 0;  // 0: one full epoch per round
  std::size_t cache_byte_cap = std::size_t{256} << 20;
  std::string transport = "inproc";  // inproc | socket
  bool weighted_averaging = false;
  bool reset_slots_on_sync = false;

  std::string load;  // checkpoint to start from
  std::vector<std::string> forward_layers;
  std::string output;  // activation file for task=forward
  std::string out_dir = ".";
  std::string log_file;  // defaults to <out_dir>/seqtrain.log
  std::string verbosity = "info";
};

// Top-level keys accepted in a configuration file.
const std::vector<std::string>& config_keys();

// Parses a combined configuration (network under key "network"), after
// applying "key=value" overrides. Values are parsed as JSON when possible,
// otherwise taken as strings.
ExperimentConfig parse_config(std::string_view json_text,
                              std::span<const std::string> overrides = {});

}  // namespace seqtrain
