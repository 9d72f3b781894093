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

#include "seqtrain/net_config.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <queue>
#include <set>

#include "json.hpp"
#include "seqtrain/error.hpp"
#include "seqtrain/tensor.hpp"

namespace seqtrain {

using nlohmann::json;

namespace {

json parse_json_strict(std::string_view text, const std::string& what) {
  std::vector<std::set<std::string>> keys;
  std::string duplicate;
  json::parser_callback_t cb = [&](int, json::parse_event_t ev, json& parsed) {
    switch (ev) {
      case json::parse_event_t::object_start:
        keys.emplace_back();
        break;
      case json::parse_event_t::object_end:
        if (!keys.empty()) keys.pop_back();
        break;
      case json::parse_event_t::key:
        if (!keys.empty() && !keys.back().insert(parsed.get<std::string>()).second &&
            duplicate.empty()) {
          duplicate = parsed.get<std::string>();
        }
        break;
      default:
        break;
    }
    return true;
  };
  json j;
  try {
    j = json::parse(text.begin(), text.end(), cb);
  } catch (const json::parse_error& e) {
    throw ConfigError(what + ": invalid JSON: " + e.what());
  }
  if (!duplicate.empty()) throw ConfigError(what + ": duplicate key '" + duplicate + "'");
  return j;
}

const std::set<std::string>& layer_keys() {
  static const std::set<std::string> keys = {"class", "from", "n_out", "direction",
                                             "loss", "dropout", "activation"};
  return keys;
}

LayerSpec layer_from_json(const std::string& name, const json& d) {
  if (name == kDataSource) throw ConfigError("layer name 'data' is reserved for the input stream");
  if (name.empty() || name.find('/') != std::string::npos) {
    throw ConfigError("layer name '" + name + "' must be non-empty and free of '/'");
  }
  if (!d.is_object()) throw ConfigError("layer '" + name + "': description must be an object");
  for (const auto& [key, _] : d.items()) {
    if (!layer_keys().count(key)) throw ConfigError("layer '" + name + "': unknown key '" + key + "'");
  }
  LayerSpec s;
  s.name = name;
  if (!d.contains("class") || !d["class"].is_string()) {
    throw ConfigError("layer '" + name + "': missing \"class\"");
  }
  s.kind = d["class"].get<std::string>();
  const auto& kinds = registered_layer_kinds();
  if (std::find(kinds.begin(), kinds.end(), s.kind) == kinds.end()) {
    throw ConfigError("layer '" + name + "': unknown layer class '" + s.kind + "'");
  }

  if (d.contains("from")) {
    const auto& f = d["from"];
    if (f.is_string()) {
      s.inputs.push_back(f.get<std::string>());
    } else if (f.is_array()) {
      for (const auto& e : f) {
        if (!e.is_string()) throw ConfigError("layer '" + name + "': \"from\" entries must be strings");
        s.inputs.push_back(e.get<std::string>());
      }
    } else {
      throw ConfigError("layer '" + name + "': \"from\" must be a string or list");
    }
    if (s.inputs.empty()) throw ConfigError("layer '" + name + "': \"from\" is empty");
  } else {
    s.inputs.emplace_back(kDataSource);
  }

  if (!d.contains("n_out") || !d["n_out"].is_number_integer() || d["n_out"].get<long long>() <= 0) {
    throw ConfigError("layer '" + name + "': \"n_out\" must be a positive integer");
  }
  s.n_out = d["n_out"].get<std::size_t>();

  if (d.contains("direction")) {
    if (s.kind != "lstm") throw ConfigError("layer '" + name + "': \"direction\" only applies to lstm");
    if (!d["direction"].is_number_integer()) {
      throw ConfigError("layer '" + name + "': \"direction\" must be +1 or -1");
    }
    const auto dir = d["direction"].get<long long>();
    if (dir != 1 && dir != -1) throw ConfigError("layer '" + name + "': \"direction\" must be +1 or -1");
    s.direction = static_cast<int>(dir);
  }

  if (d.contains("dropout")) {
    if (!d["dropout"].is_number()) throw ConfigError("layer '" + name + "': \"dropout\" must be a number");
    s.dropout = d["dropout"].get<double>();
    if (!(s.dropout >= 0.0 && s.dropout < 1.0)) {
      throw ConfigError("layer '" + name + "': \"dropout\" must lie in [0, 1)");
    }
  }

  if (d.contains("activation")) {
    if (s.kind != "linear") throw ConfigError("layer '" + name + "': \"activation\" only applies to linear");
    if (!d["activation"].is_string()) throw ConfigError("layer '" + name + "': \"activation\" must be a string");
    s.activation = d["activation"].get<std::string>();
    parse_activation(s.activation);
  }

  if (d.contains("loss")) {
    if (!d["loss"].is_string()) throw ConfigError("layer '" + name + "': \"loss\" must be a string");
    s.loss = d["loss"].get<std::string>();
    if (s.loss == "ce") {
      if (s.kind != "softmax") throw ConfigError("layer '" + name + "': loss 'ce' requires class softmax");
    } else if (s.loss == "mse") {
      if (s.kind != "linear") throw ConfigError("layer '" + name + "': loss 'mse' requires class linear");
    } else {
      throw ConfigError("layer '" + name + "': unknown loss '" + s.loss + "'");
    }
  }
  return s;
}

LayerGraph network_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("network description must be a JSON object");
  std::map<std::string, LayerSpec> all;
  for (const auto& [name, d] : j.items()) all.emplace(name, layer_from_json(name, d));

  std::vector<std::string> losses;
  for (const auto& [name, s] : all) {
    if (s.has_loss()) losses.push_back(name);
  }
  if (losses.empty()) throw ConfigError("network has no layer with a loss");

  // Reachability over reversed edges, starting at the loss layers.
  std::set<std::string> reachable;
  std::vector<std::string> stack = losses;
  while (!stack.empty()) {
    auto name = std::move(stack.back());
    stack.pop_back();
    if (!reachable.insert(name).second) continue;
    for (const auto& in : all.at(name).inputs) {
      if (in == kDataSource) continue;
      if (!all.count(in)) throw ConfigError("layer '" + name + "': unknown input '" + in + "'");
      stack.push_back(in);
    }
  }

  // Kahn's algorithm; lexicographic among ready layers.
  std::map<std::string, std::size_t> pending;
  std::map<std::string, std::vector<std::string>> consumers;
  for (const auto& name : reachable) {
    std::set<std::string> distinct;
    for (const auto& in : all.at(name).inputs) {
      if (in != kDataSource) distinct.insert(in);
    }
    pending[name] = distinct.size();
    for (const auto& in : distinct) consumers[in].push_back(name);
  }
  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
  for (const auto& [name, n] : pending) {
    if (n == 0) ready.push(name);
  }
  LayerGraph g;
  while (!ready.empty()) {
    auto name = ready.top();
    ready.pop();
    g.specs.push_back(all.at(name));
    for (const auto& c : consumers[name]) {
      if (--pending[c] == 0) ready.push(c);
    }
  }
  if (g.specs.size() != reachable.size()) {
    std::string members;
    for (const auto& [name, n] : pending) {
      if (n > 0) members += (members.empty() ? "" : ", ") + name;
    }
    throw ConfigError("network contains a cycle through: " + members);
  }
  g.outputs = losses;
  return g;
}

json network_to_json(const LayerGraph& graph) {
  json j = json::object();
  for (const auto& s : graph.specs) {
    json d = json::object();
    d["class"] = s.kind;
    d["from"] = s.inputs;
    d["n_out"] = s.n_out;
    if (s.kind == "lstm") d["direction"] = s.direction;
    if (s.dropout != 0.0) d["dropout"] = s.dropout;
    if (!s.activation.empty()) d["activation"] = s.activation;
    if (!s.loss.empty()) d["loss"] = s.loss;
    j[s.name] = std::move(d);
  }
  return j;
}

// ---------------------------------------------------------------------------
// Config field readers

std::size_t get_count(const json& j, const std::string& key, std::size_t def, std::size_t min_value) {
  if (!j.contains(key)) return def;
  const auto& v = j[key];
  if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(min_value)) {
    throw ConfigError("config key '" + key + "' must be an integer >= " + std::to_string(min_value));
  }
  return v.get<std::size_t>();
}

double get_real(const json& j, const std::string& key, double def) {
  if (!j.contains(key)) return def;
  const auto& v = j[key];
  if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError("config key '" + key + "' must be finite");
  return x;
}

double get_nonneg(const json& j, const std::string& key, double def) {
  const double x = get_real(j, key, def);
  if (x < 0.0) throw ConfigError("config key '" + key + "' must be non-negative");
  return x;
}

std::string get_string(const json& j, const std::string& key, const std::string& def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_string()) throw ConfigError("config key '" + key + "' must be a string");
  return j[key].get<std::string>();
}

bool get_bool(const json& j, const std::string& key, bool def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_boolean()) throw ConfigError("config key '" + key + "' must be true or false");
  return j[key].get<bool>();
}

}  // namespace

const LayerSpec& LayerGraph::find(std::string_view name) const {
  for (const auto& s : specs) {
    if (s.name == name) return s;
  }
  throw ConfigError("no layer named '" + std::string(name) + "'");
}

bool LayerGraph::contains(std::string_view name) const {
  return std::any_of(specs.begin(), specs.end(), [&](const auto& s) { return s.name == name; });
}

const std::vector<std::string>& registered_layer_kinds() {
  static const std::vector<std::string> kinds = {"linear", "lstm", "softmax"};
  return kinds;
}

LayerGraph parse_network(std::string_view json_text) {
  return network_from_json(parse_json_strict(json_text, "network"));
}

std::string serialize_network(const LayerGraph& graph) { return network_to_json(graph).dump(2); }

std::string task_name(Task task) {
  switch (task) {
    case Task::train: return "train";
    case Task::eval: return "eval";
    case Task::forward: return "forward";
  }
  return "train";
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "task", "network", "train", "dev", "eval", "num_epochs", "max_chunks_per_batch",
      "chunk_size", "chunk_step", "optimizer", "learning_rate", "momentum", "rho", "beta1",
      "beta2", "epsilon", "l2", "max_global_norm", "gradient_noise", "max_norm", "lr_decay",
      "min_relative_improvement", "lr_schedule_key", "seed", "num_workers",
      "sync_interval_batches", "cache_byte_cap", "transport", "weighted_averaging",
      "reset_slots_on_sync", "load", "forward_layers", "output", "out_dir", "log_file",
      "verbosity"};
  return keys;
}

ExperimentConfig parse_config(std::string_view json_text, std::span<const std::string> overrides) {
  json j = parse_json_strict(json_text, "config");
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  const auto& keys = config_keys();
  for (const auto& [key, _] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("override '" + kv + "' is not of the form key=value");
    }
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError("unknown override key '" + key + "'");
    }
    json parsed = json::parse(value, nullptr, false);
    j[key] = parsed.is_discarded() ? json(value) : parsed;
  }

  ExperimentConfig c;
  const auto task = get_string(j, "task", "");
  if (task == "train") c.task = Task::train;
  else if (task == "eval") c.task = Task::eval;
  else if (task == "forward") c.task = Task::forward;
  else if (task.empty()) throw ConfigError("config is missing required key 'task'");
  else throw ConfigError("unknown task '" + task + "'");

  if (!j.contains("network")) throw ConfigError("config is missing required key 'network'");
  c.network = network_from_json(j["network"]);
  c.network_json = serialize_network(c.network);

  c.train = get_string(j, "train", "");
  c.dev = get_string(j, "dev", "");
  c.eval = get_string(j, "eval", "");
  if (c.task == Task::train && c.train.empty()) {
    throw ConfigError("task 'train' requires the 'train' dataset");
  }
  if (c.task != Task::train) {
    if (c.eval.empty()) throw ConfigError("task '" + task + "' requires the 'eval' dataset");
    if (!j.contains("load")) throw ConfigError("task '" + task + "' requires 'load'");
  }

  c.num_epochs = get_count(j, "num_epochs", c.num_epochs, 1);
  c.max_chunks_per_batch = get_count(j, "max_chunks_per_batch", c.max_chunks_per_batch, 1);
  c.chunk_size = get_count(j, "chunk_size", c.chunk_size, 1);
  c.chunk_step = get_count(j, "chunk_step", c.chunk_size, 1);
  if (c.chunk_step > c.chunk_size) {
    throw ConfigError("chunk_step (" + std::to_string(c.chunk_step) + ") must not exceed chunk_size (" +
                      std::to_string(c.chunk_size) + ")");
  }

  auto& o = c.optimizer;
  o.rule = get_string(j, "optimizer", o.rule);
  static const std::set<std::string> rules = {"sgd", "momentum", "nesterov", "adagrad", "adadelta", "adam"};
  if (!rules.count(o.rule)) throw ConfigError("unknown optimizer '" + o.rule + "'");
  o.learning_rate = get_real(j, "learning_rate", o.learning_rate);
  if (!(o.learning_rate > 0.0)) throw ConfigError("config key 'learning_rate' must be positive");
  o.momentum = get_nonneg(j, "momentum", o.momentum);
  o.rho = get_nonneg(j, "rho", o.rho);
  o.beta1 = get_nonneg(j, "beta1", o.beta1);
  o.beta2 = get_nonneg(j, "beta2", o.beta2);
  o.epsilon = get_nonneg(j, "epsilon", o.epsilon);
  if (o.momentum >= 1.0 || o.rho >= 1.0 || o.beta1 >= 1.0 || o.beta2 >= 1.0) {
    throw ConfigError("momentum, rho, beta1 and beta2 must lie in [0, 1)");
  }

  auto& g = c.conditioning;
  g.l2 = get_nonneg(j, "l2", g.l2);
  g.max_global_norm = get_nonneg(j, "max_global_norm", g.max_global_norm);
  g.gradient_noise = get_nonneg(j, "gradient_noise", g.gradient_noise);
  g.max_norm = get_nonneg(j, "max_norm", g.max_norm);

  auto& s = c.schedule;
  s.decay = get_real(j, "lr_decay", s.decay);
  if (!(s.decay > 0.0 && s.decay < 1.0)) throw ConfigError("config key 'lr_decay' must lie in (0, 1)");
  s.min_relative_improvement = get_nonneg(j, "min_relative_improvement", s.min_relative_improvement);
  s.key = get_string(j, "lr_schedule_key", s.key);
  if (s.key != "ce" && s.key != "fer") throw ConfigError("lr_schedule_key must be 'ce' or 'fer'");

  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer() || j["seed"].get<long long>() < 0) {
      throw ConfigError("config key 'seed' must be a non-negative integer");
    }
    c.seed = j["seed"].get<std::uint64_t>();
  }
  c.num_workers = get_count(j, "num_workers", c.num_workers, 1);
  // 0 means one round per epoch.
  c.sync_interval_batches = get_count(j, "sync_interval_batches", 0, 0);
  c.cache_byte_cap = get_count(j, "cache_byte_cap", c.cache_byte_cap, 0);
  c.transport = get_string(j, "transport", c.transport);
  if (c.transport != "inproc" && c.transport != "socket") {
    throw ConfigError("transport must be 'inproc' or 'socket'");
  }
  c.weighted_averaging = get_bool(j, "weighted_averaging", c.weighted_averaging);
  c.reset_slots_on_sync = get_bool(j, "reset_slots_on_sync", c.reset_slots_on_sync);

  c.load = get_string(j, "load", "");
  if (j.contains("forward_layers")) {
    const auto& f = j["forward_layers"];
    if (f.is_string()) {
      c.forward_layers.push_back(f.get<std::string>());
    } else if (f.is_array()) {
      for (const auto& e : f) {
        if (!e.is_string()) throw ConfigError("forward_layers entries must be strings");
        c.forward_layers.push_back(e.get<std::string>());
      }
    } else {
      throw ConfigError("forward_layers must be a string or list of strings");
    }
  }
  c.output = get_string(j, "output", "");
  if (c.task == Task::forward) {
    if (c.output.empty()) throw ConfigError("task 'forward' requires 'output'");
    if (c.forward_layers.empty()) c.forward_layers = c.network.outputs;
  }
  c.out_dir = get_string(j, "out_dir", c.out_dir);
  c.log_file = get_string(j, "log_file", "");
  c.verbosity = get_string(j, "verbosity", c.verbosity);
  if (c.verbosity != "info" && c.verbosity != "debug") {
    throw ConfigError("verbosity must be 'info' or 'debug'");
  }
  return c;
}

}  // namespace seqtrain
