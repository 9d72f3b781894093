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
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "seqtrain/binary_io.hpp"
#include "seqtrain/data.hpp"
#include "seqtrain/log.hpp"
#include "seqtrain/net_config.hpp"
#include "seqtrain/network.hpp"
#include "seqtrain/optim.hpp"
#include "seqtrain/param_set.hpp"

namespace seqtrain {

// Everything needed to continue training exactly. Dropout and noise
// streams are derived from (seed, epoch, batch), so no generator state is
// carried.
struct TrainState {
  std::size_t epoch = 0;  // completed epochs
  OptimizerState optimizer;
  LrSchedule schedule;
  double best_dev_score = std::numeric_limits<double>::infinity();

  static TrainState from_config(const ExperimentConfig& cfg);
  friend bool operator==(const TrainState&, const TrainState&) = default;
};

struct EvalResult {
  double loss_sum = 0.0;
  std::size_t frames = 0;
  std::size_t errors = 0;

  double loss_per_frame() const;
  double fer() const;
};

struct EpochReport {
  std::size_t epoch = 0;
  double lr = 0.0;  // rate used during the epoch
  double train_loss_sum = 0.0;
  std::size_t train_frames = 0;
  std::size_t train_errors = 0;
  bool has_dev = false;
  double dev_loss = 0.0;  // per frame
  double dev_fer = 0.0;
  double wall_seconds = 0.0;
  std::size_t batches = 0;

  double train_ce() const;
  double train_fer() const;
  std::string log_line() const;
};

// Seed of the batch order of one epoch and of the stream used for
// dropout and gradient noise within one batch.
std::uint64_t epoch_shuffle_seed(std::uint64_t seed, std::size_t epoch);
std::uint64_t batch_seed(std::uint64_t seed, std::size_t epoch, std::size_t batch_index);

// Chunks of a training set and the batch plan of a given epoch.
std::vector<Chunk> training_chunks(const Dataset& data, const ExperimentConfig& cfg);
std::vector<std::vector<std::size_t>> epoch_plan(std::size_t num_chunks, const ExperimentConfig& cfg,
                                                 std::size_t epoch);
Batch plan_batch(const Dataset& data, std::span<const Chunk> chunks, std::span<const std::size_t> members,
                 std::size_t chunk_size);

// forward, loss, backward, conditioning, update, optional max-norm.
BatchStats train_batch(const Network& net, ParamSet& params, const Batch& batch, const ExperimentConfig& cfg,
                       OptimizerState& opt, std::size_t epoch, std::size_t batch_index);

// Trains epoch state.epoch + 1 and advances state.epoch. The report has
// no dev fields filled in.
EpochReport train_epoch(const Network& net, ParamSet& params, const Dataset& data, const ExperimentConfig& cfg,
                        TrainState& state);

// Whole sequences, batch_size at a time in id order, dropout off.
EvalResult evaluate(const Network& net, const ParamSet& params, const Dataset& data, std::size_t batch_size);

// RTNM checkpoint.
struct Checkpoint {
  ParamSet params;
  TrainState state;
  std::string network_json;
  std::size_t input_dim = 0;
};

Bytes encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// RTNA activation file.
struct ActivationRecord {
  std::uint64_t seq_id = 0;
  Tensor values;  // [L, D]
};

struct ActivationFile {
  std::string layer;
  std::vector<ActivationRecord> records;
};

Bytes encode_activations(const ActivationFile& file);
ActivationFile decode_activations(std::span<const std::uint8_t> bytes);
ActivationFile read_activations(const std::string& path);

// Writes one file per layer: `path` for a single layer, `path.<layer>`
// otherwise. Returns the paths written.
std::vector<std::string> forward_dump(const Network& net, const ParamSet& params, const Dataset& data,
                                      std::span<const std::string> layers, const std::string& path,
                                      std::size_t batch_size);

// A configured experiment with its datasets, network and state.
struct Session {
  ExperimentConfig cfg;
  std::shared_ptr<Dataset> train;
  std::shared_ptr<Dataset> dev;
  std::shared_ptr<Dataset> eval;
  Network net;
  ParamSet params;
  TrainState state;
};

// Opens the configured datasets and builds the network, restoring
// parameters and training state from cfg.load when set.
Session open_session(const ExperimentConfig& cfg);
Checkpoint session_checkpoint(const Session& s);

using EpochRunner = std::function<EpochReport(ParamSet& params, TrainState& state)>;
EpochRunner sequential_runner(const Session& s);

// Epoch loop: train, evaluate dev, step the schedule, log, and write
// <out_dir>/epoch<N>.rtnm and best.rtnm when out_dir is non-empty.
std::vector<EpochReport> run_training(Session& s, const EpochRunner& runner, Logger& log);

}  // namespace seqtrain
