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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "seqtrain/binary_io.hpp"
#include "seqtrain/data.hpp"
#include "seqtrain/engine.hpp"
#include "seqtrain/network.hpp"
#include "seqtrain/param_set.hpp"

namespace seqtrain {

// RTNP frame: "RTNP", version u8 = 1, msg_type u8, worker_id u32,
// payload_len u64, payload, crc32 u32 of the payload.
enum class MsgType : std::uint8_t { hello = 1, assign = 2, params = 3, updated_params = 4, done = 5, abort = 6 };

std::string msg_type_name(MsgType type);

struct Message {
  MsgType type = MsgType::hello;
  std::uint32_t worker_id = 0;
  Bytes payload;
  friend bool operator==(const Message&, const Message&) = default;
};

inline constexpr std::size_t kFrameHeaderBytes = 18;
inline constexpr std::size_t kFrameTrailerBytes = 4;

Bytes encode_message(const Message& msg);
// Exactly one complete frame.
Message decode_message(std::span<const std::uint8_t> frame);

// Incremental decoder: accepts arbitrary byte fragments and yields only
// complete, checksum-verified messages.
class FrameDecoder {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  std::optional<Message> next();
  std::size_t buffered() const { return buf_.size() - pos_; }

 private:
  Bytes buf_;
  std::size_t pos_ = 0;
};

// ASSIGN payload: epoch u64, lr f64, count u64, batch ids u64 x count.
struct Assignment {
  std::uint64_t epoch = 0;
  double lr = 0.0;
  std::vector<std::uint64_t> batch_ids;
  friend bool operator==(const Assignment&, const Assignment&) = default;
};
Bytes encode_assignment(const Assignment& a);
Assignment decode_assignment(std::span<const std::uint8_t> bytes);

// Worker DONE payload: loss_sum f64, frames u64, errors u64, batches u64.
// A DONE from the coordinator carries no payload and means shut down.
struct WorkerStats {
  double loss_sum = 0.0;
  std::uint64_t frames = 0;
  std::uint64_t errors = 0;
  std::uint64_t batches = 0;
  friend bool operator==(const WorkerStats&, const WorkerStats&) = default;
};
Bytes encode_worker_stats(const WorkerStats& s);
WorkerStats decode_worker_stats(std::span<const std::uint8_t> bytes);

// One end of a bidirectional framed byte stream.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual void send(const Message& msg) = 0;
  // Blocks until a whole message has arrived. Throws WorkerAbort when the
  // peer has closed the stream.
  virtual Message receive() = 0;
  virtual void close() = 0;
};

// "inproc": in-memory byte pipe. "socket": AF_UNIX socketpair.
std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_channel_pair(const std::string& transport);

// Elementwise mean, accumulated in worker-index order as the first set
// plus the mean offset of the others, so identical sets average to
// themselves exactly. Weights, when given, give sum(w_i x_i) / sum(w_i).
ParamSet average_params(std::span<const ParamSet> sets);
ParamSet average_params(std::span<const ParamSet> sets, std::span<const double> weights);

// Coordinator holding the canonical parameters and N worker threads, each
// with a private parameter copy and optimizer state. The epoch's batches
// are dealt round-robin; every round each worker trains up to K of its
// batches and the coordinator replaces the parameters by the average.
class AsyncTrainer {
 public:
  AsyncTrainer(const Network& net, std::shared_ptr<const Dataset> data, const ExperimentConfig& cfg,
               const OptimizerState& initial_optimizer);
  ~AsyncTrainer();
  AsyncTrainer(const AsyncTrainer&) = delete;
  AsyncTrainer& operator=(const AsyncTrainer&) = delete;

  // Trains epoch state.epoch + 1 with state.optimizer.learning_rate.
  EpochReport run_epoch(ParamSet& params, TrainState& state);
  std::size_t num_workers() const { return channels_.size(); }
  std::size_t rounds() const { return rounds_; }

 private:
  void shutdown();
  Message expect(std::size_t worker, MsgType type);

  ExperimentConfig cfg_;
  std::shared_ptr<const Dataset> data_;
  std::vector<std::unique_ptr<Channel>> channels_;
  std::vector<std::thread> threads_;
  std::size_t num_chunks_ = 0;
  std::size_t rounds_ = 0;
  bool stopped_ = false;
};

EpochRunner cluster_runner(AsyncTrainer& trainer);

// Trains cfg.num_epochs epochs from params without dev evaluation.
std::vector<EpochReport> run_async_training(const ExperimentConfig& cfg, const Network& net, ParamSet& params,
                                            std::shared_ptr<const Dataset> data);

}  // namespace seqtrain
