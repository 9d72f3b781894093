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

#include "seqtrain/cluster.hpp"

#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>

#include "seqtrain/error.hpp"

namespace seqtrain {

namespace {

constexpr char kMagic[4] = {'R', 'T', 'N', 'P'};
constexpr std::uint8_t kVersion = 1;

struct FrameHeader {
  MsgType type;
  std::uint32_t worker_id;
  std::uint64_t payload_len;
};

FrameHeader read_header(ByteReader& r) {
  const auto magic = r.fixed_str(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) r.fail_at(r.offset() - 4, "bad magic (expected RTNP)");
  const auto version = r.u8();
  if (version != kVersion) r.fail_at(r.offset() - 1, "unsupported version " + std::to_string(version));
  const auto type = r.u8();
  if (type < 1 || type > 6) r.fail_at(r.offset() - 1, "unknown message type " + std::to_string(type));
  FrameHeader h{static_cast<MsgType>(type), 0, 0};
  h.worker_id = r.u32();
  h.payload_len = r.u64();
  return h;
}

Message read_body(ByteReader& r, const FrameHeader& h) {
  Message m{h.type, h.worker_id, {}};
  const auto payload_at = r.offset();
  if (h.payload_len > r.remaining()) r.fail("truncated payload");
  auto body = r.raw(h.payload_len);
  m.payload.assign(body.begin(), body.end());
  const auto crc = r.u32();
  if (crc != crc32(m.payload)) r.fail_at(payload_at, "payload checksum mismatch");
  return m;
}

// Single-direction byte queue shared by two in-process endpoints.
struct BytePipe {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Bytes> chunks;
  bool closed = false;

  void write(Bytes bytes) {
    {
      std::lock_guard lock(mu);
      if (closed) throw WorkerAbort("channel closed by peer");
      chunks.push_back(std::move(bytes));
    }
    cv.notify_all();
  }

  // Empty result means closed and drained.
  Bytes read() {
    std::unique_lock lock(mu);
    cv.wait(lock, [&] { return closed || !chunks.empty(); });
    if (chunks.empty()) return {};
    Bytes out = std::move(chunks.front());
    chunks.pop_front();
    return out;
  }

  void close() {
    {
      std::lock_guard lock(mu);
      closed = true;
    }
    cv.notify_all();
  }
};

class InprocChannel final : public Channel {
 public:
  InprocChannel(std::shared_ptr<BytePipe> in, std::shared_ptr<BytePipe> out)
      : in_(std::move(in)), out_(std::move(out)) {}
  ~InprocChannel() override { close(); }

  void send(const Message& msg) override { out_->write(encode_message(msg)); }

  Message receive() override {
    for (;;) {
      if (auto m = decoder_.next()) return std::move(*m);
      Bytes chunk = in_->read();
      if (chunk.empty()) throw WorkerAbort("channel closed by peer");
      decoder_.feed(chunk);
    }
  }

  void close() override {
    out_->close();
    in_->close();
  }

 private:
  std::shared_ptr<BytePipe> in_;
  std::shared_ptr<BytePipe> out_;
  FrameDecoder decoder_;
};

class SocketChannel final : public Channel {
 public:
  explicit SocketChannel(int fd) : fd_(fd) {}
  ~SocketChannel() override {
    close();
    if (fd_ >= 0) ::close(fd_);
  }

  void send(const Message& msg) override {
    const Bytes frame = encode_message(msg);
    std::size_t done = 0;
    while (done < frame.size()) {
      const auto n = ::send(fd_, frame.data() + done, frame.size() - done, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw WorkerAbort(std::string("socket send failed: ") + std::strerror(errno));
      }
      done += static_cast<std::size_t>(n);
    }
  }

  Message receive() override {
    std::uint8_t buf[1 << 16];
    for (;;) {
      if (auto m = decoder_.next()) return std::move(*m);
      const auto n = ::recv(fd_, buf, sizeof buf, 0);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw WorkerAbort(std::string("socket receive failed: ") + std::strerror(errno));
      }
      if (n == 0) throw WorkerAbort("channel closed by peer");
      decoder_.feed(std::span<const std::uint8_t>(buf, static_cast<std::size_t>(n)));
    }
  }

  void close() override {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }

 private:
  int fd_;
  FrameDecoder decoder_;
};

// Training loop of one worker. Only talks to the coordinator through its
// channel; shares nothing mutable with other threads except the
// internally synchronised dataset.
void worker_main(std::uint32_t id, Channel* ch, Network net, std::shared_ptr<const Dataset> data,
                 ExperimentConfig cfg, OptimizerState opt) {
  try {
    ch->send({MsgType::hello, id, {}});
    const auto chunks = training_chunks(*data, cfg);
    std::size_t plan_epoch = 0;
    std::vector<std::vector<std::size_t>> plan;
    ParamSet params;
    bool have_params = false;
    for (;;) {
      Message m = ch->receive();
      switch (m.type) {
        case MsgType::done:
          return;
        case MsgType::params:
          params = deserialize_params(m.payload);
          net.check_params(params);
          have_params = true;
          if (cfg.reset_slots_on_sync) opt.reset_slots();
          break;
        case MsgType::assign: {
          if (!have_params) throw FormatError("ASSIGN before PARAMS");
          const auto a = decode_assignment(m.payload);
          if (a.epoch != plan_epoch) {
            plan = epoch_plan(chunks.size(), cfg, a.epoch);
            plan_epoch = a.epoch;
          }
          opt.learning_rate = a.lr;
          WorkerStats stats;
          for (auto b : a.batch_ids) {
            if (b >= plan.size()) throw FormatError("batch id " + std::to_string(b) + " out of range");
            const auto batch = plan_batch(*data, chunks, plan[b], cfg.chunk_size);
            const auto s = train_batch(net, params, batch, cfg, opt, a.epoch, b);
            stats.loss_sum += s.loss;
            stats.frames += s.frames;
            stats.errors += s.errors;
            stats.batches += 1;
          }
          ch->send({MsgType::updated_params, id, serialize_params(params)});
          ch->send({MsgType::done, id, encode_worker_stats(stats)});
          break;
        }
        default:
          throw FormatError("worker " + std::to_string(id) + ": unexpected " + msg_type_name(m.type));
      }
    }
  } catch (const std::exception& e) {
    try {
      const std::string what = e.what();
      ch->send({MsgType::abort, id, Bytes(what.begin(), what.end())});
    } catch (...) {
    }
  }
}

}  // namespace

std::string msg_type_name(MsgType type) {
  switch (type) {
    case MsgType::hello: return "HELLO";
    case MsgType::assign: return "ASSIGN";
    case MsgType::params: return "PARAMS";
    case MsgType::updated_params: return "UPDATED_PARAMS";
    case MsgType::done: return "DONE";
    case MsgType::abort: return "ABORT";
  }
  return "?";
}

Bytes encode_message(const Message& msg) {
  ByteWriter w;
  w.raw(std::string_view(kMagic, 4));
  w.u8(kVersion);
  w.u8(static_cast<std::uint8_t>(msg.type));
  w.u32(msg.worker_id);
  w.u64(msg.payload.size());
  w.raw(msg.payload);
  w.u32(crc32(msg.payload));
  return w.take();
}

Message decode_message(std::span<const std::uint8_t> frame) {
  ByteReader r(frame, "RTNP frame");
  const auto h = read_header(r);
  Message m = read_body(r, h);
  if (!r.at_end()) r.fail(std::to_string(r.remaining()) + " trailing bytes");
  return m;
}

void FrameDecoder::feed(std::span<const std::uint8_t> bytes) {
  if (pos_ > 0 && pos_ == buf_.size()) {
    buf_.clear();
    pos_ = 0;
  }
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::optional<Message> FrameDecoder::next() {
  const std::span<const std::uint8_t> avail(buf_.data() + pos_, buf_.size() - pos_);
  if (avail.size() < kFrameHeaderBytes) return std::nullopt;
  ByteReader r(avail, "RTNP stream");
  const auto h = read_header(r);
  if (h.payload_len > avail.size() || avail.size() < kFrameHeaderBytes + h.payload_len + kFrameTrailerBytes) {
    return std::nullopt;
  }
  Message m = read_body(r, h);
  pos_ += r.offset();
  if (pos_ == buf_.size()) {
    buf_.clear();
    pos_ = 0;
  } else if (pos_ > (std::size_t{1} << 20) && pos_ * 2 > buf_.size()) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_));
    pos_ = 0;
  }
  return m;
}

Bytes encode_assignment(const Assignment& a) {
  ByteWriter w;
  w.u64(a.epoch);
  w.f64(a.lr);
  w.u64(a.batch_ids.size());
  for (auto id : a.batch_ids) w.u64(id);
  return w.take();
}

Assignment decode_assignment(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "ASSIGN payload");
  Assignment a;
  a.epoch = r.u64();
  a.lr = r.f64();
  const auto n = r.u64();
  if (n > r.remaining() / 8) r.fail("batch id list truncated");
  a.batch_ids.resize(n);
  for (auto& id : a.batch_ids) id = r.u64();
  if (!r.at_end()) r.fail("trailing bytes");
  return a;
}

Bytes encode_worker_stats(const WorkerStats& s) {
  ByteWriter w;
  w.f64(s.loss_sum);
  w.u64(s.frames);
  w.u64(s.errors);
  w.u64(s.batches);
  return w.take();
}

WorkerStats decode_worker_stats(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "DONE payload");
  WorkerStats s;
  s.loss_sum = r.f64();
  s.frames = r.u64();
  s.errors = r.u64();
  s.batches = r.u64();
  if (!r.at_end()) r.fail("trailing bytes");
  return s;
}

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_channel_pair(const std::string& transport) {
  if (transport == "inproc") {
    auto a = std::make_shared<BytePipe>();
    auto b = std::make_shared<BytePipe>();
    return {std::make_unique<InprocChannel>(a, b), std::make_unique<InprocChannel>(b, a)};
  }
  if (transport == "socket") {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) {
      throw Error(std::string("socketpair failed: ") + std::strerror(errno));
    }
    return {std::make_unique<SocketChannel>(fds[0]), std::make_unique<SocketChannel>(fds[1])};
  }
  throw ConfigError("unknown transport '" + transport + "'");
}

ParamSet average_params(std::span<const ParamSet> sets) {
  const std::vector<double> ones(sets.size(), 1.0);
  return average_params(sets, ones);
}

ParamSet average_params(std::span<const ParamSet> sets, std::span<const double> weights) {
  if (sets.empty()) throw Error("average_params: no parameter sets");
  if (weights.size() != sets.size()) throw Error("average_params: one weight per set required");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw Error("average_params: weights must be non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw Error("average_params: weights sum to zero");
  for (const auto& s : sets) s.check_aligned(sets[0], "average_params");
  ParamSet out = sets[0];
  for (auto& [name, t] : out) {
    auto x = t.data();
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double base = x[k];
      double acc = 0.0;
      for (std::size_t i = 1; i < sets.size(); ++i) acc += weights[i] * (sets[i].at(name)[k] - base);
      x[k] = base + acc / total;
    }
  }
  return out;
}

AsyncTrainer::AsyncTrainer(const Network& net, std::shared_ptr<const Dataset> data, const ExperimentConfig& cfg,
                           const OptimizerState& initial_optimizer)
    : cfg_(cfg), data_(std::move(data)) {
  if (cfg.num_workers < 1) throw ConfigError("num_workers must be >= 1");
  num_chunks_ = training_chunks(*data_, cfg_).size();
  try {
    for (std::size_t w = 0; w < cfg.num_workers; ++w) {
      auto [mine, theirs] = make_channel_pair(cfg.transport);
      Channel* worker_end = theirs.get();
      channels_.push_back(std::move(mine));
      threads_.emplace_back([w, worker_end, net, d = data_, c = cfg_, o = initial_optimizer,
                             keep = std::shared_ptr<Channel>(std::move(theirs))]() mutable {
        worker_main(static_cast<std::uint32_t>(w), worker_end, std::move(net), std::move(d), std::move(c),
                    std::move(o));
      });
    }
    for (std::size_t w = 0; w < channels_.size(); ++w) expect(w, MsgType::hello);
  } catch (...) {
    shutdown();
    throw;
  }
}

AsyncTrainer::~AsyncTrainer() { shutdown(); }

void AsyncTrainer::shutdown() {
  if (stopped_) return;
  stopped_ = true;
  for (std::size_t w = 0; w < channels_.size(); ++w) {
    try {
      channels_[w]->send({MsgType::done, static_cast<std::uint32_t>(w), {}});
    } catch (...) {
    }
  }
  // Queued DONE frames stay readable after close; a worker still writing
  // gets an error instead of blocking on a full socket.
  for (auto& ch : channels_) ch->close();
  for (auto& t : threads_) {
    if (t.joinable()) t.join();
  }
}

Message AsyncTrainer::expect(std::size_t worker, MsgType type) {
  Message m = channels_[worker]->receive();
  if (m.type == MsgType::abort) {
    throw WorkerAbort("worker " + std::to_string(worker) + " aborted: " +
                      std::string(m.payload.begin(), m.payload.end()));
  }
  if (m.type != type || m.worker_id != worker) {
    throw WorkerAbort("worker " + std::to_string(worker) + ": expected " + msg_type_name(type) + ", got " +
                      msg_type_name(m.type) + " from worker " + std::to_string(m.worker_id));
  }
  return m;
}

EpochReport AsyncTrainer::run_epoch(ParamSet& params, TrainState& state) {
  if (stopped_) throw Error("async trainer has been shut down");
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t epoch = state.epoch + 1;
  const std::size_t N = channels_.size();
  const std::size_t num_batches = epoch_plan(num_chunks_, cfg_, epoch).size();

  std::vector<std::vector<std::uint64_t>> lists(N);
  for (std::size_t b = 0; b < num_batches; ++b) lists[b % N].push_back(b);
  std::size_t longest = 0;
  for (const auto& l : lists) longest = std::max(longest, l.size());
  const std::size_t K = cfg_.sync_interval_batches ? cfg_.sync_interval_batches : std::max<std::size_t>(longest, 1);

  EpochReport rep;
  rep.epoch = epoch;
  rep.lr = state.optimizer.learning_rate;
  try {
    for (std::size_t start = 0; start < longest; start += K) {
      std::vector<std::size_t> active;
      const Bytes theta = serialize_params(params);
      for (std::size_t w = 0; w < N; ++w) {
        if (start >= lists[w].size()) continue;
        Assignment a{epoch, state.optimizer.learning_rate, {}};
        const std::size_t end = std::min(lists[w].size(), start + K);
        a.batch_ids.assign(lists[w].begin() + static_cast<std::ptrdiff_t>(start),
                           lists[w].begin() + static_cast<std::ptrdiff_t>(end));
        const auto id = static_cast<std::uint32_t>(w);
        channels_[w]->send({MsgType::params, id, theta});
        channels_[w]->send({MsgType::assign, id, encode_assignment(a)});
        active.push_back(w);
      }
      std::vector<ParamSet> results;
      std::vector<double> weights;
      for (auto w : active) {
        const Message up = expect(w, MsgType::updated_params);
        results.push_back(deserialize_params(up.payload));
        results.back().check_aligned(params, "worker " + std::to_string(w) + " parameters");
        const auto stats = decode_worker_stats(expect(w, MsgType::done).payload);
        rep.train_loss_sum += stats.loss_sum;
        rep.train_frames += stats.frames;
        rep.train_errors += stats.errors;
        rep.batches += stats.batches;
        weights.push_back(static_cast<double>(stats.batches));
      }
      params = cfg_.weighted_averaging ? average_params(results, weights) : average_params(results);
      ++rounds_;
    }
  } catch (...) {
    shutdown();
    throw;
  }
  state.epoch = epoch;
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

EpochRunner cluster_runner(AsyncTrainer& trainer) {
  return [&trainer](ParamSet& params, TrainState& state) { return trainer.run_epoch(params, state); };
}

std::vector<EpochReport> run_async_training(const ExperimentConfig& cfg, const Network& net, ParamSet& params,
                                            std::shared_ptr<const Dataset> data) {
  net.check_params(params);
  TrainState state = TrainState::from_config(cfg);
  AsyncTrainer trainer(net, std::move(data), cfg, state.optimizer);
  std::vector<EpochReport> reports;
  while (state.epoch < cfg.num_epochs) reports.push_back(trainer.run_epoch(params, state));
  return reports;
}

}  // namespace seqtrain
