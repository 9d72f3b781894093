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

#include "seqtrain/engine.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include "json.hpp"
#include "seqtrain/error.hpp"

namespace seqtrain {

using json = nlohmann::json;

namespace {

constexpr char kCheckpointMagic[4] = {'R', 'T', 'N', 'M'};
constexpr char kActivationMagic[4] = {'R', 'T', 'N', 'A'};
constexpr std::uint8_t kFormatVersion = 1;
constexpr std::string_view kSlotPrefix = "slot/";

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void check_magic(ByteReader& r, const char (&magic)[4], const char* name) {
  const auto got = r.fixed_str(4);
  if (std::memcmp(got.data(), magic, 4) != 0) r.fail_at(0, std::string("bad magic (expected ") + name + ")");
  const auto version = r.u8();
  if (version != kFormatVersion) r.fail_at(4, "unsupported version " + std::to_string(version));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

TrainState TrainState::from_config(const ExperimentConfig& cfg) {
  TrainState s;
  s.optimizer = OptimizerState::from_config(cfg.optimizer);
  s.schedule = LrSchedule::from_config(cfg.schedule);
  return s;
}

double EvalResult::loss_per_frame() const {
  return frames ? loss_sum / static_cast<double>(frames) : std::nan("");
}

double EvalResult::fer() const {
  return frames ? static_cast<double>(errors) / static_cast<double>(frames) : std::nan("");
}

double EpochReport::train_ce() const {
  return train_frames ? train_loss_sum / static_cast<double>(train_frames) : std::nan("");
}

double EpochReport::train_fer() const {
  return train_frames ? static_cast<double>(train_errors) / static_cast<double>(train_frames) : std::nan("");
}

std::string EpochReport::log_line() const {
  const double nan = std::nan("");
  return "epoch " + std::to_string(epoch) + " train_ce " + fmt(train_ce()) + " train_fer " + fmt(train_fer()) +
         " dev_ce " + fmt(has_dev ? dev_loss : nan) + " dev_fer " + fmt(has_dev ? dev_fer : nan) + " lr " +
         fmt(lr) + " sec " + fmt(wall_seconds);
}

std::uint64_t epoch_shuffle_seed(std::uint64_t seed, std::size_t epoch) { return derive_seed({seed, epoch}); }

std::uint64_t batch_seed(std::uint64_t seed, std::size_t epoch, std::size_t batch_index) {
  return derive_seed({seed, epoch, batch_index, hash_string("batch")});
}

std::vector<Chunk> training_chunks(const Dataset& data, const ExperimentConfig& cfg) {
  return chunk_sequences(data.lengths(), cfg.chunk_size, cfg.chunk_step);
}

std::vector<std::vector<std::size_t>> epoch_plan(std::size_t num_chunks, const ExperimentConfig& cfg,
                                                 std::size_t epoch) {
  return plan_batches(num_chunks, cfg.max_chunks_per_batch, epoch_shuffle_seed(cfg.seed, epoch));
}

Batch plan_batch(const Dataset& data, std::span<const Chunk> chunks, std::span<const std::size_t> members,
                 std::size_t chunk_size) {
  std::vector<Chunk> picked;
  picked.reserve(members.size());
  for (auto i : members) picked.push_back(chunks[i]);
  return assemble_batch(data, picked, chunk_size);
}

BatchStats train_batch(const Network& net, ParamSet& params, const Batch& batch, const ExperimentConfig& cfg,
                       OptimizerState& opt, std::size_t epoch, std::size_t batch_index) {
  Rng rng(batch_seed(cfg.seed, epoch, batch_index));
  StepResult step;
  try {
    step = net.train_step(params, batch, rng);
  } catch (const TrainingError& e) {
    throw TrainingError("epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_index) + ": " +
                        e.what());
  }
  condition_gradients(step.grads, cfg.conditioning, params, rng);
  apply_update(params, step.grads, opt);
  if (cfg.conditioning.max_norm > 0) apply_max_norm(params, cfg.conditioning.max_norm);
  return step.stats;
}

EpochReport train_epoch(const Network& net, ParamSet& params, const Dataset& data, const ExperimentConfig& cfg,
                        TrainState& state) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t epoch = state.epoch + 1;
  const auto chunks = training_chunks(data, cfg);
  const auto plan = epoch_plan(chunks.size(), cfg, epoch);
  EpochReport rep;
  rep.epoch = epoch;
  rep.lr = state.optimizer.learning_rate;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto batch = plan_batch(data, chunks, plan[i], cfg.chunk_size);
    const auto stats = train_batch(net, params, batch, cfg, state.optimizer, epoch, i);
    rep.train_loss_sum += stats.loss;
    rep.train_frames += stats.frames;
    rep.train_errors += stats.errors;
  }
  rep.batches = plan.size();
  state.epoch = epoch;
  rep.wall_seconds = seconds_since(t0);
  return rep;
}

EvalResult evaluate(const Network& net, const ParamSet& params, const Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) throw Error("evaluate: empty dataset");
  if (batch_size == 0) throw ConfigError("evaluate: batch size must be positive");
  EvalResult res;
  std::vector<std::size_t> ids;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    ids.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) ids.push_back(i);
    const auto stats = net.evaluate_batch(params, sequence_batch(data, ids));
    res.loss_sum += stats.loss;
    res.frames += stats.frames;
    res.errors += stats.errors;
  }
  return res;
}

Bytes encode_checkpoint(const Checkpoint& ckpt) {
  const auto& st = ckpt.state;
  const auto& opt = st.optimizer;
  json meta;
  meta["network"] = json::parse(ckpt.network_json.empty() ? "{}" : ckpt.network_json);
  meta["input_dim"] = ckpt.input_dim;
  meta["epoch"] = st.epoch;
  meta["lr"] = opt.learning_rate;
  meta["best_dev_score"] = std::isfinite(st.best_dev_score) ? json(st.best_dev_score) : json(nullptr);
  meta["schedule"] = {{"decay", st.schedule.decay},
                      {"min_relative_improvement", st.schedule.min_relative_improvement},
                      {"has_best", st.schedule.has_best},
                      {"best", st.schedule.best}};
  meta["optimizer"] = {{"rule", update_rule_name(opt.rule)}, {"momentum", opt.momentum}, {"rho", opt.rho},
                       {"beta1", opt.beta1},  {"beta2", opt.beta2},   {"epsilon", opt.epsilon},
                       {"step", opt.step}};

  ParamSet all = ckpt.params;
  for (const auto& [slot, set] : opt.slots) {
    for (const auto& [name, t] : set) all.add(std::string(kSlotPrefix) + slot + "/" + name, t);
  }
  ByteWriter w;
  w.raw(std::string_view(kCheckpointMagic, 4));
  w.u8(kFormatVersion);
  w.str(meta.dump());
  encode_tensor_blob(all, w);
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "checkpoint");
  check_magic(r, kCheckpointMagic, "RTNM");
  const auto meta_at = r.offset();
  const auto meta_text = r.str();
  json meta = json::parse(meta_text, nullptr, false);
  if (meta.is_discarded() || !meta.is_object()) r.fail_at(meta_at, "malformed metadata");
  ParamSet all = decode_tensor_blob(r);
  if (!r.at_end()) r.fail(std::to_string(r.remaining()) + " trailing bytes");

  Checkpoint ckpt;
  try {
    ckpt.network_json = meta.at("network").dump(2);
    ckpt.input_dim = meta.at("input_dim").get<std::size_t>();
    auto& st = ckpt.state;
    st.epoch = meta.at("epoch").get<std::size_t>();
    const auto& best = meta.at("best_dev_score");
    st.best_dev_score = best.is_null() ? std::numeric_limits<double>::infinity() : best.get<double>();
    const auto& sch = meta.at("schedule");
    st.schedule.decay = sch.at("decay").get<double>();
    st.schedule.min_relative_improvement = sch.at("min_relative_improvement").get<double>();
    st.schedule.has_best = sch.at("has_best").get<bool>();
    st.schedule.best = sch.at("best").get<double>();
    const auto& o = meta.at("optimizer");
    auto& opt = st.optimizer;
    opt.rule = parse_update_rule(o.at("rule").get<std::string>());
    opt.learning_rate = meta.at("lr").get<double>();
    opt.momentum = o.at("momentum").get<double>();
    opt.rho = o.at("rho").get<double>();
    opt.beta1 = o.at("beta1").get<double>();
    opt.beta2 = o.at("beta2").get<double>();
    opt.epsilon = o.at("epsilon").get<double>();
    opt.step = o.at("step").get<std::uint64_t>();
  } catch (const json::exception& e) {
    r.fail_at(meta_at, std::string("metadata: ") + e.what());
  }
  for (auto& [name, t] : all) {
    if (name.rfind(kSlotPrefix, 0) == 0) {
      const auto rest = name.substr(kSlotPrefix.size());
      const auto slash = rest.find('/');
      if (slash == std::string::npos) throw FormatError("checkpoint: malformed slot tensor '" + name + "'");
      ckpt.state.optimizer.slots[rest.substr(0, slash)].add(rest.substr(slash + 1), std::move(t));
    } else {
      ckpt.params.add(name, std::move(t));
    }
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) { write_file(path, encode_checkpoint(ckpt)); }

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

Bytes encode_activations(const ActivationFile& file) {
  ByteWriter w;
  w.raw(std::string_view(kActivationMagic, 4));
  w.u8(kFormatVersion);
  w.str(file.layer);
  w.u64(file.records.size());
  for (const auto& rec : file.records) {
    if (rec.values.rank() != 2) throw ShapeError("activation record must be [L, D]");
    w.u64(rec.seq_id);
    w.u64(rec.values.dim(0));
    w.u32(static_cast<std::uint32_t>(rec.values.dim(1)));
    for (double v : rec.values.data()) w.f32(static_cast<float>(v));
  }
  return w.take();
}

ActivationFile decode_activations(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "activation file");
  check_magic(r, kActivationMagic, "RTNA");
  ActivationFile file;
  file.layer = r.str();
  const auto count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    ActivationRecord rec;
    rec.seq_id = r.u64();
    const auto L = r.u64();
    const auto D = r.u32();
    if (L > r.remaining() || (D && L * D > r.remaining() / 4)) r.fail("truncated record");
    rec.values = Tensor({L, D});
    for (auto& v : rec.values.data()) v = r.f32();
    file.records.push_back(std::move(rec));
  }
  if (!r.at_end()) r.fail(std::to_string(r.remaining()) + " trailing bytes");
  return file;
}

ActivationFile read_activations(const std::string& path) { return decode_activations(read_file(path)); }

std::vector<std::string> forward_dump(const Network& net, const ParamSet& params, const Dataset& data,
                                      std::span<const std::string> layers, const std::string& path,
                                      std::size_t batch_size) {
  if (layers.empty()) throw ConfigError("forward_dump: no layers requested");
  for (const auto& name : layers) {
    if (!net.graph().contains(name)) throw ConfigError("forward_dump: unknown layer '" + name + "'");
  }
  if (batch_size == 0) throw ConfigError("forward_dump: batch size must be positive");
  std::vector<ActivationFile> files(layers.size());
  for (std::size_t k = 0; k < layers.size(); ++k) files[k].layer = layers[k];

  std::vector<std::size_t> ids;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    ids.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) ids.push_back(i);
    const auto batch = sequence_batch(data, ids);
    const auto acts = net.activations(params, batch.inputs, layers);
    const std::size_t B = ids.size();
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const auto& y = acts.at(layers[k]);
      for (std::size_t b = 0; b < B; ++b) {
        const std::size_t L = data.length(ids[b]);
        ActivationRecord rec{ids[b], Tensor({L, y.features()})};
        for (std::size_t t = 0; t < L; ++t) {
          auto src = y.values.row(t * B + b);
          std::copy(src.begin(), src.end(), rec.values.row(t).begin());
        }
        files[k].records.push_back(std::move(rec));
      }
    }
  }
  std::vector<std::string> written;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto out = layers.size() == 1 ? path : path + "." + layers[k];
    write_file(out, encode_activations(files[k]));
    written.push_back(out);
  }
  return written;
}

Session open_session(const ExperimentConfig& cfg) {
  Session s;
  s.cfg = cfg;
  if (!cfg.train.empty()) s.train = open_dataset(cfg.train, cfg.cache_byte_cap);
  if (!cfg.dev.empty()) s.dev = open_dataset(cfg.dev, cfg.cache_byte_cap);
  if (!cfg.eval.empty()) s.eval = open_dataset(cfg.eval, cfg.cache_byte_cap);
  const auto& first = s.train ? s.train : s.eval;
  if (!first) throw ConfigError("no dataset configured");
  const std::size_t input_dim = first->info().input_dim;

  auto [net, params] = build_network(cfg.network, input_dim, cfg.seed);
  for (const auto* d : {&s.train, &s.dev, &s.eval}) {
    if (*d) net.check_dataset((*d)->info());
  }
  s.net = std::move(net);
  s.params = std::move(params);
  s.state = TrainState::from_config(cfg);
  if (!cfg.load.empty()) {
    auto ckpt = load_checkpoint(cfg.load);
    if (ckpt.input_dim != input_dim) {
      throw ConfigError("checkpoint '" + cfg.load + "' expects input_dim " + std::to_string(ckpt.input_dim) +
                        ", dataset has " + std::to_string(input_dim));
    }
    s.net.check_params(ckpt.params);
    s.params = std::move(ckpt.params);
    s.state = std::move(ckpt.state);
  }
  return s;
}

Checkpoint session_checkpoint(const Session& s) {
  return {s.params, s.state, s.cfg.network_json, s.net.input_dim()};
}

EpochRunner sequential_runner(const Session& s) {
  return [&s](ParamSet& params, TrainState& state) {
    if (!s.train) throw ConfigError("training requires a 'train' dataset");
    return train_epoch(s.net, params, *s.train, s.cfg, state);
  };
}

std::vector<EpochReport> run_training(Session& s, const EpochRunner& runner, Logger& log) {
  const auto& cfg = s.cfg;
  if (!cfg.out_dir.empty()) std::filesystem::create_directories(cfg.out_dir);
  std::vector<EpochReport> reports;
  while (s.state.epoch < cfg.num_epochs) {
    EpochReport rep = runner(s.params, s.state);
    if (s.dev) {
      const auto ev = evaluate(s.net, s.params, *s.dev, cfg.max_chunks_per_batch);
      rep.has_dev = true;
      rep.dev_loss = ev.loss_per_frame();
      rep.dev_fer = ev.fer();
    }
    const bool by_fer = cfg.schedule.key == "fer";
    const double score = rep.has_dev ? (by_fer ? rep.dev_fer : rep.dev_loss) : (by_fer ? rep.train_fer() : rep.train_ce());
    auto& opt = s.state.optimizer;
    const auto [lr, improved] = lr_step(s.state.schedule, score, opt.learning_rate);
    opt.learning_rate = lr;
    const bool best = score < s.state.best_dev_score;
    if (best) s.state.best_dev_score = score;
    log.info(rep.log_line());
    if (!improved) log.debug("learning rate decayed to " + fmt(lr));
    if (!cfg.out_dir.empty()) {
      const auto dir = std::filesystem::path(cfg.out_dir);
      const auto ckpt = encode_checkpoint(session_checkpoint(s));
      write_file((dir / ("epoch" + std::to_string(rep.epoch) + ".rtnm")).string(), ckpt);
      if (best) write_file((dir / "best.rtnm").string(), ckpt);
      log.debug("wrote checkpoint for epoch " + std::to_string(rep.epoch));
    }
    reports.push_back(rep);
  }
  return reports;
}

}  // namespace seqtrain
