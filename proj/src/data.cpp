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

#include "seqtrain/data.hpp"

#include <algorithm>
#include <cstring>
#include <map>
#include <sstream>

#include "seqtrain/error.hpp"
#include "seqtrain/rng.hpp"

namespace seqtrain {

namespace {

constexpr char kMagic[4] = {'R', 'T', 'N', 'D'};
constexpr std::uint8_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 1 + 1 + 4 + 4 + 8;

void validate_sequence(const DatasetInfo& info, const Sequence& s) {
  const std::size_t L = s.length();
  if (L == 0) throw FormatError("sequence " + std::to_string(s.id) + " is empty");
  if (s.inputs.rank() != 2 || s.inputs.dim(1) != info.input_dim) {
    throw FormatError("sequence " + std::to_string(s.id) + ": inputs must be [L, " +
                      std::to_string(info.input_dim) + "]");
  }
  if (info.target_kind == TargetKind::sparse) {
    if (s.labels.size() != L) throw FormatError("sequence " + std::to_string(s.id) + ": label count != length");
    for (auto l : s.labels) {
      if (l < 0 || static_cast<std::size_t>(l) >= info.target_dim) {
        throw FormatError("sequence " + std::to_string(s.id) + ": label " + std::to_string(l) +
                          " >= num_classes " + std::to_string(info.target_dim));
      }
    }
  } else if (s.dense.dims() != Dims{L, info.target_dim}) {
    throw FormatError("sequence " + std::to_string(s.id) + ": dense targets must be [L, " +
                      std::to_string(info.target_dim) + "]");
  }
}

std::size_t sequence_record_bytes(const DatasetInfo& info, std::size_t len) {
  const std::size_t targets = info.target_kind == TargetKind::sparse ? 4 * len : 4 * len * info.target_dim;
  return 8 + 4 * len * info.input_dim + targets;
}

}  // namespace

std::size_t Sequence::byte_size() const {
  return sizeof(Sequence) + inputs.size() * sizeof(double) + labels.size() * sizeof(std::int32_t) +
         dense.size() * sizeof(double);
}

std::shared_ptr<Dataset> Dataset::in_memory(DatasetInfo info, std::vector<Sequence> seqs) {
  std::shared_ptr<Dataset> d(new Dataset());
  d->info_ = info;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    seqs[i].id = i;
    validate_sequence(info, seqs[i]);
    d->lengths_.push_back(seqs[i].length());
    d->resident_.push_back(std::make_shared<const Sequence>(std::move(seqs[i])));
  }
  return d;
}

std::size_t Dataset::total_frames() const {
  std::size_t n = 0;
  for (auto l : lengths_) n += l;
  return n;
}

std::shared_ptr<Dataset> Dataset::open(const std::string& path, std::size_t cache_byte_cap) {
  std::shared_ptr<Dataset> d(new Dataset());
  d->path_ = path;
  d->cache_cap_ = cache_byte_cap;
  d->file_.open(path, std::ios::binary);
  if (!d->file_) throw Error("cannot open dataset '" + path + "'");
  d->file_.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(d->file_.tellg());
  d->file_.seekg(0);

  const std::string what = "dataset '" + path + "'";
  Bytes header(std::min<std::uint64_t>(file_size, kHeaderBytes));
  d->file_.read(reinterpret_cast<char*>(header.data()), static_cast<std::streamsize>(header.size()));
  ByteReader r(header, what);
  const auto magic = r.fixed_str(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) r.fail_at(0, "bad magic (expected RTND)");
  const auto version = r.u8();
  if (version != kVersion) r.fail_at(4, "unsupported version " + std::to_string(version));
  const auto kind = r.u8();
  if (kind > 1) r.fail_at(5, "unknown target kind " + std::to_string(kind));
  d->info_.target_kind = static_cast<TargetKind>(kind);
  d->info_.input_dim = r.u32();
  d->info_.target_dim = r.u32();
  const auto num_seqs = r.u64();

  // Index every record; sparse labels are range-checked here.
  std::uint64_t pos = kHeaderBytes;
  for (std::uint64_t i = 0; i < num_seqs; ++i) {
    if (pos + 8 > file_size) {
      throw FormatError(what + ": truncated data (sequence " + std::to_string(i) + " header) at offset " +
                        std::to_string(pos));
    }
    std::uint8_t lenbuf[8];
    d->file_.seekg(static_cast<std::streamoff>(pos));
    d->file_.read(reinterpret_cast<char*>(lenbuf), 8);
    ByteReader lr(lenbuf, what);
    const auto len = lr.u64();
    if (len == 0) throw FormatError(what + ": empty sequence at offset " + std::to_string(pos));
    if (len > file_size) throw FormatError(what + ": truncated data at offset " + std::to_string(pos));
    const auto rec = sequence_record_bytes(d->info_, len);
    if (pos + rec > file_size) {
      throw FormatError(what + ": truncated data (sequence " + std::to_string(i) + ") at offset " +
                        std::to_string(pos));
    }
    if (d->info_.target_kind == TargetKind::sparse) {
      const std::uint64_t label_pos = pos + 8 + 4 * len * d->info_.input_dim;
      Bytes labels(4 * len);
      d->file_.seekg(static_cast<std::streamoff>(label_pos));
      d->file_.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
      ByteReader lab(labels, what);
      for (std::uint64_t t = 0; t < len; ++t) {
        const auto at = label_pos + lab.offset();
        const auto l = lab.u32();
        if (l >= d->info_.target_dim) {
          throw FormatError(what + ": label " + std::to_string(l) + " >= num_classes " +
                            std::to_string(d->info_.target_dim) + " at offset " + std::to_string(at));
        }
      }
    }
    d->offsets_.push_back(pos);
    d->lengths_.push_back(len);
    pos += rec;
  }
  if (pos != file_size) {
    throw FormatError(what + ": " + std::to_string(file_size - pos) + " trailing bytes at offset " +
                      std::to_string(pos));
  }
  return d;
}

std::shared_ptr<const Sequence> Dataset::read_sequence(std::size_t id) const {
  const std::size_t len = lengths_[id];
  Bytes buf(sequence_record_bytes(info_, len));
  file_.clear();
  file_.seekg(static_cast<std::streamoff>(offsets_[id]));
  file_.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!file_) throw FormatError("dataset '" + path_ + "': read failed for sequence " + std::to_string(id));
  ByteReader r(buf, "dataset '" + path_ + "'");
  r.u64();
  auto s = std::make_shared<Sequence>();
  s->id = id;
  s->inputs = Tensor({len, info_.input_dim});
  for (auto& v : s->inputs.data()) v = r.f32();
  if (info_.target_kind == TargetKind::sparse) {
    s->labels.resize(len);
    for (auto& l : s->labels) l = static_cast<std::int32_t>(r.u32());
  } else {
    s->dense = Tensor({len, info_.target_dim});
    for (auto& v : s->dense.data()) v = r.f32();
  }
  return s;
}

std::shared_ptr<const Sequence> Dataset::get(std::size_t id) const {
  if (id >= lengths_.size()) {
    throw Error("sequence id " + std::to_string(id) + " out of range (" + std::to_string(size()) + ")");
  }
  if (!resident_.empty()) return resident_[id];

  std::lock_guard lock(mu_);
  if (auto it = cache_.find(id); it != cache_.end()) {
    lru_.splice(lru_.begin(), lru_, it->second.pos);
    ++stats_.hits;
    return it->second.seq;
  }
  auto seq = read_sequence(id);
  ++stats_.reads;
  lru_.push_front(id);
  cache_.emplace(id, Entry{seq, lru_.begin()});
  stats_.resident_bytes += seq->byte_size();
  while (stats_.resident_bytes > cache_cap_ && !lru_.empty()) {
    const auto victim = lru_.back();
    lru_.pop_back();
    auto it = cache_.find(victim);
    stats_.resident_bytes -= it->second.seq->byte_size();
    cache_.erase(it);
  }
  stats_.resident_sequences = cache_.size();
  return seq;
}

CacheStats Dataset::cache_stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

Bytes encode_dataset(const DatasetInfo& info, std::span<const Sequence> seqs) {
  ByteWriter w;
  w.raw(std::string_view(kMagic, 4));
  w.u8(kVersion);
  w.u8(static_cast<std::uint8_t>(info.target_kind));
  w.u32(static_cast<std::uint32_t>(info.input_dim));
  w.u32(static_cast<std::uint32_t>(info.target_dim));
  w.u64(seqs.size());
  for (const auto& s : seqs) {
    validate_sequence(info, s);
    w.u64(s.length());
    for (double v : s.inputs.data()) w.f32(static_cast<float>(v));
    if (info.target_kind == TargetKind::sparse) {
      for (auto l : s.labels) w.u32(static_cast<std::uint32_t>(l));
    } else {
      for (double v : s.dense.data()) w.f32(static_cast<float>(v));
    }
  }
  return w.take();
}

void write_dataset(const std::string& path, const DatasetInfo& info, std::span<const Sequence> seqs) {
  write_file(path, encode_dataset(info, seqs));
}

void write_dataset(const std::string& path, const Dataset& dataset) {
  std::vector<Sequence> seqs;
  seqs.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) seqs.push_back(*dataset.get(i));
  write_dataset(path, dataset.info(), seqs);
}

std::shared_ptr<Dataset> load_dataset(const std::string& path, std::size_t cache_byte_cap) {
  return Dataset::open(path, cache_byte_cap);
}

std::shared_ptr<Dataset> synth_dataset(const SynthSpec& spec) {
  if (spec.task != "delayed_echo") throw ConfigError("unknown synthetic task '" + spec.task + "'");
  if (spec.num_classes < 1 || spec.min_len < 1 || spec.max_len < spec.min_len || spec.num_seqs < 1) {
    throw ConfigError("invalid synthetic dataset parameters");
  }
  Rng rng(derive_seed({spec.seed, hash_string(spec.task)}));
  std::vector<Sequence> seqs(spec.num_seqs);
  for (auto& s : seqs) {
    const std::size_t L = spec.min_len + rng.index(spec.max_len - spec.min_len + 1);
    std::vector<std::int32_t> symbols(L);
    for (auto& v : symbols) v = static_cast<std::int32_t>(rng.index(spec.num_classes));
    s.inputs = Tensor({L, spec.num_classes});
    s.labels.resize(L);
    for (std::size_t t = 0; t < L; ++t) {
      s.inputs(t, static_cast<std::size_t>(symbols[t])) = 1.0;
      s.labels[t] = t >= spec.delay ? symbols[t - spec.delay] : 0;
    }
  }
  return Dataset::in_memory({TargetKind::sparse, spec.num_classes, spec.num_classes}, std::move(seqs));
}

SynthSpec parse_synth_descriptor(const std::string& descriptor) {
  const std::string prefix = "synth:";
  if (descriptor.rfind(prefix, 0) != 0) throw ConfigError("not a synth descriptor: '" + descriptor + "'");
  SynthSpec spec;
  std::stringstream ss(descriptor.substr(prefix.size()));
  std::string item;
  bool first = true;
  while (std::getline(ss, item, ',')) {
    if (first) {
      spec.task = item;
      first = false;
      continue;
    }
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("synth descriptor: expected key=value, got '" + item + "'");
    const auto key = item.substr(0, eq);
    std::uint64_t value = 0;
    try {
      std::size_t used = 0;
      value = std::stoull(item.substr(eq + 1), &used);
      if (used != item.size() - eq - 1) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("synth descriptor: bad integer in '" + item + "'");
    }
    if (key == "k") spec.delay = value;
    else if (key == "classes") spec.num_classes = value;
    else if (key == "n") spec.num_seqs = value;
    else if (key == "min_len") spec.min_len = value;
    else if (key == "max_len") spec.max_len = value;
    else if (key == "seed") spec.seed = value;
    else throw ConfigError("synth descriptor: unknown key '" + key + "'");
  }
  return spec;
}

std::shared_ptr<Dataset> open_dataset(const std::string& descriptor, std::size_t cache_byte_cap) {
  if (descriptor.rfind("synth:", 0) == 0) return synth_dataset(parse_synth_descriptor(descriptor));
  return load_dataset(descriptor, cache_byte_cap);
}

std::vector<Chunk> chunk_sequences(std::span<const std::size_t> lengths, std::size_t chunk_size,
                                   std::size_t chunk_step) {
  if (lengths.empty()) throw Error("chunk_sequences: empty dataset");
  if (chunk_step < 1 || chunk_step > chunk_size) {
    throw ConfigError("chunk_sequences: need 1 <= chunk_step <= chunk_size");
  }
  std::vector<Chunk> chunks;
  for (std::size_t s = 0; s < lengths.size(); ++s) {
    for (std::size_t start = 0; start < lengths[s]; start += chunk_step) {
      chunks.push_back({s, start, std::min(chunk_size, lengths[s] - start)});
    }
  }
  return chunks;
}

std::vector<std::vector<std::size_t>> plan_batches(std::size_t num_chunks, std::size_t max_per_batch,
                                                   std::uint64_t shuffle_seed) {
  if (max_per_batch < 1) throw ConfigError("max_chunks_per_batch must be >= 1");
  std::vector<std::size_t> order(num_chunks);
  for (std::size_t i = 0; i < num_chunks; ++i) order[i] = i;
  Rng rng(shuffle_seed);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < num_chunks; i += max_per_batch) {
    const std::size_t end = std::min(num_chunks, i + max_per_batch);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

Batch assemble_batch(const Dataset& data, std::span<const Chunk> chunks, std::size_t steps) {
  const auto& info = data.info();
  const std::size_t B = chunks.size();
  const std::size_t D = info.input_dim;
  std::vector<std::size_t> lens(B);
  for (std::size_t b = 0; b < B; ++b) {
    if (chunks[b].valid_len > steps) throw ShapeError("assemble_batch: chunk longer than batch extent");
    lens[b] = chunks[b].valid_len;
  }
  Batch batch;
  batch.target_kind = info.target_kind;
  batch.inputs = SeqTensor::zeros(steps, B, D, lens);
  if (info.target_kind == TargetKind::sparse) {
    batch.labels.assign(steps * B, 0);
  } else {
    batch.dense = Tensor({steps, B, info.target_dim});
  }
  for (std::size_t b = 0; b < B; ++b) {
    const auto seq = data.get(chunks[b].seq);
    for (std::size_t t = 0; t < lens[b]; ++t) {
      const std::size_t src = chunks[b].start + t;
      auto in = seq->inputs.row(src);
      std::copy(in.begin(), in.end(), batch.inputs.values.row(t * B + b).begin());
      if (info.target_kind == TargetKind::sparse) {
        batch.labels[t * B + b] = seq->labels[src];
      } else {
        auto tg = seq->dense.row(src);
        std::copy(tg.begin(), tg.end(), batch.dense.row(t * B + b).begin());
      }
    }
  }
  return batch;
}

std::vector<Batch> make_batches(const Dataset& data, std::span<const Chunk> chunks,
                                std::size_t chunk_size, std::size_t max_per_batch,
                                std::uint64_t shuffle_seed) {
  std::vector<Batch> out;
  for (const auto& idx : plan_batches(chunks.size(), max_per_batch, shuffle_seed)) {
    std::vector<Chunk> members;
    members.reserve(idx.size());
    for (auto i : idx) members.push_back(chunks[i]);
    out.push_back(assemble_batch(data, members, chunk_size));
  }
  return out;
}

Batch sequence_batch(const Dataset& data, std::span<const std::size_t> seq_ids) {
  std::vector<Chunk> chunks;
  std::size_t longest = 0;
  for (auto id : seq_ids) {
    chunks.push_back({id, 0, data.length(id)});
    longest = std::max(longest, data.length(id));
  }
  return assemble_batch(data, chunks, longest);
}

}  // namespace seqtrain
