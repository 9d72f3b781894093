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
#include <fstream>
#include <list>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqtrain/binary_io.hpp"
#include "seqtrain/tensor.hpp"

namespace seqtrain {

enum class TargetKind : std::uint8_t { sparse = 0, dense = 1 };

struct Sequence {
  std::uint64_t id = 0;
  Tensor inputs;                     // [L, D]
  std::vector<std::int32_t> labels;  // [L] when sparse
  Tensor dense;                      // [L, D'] when dense

  std::size_t length() const { return inputs.rank() ? inputs.dim(0) : 0; }
  std::size_t byte_size() const;
  friend bool operator==(const Sequence&, const Sequence&) = default;
};

struct DatasetInfo {
  TargetKind target_kind = TargetKind::sparse;
  std::size_t input_dim = 0;
  std::size_t target_dim = 0;  // number of classes when sparse

  friend bool operator==(const DatasetInfo&, const DatasetInfo&) = default;
};

struct CacheStats {
  std::size_t hits = 0;
  std::size_t reads = 0;
  std::size_t resident_bytes = 0;
  std::size_t resident_sequences = 0;
};

// Random-access sequence store. File-backed datasets decode sequences on
// demand and keep at most cache_byte_cap bytes of decoded data, evicting
// least-recently-used whole sequences. Safe for concurrent readers.
class Dataset {
 public:
  static std::shared_ptr<Dataset> in_memory(DatasetInfo info, std::vector<Sequence> seqs);
  static std::shared_ptr<Dataset> open(const std::string& path, std::size_t cache_byte_cap);

  const DatasetInfo& info() const { return info_; }
  std::size_t size() const { return lengths_.size(); }
  std::size_t length(std::size_t id) const { return lengths_.at(id); }
  const std::vector<std::size_t>& lengths() const { return lengths_; }
  std::size_t total_frames() const;

  std::shared_ptr<const Sequence> get(std::size_t id) const;
  CacheStats cache_stats() const;

  Dataset(const Dataset&) = delete;
  Dataset& operator=(const Dataset&) = delete;

 private:
  Dataset() = default;
  std::shared_ptr<const Sequence> read_sequence(std::size_t id) const;

  DatasetInfo info_;
  std::vector<std::size_t> lengths_;
  // In-memory storage.
  std::vector<std::shared_ptr<const Sequence>> resident_;
  // File-backed storage.
  std::string path_;
  std::vector<std::uint64_t> offsets_;
  std::size_t cache_cap_ = 0;
  mutable std::mutex mu_;
  mutable std::ifstream file_;
  mutable std::list<std::size_t> lru_;
  struct Entry {
    std::shared_ptr<const Sequence> seq;
    std::list<std::size_t>::iterator pos;
  };
  mutable std::unordered_map<std::size_t, Entry> cache_;
  mutable CacheStats stats_;
};

// RTND dataset file, little-endian:
//   "RTND", version u8 = 1, target_kind u8, input_dim u32,
//   target_dim_or_num_classes u32, num_seqs u64, then per sequence
//   len u64, inputs f32[len * input_dim], targets (u32[len] or
//   f32[len * target_dim]).
Bytes encode_dataset(const DatasetInfo& info, std::span<const Sequence> seqs);
void write_dataset(const std::string& path, const DatasetInfo& info, std::span<const Sequence> seqs);
void write_dataset(const std::string& path, const Dataset& dataset);
std::shared_ptr<Dataset> load_dataset(const std::string& path, std::size_t cache_byte_cap);

// Synthetic sequence labelling tasks.
struct SynthSpec {
  std::string task = "delayed_echo";
  std::size_t delay = 3;
  std::size_t num_classes = 8;
  std::size_t num_seqs = 100;
  std::size_t min_len = 20;
  std::size_t max_len = 40;
  std::uint64_t seed = 1;
};

// delayed_echo: one-hot input symbols drawn uniformly; the target at frame t
// is the input symbol at t - delay (class 0 for t < delay).
std::shared_ptr<Dataset> synth_dataset(const SynthSpec& spec);
// "synth:delayed_echo,k=3,classes=8,n=200,min_len=100,max_len=300,seed=1"
SynthSpec parse_synth_descriptor(const std::string& descriptor);
// A file path or a "synth:" descriptor.
std::shared_ptr<Dataset> open_dataset(const std::string& descriptor, std::size_t cache_byte_cap);

struct Chunk {
  std::size_t seq = 0;
  std::size_t start = 0;
  std::size_t valid_len = 0;
  friend bool operator==(const Chunk&, const Chunk&) = default;
};

// Starts at 0, S, 2S, ... below L; the tail chunk is zero-padded.
std::vector<Chunk> chunk_sequences(std::span<const std::size_t> lengths, std::size_t chunk_size,
                                   std::size_t chunk_step);

// Seeded shuffle of chunk indices, then greedy fill; all batches hold
// max_per_batch chunks except possibly the last.
std::vector<std::vector<std::size_t>> plan_batches(std::size_t num_chunks, std::size_t max_per_batch,
                                                   std::uint64_t shuffle_seed);

struct Batch {
  SeqTensor inputs;                  // [C, B, D]
  TargetKind target_kind = TargetKind::sparse;
  std::vector<std::int32_t> labels;  // [C * B], index t * B + b
  Tensor dense;                      // [C, B, D'] when dense

  std::size_t frames() const { return inputs.masked_in_frames(); }
};

Batch assemble_batch(const Dataset& data, std::span<const Chunk> chunks, std::size_t steps);
std::vector<Batch> make_batches(const Dataset& data, std::span<const Chunk> chunks,
                                std::size_t chunk_size, std::size_t max_per_batch,
                                std::uint64_t shuffle_seed);
// Whole sequences padded to the longest member.
Batch sequence_batch(const Dataset& data, std::span<const std::size_t> seq_ids);

}  // namespace seqtrain
