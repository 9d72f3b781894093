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

#include <gtest/gtest.h>

#include <thread>

#include "oracles/oracles.hpp"
#include "seqtrain/binary_io.hpp"
#include "seqtrain/data.hpp"
#include "seqtrain/error.hpp"
#include "test_util.hpp"

using namespace seqtrain;

namespace {

std::vector<Sequence> random_sequences(std::size_t n, std::size_t D, std::size_t K, bool dense, Rng& rng) {
  std::vector<Sequence> seqs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t L = 1 + rng.index(12);
    seqs[i].id = i;
    seqs[i].inputs = Tensor({L, D});
    // Values representable in f32 so the file round trip is exact.
    for (auto& v : seqs[i].inputs.data()) v = static_cast<float>(rng.uniform(-2, 2));
    if (dense) {
      seqs[i].dense = Tensor({L, K});
      for (auto& v : seqs[i].dense.data()) v = static_cast<float>(rng.uniform(-1, 1));
    } else {
      seqs[i].labels.resize(L);
      for (auto& l : seqs[i].labels) l = static_cast<std::int32_t>(rng.index(K));
    }
  }
  return seqs;
}

std::vector<std::size_t> valid_lens(const std::vector<Chunk>& chunks) {
  std::vector<std::size_t> out;
  for (const auto& c : chunks) out.push_back(c.valid_len);
  return out;
}

}  // namespace

TEST(Chunking, PaperLengthSplitsIntoThree) {
  const std::vector<std::size_t> L = {738};
  EXPECT_EQ(valid_lens(chunk_sequences(L, 250, 250)), (std::vector<std::size_t>{250, 250, 238}));
}

TEST(Chunking, ShortSequenceIsOneChunk) {
  const std::vector<std::size_t> L = {100};
  const auto chunks = chunk_sequences(L, 250, 250);
  ASSERT_EQ(chunks.size(), 1u);
  EXPECT_EQ(chunks[0].valid_len, 100u);
}

TEST(Chunking, OverlapStarts) {
  const std::vector<std::size_t> L = {300};
  const auto chunks = chunk_sequences(L, 250, 125);
  ASSERT_EQ(chunks.size(), 3u);
  EXPECT_EQ(chunks[0].start, 0u);
  EXPECT_EQ(chunks[1].start, 125u);
  EXPECT_EQ(chunks[2].start, 250u);
  EXPECT_EQ(valid_lens(chunks), (std::vector<std::size_t>{250, 175, 50}));
}

TEST(Chunking, CoverageMatchesBruteForce) {
  for (std::size_t L = 1; L <= 300; ++L)
    for (auto [C, S] : {std::pair<std::size_t, std::size_t>{7, 7}, {7, 3}, {10, 1}, {50, 25}}) {
      const std::vector<std::size_t> lens = {L};
      const auto chunks = chunk_sequences(lens, C, S);
      std::vector<int> cover(L, 0);
      for (const auto& c : chunks) {
        ASSERT_EQ(c.start % S, 0u);
        ASSERT_GT(c.valid_len, 0u);
        ASSERT_EQ(c.valid_len, std::min(C, L - c.start));
        for (std::size_t t = c.start; t < c.start + c.valid_len; ++t) ++cover[t];
      }
      ASSERT_EQ(cover, oracle::coverage_counts(L, C, S));
      for (int n : cover) ASSERT_GE(n, 1);
      if (S == C)
        for (int n : cover) ASSERT_EQ(n, 1);
    }
}

TEST(Chunking, Errors) {
  const std::vector<std::size_t> none;
  EXPECT_THROW(chunk_sequences(none, 5, 5), Error);
  const std::vector<std::size_t> one = {4};
  EXPECT_THROW(chunk_sequences(one, 5, 0), ConfigError);
  EXPECT_THROW(chunk_sequences(one, 5, 6), ConfigError);
}

TEST(Batching, SizesDeterminismAndConservation) {
  const auto plan = plan_batches(5, 2, 17);
  ASSERT_EQ(plan.size(), 3u);
  EXPECT_EQ(plan[0].size(), 2u);
  EXPECT_EQ(plan[1].size(), 2u);
  EXPECT_EQ(plan[2].size(), 1u);
  EXPECT_EQ(plan, plan_batches(5, 2, 17));
  EXPECT_THROW(plan_batches(5, 0, 1), ConfigError);

  const auto data = synth_dataset({"delayed_echo", 2, 5, 20, 3, 40, 9});
  const auto chunks = chunk_sequences(data->lengths(), 16, 16);
  const auto batches = make_batches(*data, chunks, 16, 6, 3);
  std::size_t frames = 0;
  for (const auto& b : batches) {
    EXPECT_LE(b.inputs.batch(), 6u);
    EXPECT_EQ(b.inputs.steps(), 16u);
    frames += b.frames();
  }
  EXPECT_EQ(frames, data->total_frames());
}

TEST(Batching, MaskMatchesValidLengthAndContent) {
  const auto data = synth_dataset({"delayed_echo", 1, 4, 6, 5, 30, 2});
  const auto chunks = chunk_sequences(data->lengths(), 8, 8);
  const std::vector<Chunk> pick = {chunks[0], chunks.back()};
  const auto batch = assemble_batch(*data, pick, 8);
  for (std::size_t b = 0; b < 2; ++b) {
    const auto seq = data->get(pick[b].seq);
    for (std::size_t t = 0; t < 8; ++t) {
      ASSERT_EQ(batch.inputs.valid(t, b), t < pick[b].valid_len);
      if (t < pick[b].valid_len) {
        EXPECT_EQ(batch.labels[t * 2 + b], seq->labels[pick[b].start + t]);
        for (std::size_t d = 0; d < 4; ++d)
          EXPECT_EQ(batch.inputs.values(t, b, d), seq->inputs(pick[b].start + t, d));
      } else {
        for (std::size_t d = 0; d < 4; ++d) EXPECT_EQ(batch.inputs.values(t, b, d), 0.0);
      }
    }
  }
}

TEST(DatasetFile, RoundTripSparseAndDense) {
  testutil::TempDir dir("data");
  Rng rng(1);
  for (bool dense : {false, true}) {
    const auto seqs = random_sequences(9, 3, 4, dense, rng);
    const DatasetInfo info{dense ? TargetKind::dense : TargetKind::sparse, 3, 4};
    const auto path = dir.file(dense ? "d.rtnd" : "s.rtnd");
    write_dataset(path, info, seqs);
    const auto loaded = load_dataset(path, 1 << 20);
    EXPECT_EQ(loaded->info(), info);
    ASSERT_EQ(loaded->size(), seqs.size());
    for (std::size_t i = 0; i < seqs.size(); ++i) EXPECT_EQ(*loaded->get(i), seqs[i]);
    // Re-encoding the loaded data reproduces the file byte for byte.
    EXPECT_EQ(encode_dataset(info, seqs), read_file(path));
  }
}

TEST(DatasetFile, TinyCacheIsTransparent) {
  testutil::TempDir dir("cache");
  Rng rng(2);
  const auto seqs = random_sequences(20, 2, 3, false, rng);
  const auto path = dir.file("c.rtnd");
  write_dataset(path, {TargetKind::sparse, 2, 3}, seqs);
  const auto tiny = load_dataset(path, 1);
  const auto big = load_dataset(path, 1 << 24);
  for (int pass = 0; pass < 3; ++pass)
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      const std::size_t id = (i * 7 + pass) % seqs.size();
      EXPECT_EQ(*tiny->get(id), *big->get(id));
    }
  const auto st = tiny->cache_stats();
  EXPECT_EQ(st.hits, 0u);
  EXPECT_EQ(st.reads, 60u);
  EXPECT_EQ(st.resident_bytes, 0u);
  EXPECT_GT(big->cache_stats().hits, 0u);
}

TEST(DatasetFile, CacheRespectsByteCap) {
  testutil::TempDir dir("cap");
  Rng rng(3);
  const auto seqs = random_sequences(30, 4, 3, false, rng);
  const auto path = dir.file("c.rtnd");
  write_dataset(path, {TargetKind::sparse, 4, 3}, seqs);
  const std::size_t cap = 2000;
  const auto data = load_dataset(path, cap);
  for (std::size_t i = 0; i < 90; ++i) {
    data->get((i * 13) % 30);
    ASSERT_LE(data->cache_stats().resident_bytes, cap);
  }
  // LRU: the most recent sequence stays resident when it fits.
  const auto last = (89 * 13) % 30;
  const auto before = data->cache_stats().hits;
  data->get(last);
  EXPECT_EQ(data->cache_stats().hits, before + 1);
}

TEST(DatasetFile, ConcurrentReadersSeeIdenticalData) {
  testutil::TempDir dir("conc");
  Rng rng(4);
  const auto seqs = random_sequences(40, 3, 5, false, rng);
  const auto path = dir.file("c.rtnd");
  write_dataset(path, {TargetKind::sparse, 3, 5}, seqs);
  const auto data = load_dataset(path, 3000);
  std::vector<std::thread> threads;
  std::vector<int> bad(4, 0);
  for (int w = 0; w < 4; ++w) {
    threads.emplace_back([&, w] {
      for (int i = 0; i < 400; ++i) {
        const std::size_t id = static_cast<std::size_t>(i * (w + 3)) % seqs.size();
        if (!(*data->get(id) == seqs[id])) ++bad[w];
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(bad, std::vector<int>(4, 0));
}

TEST(DatasetFile, CorruptionIsReportedWithOffset) {
  testutil::TempDir dir("bad");
  Rng rng(5);
  const auto seqs = random_sequences(3, 2, 3, false, rng);
  const DatasetInfo info{TargetKind::sparse, 2, 3};
  const auto good = encode_dataset(info, seqs);
  const auto expect_error = [&](Bytes bytes, const std::string& fragment) {
    const auto path = dir.file("x.rtnd");
    write_file(path, bytes);
    try {
      load_dataset(path, 1 << 20);
      ADD_FAILURE() << "no error for " << fragment;
    } catch (const FormatError& e) {
      const std::string msg = e.what();
      EXPECT_NE(msg.find(fragment), std::string::npos) << msg;
      EXPECT_NE(msg.find("offset"), std::string::npos) << msg;
    }
  };
  auto magic = good;
  magic[0] = 'X';
  expect_error(magic, "magic");
  auto version = good;
  version[4] = 9;
  expect_error(version, "version");
  expect_error(Bytes(good.begin(), good.end() - 3), "truncated");
  // Last label of the last sequence.
  auto label = good;
  label[label.size() - 4] = 7;
  expect_error(label, "num_classes");
  EXPECT_THROW(load_dataset(dir.file("missing.rtnd"), 1), Error);
}

TEST(DatasetFile, EncodeRejectsInvalidSequences) {
  Sequence s;
  s.inputs = Tensor({2, 2});
  s.labels = {0, 5};
  const std::vector<Sequence> seqs = {s};
  EXPECT_THROW(encode_dataset({TargetKind::sparse, 2, 3}, seqs), FormatError);
  EXPECT_THROW(Dataset::in_memory({TargetKind::sparse, 2, 3}, seqs), FormatError);
}

TEST(Synth, DeterministicAndDefinedByDelay) {
  const SynthSpec spec{"delayed_echo", 3, 8, 10, 5, 20, 4};
  const auto a = synth_dataset(spec), b = synth_dataset(spec);
  for (std::size_t i = 0; i < a->size(); ++i) {
    const auto s = a->get(i);
    EXPECT_EQ(*s, *b->get(i));
    ASSERT_GE(s->length(), 5u);
    ASSERT_LE(s->length(), 20u);
    for (std::size_t t = 0; t < s->length(); ++t) {
      std::size_t sym = 0;
      for (std::size_t k = 0; k < 8; ++k)
        if (s->inputs(t, k) == 1.0) sym = k;
      if (t >= 3) {
        std::size_t prev = 0;
        for (std::size_t k = 0; k < 8; ++k)
          if (s->inputs(t - 3, k) == 1.0) prev = k;
        EXPECT_EQ(s->labels[t], static_cast<std::int32_t>(prev));
      } else {
        EXPECT_EQ(s->labels[t], 0);
      }
      (void)sym;
    }
  }
  auto other = spec;
  other.seed = 5;
  EXPECT_NE(*synth_dataset(other)->get(0), *a->get(0));
}

TEST(Synth, DescriptorParsing) {
  const auto s = parse_synth_descriptor("synth:delayed_echo,k=0,classes=4,n=7,min_len=2,max_len=9,seed=11");
  EXPECT_EQ(s.delay, 0u);
  EXPECT_EQ(s.num_classes, 4u);
  EXPECT_EQ(s.num_seqs, 7u);
  EXPECT_EQ(s.min_len, 2u);
  EXPECT_EQ(s.max_len, 9u);
  EXPECT_EQ(s.seed, 11u);
  EXPECT_EQ(open_dataset("synth:delayed_echo,n=3", 0)->size(), 3u);
  EXPECT_THROW(parse_synth_descriptor("synth:delayed_echo,k=x"), ConfigError);
  EXPECT_THROW(parse_synth_descriptor("synth:delayed_echo,q=1"), ConfigError);
  EXPECT_THROW(synth_dataset({"parity", 1, 2, 3, 4, 5, 6}), ConfigError);
}

TEST(Synth, ZeroDelayLabelsAreTheInputs) {
  const auto d = synth_dataset({"delayed_echo", 0, 5, 10, 3, 9, 1});
  for (std::size_t i = 0; i < d->size(); ++i) {
    const auto s = d->get(i);
    for (std::size_t t = 0; t < s->length(); ++t) EXPECT_EQ(s->inputs(t, s->labels[t]), 1.0);
  }
}
