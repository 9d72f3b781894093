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

#include <cmath>

#include "oracles/gradcheck.hpp"
#include "oracles/oracles.hpp"
#include "seqtrain/error.hpp"
#include "seqtrain/layers.hpp"
#include "test_util.hpp"

using namespace seqtrain;

TEST(Linear, ForwardMatchesMatmulAndMasks) {
  Rng rng(1);
  const auto x = testutil::random_seq(4, {4, 2}, 3, rng);
  const auto W = testutil::random_tensor({3, 5}, rng);
  const auto b = testutil::random_tensor({5}, rng);
  const auto [y, cache] = linear_forward(x, W, b, Activation::tanh);
  const auto ref = oracle::matmul(x.values.reshaped({8, 3}), W);
  for (std::size_t f = 0; f < 8; ++f) {
    const bool valid = x.mask[f] != 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      EXPECT_NEAR(y.values.row(f)[j], valid ? std::tanh(ref(f, j) + b[j]) : 0.0, 1e-14);
    }
  }
  EXPECT_THROW(linear_forward(x, Tensor({4, 5}), b, Activation::identity), ShapeError);
}

TEST(Linear, GradientCheck) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) EXPECT_LE(gradcheck::linear_case(seed), 1e-5) << seed;
}

TEST(Lstm, ForwardMatchesScalarReference) {
  Rng rng(11);
  for (int dir : {1, -1}) {
    const std::vector<std::size_t> lengths = {6, 3, 1, 5};
    const auto x = testutil::random_seq(6, lengths, 3, rng);
    LstmParams p{testutil::random_tensor({3, 16}, rng), testutil::random_tensor({4, 16}, rng),
                 testutil::random_tensor({16}, rng)};
    const auto [h, cache] = lstm_forward(x, p, parse_direction(dir));
    const auto ref = oracle::lstm_reference(x.values, lengths, p.W, p.R, p.b, dir);
    EXPECT_LE(max_abs_diff(h.values, ref), 1e-13) << "direction " << dir;
  }
}

TEST(Lstm, BackwardDirectionStartsAtEachSequenceEnd) {
  // The first output of a reversed scan over a length-1 sequence sees no
  // history, whatever the padding length.
  Rng rng(2);
  LstmParams p{testutil::random_tensor({2, 8}, rng), testutil::random_tensor({2, 8}, rng),
               testutil::random_tensor({8}, rng)};
  Tensor v({1, 1, 2});
  v[0] = 0.3;
  v[1] = -0.7;
  const auto short_x = SeqTensor::from_lengths(v, std::vector<std::size_t>{1});
  Tensor padded({5, 1, 2});
  padded[0] = 0.3;
  padded[1] = -0.7;
  const auto long_x = SeqTensor::from_lengths(padded, std::vector<std::size_t>{1});
  const auto a = lstm_forward(short_x, p, Direction::backward).first;
  const auto b = lstm_forward(long_x, p, Direction::backward).first;
  for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(a.values(0, 0, k), b.values(0, 0, k));
  for (std::size_t t = 1; t < 5; ++t)
    for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(b.values(t, 0, k), 0.0);
}

TEST(Lstm, GradientCheckBothDirections) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    EXPECT_LE(gradcheck::lstm_case(seed, Direction::forward), 1e-5) << seed;
    EXPECT_LE(gradcheck::lstm_case(seed, Direction::backward), 1e-5) << seed;
  }
}

TEST(Lstm, BidirectionalStackGradientCheck) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) EXPECT_LE(gradcheck::blstm_stack_case(seed), 1e-5) << seed;
}

TEST(Lstm, RejectsBadShapesAndDirections) {
  Rng rng(1);
  const auto x = testutil::random_seq(3, {3}, 2, rng);
  LstmParams p{Tensor({3, 8}), Tensor({2, 8}), Tensor({8})};
  EXPECT_THROW(lstm_forward(x, p, Direction::forward), ShapeError);
  EXPECT_THROW(parse_direction(0), ConfigError);
  EXPECT_THROW(lstm_backward(LstmCache{}, x), Error);
}

TEST(Composition, ConcatAndSplitAreInverse) {
  Rng rng(4);
  const auto a = testutil::random_seq(3, {3, 2}, 2, rng);
  auto b = testutil::random_seq(3, {3, 2}, 4, rng);
  const std::vector<SeqTensor> parts = {a, b};
  const auto c = concat_features(parts);
  EXPECT_EQ(c.features(), 6u);
  const std::vector<std::size_t> widths = {2, 4};
  const auto back = split_features(c, widths);
  EXPECT_EQ(back[0], a);
  EXPECT_EQ(back[1], b);
  b.mask(2, 0) = 0.0;
  const std::vector<SeqTensor> bad = {a, b};
  EXPECT_THROW(concat_features(bad), ShapeError);
}

TEST(Dropout, EvalIsIdentityAndTrainingIsUnbiased) {
  Rng rng(5);
  Tensor ones({100, 10, 10}, 1.0);
  const auto x = SeqTensor::from_lengths(ones, std::vector<std::size_t>(10, 100));
  const auto [y_eval, c_eval] = dropout_forward(x, 0.5, rng, false);
  EXPECT_EQ(y_eval, x);
  const auto [y, cache] = dropout_forward(x, 0.3, rng, true);
  double mean = 0.0;
  std::size_t zeros = 0;
  for (double v : y.values.data()) {
    mean += v;
    zeros += v == 0.0;
    if (v != 0.0) EXPECT_DOUBLE_EQ(v, 1.0 / 0.7);
  }
  mean /= static_cast<double>(y.values.size());
  EXPECT_NEAR(mean, 1.0, 0.03);
  EXPECT_NEAR(zeros / double(y.values.size()), 0.3, 0.01);
  const auto dx = dropout_backward(cache, x);
  EXPECT_EQ(dx.values, y.values);
  EXPECT_THROW(dropout_forward(x, 1.0, rng, true), ConfigError);
}

TEST(SoftmaxCe, StableForHugeLogits) {
  Tensor z({1, 1, 3});
  z[0] = 1000.0;
  z[1] = 999.0;
  z[2] = -1000.0;
  const auto logits = SeqTensor::from_lengths(z, std::vector<std::size_t>{1});
  const std::vector<std::int32_t> label = {1};
  const auto r = softmax_ce(logits, label);
  EXPECT_TRUE(std::isfinite(r.loss));
  EXPECT_NEAR(r.loss, 1.0 + std::log1p(std::exp(-1.0)), 1e-12);
  EXPECT_EQ(r.frame_errors, 1u);
}

TEST(SoftmaxCe, UniformLogitsAndTies) {
  const auto logits = SeqTensor::from_lengths(Tensor({2, 1, 4}), std::vector<std::size_t>{2});
  const std::vector<std::int32_t> labels = {0, 3};
  const auto r = softmax_ce(logits, labels);
  EXPECT_NEAR(r.loss, 2 * std::log(4.0), 1e-14);
  // Ties resolve to the lowest index, so label 0 is correct and 3 is not.
  EXPECT_EQ(r.frame_errors, 1u);
  EXPECT_EQ(r.frames, 2u);
  const std::vector<std::int32_t> bad = {0, 4};
  EXPECT_THROW(softmax_ce(logits, bad), ShapeError);
}

TEST(SoftmaxCe, IgnoresPadding) {
  Rng rng(3);
  const auto z = testutil::random_seq(4, {4, 1}, 3, rng);
  std::vector<std::int32_t> labels(8, 1);
  const auto a = softmax_ce(z, labels);
  labels[3] = 99;  // padded frame (t=1, b=1)
  const auto b = softmax_ce(z, labels);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.frames, 5u);
}

TEST(Losses, GradientChecks) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    EXPECT_LE(gradcheck::softmax_ce_case(seed), 1e-5) << seed;
    EXPECT_LE(gradcheck::mse_case(seed), 1e-5) << seed;
  }
}

TEST(Network, GradientCheckThroughGraph) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) EXPECT_LE(gradcheck::network_case(seed), 1e-5) << seed;
}
