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

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "seqtrain/rng.hpp"
#include "seqtrain/tensor.hpp"

namespace seqtrain {

// ---------------------------------------------------------------------------
// Feed-forward layer: y = act(x W + b), frame-wise, masked.

struct LinearCache {
  bool valid = false;
  SeqTensor input;
  Tensor weights;
  Tensor output;  // post-activation values [T, B, Dout]
  Activation activation = Activation::identity;
};

struct LinearGrads {
  SeqTensor d_input;
  Tensor d_weights;
  Tensor d_bias;
};

std::pair<SeqTensor, LinearCache> linear_forward(const SeqTensor& x, const Tensor& weights,
                                                 const Tensor& bias, Activation act);
LinearGrads linear_backward(const LinearCache& cache, const SeqTensor& d_out);

// ---------------------------------------------------------------------------
// LSTM without peepholes. Gate blocks are laid out [i | f | g | o] along
// the 4H axis of W, R and b.

enum class Direction : int { forward = 1, backward = -1 };

Direction parse_direction(int value);

struct LstmParams {
  Tensor W;  // [D_in, 4H]
  Tensor R;  // [H, 4H]
  Tensor b;  // [4H]

  std::size_t input_dim() const { return W.dim(0); }
  std::size_t hidden() const { return R.dim(0); }
  void validate() const;
};

struct LstmCache {
  bool valid = false;
  Direction direction = Direction::forward;
  LstmParams params;
  SeqTensor input;
  Tensor gates;        // activated gates [T, B, 4H]
  Tensor cell;         // c_t [T, B, H]
  Tensor cell_prev;    // c_{t-1} in scan order [T, B, H]
  Tensor hidden_prev;  // h_{t-1} in scan order [T, B, H]
  Tensor cell_tanh;    // tanh(c_t) [T, B, H]
};

struct LstmGrads {
  SeqTensor d_input;
  Tensor dW;
  Tensor dR;
  Tensor db;
};

// Input projection for all T*B frames is one matmul; only the recurrent
// product runs per time step. At masked frames the cell state is carried
// and the hidden output is zero. Backward direction scans every sequence
// from its own last valid frame toward t = 0.
std::pair<SeqTensor, LstmCache> lstm_forward(const SeqTensor& x, const LstmParams& p,
                                             Direction direction);
// Gradients of sum <dH, h>. Weight and input gradients are each a single
// matmul over all frames once the recurrent scan has finished.
LstmGrads lstm_backward(const LstmCache& cache, const SeqTensor& d_hidden);

// ---------------------------------------------------------------------------
// Feature-axis composition.

SeqTensor concat_features(std::span<const SeqTensor> parts);
std::vector<SeqTensor> split_features(const SeqTensor& x, std::span<const std::size_t> widths);
// [fwd | bwd]; masks must match.
SeqTensor bidirectional(const SeqTensor& fwd_out, const SeqTensor& bwd_out);

// ---------------------------------------------------------------------------
// Inverted dropout.

struct DropoutCache {
  bool active = false;
  Tensor scale;  // 0 or 1/(1-rate) per element when active
};

std::pair<SeqTensor, DropoutCache> dropout_forward(const SeqTensor& x, double rate, Rng& rng,
                                                   bool training);
SeqTensor dropout_backward(const DropoutCache& cache, const SeqTensor& d_out);

// ---------------------------------------------------------------------------
// Losses. Sums over masked-in frames, never means.

struct LossResult {
  double loss = 0.0;
  std::size_t frame_errors = 0;
  std::size_t frames = 0;
  SeqTensor grad_wrt_input;
};

// targets: T*B labels in [t * B + b] order; masked-out entries are ignored.
LossResult softmax_ce(const SeqTensor& logits, std::span<const std::int32_t> targets);
// target: dense [T, B, D].
LossResult mse(const SeqTensor& pred, const Tensor& target);

// Row-wise softmax over the last axis.
Tensor softmax_rows(const Tensor& logits);

}  // namespace seqtrain
