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

#include <array>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "seqtrain/tensor.hpp"

namespace seqtrain {

// Two-dimensional LSTM parameters. Gate blocks along the 5H axis:
//   stable cell:   [i | f | g | o | lambda]
//   unstable cell: [i | f_u | f_v | g | o]
struct MdLstmParams {
  Tensor W;   // [D_in, 5H]
  Tensor Ru;  // [H, 5H], applied to h(u-1, v)
  Tensor Rv;  // [H, 5H], applied to h(u, v-1)
  Tensor b;   // [5H]
  bool stable = true;

  std::size_t input_dim() const { return W.dim(0); }
  std::size_t hidden() const { return Ru.dim(0); }
  void validate() const;

  static MdLstmParams zeros(std::size_t input_dim, std::size_t hidden, bool stable);
};

inline constexpr std::size_t kMdGateBlocks = 5;

struct MdLstmCache {
  bool valid = false;
  MdLstmParams params;
  GridTensor input;
  Tensor gates;      // activated gates [U, V, B, 5H]
  Tensor cell;       // [U, V, B, H]
  Tensor cell_tanh;  // [U, V, B, H]
  Tensor hidden;     // [U, V, B, H], zero at masked cells
};

struct MdLstmGrads {
  GridTensor d_input;
  Tensor dW;
  Tensor dRu;
  Tensor dRv;
  Tensor db;
};

// Cells on anti-diagonal d = u + v, in increasing u.
std::vector<std::pair<std::size_t, std::size_t>> diagonal_cells(std::size_t rows, std::size_t cols,
                                                                std::size_t d);

// Wavefront forward: every anti-diagonal is one batched step over all of
// its cells and batch entries. Masked cells output h = 0 and carry c from
// the u-predecessor if it exists, else the v-predecessor, else zero.
std::pair<GridTensor, MdLstmCache> mdlstm_forward(const GridTensor& x, const MdLstmParams& p);
// Reverse wavefront, d = U+V-2 .. 0. Gradients of sum <dH, h>.
MdLstmGrads mdlstm_backward(const MdLstmCache& cache, const GridTensor& d_hidden);

// Axis flips used by the four scan directions.
GridTensor flip_grid(const GridTensor& x, bool flip_u, bool flip_v);

inline constexpr std::size_t kNumGridDirections = 4;
// Orientation k: 0 identity, 1 flip-u, 2 flip-v, 3 flip-both.
inline constexpr std::array<std::pair<bool, bool>, kNumGridDirections> kGridFlips = {
    std::pair{false, false}, std::pair{true, false}, std::pair{false, true}, std::pair{true, true}};

struct MultiDirCache {
  bool valid = false;
  std::array<MdLstmCache, kNumGridDirections> directions;
};

struct MultiDirGrads {
  GridTensor d_input;
  std::array<MdLstmGrads, kNumGridDirections> directions;  // d_input left in flipped frame
};

// Runs the kernel on the four flipped variants of x through one shared
// diagonal schedule, un-flips each output and concatenates them on the
// feature axis in orientation order: [U, V, B, 4H].
std::pair<GridTensor, MultiDirCache> mdlstm_multidirectional(
    const GridTensor& x, std::span<const MdLstmParams, kNumGridDirections> params);
MultiDirGrads mdlstm_multidirectional_backward(const MultiDirCache& cache, const GridTensor& d_out);

}  // namespace seqtrain
