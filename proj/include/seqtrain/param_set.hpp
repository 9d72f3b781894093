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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "seqtrain/binary_io.hpp"
#include "seqtrain/tensor.hpp"

namespace seqtrain {

// Named parameter tensors, iterated in lexicographic name order
// ("<layer>/<tensor>"). This ordering is the canonical order for
// checkpoints, averaging and wire transfer.
class ParamSet {
 public:
  using Map = std::map<std::string, Tensor>;

  Tensor& add(const std::string& name, Tensor t);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  std::size_t size() const { return tensors_.size(); }
  bool empty() const { return tensors_.empty(); }
  std::size_t num_elements() const;
  std::vector<std::string> names() const;

  Map::iterator begin() { return tensors_.begin(); }
  Map::iterator end() { return tensors_.end(); }
  Map::const_iterator begin() const { return tensors_.begin(); }
  Map::const_iterator end() const { return tensors_.end(); }

  ParamSet zeros_like() const;
  void set_zero();
  // Throws ShapeError unless both sets have identical names and dims.
  void check_aligned(const ParamSet& other, const std::string& context) const;
  // this += alpha * x
  void axpy(double alpha, const ParamSet& x);
  double squared_norm() const;

  friend bool operator==(const ParamSet& a, const ParamSet& b) = default;

 private:
  Map tensors_;
};

double max_abs_diff(const ParamSet& a, const ParamSet& b);

// Tensor blob shared by checkpoints and the wire protocol:
//   count u32, then per tensor: name_len u32, name, dtype u8 (1 = f64),
//   ndim u8, dims u64 x ndim, data f64 little-endian.
inline constexpr std::uint8_t kDtypeF64 = 1;

void encode_tensor_blob(const ParamSet& params, ByteWriter& out);
// Rejects unknown dtypes and names that break the canonical ordering.
ParamSet decode_tensor_blob(ByteReader& in);

Bytes serialize_params(const ParamSet& params);
ParamSet deserialize_params(std::span<const std::uint8_t> bytes);

}  // namespace seqtrain
