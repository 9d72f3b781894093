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

#include "seqtrain/param_set.hpp"

#include <algorithm>
#include <cmath>

#include "seqtrain/error.hpp"

namespace seqtrain {

Tensor& ParamSet::add(const std::string& name, Tensor t) {
  auto [it, inserted] = tensors_.emplace(name, std::move(t));
  if (!inserted) throw ConfigError("duplicate parameter '" + name + "'");
  return it->second;
}

Tensor& ParamSet::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ShapeError("missing parameter '" + name + "'");
  return it->second;
}

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ShapeError("missing parameter '" + name + "'");
  return it->second;
}

std::size_t ParamSet::num_elements() const {
  std::size_t n = 0;
  for (const auto& [_, t] : tensors_) n += t.size();
  return n;
}

std::vector<std::string> ParamSet::names() const {
  std::vector<std::string> out;
  out.reserve(tensors_.size());
  for (const auto& [name, _] : tensors_) out.push_back(name);
  return out;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet z;
  for (const auto& [name, t] : tensors_) z.tensors_.emplace(name, Tensor(t.dims()));
  return z;
}

void ParamSet::set_zero() {
  for (auto& [_, t] : tensors_) t.fill(0.0);
}

void ParamSet::check_aligned(const ParamSet& other, const std::string& context) const {
  if (tensors_.size() != other.tensors_.size()) {
    throw ShapeError(context + ": parameter count " + std::to_string(tensors_.size()) + " vs " +
                     std::to_string(other.tensors_.size()));
  }
  auto a = tensors_.begin();
  auto b = other.tensors_.begin();
  for (; a != tensors_.end(); ++a, ++b) {
    if (a->first != b->first) {
      throw ShapeError(context + ": parameter name mismatch '" + a->first + "' vs '" + b->first +
                       "'");
    }
    if (a->second.dims() != b->second.dims()) {
      throw ShapeError(context + ": tensor '" + a->first + "' has dims " +
                       dims_to_string(a->second.dims()) + " vs " +
                       dims_to_string(b->second.dims()));
    }
  }
}

void ParamSet::axpy(double alpha, const ParamSet& x) {
  check_aligned(x, "axpy");
  auto xi = x.tensors_.begin();
  for (auto& [_, t] : tensors_) {
    auto dst = t.data();
    auto src = xi->second.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += alpha * src[i];
    ++xi;
  }
}

double ParamSet::squared_norm() const {
  double s = 0.0;
  for (const auto& [_, t] : tensors_) {
    for (double v : t.data()) s += v * v;
  }
  return s;
}

double max_abs_diff(const ParamSet& a, const ParamSet& b) {
  a.check_aligned(b, "max_abs_diff");
  double m = 0.0;
  auto bi = b.begin();
  for (const auto& [_, t] : a) {
    m = std::max(m, max_abs_diff(t, bi->second));
    ++bi;
  }
  return m;
}

void encode_tensor_blob(const ParamSet& params, ByteWriter& out) {
  out.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    out.str(name);
    out.u8(kDtypeF64);
    out.u8(static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.dims()) out.u64(d);
    for (double v : t.data()) out.f64(v);
  }
}

ParamSet decode_tensor_blob(ByteReader& in) {
  ParamSet params;
  const auto count = in.u32();
  std::string prev;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_at = in.offset();
    auto name = in.str();
    if (i > 0 && !(prev < name)) in.fail_at(name_at, "tensor '" + name + "' breaks name order");
    const auto dtype_at = in.offset();
    const auto dtype = in.u8();
    if (dtype != kDtypeF64) in.fail_at(dtype_at, "unknown dtype " + std::to_string(dtype));
    const auto ndim = in.u8();
    Dims dims(ndim);
    for (auto& d : dims) d = in.u64();
    // Guard against absurd extents before allocating.
    std::size_t n = 1;
    for (auto d : dims) {
      if (d != 0 && n > in.remaining() / 8 / d + 1) in.fail("tensor '" + name + "' extent too large");
      n *= d;
    }
    if (n * 8 > in.remaining()) in.fail("truncated data for tensor '" + name + "'");
    std::vector<double> data(n);
    for (auto& v : data) v = in.f64();
    params.add(name, Tensor(std::move(dims), std::move(data)));
    prev = std::move(name);
  }
  return params;
}

Bytes serialize_params(const ParamSet& params) {
  ByteWriter w;
  encode_tensor_blob(params, w);
  return w.take();
}

ParamSet deserialize_params(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "parameter blob");
  auto p = decode_tensor_blob(r);
  if (!r.at_end()) r.fail("trailing bytes after parameter blob");
  return p;
}

}  // namespace seqtrain
