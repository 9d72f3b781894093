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

#include "seqtrain/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "seqtrain/error.hpp"

namespace seqtrain {

std::string dims_to_string(const Dims& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << ',';
    os << dims[i];
  }
  os << ']';
  return os.str();
}

std::size_t num_elements(const Dims& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

Tensor::Tensor(Dims dims, double fill) : dims_(std::move(dims)), data_(num_elements(dims_), fill) {}

Tensor::Tensor(Dims dims, std::vector<double> data) : dims_(std::move(dims)), data_(std::move(data)) {
  if (data_.size() != num_elements(dims_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match dims " + dims_to_string(dims_));
  }
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n_rows = rows.size();
  const std::size_t n_cols = n_rows ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(n_rows * n_cols);
  for (const auto& r : rows) {
    if (r.size() != n_cols) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({n_rows, n_cols}, std::move(data));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

std::span<double> Tensor::row(std::size_t r) {
  const std::size_t w = dims_.back();
  return std::span<double>(data_).subspan(r * w, w);
}

std::span<const double> Tensor::row(std::size_t r) const {
  const std::size_t w = dims_.back();
  return std::span<const double>(data_).subspan(r * w, w);
}

Tensor Tensor::reshaped(Dims dims) const {
  if (num_elements(dims) != data_.size()) {
    throw ShapeError("cannot reshape " + dims_to_string(dims_) + " to " + dims_to_string(dims));
  }
  return Tensor(std::move(dims), data_);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

MatrixView as_matrix(Tensor& t) {
  const std::size_t cols = t.rank() ? t.dims().back() : 1;
  return {t.data().data(), cols ? t.size() / cols : 0, cols};
}

ConstMatrixView as_matrix(const Tensor& t) {
  const std::size_t cols = t.rank() ? t.dims().back() : 1;
  return {t.data().data(), cols ? t.size() / cols : 0, cols};
}

MatrixView as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
  if (rows * cols != t.size()) throw ShapeError("matrix view size mismatch");
  return {t.data().data(), rows, cols};
}

ConstMatrixView as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  if (rows * cols != t.size()) throw ShapeError("matrix view size mismatch");
  return {t.data().data(), rows, cols};
}

namespace {

[[noreturn]] void gemm_mismatch(const char* which, std::size_t ar, std::size_t ac, std::size_t br,
                                std::size_t bc, std::size_t cr, std::size_t cc) {
  std::ostringstream os;
  os << which << ": incompatible shapes a[" << ar << ',' << ac << "] b[" << br << ',' << bc
     << "] c[" << cr << ',' << cc << ']';
  throw ShapeError(os.str());
}

}  // namespace

void gemm_nn(ConstMatrixView a, ConstMatrixView b, MatrixView c) {
  if (a.cols != b.rows || c.rows != a.rows || c.cols != b.cols) {
    gemm_mismatch("gemm_nn", a.rows, a.cols, b.rows, b.cols, c.rows, c.cols);
  }
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* ci = c.data + i * c.cols;
    const double* ai = a.data + i * a.cols;
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = ai[k];
      if (aik == 0.0) continue;
      const double* bk = b.data + k * b.cols;
      for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
    }
  }
}

void gemm_tn(ConstMatrixView a, ConstMatrixView b, MatrixView c) {
  if (a.rows != b.rows || c.rows != a.cols || c.cols != b.cols) {
    gemm_mismatch("gemm_tn", a.rows, a.cols, b.rows, b.cols, c.rows, c.cols);
  }
  for (std::size_t k = 0; k < a.rows; ++k) {
    const double* ak = a.data + k * a.cols;
    const double* bk = b.data + k * b.cols;
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double aki = ak[i];
      if (aki == 0.0) continue;
      double* ci = c.data + i * c.cols;
      for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aki * bk[j];
    }
  }
}

void gemm_nt(ConstMatrixView a, ConstMatrixView b, MatrixView c) {
  if (a.cols != b.cols || c.rows != a.rows || c.cols != b.rows) {
    gemm_mismatch("gemm_nt", a.rows, a.cols, b.rows, b.cols, c.rows, c.cols);
  }
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ai = a.data + i * a.cols;
    double* ci = c.data + i * c.cols;
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* bj = b.data + j * b.cols;
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) s += ai[k] * bj[k];
      ci[j] += s;
    }
  }
}

void gemm_nn_batched(std::span<const GemmTask> tasks) {
  for (const auto& t : tasks) gemm_nn(t.a, t.b, t.c);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + dims_to_string(a.dims()) + " x " +
                     dims_to_string(b.dims()));
  }
  Tensor c({a.dim(0), b.dim(1)});
  gemm_nn(as_matrix(a), as_matrix(b), as_matrix(c));
  return c;
}

Activation parse_activation(const std::string& name) {
  if (name == "identity" || name == "linear" || name.empty()) return Activation::identity;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  throw ConfigError("unknown activation '" + name + "'");
}

std::string activation_name(Activation act) {
  switch (act) {
    case Activation::identity: return "identity";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
  }
  return "identity";
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double activate(Activation act, double x) {
  switch (act) {
    case Activation::identity: return x;
    case Activation::sigmoid: return sigmoid(x);
    case Activation::tanh: return std::tanh(x);
    case Activation::relu: return x > 0.0 ? x : 0.0;
  }
  return x;
}

double activation_grad_from_output(Activation act, double y) {
  switch (act) {
    case Activation::identity: return 1.0;
    case Activation::sigmoid: return y * (1.0 - y);
    case Activation::tanh: return 1.0 - y * y;
    case Activation::relu: return y > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

namespace {

template <typename F>
Tensor map(const Tensor& x, F f) {
  Tensor y(x.dims());
  auto in = x.data();
  auto out = y.data();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return y;
}

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, const char* name, F f) {
  if (a.dims() != b.dims()) {
    throw ShapeError(std::string(name) + ": shape mismatch " + dims_to_string(a.dims()) + " vs " +
                     dims_to_string(b.dims()));
  }
  Tensor y(a.dims());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = f(a[i], b[i]);
  return y;
}

}  // namespace

Tensor sigmoid(const Tensor& x) { return map(x, [](double v) { return sigmoid(v); }); }
Tensor tanh(const Tensor& x) { return map(x, [](double v) { return std::tanh(v); }); }
Tensor relu(const Tensor& x) { return map(x, [](double v) { return v > 0.0 ? v : 0.0; }); }
Tensor apply(Activation act, const Tensor& x) {
  return map(x, [act](double v) { return activate(act, v); });
}
Tensor add(const Tensor& a, const Tensor& b) {
  return zip(a, b, "add", [](double x, double y) { return x + y; });
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return zip(a, b, "mul", [](double x, double y) { return x * y; });
}
Tensor scale(const Tensor& a, double s) { return map(a, [s](double v) { return v * s; }); }

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.dims() != b.dims()) {
    throw ShapeError("max_abs_diff: shape mismatch " + dims_to_string(a.dims()) + " vs " +
                     dims_to_string(b.dims()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// ---------------------------------------------------------------------------
// SeqTensor

SeqTensor::SeqTensor(Tensor v, Tensor m) : values(std::move(v)), mask(std::move(m)) {}

Tensor make_sequence_mask(std::size_t steps, std::span<const std::size_t> lengths) {
  Tensor mask({steps, lengths.size()});
  for (std::size_t b = 0; b < lengths.size(); ++b) {
    if (lengths[b] > steps) throw ShapeError("sequence length exceeds time extent");
    for (std::size_t t = 0; t < lengths[b]; ++t) mask(t, b) = 1.0;
  }
  return mask;
}

SeqTensor SeqTensor::from_lengths(Tensor values, std::span<const std::size_t> lengths) {
  if (values.rank() != 3 || values.dim(1) != lengths.size()) {
    throw ShapeError("SeqTensor values must be [T,B,D] with B = number of lengths");
  }
  Tensor mask = make_sequence_mask(values.dim(0), lengths);
  return apply_mask(SeqTensor(std::move(values), std::move(mask)));
}

SeqTensor SeqTensor::zeros(std::size_t steps, std::size_t batch, std::size_t features,
                           std::span<const std::size_t> lengths) {
  if (lengths.size() != batch) throw ShapeError("SeqTensor::zeros: batch/lengths mismatch");
  return SeqTensor(Tensor({steps, batch, features}), make_sequence_mask(steps, lengths));
}

std::vector<std::size_t> SeqTensor::lengths() const {
  std::vector<std::size_t> lens(batch(), 0);
  for (std::size_t t = 0; t < steps(); ++t) {
    for (std::size_t b = 0; b < batch(); ++b) {
      if (valid(t, b)) lens[b] = t + 1;
    }
  }
  return lens;
}

std::size_t SeqTensor::masked_in_frames() const {
  std::size_t n = 0;
  for (double m : mask.data()) n += m != 0.0;
  return n;
}

void SeqTensor::validate() const {
  if (values.rank() != 3 || mask.rank() != 2 || mask.dim(0) != values.dim(0) ||
      mask.dim(1) != values.dim(1)) {
    throw ShapeError("SeqTensor: values " + dims_to_string(values.dims()) + " and mask " +
                     dims_to_string(mask.dims()) + " disagree");
  }
  for (std::size_t b = 0; b < batch(); ++b) {
    bool ended = false;
    for (std::size_t t = 0; t < steps(); ++t) {
      const double m = mask(t, b);
      if (m != 0.0 && m != 1.0) throw ShapeError("SeqTensor: mask entries must be 0 or 1");
      if (m == 0.0) ended = true;
      else if (ended) throw ShapeError("SeqTensor: mask is not frame-contiguous");
    }
  }
}

SeqTensor apply_mask(SeqTensor x) {
  const std::size_t d = x.features();
  for (std::size_t t = 0; t < x.steps(); ++t) {
    for (std::size_t b = 0; b < x.batch(); ++b) {
      if (x.valid(t, b)) continue;
      auto r = x.values.row(t * x.batch() + b);
      std::fill(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(d), 0.0);
    }
  }
  return x;
}

// ---------------------------------------------------------------------------
// GridTensor

GridTensor::GridTensor(Tensor v, Tensor m) : values(std::move(v)), mask(std::move(m)) {}

Tensor make_grid_mask(std::size_t rows, std::size_t cols, std::span<const std::size_t> heights,
                      std::span<const std::size_t> widths) {
  if (heights.size() != widths.size()) throw ShapeError("grid mask: heights/widths mismatch");
  Tensor mask({rows, cols, heights.size()});
  for (std::size_t b = 0; b < heights.size(); ++b) {
    if (heights[b] > rows || widths[b] > cols) throw ShapeError("grid extent exceeds grid");
    for (std::size_t u = 0; u < heights[b]; ++u) {
      for (std::size_t v = 0; v < widths[b]; ++v) mask(u, v, b) = 1.0;
    }
  }
  return mask;
}

GridTensor GridTensor::from_extents(Tensor values, std::span<const std::size_t> heights,
                                    std::span<const std::size_t> widths) {
  if (values.rank() != 4 || values.dim(2) != heights.size()) {
    throw ShapeError("GridTensor values must be [U,V,B,D]");
  }
  Tensor mask = make_grid_mask(values.dim(0), values.dim(1), heights, widths);
  return apply_mask(GridTensor(std::move(values), std::move(mask)));
}

void GridTensor::validate_shapes() const {
  if (values.rank() != 4 || mask.rank() != 3 || mask.dim(0) != values.dim(0) ||
      mask.dim(1) != values.dim(1) || mask.dim(2) != values.dim(2)) {
    throw ShapeError("GridTensor: values " + dims_to_string(values.dims()) + " and mask " +
                     dims_to_string(mask.dims()) + " disagree");
  }
}

GridTensor apply_mask(GridTensor x) {
  x.validate_shapes();
  const std::size_t n = x.rows() * x.cols() * x.batch();
  for (std::size_t cell = 0; cell < n; ++cell) {
    if (x.mask[cell] != 0.0) continue;
    auto r = x.values.row(cell);
    std::fill(r.begin(), r.end(), 0.0);
  }
  return x;
}

}  // namespace seqtrain
