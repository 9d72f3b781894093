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
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace seqtrain {

using Dims = std::vector<std::size_t>;

std::string dims_to_string(const Dims& dims);
std::size_t num_elements(const Dims& dims);

// Dense row-major array of doubles. Element (i0..ik) lives at
// sum(i_j * stride_j) with the last stride equal to one.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Dims dims, double fill = 0.0);
  Tensor(Dims dims, std::vector<double> data);

  // 2-D tensor from nested rows, mostly for tests.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor identity(std::size_t n);

  const Dims& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * dims_[1] + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * dims_[1] + j]; }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * dims_[1] + j) * dims_[2] + k];
  }
  double& operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return data_[((i * dims_[1] + j) * dims_[2] + k) * dims_[3] + l];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data_[((i * dims_[1] + j) * dims_[2] + k) * dims_[3] + l];
  }

  // Row r of the tensor viewed as [size / last_dim, last_dim].
  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;

  Tensor reshaped(Dims dims) const;
  void fill(double value);

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Dims dims_;
  std::vector<double> data_;
};

// Non-owning row-major matrix views used by the gemm kernels.
struct MatrixView {
  double* data;
  std::size_t rows;
  std::size_t cols;
};

struct ConstMatrixView {
  const double* data;
  std::size_t rows;
  std::size_t cols;

  ConstMatrixView(const double* d, std::size_t r, std::size_t c) : data(d), rows(r), cols(c) {}
  ConstMatrixView(MatrixView m) : data(m.data), rows(m.rows), cols(m.cols) {}
};

// View a tensor as [size / last_dim, last_dim] (rank >= 1).
MatrixView as_matrix(Tensor& t);
ConstMatrixView as_matrix(const Tensor& t);
// View with an explicit row count; size must equal rows * cols.
MatrixView as_matrix(Tensor& t, std::size_t rows, std::size_t cols);
ConstMatrixView as_matrix(const Tensor& t, std::size_t rows, std::size_t cols);

// c += a * b, c += a^T * b, c += a * b^T. Summation order is fixed.
void gemm_nn(ConstMatrixView a, ConstMatrixView b, MatrixView c);
void gemm_tn(ConstMatrixView a, ConstMatrixView b, MatrixView c);
void gemm_nt(ConstMatrixView a, ConstMatrixView b, MatrixView c);

struct GemmTask {
  ConstMatrixView a;
  ConstMatrixView b;
  MatrixView c;
};
// Independent products evaluated in list order; the CPU stand-in for a
// batched BLAS call.
void gemm_nn_batched(std::span<const GemmTask> tasks);

Tensor matmul(const Tensor& a, const Tensor& b);

enum class Activation { identity, sigmoid, tanh, relu };

Activation parse_activation(const std::string& name);
std::string activation_name(Activation act);

double sigmoid(double x);
double activate(Activation act, double x);
// Derivative expressed through the activation output y = act(x).
double activation_grad_from_output(Activation act, double y);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor apply(Activation act, const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

double max_abs_diff(const Tensor& a, const Tensor& b);

// Batch of variable-length sequences, time-major [T, B, D] with a [T, B]
// 0/1 mask. Padding is only ever at the end of a sequence.
struct SeqTensor {
  Tensor values;
  Tensor mask;

  SeqTensor() = default;
  SeqTensor(Tensor values, Tensor mask);

  static SeqTensor from_lengths(Tensor values, std::span<const std::size_t> lengths);
  static SeqTensor zeros(std::size_t steps, std::size_t batch, std::size_t features,
                         std::span<const std::size_t> lengths);

  std::size_t steps() const { return values.dim(0); }
  std::size_t batch() const { return values.dim(1); }
  std::size_t features() const { return values.dim(2); }
  bool valid(std::size_t t, std::size_t b) const { return mask(t, b) != 0.0; }
  std::vector<std::size_t> lengths() const;
  std::size_t masked_in_frames() const;
  // Throws ShapeError if shapes disagree or the mask is not frame-contiguous.
  void validate() const;

  friend bool operator==(const SeqTensor& a, const SeqTensor& b) = default;
};

Tensor make_sequence_mask(std::size_t steps, std::span<const std::size_t> lengths);
SeqTensor apply_mask(SeqTensor x);

// Image batch [U, V, B, D] with a [U, V, B] mask that is one exactly on
// the top-left rectangle [0, height) x [0, width) of each image.
struct GridTensor {
  Tensor values;
  Tensor mask;

  GridTensor() = default;
  GridTensor(Tensor values, Tensor mask);

  static GridTensor from_extents(Tensor values, std::span<const std::size_t> heights,
                                 std::span<const std::size_t> widths);

  std::size_t rows() const { return values.dim(0); }
  std::size_t cols() const { return values.dim(1); }
  std::size_t batch() const { return values.dim(2); }
  std::size_t features() const { return values.dim(3); }
  bool valid(std::size_t u, std::size_t v, std::size_t b) const { return mask(u, v, b) != 0.0; }
  void validate_shapes() const;

  friend bool operator==(const GridTensor& a, const GridTensor& b) = default;
};

Tensor make_grid_mask(std::size_t rows, std::size_t cols, std::span<const std::size_t> heights,
                      std::span<const std::size_t> widths);
GridTensor apply_mask(GridTensor x);

}  // namespace seqtrain
