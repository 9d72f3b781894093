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

#include "seqtrain/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "seqtrain/error.hpp"

namespace seqtrain {

namespace {

void require_seq(const SeqTensor& x, const char* what) {
  if (x.values.rank() != 3 || x.mask.rank() != 2 || x.mask.dim(0) != x.values.dim(0) ||
      x.mask.dim(1) != x.values.dim(1)) {
    throw ShapeError(std::string(what) + ": malformed sequence tensor " +
                     dims_to_string(x.values.dims()));
  }
}

void require_same_layout(const SeqTensor& a, const SeqTensor& b, const char* what) {
  if (a.values.dims() != b.values.dims()) {
    throw ShapeError(std::string(what) + ": shape " + dims_to_string(a.values.dims()) + " vs " +
                     dims_to_string(b.values.dims()));
  }
}

void zero_masked_rows(Tensor& values, const Tensor& mask) {
  const std::size_t frames = mask.size();
  for (std::size_t f = 0; f < frames; ++f) {
    if (mask[f] != 0.0) continue;
    auto r = values.row(f);
    std::fill(r.begin(), r.end(), 0.0);
  }
}

void add_bias_rows(Tensor& z, const Tensor& bias) {
  const std::size_t w = bias.size();
  const std::size_t rows = z.size() / w;
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = z.row(r);
    for (std::size_t j = 0; j < w; ++j) row[j] += bias[j];
  }
}

Tensor column_sums(const Tensor& z, std::size_t width) {
  Tensor s({width});
  const std::size_t rows = z.size() / width;
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = z.row(r);
    for (std::size_t j = 0; j < width; ++j) s[j] += row[j];
  }
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear

std::pair<SeqTensor, LinearCache> linear_forward(const SeqTensor& x, const Tensor& weights,
                                                 const Tensor& bias, Activation act) {
  require_seq(x, "linear_forward");
  if (weights.rank() != 2 || weights.dim(0) != x.features() || bias.rank() != 1 ||
      bias.dim(0) != weights.dim(1)) {
    throw ShapeError("linear_forward: input " + dims_to_string(x.values.dims()) + ", W " +
                     dims_to_string(weights.dims()) + ", b " + dims_to_string(bias.dims()));
  }
  const std::size_t frames = x.steps() * x.batch();
  const std::size_t d_out = weights.dim(1);
  Tensor y({x.steps(), x.batch(), d_out});
  gemm_nn(as_matrix(x.values, frames, x.features()), as_matrix(weights),
          as_matrix(y, frames, d_out));
  add_bias_rows(y, bias);
  if (act != Activation::identity) {
    for (auto& v : y.data()) v = activate(act, v);
  }
  zero_masked_rows(y, x.mask);

  LinearCache cache;
  cache.valid = true;
  cache.input = x;
  cache.weights = weights;
  cache.output = y;
  cache.activation = act;
  return {SeqTensor(std::move(y), x.mask), std::move(cache)};
}

LinearGrads linear_backward(const LinearCache& cache, const SeqTensor& d_out) {
  if (!cache.valid) throw Error("linear_backward: forward cache missing");
  if (d_out.values.dims() != cache.output.dims()) {
    throw ShapeError("linear_backward: gradient shape " + dims_to_string(d_out.values.dims()) +
                     " vs output " + dims_to_string(cache.output.dims()));
  }
  const auto& x = cache.input;
  const std::size_t frames = x.steps() * x.batch();
  const std::size_t d_in = x.features();
  const std::size_t d_outw = cache.weights.dim(1);

  Tensor dz = d_out.values;
  for (std::size_t i = 0; i < dz.size(); ++i) {
    dz[i] *= activation_grad_from_output(cache.activation, cache.output[i]);
  }
  zero_masked_rows(dz, x.mask);

  LinearGrads g;
  g.d_weights = Tensor({d_in, d_outw});
  gemm_tn(as_matrix(x.values, frames, d_in), as_matrix(dz, frames, d_outw),
          as_matrix(g.d_weights));
  g.d_bias = column_sums(dz, d_outw);
  Tensor dx({x.steps(), x.batch(), d_in});
  gemm_nt(as_matrix(dz, frames, d_outw), as_matrix(cache.weights), as_matrix(dx, frames, d_in));
  g.d_input = SeqTensor(std::move(dx), x.mask);
  return g;
}

// ---------------------------------------------------------------------------
// LSTM

Direction parse_direction(int value) {
  if (value == 1) return Direction::forward;
  if (value == -1) return Direction::backward;
  throw ConfigError("direction must be +1 or -1, got " + std::to_string(value));
}

void LstmParams::validate() const {
  if (R.rank() != 2 || W.rank() != 2 || b.rank() != 1) {
    throw ShapeError("LstmParams: W, R must be matrices and b a vector");
  }
  const std::size_t h = R.dim(0);
  if (R.dim(1) != 4 * h || W.dim(1) != 4 * h || b.dim(0) != 4 * h) {
    throw ShapeError("LstmParams: expected W[D,4H], R[H,4H], b[4H] with H=" + std::to_string(h) +
                     ", got W" + dims_to_string(W.dims()) + " R" + dims_to_string(R.dims()) +
                     " b" + dims_to_string(b.dims()));
  }
}

std::pair<SeqTensor, LstmCache> lstm_forward(const SeqTensor& x, const LstmParams& p,
                                             Direction direction) {
  require_seq(x, "lstm_forward");
  p.validate();
  if (p.input_dim() != x.features()) {
    throw ShapeError("lstm_forward: input features " + std::to_string(x.features()) +
                     " but W expects " + std::to_string(p.input_dim()));
  }
  const std::size_t T = x.steps(), B = x.batch(), D = x.features(), H = p.hidden();
  const std::size_t G = 4 * H;

  LstmCache cache;
  cache.valid = true;
  cache.direction = direction;
  cache.params = p;
  cache.input = x;
  cache.gates = Tensor({T, B, G});
  cache.cell = Tensor({T, B, H});
  cache.cell_prev = Tensor({T, B, H});
  cache.hidden_prev = Tensor({T, B, H});
  cache.cell_tanh = Tensor({T, B, H});

  // Non-recurrent part for every frame at once.
  Tensor& z = cache.gates;
  gemm_nn(as_matrix(x.values, T * B, D), as_matrix(p.W), as_matrix(z, T * B, G));
  add_bias_rows(z, p.b);

  Tensor out({T, B, H});
  Tensor h_state({B, H});
  Tensor c_state({B, H});

  for (std::size_t step = 0; step < T; ++step) {
    const std::size_t t = direction == Direction::forward ? step : T - 1 - step;
    double* zt = z.data().data() + t * B * G;
    std::copy(h_state.data().begin(), h_state.data().end(),
              cache.hidden_prev.data().begin() + static_cast<std::ptrdiff_t>(t * B * H));
    std::copy(c_state.data().begin(), c_state.data().end(),
              cache.cell_prev.data().begin() + static_cast<std::ptrdiff_t>(t * B * H));
    gemm_nn(as_matrix(h_state), as_matrix(p.R), MatrixView{zt, B, G});

    for (std::size_t b = 0; b < B; ++b) {
      double* a = zt + b * G;
      double* c = c_state.data().data() + b * H;
      double* h = h_state.data().data() + b * H;
      const std::size_t frame = t * B + b;
      double* c_out = cache.cell.data().data() + frame * H;
      double* tc_out = cache.cell_tanh.data().data() + frame * H;
      if (!x.valid(t, b)) {
        std::fill(a, a + G, 0.0);
        for (std::size_t k = 0; k < H; ++k) {
          c_out[k] = c[k];
          tc_out[k] = std::tanh(c[k]);
          h[k] = 0.0;
        }
        continue;
      }
      double* y = out.data().data() + frame * H;
      for (std::size_t k = 0; k < H; ++k) {
        const double ig = sigmoid(a[k]);
        const double fg = sigmoid(a[H + k]);
        const double gg = std::tanh(a[2 * H + k]);
        const double og = sigmoid(a[3 * H + k]);
        a[k] = ig;
        a[H + k] = fg;
        a[2 * H + k] = gg;
        a[3 * H + k] = og;
        c[k] = fg * c[k] + ig * gg;
        const double tc = std::tanh(c[k]);
        c_out[k] = c[k];
        tc_out[k] = tc;
        h[k] = og * tc;
        y[k] = h[k];
      }
    }
  }
  return {SeqTensor(std::move(out), x.mask), std::move(cache)};
}

LstmGrads lstm_backward(const LstmCache& cache, const SeqTensor& d_hidden) {
  if (!cache.valid) throw Error("lstm_backward: forward cache missing");
  const auto& x = cache.input;
  const auto& p = cache.params;
  const std::size_t T = x.steps(), B = x.batch(), D = x.features(), H = p.hidden();
  const std::size_t G = 4 * H;
  if (d_hidden.values.dims() != Dims{T, B, H}) {
    throw ShapeError("lstm_backward: dH shape " + dims_to_string(d_hidden.values.dims()) +
                     ", expected " + dims_to_string({T, B, H}));
  }

  Tensor d_gates({T, B, G});
  Tensor dh_rec({B, H});
  Tensor dc_rec({B, H});

  for (std::size_t step = 0; step < T; ++step) {
    // Reverse of the forward scan order.
    const std::size_t t = cache.direction == Direction::forward ? T - 1 - step : step;
    double* da_t = d_gates.data().data() + t * B * G;
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t frame = t * B + b;
      double* dc = dc_rec.data().data() + b * H;
      if (!x.valid(t, b)) continue;  // c carried: dc passes through unchanged
      const double* gt = cache.gates.data().data() + frame * G;
      const double* cp = cache.cell_prev.data().data() + frame * H;
      const double* tc = cache.cell_tanh.data().data() + frame * H;
      const double* dy = d_hidden.values.data().data() + frame * H;
      const double* dhr = dh_rec.data().data() + b * H;
      double* da = da_t + b * G;
      for (std::size_t k = 0; k < H; ++k) {
        const double ig = gt[k], fg = gt[H + k], gg = gt[2 * H + k], og = gt[3 * H + k];
        const double dh = dy[k] + dhr[k];
        const double d_o = dh * tc[k];
        const double dct = dc[k] + dh * og * (1.0 - tc[k] * tc[k]);
        da[k] = dct * gg * ig * (1.0 - ig);
        da[H + k] = dct * cp[k] * fg * (1.0 - fg);
        da[2 * H + k] = dct * ig * (1.0 - gg * gg);
        da[3 * H + k] = d_o * og * (1.0 - og);
        dc[k] = dct * fg;
      }
    }
    dh_rec.fill(0.0);
    gemm_nt(ConstMatrixView{da_t, B, G}, as_matrix(p.R), as_matrix(dh_rec));
  }

  LstmGrads g;
  g.dW = Tensor({D, G});
  gemm_tn(as_matrix(x.values, T * B, D), as_matrix(d_gates, T * B, G), as_matrix(g.dW));
  g.dR = Tensor({H, G});
  gemm_tn(as_matrix(cache.hidden_prev, T * B, H), as_matrix(d_gates, T * B, G), as_matrix(g.dR));
  g.db = column_sums(d_gates, G);
  Tensor dx({T, B, D});
  gemm_nt(as_matrix(d_gates, T * B, G), as_matrix(p.W), as_matrix(dx, T * B, D));
  g.d_input = SeqTensor(std::move(dx), x.mask);
  return g;
}

// ---------------------------------------------------------------------------
// Composition

SeqTensor concat_features(std::span<const SeqTensor> parts) {
  if (parts.empty()) throw ShapeError("concat_features: no inputs");
  const auto& first = parts.front();
  require_seq(first, "concat_features");
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_seq(p, "concat_features");
    if (p.steps() != first.steps() || p.batch() != first.batch()) {
      throw ShapeError("concat_features: time/batch extents differ");
    }
    if (!(p.mask == first.mask)) throw ShapeError("concat_features: masks differ");
    total += p.features();
  }
  if (parts.size() == 1) return first;
  const std::size_t frames = first.steps() * first.batch();
  Tensor out({first.steps(), first.batch(), total});
  for (std::size_t f = 0; f < frames; ++f) {
    auto dst = out.row(f).begin();
    for (const auto& p : parts) {
      auto src = p.values.row(f);
      dst = std::copy(src.begin(), src.end(), dst);
    }
  }
  return SeqTensor(std::move(out), first.mask);
}

std::vector<SeqTensor> split_features(const SeqTensor& x, std::span<const std::size_t> widths) {
  std::size_t total = 0;
  for (auto w : widths) total += w;
  if (total != x.features()) {
    throw ShapeError("split_features: widths sum to " + std::to_string(total) + " but input has " +
                     std::to_string(x.features()));
  }
  std::vector<SeqTensor> parts;
  parts.reserve(widths.size());
  std::size_t offset = 0;
  const std::size_t frames = x.steps() * x.batch();
  for (auto w : widths) {
    Tensor v({x.steps(), x.batch(), w});
    for (std::size_t f = 0; f < frames; ++f) {
      auto src = x.values.row(f).subspan(offset, w);
      std::copy(src.begin(), src.end(), v.row(f).begin());
    }
    parts.emplace_back(std::move(v), x.mask);
    offset += w;
  }
  return parts;
}

SeqTensor bidirectional(const SeqTensor& fwd_out, const SeqTensor& bwd_out) {
  require_same_layout(fwd_out, bwd_out, "bidirectional");
  const SeqTensor parts[] = {fwd_out, bwd_out};
  return concat_features(parts);
}

// ---------------------------------------------------------------------------
// Dropout

std::pair<SeqTensor, DropoutCache> dropout_forward(const SeqTensor& x, double rate, Rng& rng,
                                                   bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  DropoutCache cache;
  if (!training || rate == 0.0) return {x, std::move(cache)};
  cache.active = true;
  cache.scale = Tensor(x.values.dims());
  const double keep = 1.0 - rate;
  const double inv = 1.0 / keep;
  SeqTensor y = x;
  for (std::size_t i = 0; i < y.values.size(); ++i) {
    const double s = rng.bernoulli(keep) ? inv : 0.0;
    cache.scale[i] = s;
    y.values[i] *= s;
  }
  return {std::move(y), std::move(cache)};
}

SeqTensor dropout_backward(const DropoutCache& cache, const SeqTensor& d_out) {
  if (!cache.active) return d_out;
  if (cache.scale.dims() != d_out.values.dims()) throw ShapeError("dropout_backward: shape mismatch");
  SeqTensor dx = d_out;
  for (std::size_t i = 0; i < dx.values.size(); ++i) dx.values[i] *= cache.scale[i];
  return dx;
}

// ---------------------------------------------------------------------------
// Losses

Tensor softmax_rows(const Tensor& logits) {
  Tensor p(logits.dims());
  const std::size_t k = logits.dims().back();
  const std::size_t rows = k ? logits.size() / k : 0;
  for (std::size_t r = 0; r < rows; ++r) {
    auto in = logits.row(r);
    auto out = p.row(r);
    const double m = *std::max_element(in.begin(), in.end());
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      out[j] = std::exp(in[j] - m);
      s += out[j];
    }
    for (std::size_t j = 0; j < k; ++j) out[j] /= s;
  }
  return p;
}

LossResult softmax_ce(const SeqTensor& logits, std::span<const std::int32_t> targets) {
  require_seq(logits, "softmax_ce");
  const std::size_t T = logits.steps(), B = logits.batch(), K = logits.features();
  if (targets.size() != T * B) {
    throw ShapeError("softmax_ce: expected " + std::to_string(T * B) + " targets, got " +
                     std::to_string(targets.size()));
  }
  LossResult res;
  Tensor grad({T, B, K});
  for (std::size_t f = 0; f < T * B; ++f) {
    if (logits.mask[f] == 0.0) continue;
    const std::int32_t label = targets[f];
    if (label < 0 || static_cast<std::size_t>(label) >= K) {
      throw ShapeError("softmax_ce: label " + std::to_string(label) + " out of range for " +
                       std::to_string(K) + " classes");
    }
    auto z = logits.values.row(f);
    auto g = grad.row(f);
    std::size_t arg = 0;
    double m = z[0];
    for (std::size_t j = 1; j < K; ++j) {
      if (z[j] > m) {
        m = z[j];
        arg = j;
      }
    }
    double s = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
      g[j] = std::exp(z[j] - m);
      s += g[j];
    }
    const double log_norm = m + std::log(s);
    res.loss += log_norm - z[static_cast<std::size_t>(label)];
    for (std::size_t j = 0; j < K; ++j) g[j] /= s;
    g[static_cast<std::size_t>(label)] -= 1.0;
    res.frames += 1;
    res.frame_errors += arg != static_cast<std::size_t>(label);
  }
  res.grad_wrt_input = SeqTensor(std::move(grad), logits.mask);
  return res;
}

LossResult mse(const SeqTensor& pred, const Tensor& target) {
  require_seq(pred, "mse");
  if (target.dims() != pred.values.dims()) {
    throw ShapeError("mse: prediction " + dims_to_string(pred.values.dims()) + " vs target " +
                     dims_to_string(target.dims()));
  }
  const std::size_t frames = pred.steps() * pred.batch();
  LossResult res;
  Tensor grad(pred.values.dims());
  for (std::size_t f = 0; f < frames; ++f) {
    if (pred.mask[f] == 0.0) continue;
    auto p = pred.values.row(f);
    auto y = target.row(f);
    auto g = grad.row(f);
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double d = p[j] - y[j];
      res.loss += d * d;
      g[j] = 2.0 * d;
    }
    res.frames += 1;
  }
  res.grad_wrt_input = SeqTensor(std::move(grad), pred.mask);
  return res;
}

}  // namespace seqtrain
