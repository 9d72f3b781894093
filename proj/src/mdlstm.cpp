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

#include "seqtrain/mdlstm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "seqtrain/error.hpp"

namespace seqtrain {

void MdLstmParams::validate() const {
  if (W.rank() != 2 || Ru.rank() != 2 || Rv.rank() != 2 || b.rank() != 1) {
    throw ShapeError("MdLstmParams: W, Ru, Rv must be matrices and b a vector");
  }
  const std::size_t h = Ru.dim(0);
  const std::size_t g = kMdGateBlocks * h;
  if (Ru.dim(1) != g || Rv.dims() != Ru.dims() || W.dim(1) != g || b.dim(0) != g) {
    throw ShapeError("MdLstmParams: expected W[D,5H], Ru[H,5H], Rv[H,5H], b[5H] with H=" +
                     std::to_string(h) + ", got W" + dims_to_string(W.dims()) + " Ru" +
                     dims_to_string(Ru.dims()) + " Rv" + dims_to_string(Rv.dims()) + " b" +
                     dims_to_string(b.dims()));
  }
}

MdLstmParams MdLstmParams::zeros(std::size_t input_dim, std::size_t hidden, bool stable) {
  const std::size_t g = kMdGateBlocks * hidden;
  return MdLstmParams{Tensor({input_dim, g}), Tensor({hidden, g}), Tensor({hidden, g}),
                      Tensor({g}), stable};
}

std::vector<std::pair<std::size_t, std::size_t>> diagonal_cells(std::size_t rows, std::size_t cols,
                                                                std::size_t d) {
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  if (rows == 0 || cols == 0 || d > rows + cols - 2) return cells;
  const std::size_t u_lo = d >= cols ? d - cols + 1 : 0;
  const std::size_t u_hi = std::min(d, rows - 1);
  for (std::size_t u = u_lo; u <= u_hi; ++u) cells.emplace_back(u, d - u);
  return cells;
}

namespace {

struct ForwardStream {
  const MdLstmParams* params;
  const GridTensor* input;
  MdLstmCache* cache;
  Tensor a;   // gathered pre-activations for the current diagonal [n, 5H]
  Tensor hu;  // gathered h(u-1, v) [n, H]
  Tensor hv;  // gathered h(u, v-1) [n, H]
};

void check_input(const GridTensor& x, const MdLstmParams& p) {
  x.validate_shapes();
  p.validate();
  if (x.features() != p.input_dim()) {
    throw ShapeError("mdlstm: input features " + std::to_string(x.features()) + " but W expects " +
                     std::to_string(p.input_dim()));
  }
}

void forward_streams(std::span<ForwardStream> streams) {
  const GridTensor& x0 = *streams.front().input;
  const std::size_t U = x0.rows(), V = x0.cols(), B = x0.batch();
  const std::size_t cells_total = U * V * B;

  for (auto& s : streams) {
    const auto& p = *s.params;
    const auto& x = *s.input;
    const std::size_t H = p.hidden(), G = kMdGateBlocks * H;
    auto& c = *s.cache;
    c.valid = true;
    c.params = p;
    c.input = x;
    c.gates = Tensor({U, V, B, G});
    c.cell = Tensor({U, V, B, H});
    c.cell_tanh = Tensor({U, V, B, H});
    c.hidden = Tensor({U, V, B, H});
    // Input projection for every cell at once.
    gemm_nn(as_matrix(x.values, cells_total, x.features()), as_matrix(p.W),
            as_matrix(c.gates, cells_total, G));
    for (std::size_t r = 0; r < cells_total; ++r) {
      auto row = c.gates.row(r);
      for (std::size_t j = 0; j < G; ++j) row[j] += p.b[j];
    }
  }

  std::vector<GemmTask> tasks;
  for (std::size_t d = 0; d + 1 < U + V; ++d) {
    const auto cells = diagonal_cells(U, V, d);
    const std::size_t n = cells.size() * B;
    tasks.clear();
    for (auto& s : streams) {
      const std::size_t H = s.params->hidden(), G = kMdGateBlocks * H;
      auto& c = *s.cache;
      s.a = Tensor({n, G});
      s.hu = Tensor({n, H});
      s.hv = Tensor({n, H});
      for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        const auto [u, v] = cells[ci];
        for (std::size_t b = 0; b < B; ++b) {
          const std::size_t r = ci * B + b;
          const std::size_t cell = (u * V + v) * B + b;
          auto src = c.gates.row(cell);
          std::copy(src.begin(), src.end(), s.a.row(r).begin());
          if (u > 0) {
            auto h = c.hidden.row(((u - 1) * V + v) * B + b);
            std::copy(h.begin(), h.end(), s.hu.row(r).begin());
          }
          if (v > 0) {
            auto h = c.hidden.row((u * V + v - 1) * B + b);
            std::copy(h.begin(), h.end(), s.hv.row(r).begin());
          }
        }
      }
      tasks.push_back({as_matrix(std::as_const(s.hu)), as_matrix(s.params->Ru), as_matrix(s.a)});
      tasks.push_back({as_matrix(std::as_const(s.hv)), as_matrix(s.params->Rv), as_matrix(s.a)});
    }
    gemm_nn_batched(tasks);

    for (auto& s : streams) {
      const auto& p = *s.params;
      const auto& x = *s.input;
      const std::size_t H = p.hidden(), G = kMdGateBlocks * H;
      auto& c = *s.cache;
      for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        const auto [u, v] = cells[ci];
        for (std::size_t b = 0; b < B; ++b) {
          const std::size_t r = ci * B + b;
          const std::size_t cell = (u * V + v) * B + b;
          const double* cu = u > 0 ? c.cell.row(((u - 1) * V + v) * B + b).data() : nullptr;
          const double* cv = v > 0 ? c.cell.row((u * V + v - 1) * B + b).data() : nullptr;
          double* gates = c.gates.row(cell).data();
          double* cc = c.cell.row(cell).data();
          double* tc = c.cell_tanh.row(cell).data();
          double* hh = c.hidden.row(cell).data();
          if (!x.valid(u, v, b)) {
            std::fill(gates, gates + G, 0.0);
            const double* carry = cu ? cu : cv;
            for (std::size_t k = 0; k < H; ++k) {
              cc[k] = carry ? carry[k] : 0.0;
              tc[k] = std::tanh(cc[k]);
              hh[k] = 0.0;
            }
            continue;
          }
          const double* a = s.a.row(r).data();
          for (std::size_t k = 0; k < H; ++k) {
            const double pu = cu ? cu[k] : 0.0;
            const double pv = cv ? cv[k] : 0.0;
            double state, og;
            if (p.stable) {
              const double ig = sigmoid(a[k]);
              const double fg = sigmoid(a[H + k]);
              const double gg = std::tanh(a[2 * H + k]);
              og = sigmoid(a[3 * H + k]);
              const double lg = sigmoid(a[4 * H + k]);
              state = fg * (lg * pu + (1.0 - lg) * pv) + ig * gg;
              gates[k] = ig;
              gates[H + k] = fg;
              gates[2 * H + k] = gg;
              gates[3 * H + k] = og;
              gates[4 * H + k] = lg;
            } else {
              const double ig = sigmoid(a[k]);
              const double fu = sigmoid(a[H + k]);
              const double fv = sigmoid(a[2 * H + k]);
              const double gg = std::tanh(a[3 * H + k]);
              og = sigmoid(a[4 * H + k]);
              state = fu * pu + fv * pv + ig * gg;
              gates[k] = ig;
              gates[H + k] = fu;
              gates[2 * H + k] = fv;
              gates[3 * H + k] = gg;
              gates[4 * H + k] = og;
            }
            cc[k] = state;
            tc[k] = std::tanh(state);
            hh[k] = og * tc[k];
          }
        }
      }
    }
  }
}

struct BackwardStream {
  const MdLstmCache* cache;
  const Tensor* d_hidden;  // [U, V, B, H]
  MdLstmGrads* grads;
  Tensor dh;   // accumulated dL/dh [U, V, B, H]
  Tensor dc;   // accumulated dL/dc from successors [U, V, B, H]
  Tensor dz;   // pre-activation gradients [U, V, B, 5H]
  Tensor dzd;  // current diagonal [n, 5H]
  Tensor gu;   // dzd * Ru^T [n, H]
  Tensor gv;
};

void backward_streams(std::span<BackwardStream> streams) {
  const GridTensor& x0 = streams.front().cache->input;
  const std::size_t U = x0.rows(), V = x0.cols(), B = x0.batch();
  const std::size_t cells_total = U * V * B;

  for (auto& s : streams) {
    const auto& c = *s.cache;
    const std::size_t H = c.params.hidden(), G = kMdGateBlocks * H;
    s.dh = *s.d_hidden;
    s.dc = Tensor({U, V, B, H});
    s.dz = Tensor({U, V, B, G});
  }

  for (std::size_t dd = U + V - 1; dd-- > 0;) {
    const auto cells = diagonal_cells(U, V, dd);
    const std::size_t n = cells.size() * B;
    for (auto& s : streams) {
      const auto& c = *s.cache;
      const auto& p = c.params;
      const std::size_t H = p.hidden(), G = kMdGateBlocks * H;
      s.dzd = Tensor({n, G});
      for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        const auto [u, v] = cells[ci];
        for (std::size_t b = 0; b < B; ++b) {
          const std::size_t r = ci * B + b;
          const std::size_t cell = (u * V + v) * B + b;
          const std::size_t cell_u = ((u - 1) * V + v) * B + b;  // valid only if u > 0
          const std::size_t cell_v = (u * V + v - 1) * B + b;    // valid only if v > 0
          double* dc_here = s.dc.row(cell).data();
          double* dcu = u > 0 ? s.dc.row(cell_u).data() : nullptr;
          double* dcv = v > 0 ? s.dc.row(cell_v).data() : nullptr;
          if (!c.input.valid(u, v, b)) {
            double* dst = dcu ? dcu : dcv;
            if (dst) {
              for (std::size_t k = 0; k < H; ++k) dst[k] += dc_here[k];
            }
            continue;
          }
          const double* gates = c.gates.row(cell).data();
          const double* tc = c.cell_tanh.row(cell).data();
          const double* dh = s.dh.row(cell).data();
          const double* cu = u > 0 ? c.cell.row(cell_u).data() : nullptr;
          const double* cv = v > 0 ? c.cell.row(cell_v).data() : nullptr;
          double* dz = s.dzd.row(r).data();
          for (std::size_t k = 0; k < H; ++k) {
            const double pu = cu ? cu[k] : 0.0;
            const double pv = cv ? cv[k] : 0.0;
            if (p.stable) {
              const double ig = gates[k], fg = gates[H + k], gg = gates[2 * H + k];
              const double og = gates[3 * H + k], lg = gates[4 * H + k];
              const double dcell = dc_here[k] + dh[k] * og * (1.0 - tc[k] * tc[k]);
              dz[k] = dcell * gg * ig * (1.0 - ig);
              dz[H + k] = dcell * (lg * pu + (1.0 - lg) * pv) * fg * (1.0 - fg);
              dz[2 * H + k] = dcell * ig * (1.0 - gg * gg);
              dz[3 * H + k] = dh[k] * tc[k] * og * (1.0 - og);
              dz[4 * H + k] = dcell * fg * (pu - pv) * lg * (1.0 - lg);
              if (dcu) dcu[k] += dcell * fg * lg;
              if (dcv) dcv[k] += dcell * fg * (1.0 - lg);
            } else {
              const double ig = gates[k], fu = gates[H + k], fv = gates[2 * H + k];
              const double gg = gates[3 * H + k], og = gates[4 * H + k];
              const double dcell = dc_here[k] + dh[k] * og * (1.0 - tc[k] * tc[k]);
              dz[k] = dcell * gg * ig * (1.0 - ig);
              dz[H + k] = dcell * pu * fu * (1.0 - fu);
              dz[2 * H + k] = dcell * pv * fv * (1.0 - fv);
              dz[3 * H + k] = dcell * ig * (1.0 - gg * gg);
              dz[4 * H + k] = dh[k] * tc[k] * og * (1.0 - og);
              if (dcu) dcu[k] += dcell * fu;
              if (dcv) dcv[k] += dcell * fv;
            }
          }
          std::copy(dz, dz + G, s.dz.row(cell).begin());
        }
      }
      s.gu = Tensor({n, H});
      s.gv = Tensor({n, H});
      gemm_nt(as_matrix(std::as_const(s.dzd)), as_matrix(p.Ru), as_matrix(s.gu));
      gemm_nt(as_matrix(std::as_const(s.dzd)), as_matrix(p.Rv), as_matrix(s.gv));
      for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        const auto [u, v] = cells[ci];
        for (std::size_t b = 0; b < B; ++b) {
          const std::size_t r = ci * B + b;
          if (u > 0) {
            auto dst = s.dh.row(((u - 1) * V + v) * B + b);
            auto src = s.gu.row(r);
            for (std::size_t k = 0; k < H; ++k) dst[k] += src[k];
          }
          if (v > 0) {
            auto dst = s.dh.row((u * V + v - 1) * B + b);
            auto src = s.gv.row(r);
            for (std::size_t k = 0; k < H; ++k) dst[k] += src[k];
          }
        }
      }
    }
  }

  for (auto& s : streams) {
    const auto& c = *s.cache;
    const auto& p = c.params;
    const std::size_t H = p.hidden(), G = kMdGateBlocks * H, D = p.input_dim();
    auto& g = *s.grads;
    // Predecessor hidden states aligned with each cell.
    Tensor h_up({U, V, B, H});
    Tensor h_left({U, V, B, H});
    for (std::size_t u = 0; u < U; ++u) {
      for (std::size_t v = 0; v < V; ++v) {
        for (std::size_t b = 0; b < B; ++b) {
          const std::size_t cell = (u * V + v) * B + b;
          if (u > 0) {
            auto h = c.hidden.row(((u - 1) * V + v) * B + b);
            std::copy(h.begin(), h.end(), h_up.row(cell).begin());
          }
          if (v > 0) {
            auto h = c.hidden.row((u * V + v - 1) * B + b);
            std::copy(h.begin(), h.end(), h_left.row(cell).begin());
          }
        }
      }
    }
    g.dW = Tensor({D, G});
    gemm_tn(as_matrix(c.input.values, cells_total, D), as_matrix(s.dz, cells_total, G),
            as_matrix(g.dW));
    g.dRu = Tensor({H, G});
    gemm_tn(as_matrix(h_up, cells_total, H), as_matrix(s.dz, cells_total, G), as_matrix(g.dRu));
    g.dRv = Tensor({H, G});
    gemm_tn(as_matrix(h_left, cells_total, H), as_matrix(s.dz, cells_total, G), as_matrix(g.dRv));
    g.db = Tensor({G});
    for (std::size_t r = 0; r < cells_total; ++r) {
      auto row = s.dz.row(r);
      for (std::size_t j = 0; j < G; ++j) g.db[j] += row[j];
    }
    Tensor dx({U, V, B, D});
    gemm_nt(as_matrix(s.dz, cells_total, G), as_matrix(p.W), as_matrix(dx, cells_total, D));
    g.d_input = GridTensor(std::move(dx), c.input.mask);
  }
}

GridTensor concat_grid_features(std::span<const GridTensor> parts) {
  const auto& first = parts.front();
  std::size_t total = 0;
  for (const auto& p : parts) total += p.features();
  const std::size_t cells = first.rows() * first.cols() * first.batch();
  Tensor out({first.rows(), first.cols(), first.batch(), total});
  for (std::size_t r = 0; r < cells; ++r) {
    auto dst = out.row(r).begin();
    for (const auto& p : parts) {
      auto src = p.values.row(r);
      dst = std::copy(src.begin(), src.end(), dst);
    }
  }
  return GridTensor(std::move(out), first.mask);
}

}  // namespace

std::pair<GridTensor, MdLstmCache> mdlstm_forward(const GridTensor& x, const MdLstmParams& p) {
  check_input(x, p);
  MdLstmCache cache;
  ForwardStream stream{&p, &x, &cache, {}, {}, {}};
  forward_streams(std::span<ForwardStream>(&stream, 1));
  GridTensor out(cache.hidden, x.mask);
  return {std::move(out), std::move(cache)};
}

MdLstmGrads mdlstm_backward(const MdLstmCache& cache, const GridTensor& d_hidden) {
  if (!cache.valid) throw Error("mdlstm_backward: forward cache missing");
  if (d_hidden.values.dims() != cache.hidden.dims()) {
    throw ShapeError("mdlstm_backward: dH shape " + dims_to_string(d_hidden.values.dims()) +
                     ", expected " + dims_to_string(cache.hidden.dims()));
  }
  MdLstmGrads grads;
  BackwardStream stream{&cache, &d_hidden.values, &grads, {}, {}, {}, {}, {}, {}};
  backward_streams(std::span<BackwardStream>(&stream, 1));
  return grads;
}

GridTensor flip_grid(const GridTensor& x, bool flip_u, bool flip_v) {
  x.validate_shapes();
  const std::size_t U = x.rows(), V = x.cols(), B = x.batch();
  GridTensor out(Tensor(x.values.dims()), Tensor(x.mask.dims()));
  for (std::size_t u = 0; u < U; ++u) {
    const std::size_t su = flip_u ? U - 1 - u : u;
    for (std::size_t v = 0; v < V; ++v) {
      const std::size_t sv = flip_v ? V - 1 - v : v;
      for (std::size_t b = 0; b < B; ++b) {
        out.mask(u, v, b) = x.mask(su, sv, b);
        auto src = x.values.row((su * V + sv) * B + b);
        std::copy(src.begin(), src.end(), out.values.row((u * V + v) * B + b).begin());
      }
    }
  }
  return out;
}

std::pair<GridTensor, MultiDirCache> mdlstm_multidirectional(
    const GridTensor& x, std::span<const MdLstmParams, kNumGridDirections> params) {
  for (const auto& p : params) check_input(x, p);
  const std::size_t H = params[0].hidden();
  for (const auto& p : params) {
    if (p.hidden() != H) throw ShapeError("mdlstm_multidirectional: directions differ in width");
  }
  std::array<GridTensor, kNumGridDirections> inputs;
  MultiDirCache cache;
  cache.valid = true;
  std::array<ForwardStream, kNumGridDirections> streams;
  for (std::size_t k = 0; k < kNumGridDirections; ++k) {
    inputs[k] = flip_grid(x, kGridFlips[k].first, kGridFlips[k].second);
    streams[k] = ForwardStream{&params[k], &inputs[k], &cache.directions[k], {}, {}, {}};
  }
  forward_streams(streams);
  std::array<GridTensor, kNumGridDirections> outs;
  for (std::size_t k = 0; k < kNumGridDirections; ++k) {
    const auto& c = cache.directions[k];
    outs[k] = flip_grid(GridTensor(c.hidden, c.input.mask), kGridFlips[k].first,
                        kGridFlips[k].second);
  }
  return {concat_grid_features(outs), std::move(cache)};
}

MultiDirGrads mdlstm_multidirectional_backward(const MultiDirCache& cache, const GridTensor& d_out) {
  if (!cache.valid) throw Error("mdlstm_multidirectional_backward: forward cache missing");
  const auto& c0 = cache.directions[0];
  const std::size_t U = c0.input.rows(), V = c0.input.cols(), B = c0.input.batch();
  const std::size_t H = c0.params.hidden();
  if (d_out.values.dims() != Dims{U, V, B, kNumGridDirections * H}) {
    throw ShapeError("mdlstm_multidirectional_backward: gradient shape " +
                     dims_to_string(d_out.values.dims()));
  }
  std::array<Tensor, kNumGridDirections> dh;
  MultiDirGrads grads;
  std::array<BackwardStream, kNumGridDirections> streams;
  for (std::size_t k = 0; k < kNumGridDirections; ++k) {
    Tensor block({U, V, B, H});
    for (std::size_t r = 0; r < U * V * B; ++r) {
      auto src = d_out.values.row(r).subspan(k * H, H);
      std::copy(src.begin(), src.end(), block.row(r).begin());
    }
    dh[k] = flip_grid(GridTensor(std::move(block), d_out.mask), kGridFlips[k].first,
                      kGridFlips[k].second)
                .values;
    streams[k] = BackwardStream{&cache.directions[k], &dh[k], &grads.directions[k],
                                {}, {}, {}, {}, {}, {}};
  }
  backward_streams(streams);
  Tensor dx(c0.input.values.dims());
  for (std::size_t k = 0; k < kNumGridDirections; ++k) {
    const auto back = flip_grid(grads.directions[k].d_input, kGridFlips[k].first,
                                kGridFlips[k].second);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += back.values[i];
  }
  grads.d_input = GridTensor(std::move(dx), d_out.mask);
  return grads;
}

}  // namespace seqtrain
