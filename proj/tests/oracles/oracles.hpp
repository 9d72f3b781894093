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

// Test-only reference implementations. Written as plain scalar loops
// that share no code with the library kernels.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "seqtrain/mdlstm.hpp"
#include "seqtrain/rng.hpp"
#include "seqtrain/tensor.hpp"

namespace oracle {

using seqtrain::Tensor;

inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  Tensor c({n, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      long double s = 0;
      for (std::size_t p = 0; p < k; ++p) s += static_cast<long double>(a(i, p)) * b(p, j);
      c(i, j) = static_cast<double>(s);
    }
  return c;
}

inline Tensor random_tensor(seqtrain::Dims dims, seqtrain::Rng& rng, double scale = 1.0) {
  Tensor t(std::move(dims));
  for (auto& v : t.data()) v = rng.uniform(-scale, scale);
  return t;
}

// Central differences of f with respect to every entry of x.
inline std::vector<double> numeric_gradient(std::span<double> x, const std::function<double()>& f,
                                            double eps = 1e-4) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + eps;
    const double up = f();
    x[i] = keep - eps;
    const double down = f();
    x[i] = keep;
    g[i] = (up - down) / (2 * eps);
  }
  return g;
}

// |a - n| / max(|a|, |n|, floor); the floor keeps near-zero entries from
// dominating through cancellation noise.
inline constexpr double kRelFloor = 1e-2;

inline double max_rel_error(std::span<const double> analytic, std::span<const double> numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i], n = numeric[i];
    const double denom = std::max({std::fabs(a), std::fabs(n), kRelFloor});
    worst = std::max(worst, std::fabs(a - n) / denom);
  }
  return worst;
}

// One LSTM over each sequence separately, [T, B, H] output, zero at padding.
inline Tensor lstm_reference(const Tensor& x, std::span<const std::size_t> lengths, const Tensor& W,
                             const Tensor& R, const Tensor& b, int direction) {
  const std::size_t T = x.dim(0), B = x.dim(1), D = x.dim(2), H = R.dim(0);
  Tensor out({T, B, H});
  for (std::size_t s = 0; s < B; ++s) {
    std::vector<double> h(H, 0.0), c(H, 0.0), a(4 * H);
    const std::size_t L = lengths[s];
    for (std::size_t step = 0; step < L; ++step) {
      const std::size_t t = direction > 0 ? step : L - 1 - step;
      for (std::size_t j = 0; j < 4 * H; ++j) {
        double z = b[j];
        for (std::size_t d = 0; d < D; ++d) z += x(t, s, d) * W(d, j);
        for (std::size_t k = 0; k < H; ++k) z += h[k] * R(k, j);
        a[j] = z;
      }
      for (std::size_t k = 0; k < H; ++k) {
        const double i = sig(a[k]), f = sig(a[H + k]), g = std::tanh(a[2 * H + k]), o = sig(a[3 * H + k]);
        c[k] = f * c[k] + i * g;
        h[k] = o * std::tanh(c[k]);
        out(t, s, k) = h[k];
      }
    }
  }
  return out;
}

struct MdReference {
  Tensor hidden;  // [U, V, B, H]
  Tensor dx, dW, dRu, dRv, db;
};

// Raster-order scalar MDLSTM for one scan direction: forward, then the
// gradient of sum <dH, h> by reverse raster traversal.
inline MdReference mdlstm_reference(const seqtrain::GridTensor& x, const seqtrain::MdLstmParams& p,
                                    const Tensor* dH) {
  const std::size_t U = x.rows(), V = x.cols(), B = x.batch(), D = x.features(), H = p.Ru.dim(0);
  const std::size_t G = 5 * H;
  Tensor act({U, V, B, G}), c({U, V, B, H}), h({U, V, B, H});
  for (std::size_t s = 0; s < B; ++s)
    for (std::size_t u = 0; u < U; ++u)
      for (std::size_t v = 0; v < V; ++v) {
        if (!x.valid(u, v, s)) {
          for (std::size_t k = 0; k < H; ++k) {
            c(u, v, s, k) = u > 0 ? c(u - 1, v, s, k) : (v > 0 ? c(u, v - 1, s, k) : 0.0);
          }
          continue;
        }
        std::vector<double> a(G);
        for (std::size_t j = 0; j < G; ++j) {
          double z = p.b[j];
          for (std::size_t d = 0; d < D; ++d) z += x.values(u, v, s, d) * p.W(d, j);
          if (u > 0)
            for (std::size_t k = 0; k < H; ++k) z += h(u - 1, v, s, k) * p.Ru(k, j);
          if (v > 0)
            for (std::size_t k = 0; k < H; ++k) z += h(u, v - 1, s, k) * p.Rv(k, j);
          a[j] = z;
        }
        for (std::size_t k = 0; k < H; ++k) {
          const double pu = u > 0 ? c(u - 1, v, s, k) : 0.0;
          const double pv = v > 0 ? c(u, v - 1, s, k) : 0.0;
          double cell, o;
          if (p.stable) {
            const double i = sig(a[k]), f = sig(a[H + k]), g = std::tanh(a[2 * H + k]);
            o = sig(a[3 * H + k]);
            const double l = sig(a[4 * H + k]);
            cell = f * (l * pu + (1 - l) * pv) + i * g;
            act(u, v, s, k) = i, act(u, v, s, H + k) = f, act(u, v, s, 2 * H + k) = g;
            act(u, v, s, 3 * H + k) = o, act(u, v, s, 4 * H + k) = l;
          } else {
            const double i = sig(a[k]), fu = sig(a[H + k]), fv = sig(a[2 * H + k]);
            const double g = std::tanh(a[3 * H + k]);
            o = sig(a[4 * H + k]);
            cell = fu * pu + fv * pv + i * g;
            act(u, v, s, k) = i, act(u, v, s, H + k) = fu, act(u, v, s, 2 * H + k) = fv;
            act(u, v, s, 3 * H + k) = g, act(u, v, s, 4 * H + k) = o;
          }
          c(u, v, s, k) = cell;
          h(u, v, s, k) = o * std::tanh(cell);
        }
      }

  MdReference ref;
  ref.hidden = h;
  if (!dH) return ref;
  ref.dx = Tensor({U, V, B, D});
  ref.dW = Tensor(p.W.dims());
  ref.dRu = Tensor(p.Ru.dims());
  ref.dRv = Tensor(p.Rv.dims());
  ref.db = Tensor(p.b.dims());
  Tensor dh = *dH, dc({U, V, B, H});
  for (std::size_t s = 0; s < B; ++s)
    for (std::size_t u = U; u-- > 0;)
      for (std::size_t v = V; v-- > 0;) {
        if (!x.valid(u, v, s)) {
          for (std::size_t k = 0; k < H; ++k) {
            if (u > 0) dc(u - 1, v, s, k) += dc(u, v, s, k);
            else if (v > 0) dc(u, v - 1, s, k) += dc(u, v, s, k);
          }
          continue;
        }
        std::vector<double> dz(G);
        for (std::size_t k = 0; k < H; ++k) {
          const double pu = u > 0 ? c(u - 1, v, s, k) : 0.0;
          const double pv = v > 0 ? c(u, v - 1, s, k) : 0.0;
          const double tc = std::tanh(c(u, v, s, k));
          const double dhk = dh(u, v, s, k);
          double dpu, dpv;
          if (p.stable) {
            const double i = act(u, v, s, k), f = act(u, v, s, H + k), g = act(u, v, s, 2 * H + k);
            const double o = act(u, v, s, 3 * H + k), l = act(u, v, s, 4 * H + k);
            const double dcell = dc(u, v, s, k) + dhk * o * (1 - tc * tc);
            dz[k] = dcell * g * i * (1 - i);
            dz[H + k] = dcell * (l * pu + (1 - l) * pv) * f * (1 - f);
            dz[2 * H + k] = dcell * i * (1 - g * g);
            dz[3 * H + k] = dhk * tc * o * (1 - o);
            dz[4 * H + k] = dcell * f * (pu - pv) * l * (1 - l);
            dpu = dcell * f * l;
            dpv = dcell * f * (1 - l);
          } else {
            const double i = act(u, v, s, k), fu = act(u, v, s, H + k), fv = act(u, v, s, 2 * H + k);
            const double g = act(u, v, s, 3 * H + k), o = act(u, v, s, 4 * H + k);
            const double dcell = dc(u, v, s, k) + dhk * o * (1 - tc * tc);
            dz[k] = dcell * g * i * (1 - i);
            dz[H + k] = dcell * pu * fu * (1 - fu);
            dz[2 * H + k] = dcell * pv * fv * (1 - fv);
            dz[3 * H + k] = dcell * i * (1 - g * g);
            dz[4 * H + k] = dhk * tc * o * (1 - o);
            dpu = dcell * fu;
            dpv = dcell * fv;
          }
          if (u > 0) dc(u - 1, v, s, k) += dpu;
          if (v > 0) dc(u, v - 1, s, k) += dpv;
        }
        for (std::size_t j = 0; j < G; ++j) {
          ref.db[j] += dz[j];
          for (std::size_t d = 0; d < D; ++d) {
            ref.dW(d, j) += x.values(u, v, s, d) * dz[j];
            ref.dx(u, v, s, d) += dz[j] * p.W(d, j);
          }
          for (std::size_t k = 0; k < H; ++k) {
            if (u > 0) {
              ref.dRu(k, j) += h(u - 1, v, s, k) * dz[j];
              dh(u - 1, v, s, k) += dz[j] * p.Ru(k, j);
            }
            if (v > 0) {
              ref.dRv(k, j) += h(u, v - 1, s, k) * dz[j];
              dh(u, v - 1, s, k) += dz[j] * p.Rv(k, j);
            }
          }
        }
      }
  return ref;
}

// Frames of [0, L) covered by the chunk starts, by brute force.
inline std::vector<int> coverage_counts(std::size_t L, std::size_t C, std::size_t S) {
  std::vector<int> cover(L, 0);
  for (std::size_t start = 0; start < L; start += S)
    for (std::size_t t = start; t < std::min(L, start + C); ++t) ++cover[t];
  return cover;
}

}  // namespace oracle
