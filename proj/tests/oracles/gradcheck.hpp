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

// Finite-difference gradient cases for every differentiable component.
// Each case draws small random shapes from its seed, computes analytic
// gradients through the library and compares them with central
// differences of the scalar objective, returning the worst relative error.

#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "oracles/oracles.hpp"
#include "seqtrain/layers.hpp"
#include "seqtrain/mdlstm.hpp"
#include "seqtrain/network.hpp"

namespace gradcheck {

using namespace seqtrain;

struct Probe {
  Tensor* value;
  Tensor analytic;
};

inline double compare(std::vector<Probe>& probes, const std::function<double()>& objective,
                      double eps = 1e-4) {
  double worst = 0.0;
  for (auto& p : probes) {
    const auto numeric = oracle::numeric_gradient(p.value->data(), objective, eps);
    worst = std::max(worst, oracle::max_rel_error(p.analytic.data(), numeric));
  }
  return worst;
}

inline std::vector<std::size_t> random_lengths(std::size_t T, std::size_t B, Rng& rng) {
  std::vector<std::size_t> lengths(B);
  for (auto& l : lengths) l = 1 + rng.index(T);
  lengths[0] = T;
  return lengths;
}

inline SeqTensor random_input(std::size_t T, const std::vector<std::size_t>& lengths, std::size_t D, Rng& rng) {
  Tensor v = oracle::random_tensor({T, lengths.size(), D}, rng);
  return apply_mask(SeqTensor::from_lengths(std::move(v), lengths));
}

// <P, y> over all entries; P is zero at padding because y is.
inline double project(const Tensor& P, const Tensor& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += P[i] * y[i];
  return s;
}

inline double linear_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t T = 2 + rng.index(3), B = 1 + rng.index(3), D = 1 + rng.index(4), O = 1 + rng.index(4);
  const auto lengths = random_lengths(T, B, rng);
  SeqTensor x = random_input(T, lengths, D, rng);
  Tensor W = oracle::random_tensor({D, O}, rng), b = oracle::random_tensor({O}, rng);
  const Activation act = std::array{Activation::identity, Activation::sigmoid, Activation::tanh}[rng.index(3)];
  const Tensor P = oracle::random_tensor({T, B, O}, rng);
  const auto objective = [&] { return project(P, linear_forward(x, W, b, act).first.values); };
  auto [y, cache] = linear_forward(x, W, b, act);
  const auto g = linear_backward(cache, SeqTensor(P, y.mask));
  std::vector<Probe> probes = {{&x.values, g.d_input.values}, {&W, g.d_weights}, {&b, g.d_bias}};
  return compare(probes, objective);
}

inline double lstm_case(std::uint64_t seed, Direction dir) {
  Rng rng(seed);
  const std::size_t T = 2 + rng.index(4), B = 1 + rng.index(3), D = 1 + rng.index(3), H = 1 + rng.index(3);
  const auto lengths = random_lengths(T, B, rng);
  SeqTensor x = random_input(T, lengths, D, rng);
  LstmParams p{oracle::random_tensor({D, 4 * H}, rng, 0.8), oracle::random_tensor({H, 4 * H}, rng, 0.8),
               oracle::random_tensor({4 * H}, rng, 0.5)};
  const Tensor P = oracle::random_tensor({T, B, H}, rng);
  const auto objective = [&] { return project(P, lstm_forward(x, p, dir).first.values); };
  auto [h, cache] = lstm_forward(x, p, dir);
  const auto g = lstm_backward(cache, SeqTensor(P, h.mask));
  std::vector<Probe> probes = {{&x.values, g.d_input.values}, {&p.W, g.dW}, {&p.R, g.dR}, {&p.b, g.db}};
  return compare(probes, objective);
}

// Forward and backward LSTM over the same input, concatenated, feeding a
// second bidirectional pair.
inline double blstm_stack_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t T = 2 + rng.index(3), B = 1 + rng.index(2), D = 1 + rng.index(3), H = 1 + rng.index(2);
  const auto lengths = random_lengths(T, B, rng);
  SeqTensor x = random_input(T, lengths, D, rng);
  auto mk = [&](std::size_t in) {
    return LstmParams{oracle::random_tensor({in, 4 * H}, rng, 0.8), oracle::random_tensor({H, 4 * H}, rng, 0.8),
                      oracle::random_tensor({4 * H}, rng, 0.5)};
  };
  LstmParams f1 = mk(D), b1 = mk(D), f2 = mk(2 * H), b2 = mk(2 * H);
  const Tensor P = oracle::random_tensor({T, B, 2 * H}, rng);
  const auto run = [&] {
    auto l1 = bidirectional(lstm_forward(x, f1, Direction::forward).first,
                            lstm_forward(x, b1, Direction::backward).first);
    return bidirectional(lstm_forward(l1, f2, Direction::forward).first,
                         lstm_forward(l1, b2, Direction::backward).first);
  };
  const auto objective = [&] { return project(P, run().values); };

  auto [hf1, cf1] = lstm_forward(x, f1, Direction::forward);
  auto [hb1, cb1] = lstm_forward(x, b1, Direction::backward);
  const auto l1 = bidirectional(hf1, hb1);
  auto [hf2, cf2] = lstm_forward(l1, f2, Direction::forward);
  auto [hb2, cb2] = lstm_forward(l1, b2, Direction::backward);
  const std::array<std::size_t, 2> widths = {H, H};
  const auto dtop = split_features(SeqTensor(P, l1.mask), widths);
  const auto gf2 = lstm_backward(cf2, dtop[0]);
  const auto gb2 = lstm_backward(cb2, dtop[1]);
  SeqTensor dl1 = gf2.d_input;
  for (std::size_t i = 0; i < dl1.values.size(); ++i) dl1.values[i] += gb2.d_input.values[i];
  const auto dmid = split_features(dl1, widths);
  const auto gf1 = lstm_backward(cf1, dmid[0]);
  const auto gb1 = lstm_backward(cb1, dmid[1]);
  Tensor dx = gf1.d_input.values;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += gb1.d_input.values[i];
  std::vector<Probe> probes = {{&x.values, dx},  {&f1.W, gf1.dW}, {&f1.R, gf1.dR}, {&b1.W, gb1.dW},
                               {&b1.b, gb1.db},  {&f2.W, gf2.dW}, {&b2.R, gb2.dR}, {&b2.b, gb2.db}};
  return compare(probes, objective);
}

inline double mdlstm_case(std::uint64_t seed, bool stable) {
  Rng rng(seed);
  const std::size_t U = 2 + rng.index(2), V = 2 + rng.index(2), B = 1 + rng.index(2);
  const std::size_t D = 1 + rng.index(2), H = 1 + rng.index(2);
  std::vector<std::size_t> heights(B), widths(B);
  for (std::size_t b = 0; b < B; ++b) {
    heights[b] = b == 0 ? U : 1 + rng.index(U);
    widths[b] = b == 0 ? V : 1 + rng.index(V);
  }
  GridTensor x = apply_mask(GridTensor::from_extents(oracle::random_tensor({U, V, B, D}, rng), heights, widths));
  std::array<MdLstmParams, kNumGridDirections> p;
  for (auto& q : p) {
    q = MdLstmParams{oracle::random_tensor({D, 5 * H}, rng, 0.8), oracle::random_tensor({H, 5 * H}, rng, 0.8),
                     oracle::random_tensor({H, 5 * H}, rng, 0.8), oracle::random_tensor({5 * H}, rng, 0.5),
                     stable};
  }
  const Tensor P = oracle::random_tensor({U, V, B, 4 * H}, rng);
  const auto objective = [&] { return project(P, mdlstm_multidirectional(x, p).first.values); };
  auto [y, cache] = mdlstm_multidirectional(x, p);
  GridTensor dy(P, y.mask);
  dy = apply_mask(dy);
  const auto g = mdlstm_multidirectional_backward(cache, dy);
  std::vector<Probe> probes = {{&x.values, g.d_input.values}};
  for (std::size_t k = 0; k < kNumGridDirections; ++k) {
    probes.push_back({&p[k].W, g.directions[k].dW});
    probes.push_back({&p[k].Ru, g.directions[k].dRu});
    probes.push_back({&p[k].Rv, g.directions[k].dRv});
    probes.push_back({&p[k].b, g.directions[k].db});
  }
  return compare(probes, objective);
}

inline double softmax_ce_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t T = 2 + rng.index(3), B = 1 + rng.index(3), K = 2 + rng.index(4);
  const auto lengths = random_lengths(T, B, rng);
  SeqTensor z = random_input(T, lengths, K, rng);
  for (auto& v : z.values.data()) v *= 3.0;
  std::vector<std::int32_t> labels(T * B);
  for (auto& l : labels) l = static_cast<std::int32_t>(rng.index(K));
  const auto objective = [&] { return softmax_ce(z, labels).loss; };
  const auto r = softmax_ce(z, labels);
  std::vector<Probe> probes = {{&z.values, r.grad_wrt_input.values}};
  return compare(probes, objective);
}

inline double mse_case(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t T = 2 + rng.index(3), B = 1 + rng.index(3), K = 1 + rng.index(4);
  const auto lengths = random_lengths(T, B, rng);
  SeqTensor y = random_input(T, lengths, K, rng);
  const Tensor target = oracle::random_tensor({T, B, K}, rng);
  const auto objective = [&] { return mse(y, target).loss; };
  const auto r = mse(y, target);
  std::vector<Probe> probes = {{&y.values, r.grad_wrt_input.values}};
  return compare(probes, objective);
}

// Whole network: bidirectional LSTM into softmax-CE, through the graph.
inline double network_case(std::uint64_t seed) {
  Rng rng(seed);
  const auto graph = parse_network(R"({
    "fw": {"class": "lstm", "n_out": 3, "direction": 1},
    "bw": {"class": "lstm", "n_out": 2, "direction": -1},
    "h": {"class": "linear", "n_out": 3, "activation": "tanh", "from": ["fw", "bw", "data"]},
    "out": {"class": "softmax", "loss": "ce", "n_out": 4, "from": ["h", "fw"]}
  })");
  const std::size_t T = 2 + rng.index(3), B = 1 + rng.index(3), D = 2;
  auto [net, params] = build_network(graph, D, seed);
  Batch batch;
  const auto lengths = random_lengths(T, B, rng);
  batch.inputs = random_input(T, lengths, D, rng);
  batch.labels.resize(T * B);
  for (auto& l : batch.labels) l = static_cast<std::int32_t>(rng.index(4));
  Rng drop(0);
  const auto step = net.train_step(params, batch, drop);
  const auto objective = [&] { return net.evaluate_batch(params, batch).loss; };
  std::vector<Probe> probes;
  for (auto& [name, t] : params) probes.push_back({&t, step.grads.at(name)});
  return compare(probes, objective);
}

}  // namespace gradcheck
