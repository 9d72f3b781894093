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

#include "seqtrain/optim.hpp"

#include <algorithm>
#include <cmath>

#include "seqtrain/error.hpp"

namespace seqtrain {

UpdateRule parse_update_rule(const std::string& name) {
  if (name == "sgd") return UpdateRule::sgd;
  if (name == "momentum") return UpdateRule::momentum;
  if (name == "nesterov") return UpdateRule::nesterov;
  if (name == "adagrad") return UpdateRule::adagrad;
  if (name == "adadelta") return UpdateRule::adadelta;
  if (name == "adam") return UpdateRule::adam;
  throw ConfigError("unknown optimizer '" + name + "'");
}

std::string update_rule_name(UpdateRule rule) {
  switch (rule) {
    case UpdateRule::sgd: return "sgd";
    case UpdateRule::momentum: return "momentum";
    case UpdateRule::nesterov: return "nesterov";
    case UpdateRule::adagrad: return "adagrad";
    case UpdateRule::adadelta: return "adadelta";
    case UpdateRule::adam: return "adam";
  }
  return "?";
}

OptimizerState OptimizerState::from_config(const OptimizerConfig& cfg) {
  OptimizerState s;
  s.rule = parse_update_rule(cfg.rule);
  s.learning_rate = cfg.learning_rate;
  s.momentum = cfg.momentum;
  s.rho = cfg.rho;
  s.beta1 = cfg.beta1;
  s.beta2 = cfg.beta2;
  s.epsilon = cfg.epsilon;
  return s;
}

void OptimizerState::reset_slots() {
  slots.clear();
  step = 0;
}

namespace {

ParamSet& slot(OptimizerState& st, const char* name, const ParamSet& like) {
  auto it = st.slots.find(name);
  if (it == st.slots.end()) it = st.slots.emplace(name, like.zeros_like()).first;
  it->second.check_aligned(like, std::string("optimizer slot '") + name + "'");
  return it->second;
}

}  // namespace

void apply_update(ParamSet& params, const ParamSet& grads, OptimizerState& st) {
  grads.check_aligned(params, "apply_update");
  const double lr = st.learning_rate;
  ++st.step;
  switch (st.rule) {
    case UpdateRule::sgd:
      params.axpy(-lr, grads);
      return;
    case UpdateRule::momentum:
    case UpdateRule::nesterov: {
      auto& vel = slot(st, "velocity", params);
      const bool nesterov = st.rule == UpdateRule::nesterov;
      for (auto& [name, p] : params) {
        auto x = p.data();
        auto g = grads.at(name).data();
        auto v = vel.at(name).data();
        for (std::size_t i = 0; i < x.size(); ++i) {
          v[i] = st.momentum * v[i] - lr * g[i];
          x[i] += nesterov ? st.momentum * v[i] - lr * g[i] : v[i];
        }
      }
      return;
    }
    case UpdateRule::adagrad: {
      auto& acc = slot(st, "accum", params);
      for (auto& [name, p] : params) {
        auto x = p.data();
        auto g = grads.at(name).data();
        auto a = acc.at(name).data();
        for (std::size_t i = 0; i < x.size(); ++i) {
          a[i] += g[i] * g[i];
          x[i] -= lr * g[i] / (std::sqrt(a[i]) + st.epsilon);
        }
      }
      return;
    }
    case UpdateRule::adadelta: {
      auto& eg = slot(st, "accum_grad", params);
      auto& ex = slot(st, "accum_update", params);
      for (auto& [name, p] : params) {
        auto x = p.data();
        auto g = grads.at(name).data();
        auto a = eg.at(name).data();
        auto u = ex.at(name).data();
        for (std::size_t i = 0; i < x.size(); ++i) {
          a[i] = st.rho * a[i] + (1.0 - st.rho) * g[i] * g[i];
          const double step = std::sqrt(u[i] + st.epsilon) / std::sqrt(a[i] + st.epsilon) * g[i];
          u[i] = st.rho * u[i] + (1.0 - st.rho) * step * step;
          x[i] -= lr * step;
        }
      }
      return;
    }
    case UpdateRule::adam: {
      auto& ms = slot(st, "m", params);
      auto& vs = slot(st, "v", params);
      const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
      const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
      for (auto& [name, p] : params) {
        auto x = p.data();
        auto g = grads.at(name).data();
        auto m = ms.at(name).data();
        auto v = vs.at(name).data();
        for (std::size_t i = 0; i < x.size(); ++i) {
          m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g[i];
          v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i];
          x[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + st.epsilon);
        }
      }
      return;
    }
  }
}

void condition_gradients(ParamSet& grads, const ConditioningConfig& cfg, const ParamSet& params, Rng& rng) {
  if (cfg.l2 < 0 || cfg.max_global_norm < 0 || cfg.gradient_noise < 0) {
    throw ConfigError("gradient conditioning parameters must be non-negative");
  }
  if (cfg.l2 > 0) {
    grads.check_aligned(params, "condition_gradients");
    for (auto& [name, g] : grads) {
      if (g.rank() < 2) continue;
      auto gd = g.data();
      auto p = params.at(name).data();
      for (std::size_t i = 0; i < gd.size(); ++i) gd[i] += 2.0 * cfg.l2 * p[i];
    }
  }
  if (cfg.max_global_norm > 0) {
    const double norm = std::sqrt(grads.squared_norm());
    if (norm > cfg.max_global_norm) {
      const double s = cfg.max_global_norm / norm;
      for (auto& [name, g] : grads) {
        for (auto& v : g.data()) v *= s;
      }
    }
  }
  if (cfg.gradient_noise > 0) {
    for (auto& [name, g] : grads) {
      for (auto& v : g.data()) v += cfg.gradient_noise * rng.normal();
    }
  }
}

void apply_max_norm(ParamSet& params, double tau) {
  if (tau < 0) throw ConfigError("max_norm must be non-negative");
  if (tau == 0) return;
  for (auto& [name, p] : params) {
    if (p.rank() < 2) continue;
    const std::size_t rows = p.size() / p.dims().back();
    for (std::size_t r = 0; r < rows; ++r) {
      auto row = p.row(r);
      double sq = 0.0;
      for (double v : row) sq += v * v;
      const double n = std::sqrt(sq);
      if (n > tau) {
        const double s = tau / n;
        for (auto& v : row) v *= s;
      }
    }
  }
}

LrSchedule LrSchedule::from_config(const ScheduleConfig& cfg) {
  if (!(cfg.decay > 0.0 && cfg.decay < 1.0)) throw ConfigError("lr_decay must lie in (0, 1)");
  LrSchedule s;
  s.decay = cfg.decay;
  s.min_relative_improvement = cfg.min_relative_improvement;
  return s;
}

std::pair<double, bool> lr_step(LrSchedule& schedule, double score, double lr) {
  if (!std::isfinite(score)) throw TrainingError("learning-rate schedule received a non-finite score");
  bool improved;
  if (!schedule.has_best) {
    improved = true;
  } else if (schedule.best > 0.0) {
    improved = (schedule.best - score) / schedule.best >= schedule.min_relative_improvement;
  } else {
    improved = score < schedule.best;
  }
  schedule.best = schedule.has_best ? std::min(schedule.best, score) : score;
  schedule.has_best = true;
  return {improved ? lr : lr * schedule.decay, improved};
}

}  // namespace seqtrain
