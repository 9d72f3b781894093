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

#include <cstdint>
#include <map>
#include <string>
#include <utility>

#include "seqtrain/net_config.hpp"
#include "seqtrain/param_set.hpp"
#include "seqtrain/rng.hpp"

namespace seqtrain {

enum class UpdateRule { sgd, momentum, nesterov, adagrad, adadelta, adam };

UpdateRule parse_update_rule(const std::string& name);
std::string update_rule_name(UpdateRule rule);

// Per-parameter slot names: momentum/nesterov "velocity"; adagrad
// "accum"; adadelta "accum_grad" and "accum_update"; adam "m" and "v".
struct OptimizerState {
  UpdateRule rule = UpdateRule::adam;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double rho = 0.95;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::map<std::string, ParamSet> slots;

  static OptimizerState from_config(const OptimizerConfig& cfg);
  // Drops slot contents and the step counter; hyper-parameters stay.
  void reset_slots();
  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

// Gradients are raw sums over frames. Slots are created on first use.
void apply_update(ParamSet& params, const ParamSet& grads, OptimizerState& state);

// In order: L2 term on rank >= 2 tensors, global-norm clipping, Gaussian
// noise. Zero values disable each step.
void condition_gradients(ParamSet& grads, const ConditioningConfig& cfg, const ParamSet& params, Rng& rng);

// Scales each row of every rank >= 2 tensor to norm <= tau.
void apply_max_norm(ParamSet& params, double tau);

struct LrSchedule {
  double decay = 0.7;
  double min_relative_improvement = 0.005;
  bool has_best = false;
  double best = 0.0;

  static LrSchedule from_config(const ScheduleConfig& cfg);
  friend bool operator==(const LrSchedule&, const LrSchedule&) = default;
};

// Lower scores are better. Returns the next learning rate and whether the
// score counted as an improvement.
std::pair<double, bool> lr_step(LrSchedule& schedule, double score, double lr);

}  // namespace seqtrain
