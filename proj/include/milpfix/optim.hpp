// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "json.hpp"

#include "milpfix/autodiff.hpp"

namespace milpfix::ad {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-5;
  /// Global gradient-norm cap; ≤ 0 disables clipping.
  double clip_norm = 10.0;
};

/// One Adam update with decoupled weight decay, applied after clipping the
/// global gradient norm. Increments `store.step`; returns the unclipped norm.
double adam_step(ParameterStore& store, double lr, const AdamOptions& options = {});

/// Warm-up from `initial` to `peak` over `warmup_steps`, then a cosine
/// envelope that ends at `(1 − decay_rate) · peak` on the last step:
///   lr = peak · ((1 − floor) · ½(1 + cos(π p)) + floor),  floor = 1 − decay_rate.
struct LearningRateSchedule {
  double initial = 1e-4;
  double peak = 1e-2;
  std::int64_t warmup_steps = 500;
  double decay_rate = 0.99;

  double value(std::int64_t step, std::int64_t total_steps) const;
};

/// Binary archive: magic "MILPFIXC", u32 version, JSON metadata, the step
/// counter and, per tensor, its name, shape and value / first / second
/// moment as little-endian float64.
void save_checkpoint(const ParameterStore& store, const nlohmann::json& meta, const std::filesystem::path& path);

struct Checkpoint {
  ParameterStore store;
  nlohmann::json meta;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace milpfix::ad
