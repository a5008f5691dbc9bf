/*
 * Copyright 2026 The StaleFL Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "stalefl/switch.hpp"

#include <cmath>
#include <iterator>

#include "stalefl/errors.hpp"
#include "stalefl/inversion.hpp"

namespace stalefl {

std::string_view to_string(SwitchMode mode) {
  switch (mode) {
    case SwitchMode::kEstimating: return "estimating";
    case SwitchMode::kBlending: return "blending";
    case SwitchMode::kVanilla: return "vanilla";
  }
  return "?";
}

SwitchController::SwitchController(SwitchConfig config) : config_(config) {
  if (config_.smoothing_window < 1) {
    throw ConfigError("switch.smoothing_window must be >= 1", "switch.smoothing_window");
  }
  if (config_.window_fraction < 0.0) {
    throw ConfigError("switch.window_fraction must be >= 0", "switch.window_fraction");
  }
}

void SwitchController::record_pair(int epoch_t, const ParamVector& est_delta,
                                   const ParamVector& stale_delta,
                                   const ParamVector& true_delta) {
  record_errors(epoch_t, l1_distance(est_delta, true_delta),
                l1_distance(stale_delta, true_delta));
}

void SwitchController::record_errors(int epoch_t, double e1, double e2) {
  // Entries stay sorted by estimate epoch; pairs for one epoch merge.
  auto it = log_.end();
  while (it != log_.begin() && std::prev(it)->epoch > epoch_t) --it;
  if (it != log_.begin() && std::prev(it)->epoch == epoch_t) {
    --it;
  } else {
    it = log_.insert(it, LogEntry{epoch_t, 0.0, 0.0, 0});
  }
  it->e1_sum += e1;
  it->e2_sum += e2;
  ++it->count;
}

bool SwitchController::should_switch() const {
  const auto w = static_cast<std::size_t>(config_.smoothing_window);
  if (log_.size() < w) return false;
  double e1 = 0.0;
  double e2 = 0.0;
  for (std::size_t i = log_.size() - w; i < log_.size(); ++i) {
    e1 += log_[i].e1();
    e2 += log_[i].e2();
  }
  return e1 > e2;
}

void SwitchController::latch(int epoch) {
  switch_epoch_ = epoch;
  window_len_ = static_cast<int>(std::llround(config_.window_fraction * epoch));
  if (window_len_ == 0) {
    mode_ = SwitchMode::kVanilla;
    gamma_ = 0.0;
  } else {
    mode_ = SwitchMode::kBlending;
    gamma_ = 1.0;
  }
}

void SwitchController::advance(int epoch) {
  if (!config_.enabled) return;
  if (mode_ == SwitchMode::kEstimating) {
    const bool fire = config_.forced_epoch ? epoch >= *config_.forced_epoch
                                           : should_switch();
    if (fire) latch(epoch);
    return;
  }
  if (mode_ == SwitchMode::kBlending) {
    const int k = epoch - *switch_epoch_;
    if (k > window_len_) {
      mode_ = SwitchMode::kVanilla;
      gamma_ = 0.0;
    } else {
      gamma_ = 1.0 - static_cast<double>(k) / window_len_;
    }
  }
}

ParamVector SwitchController::blended_update(const ParamVector& est_delta,
                                             const ParamVector& stale_delta) const {
  if (mode_ != SwitchMode::kBlending) {
    throw PreconditionError("blended_update requires blending mode");
  }
  if (!est_delta.same_shape(stale_delta)) throw ShapeError("blend inputs differ in shape");
  ParamVector out = est_delta * gamma_;
  out.vec() += (1.0 - gamma_) * stale_delta.vec();
  return out;
}

}  // namespace stalefl
