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

#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "stalefl/nn.hpp"

namespace stalefl {

enum class SwitchMode { kEstimating, kBlending, kVanilla };

std::string_view to_string(SwitchMode mode);

struct SwitchConfig {
  bool enabled = true;
  int smoothing_window = 3;
  // Blend window length as a fraction of the epoch at which the switch fires.
  double window_fraction = 0.1;
  // Latch at this epoch regardless of E1/E2.
  std::optional<int> forced_epoch;
};

// Decides when to stop using inverted estimates. E1 (estimate vs truth) and
// E2 (stale vs truth) are logged per estimate epoch, averaged over clients;
// once the moving average of E1 exceeds that of E2 the controller latches and
// hands over with gamma decaying linearly from 1 to 0.
class SwitchController {
 public:
  explicit SwitchController(SwitchConfig config = {});

  struct LogEntry {
    int epoch = 0;
    double e1_sum = 0.0;
    double e2_sum = 0.0;
    int count = 0;

    double e1() const { return e1_sum / count; }
    double e2() const { return e2_sum / count; }
  };

  // Logs E1 = L1(est, truth) and E2 = L1(stale, truth) for estimate epoch t.
  void record_pair(int epoch_t, const ParamVector& est_delta,
                   const ParamVector& stale_delta, const ParamVector& true_delta);
  // Raw per-client values, for callers that computed them already.
  void record_errors(int epoch_t, double e1, double e2);

  bool should_switch() const;

  // Moves the state machine to `epoch`: latches when should_switch() (or the
  // forced epoch) fires, then advances gamma; blending ends in vanilla.
  void advance(int epoch);

  // gamma * est + (1 - gamma) * stale. Requires blending mode.
  ParamVector blended_update(const ParamVector& est_delta,
                             const ParamVector& stale_delta) const;

  SwitchMode mode() const { return mode_; }
  double gamma() const { return gamma_; }
  std::optional<int> switch_epoch() const { return switch_epoch_; }
  int window_len() const { return window_len_; }
  const std::vector<LogEntry>& log() const { return log_; }
  const SwitchConfig& config() const { return config_; }

 private:
  void latch(int epoch);

  SwitchConfig config_;
  SwitchMode mode_ = SwitchMode::kEstimating;
  double gamma_ = 1.0;
  std::optional<int> switch_epoch_;
  int window_len_ = 0;
  std::vector<LogEntry> log_;
};

}  // namespace stalefl
