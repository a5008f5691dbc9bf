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

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "stalefl/history.hpp"
#include "stalefl/nn.hpp"
#include "stalefl/update.hpp"

namespace stalefl {

// Sigmoid staleness weight 1 / (1 + exp(a * (tau - b))).
struct WeightingParams {
  double a = 0.25;
  double b = 10.0;
};

struct FirstOrderParams {
  double lambda = 0.3;
};

double staleness_weight(double tau, const WeightingParams& params);

// g + lambda * (g ⊙ g) ⊙ (w_now - w_base), elementwise; `stale_grad` is the
// gradient-form update observed at w_base.
ParamVector first_order_compensate(const ParamVector& stale_grad,
                                   const ParamVector& w_now,
                                   const ParamVector& w_base,
                                   const FirstOrderParams& params);

// Number of trailing global deltas averaged for the trend estimate.
int w_pred_window(int tau_assumed);

// Predicts the global model tau_assumed epochs past base_epoch by linear
// extrapolation of the mean of the last w_pred_window(tau) global deltas
// ending at base_epoch, then compensates toward the prediction. Falls back to
// compensating toward history.latest() when the history is too short.
ParamVector w_pred_compensate(const ParamVector& stale_grad,
                              const GlobalHistory& history, int base_epoch,
                              int tau_assumed, const FirstOrderParams& params);

// Two-tier asynchronous aggregation: sample-weighted FedAvg inside a tier,
// tier results combined by tier client counts. A tier without fresh updates
// re-uses its last aggregate; a tier that never aggregated (or has no
// clients) is skipped.
class AsynTiers {
 public:
  static constexpr std::size_t kTiers = 2;

  // Returns nullopt when no tier contributes.
  std::optional<ParamVector> aggregate(
      const std::array<std::vector<ModelUpdate>, kTiers>& fresh,
      const std::array<std::size_t, kTiers>& tier_clients);

  const std::optional<ParamVector>& last(std::size_t tier) const { return last_[tier]; }

 private:
  std::array<std::optional<ParamVector>, kTiers> last_;
};

}  // namespace stalefl
