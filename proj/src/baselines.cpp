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

#include "stalefl/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "stalefl/aggregate.hpp"
#include "stalefl/errors.hpp"

namespace stalefl {

double staleness_weight(double tau, const WeightingParams& params) {
  if (tau < 0.0) throw PreconditionError("staleness must be >= 0");
  if (!(params.a > 0.0)) throw PreconditionError("weighting a must be > 0");
  return 1.0 / (1.0 + std::exp(params.a * (tau - params.b)));
}

ParamVector first_order_compensate(const ParamVector& stale_grad,
                                   const ParamVector& w_now,
                                   const ParamVector& w_base,
                                   const FirstOrderParams& params) {
  if (!stale_grad.same_shape(w_now) || !stale_grad.same_shape(w_base)) {
    throw ShapeError("first-order compensation inputs differ in shape");
  }
  if (params.lambda < 0.0) throw PreconditionError("lambda must be >= 0");
  ParamVector out = stale_grad;
  if (params.lambda == 0.0) return out;
  auto g = stale_grad.vec().array();
  out.vec().array() +=
      params.lambda * g * g * (w_now.vec().array() - w_base.vec().array());
  return out;
}

int w_pred_window(int tau_assumed) { return std::min(tau_assumed, 5); }

ParamVector w_pred_compensate(const ParamVector& stale_grad,
                              const GlobalHistory& history, int base_epoch,
                              int tau_assumed, const FirstOrderParams& params) {
  if (tau_assumed < 0) throw PreconditionError("staleness must be >= 0");
  if (tau_assumed == 0) return stale_grad;
  const int m = w_pred_window(tau_assumed);
  if (!history.contains(base_epoch) || !history.contains(base_epoch - m)) {
    const ParamVector& base =
        history.contains(base_epoch) ? history.at(base_epoch) : history.latest();
    return first_order_compensate(stale_grad, history.latest(), base, params);
  }
  const ParamVector& w_base = history.at(base_epoch);
  ParamVector predicted = w_base;
  // mean delta over the window, extrapolated tau epochs ahead
  predicted.vec() += (static_cast<double>(tau_assumed) / m) *
                     (w_base.vec() - history.at(base_epoch - m).vec());
  return first_order_compensate(stale_grad, predicted, w_base, params);
}

std::optional<ParamVector> AsynTiers::aggregate(
    const std::array<std::vector<ModelUpdate>, kTiers>& fresh,
    const std::array<std::size_t, kTiers>& tier_clients) {
  for (std::size_t k = 0; k < kTiers; ++k) {
    if (!fresh[k].empty()) last_[k] = aggregate_fedavg(fresh[k]);
  }
  double total = 0.0;
  for (std::size_t k = 0; k < kTiers; ++k) {
    if (tier_clients[k] != 0 && last_[k]) total += static_cast<double>(tier_clients[k]);
  }
  // Normalized weights keep a lone tier's aggregate bit-exact.
  std::optional<ParamVector> out;
  for (std::size_t k = 0; k < kTiers; ++k) {
    if (tier_clients[k] == 0 || !last_[k]) continue;
    const double share = static_cast<double>(tier_clients[k]) / total;
    if (!out) {
      out = *last_[k] * share;
    } else {
      out->vec() += share * last_[k]->vec();
    }
  }
  return out;
}

}  // namespace stalefl
