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

#include "stalefl/aggregate.hpp"

#include <cmath>
#include <random>
#include <string>

#include "stalefl/errors.hpp"
#include "stalefl/random.hpp"

namespace stalefl {

ParamVector aggregate_fedavg(std::span<const ModelUpdate> updates,
                             std::span<const double> extra_weights) {
  if (updates.empty()) throw AggregationError("no updates to aggregate");
  if (!extra_weights.empty() && extra_weights.size() != updates.size()) {
    throw ShapeError("extra_weights has " + std::to_string(extra_weights.size()) +
                     " entries for " + std::to_string(updates.size()) + " updates");
  }
  ParamVector out(updates.front().delta.arch());
  double total = 0.0;
  for (std::size_t i = 0; i < updates.size(); ++i) {
    const double e = extra_weights.empty() ? 1.0 : extra_weights[i];
    if (e < 0.0) throw PreconditionError("aggregation weights must be >= 0");
    const double w = static_cast<double>(updates[i].num_samples) * e;
    if (w == 0.0) continue;
    if (!out.same_shape(updates[i].delta)) {
      throw ShapeError("update deltas differ in shape");
    }
    out.vec() += w * updates[i].delta.vec();
    total += w;
  }
  if (total == 0.0) throw AggregationError("all aggregation weights are zero");
  out.vec() /= total;
  return out;
}

ModelUpdate add_gaussian_noise(const ModelUpdate& update, double variance,
                               std::uint64_t seed) {
  if (variance < 0.0) throw PreconditionError("noise variance must be >= 0");
  ModelUpdate out = update;
  if (variance == 0.0) return out;
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, std::sqrt(variance));
  for (double& v : out.delta.values()) v += noise(rng);
  return out;
}

}  // namespace stalefl
