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

#include <cstdint>
#include <span>

#include "stalefl/nn.hpp"
#include "stalefl/update.hpp"

namespace stalefl {

// Sum(n_i * e_i * delta_i) / Sum(n_i * e_i); e_i = 1 when extra_weights is
// empty. Throws AggregationError on an empty list or all-zero weights.
ParamVector aggregate_fedavg(std::span<const ModelUpdate> updates,
                             std::span<const double> extra_weights = {});

// i.i.d. N(0, variance) added to every coordinate of the delta.
ModelUpdate add_gaussian_noise(const ModelUpdate& update, double variance,
                               std::uint64_t seed);

}  // namespace stalefl
