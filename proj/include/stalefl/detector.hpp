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
#include <vector>

#include "stalefl/nn.hpp"

namespace stalefl {

// Unstale client updates computed against the same global snapshot.
struct CohortSnapshot {
  int epoch = 0;
  std::vector<ParamVector> unstale_deltas;
};

// 1 - u.v / (|u| |v|), in [0, 2]. Throws PreconditionError on a zero vector.
double cosine_distance(const ParamVector& u, const ParamVector& v);

// Mean cosine distance over all ordered member pairs, diagonal included.
// nullopt when the cohort has fewer than two members.
std::optional<double> adaptive_threshold(const CohortSnapshot& cohort);

struct UniquenessDecision {
  double mean_distance = 0.0;       // mean over members of D_c(stale, member)
  std::optional<double> threshold;  // nullopt: detector disabled
  bool unique = true;
};

UniquenessDecision assess_uniqueness(const ParamVector& stale_delta,
                                     const CohortSnapshot& cohort);

// With fewer than two cohort members every update counts as unique.
bool is_unique(const ParamVector& stale_delta, const CohortSnapshot& cohort);

}  // namespace stalefl
