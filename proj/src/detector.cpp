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

#include "stalefl/detector.hpp"

#include <algorithm>

#include "stalefl/errors.hpp"

namespace stalefl {

double cosine_distance(const ParamVector& u, const ParamVector& v) {
  if (u.size() != v.size()) throw ShapeError("cosine distance of unequal lengths");
  const double nu = u.vec().norm();
  const double nv = v.vec().norm();
  if (nu == 0.0 || nv == 0.0) {
    throw PreconditionError("cosine distance undefined for a zero vector");
  }
  const double c = u.vec().dot(v.vec()) / (nu * nv);
  return std::clamp(1.0 - c, 0.0, 2.0);
}

std::optional<double> adaptive_threshold(const CohortSnapshot& cohort) {
  const auto& s = cohort.unstale_deltas;
  if (s.size() < 2) return std::nullopt;
  double sum = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    for (std::size_t k = j + 1; k < s.size(); ++k) sum += cosine_distance(s[j], s[k]);
  }
  const double n = static_cast<double>(s.size());
  return 2.0 * sum / (n * n);
}

UniquenessDecision assess_uniqueness(const ParamVector& stale_delta,
                                     const CohortSnapshot& cohort) {
  UniquenessDecision d;
  d.threshold = adaptive_threshold(cohort);
  if (cohort.unstale_deltas.empty()) return d;
  double sum = 0.0;
  for (const auto& w : cohort.unstale_deltas) sum += cosine_distance(stale_delta, w);
  d.mean_distance = sum / static_cast<double>(cohort.unstale_deltas.size());
  d.unique = !d.threshold || d.mean_distance > *d.threshold;
  return d;
}

bool is_unique(const ParamVector& stale_delta, const CohortSnapshot& cohort) {
  return assess_uniqueness(stale_delta, cohort).unique;
}

}  // namespace stalefl
