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

#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "stalefl/detector.hpp"
#include "stalefl/errors.hpp"

using namespace stalefl;
using stalefl::testing::brute_threshold;
using stalefl::testing::random_vector;

namespace {

const ModelArch kPlane{{1, 2}};  // 2 weights + 2 biases

ParamVector vec4(double a, double b, double c = 0.0, double d = 0.0) {
  return ParamVector(kPlane, {a, b, c, d});
}

}  // namespace

TEST_CASE("cosine distance basics") {
  const auto w = vec4(1, 2, 3, 4);
  CHECK(cosine_distance(w, w) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cosine_distance(w, w * -1.0) == doctest::Approx(2.0));
  CHECK(cosine_distance(vec4(1, 0), vec4(0, 1)) == doctest::Approx(1.0));
  CHECK_THROWS_AS(cosine_distance(w, vec4(0, 0)), PreconditionError);
}

TEST_CASE("threshold of identical and orthogonal cohorts") {
  CohortSnapshot same{.epoch = 0, .unstale_deltas = {vec4(1, 1), vec4(1, 1), vec4(1, 1)}};
  CHECK(*adaptive_threshold(same) == doctest::Approx(0.0).epsilon(1e-15));
  CohortSnapshot ortho{.epoch = 0, .unstale_deltas = {vec4(1, 0), vec4(0, 1)}};
  CHECK(*adaptive_threshold(ortho) == doctest::Approx(0.5));
  CohortSnapshot lonely{.epoch = 0, .unstale_deltas = {vec4(1, 0)}};
  CHECK_FALSE(adaptive_threshold(lonely));
}

TEST_CASE("threshold matches the brute-force double loop") {
  const ModelArch arch{{6, 5, 3}};
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    CohortSnapshot s;
    for (int k = 0; k < 2 + trial % 9; ++k) s.unstale_deltas.push_back(random_vector(arch, rng()));
    const double t = *adaptive_threshold(s);
    CHECK(t == doctest::Approx(brute_threshold(s.unstale_deltas)).epsilon(1e-12));
    const double n = static_cast<double>(s.unstale_deltas.size());
    CHECK(t >= 0.0);
    CHECK(t <= 2.0 * (n - 1) / n);
  }
}

TEST_CASE("threshold and uniqueness ignore positive rescaling") {
  const ModelArch arch{{6, 5, 3}};
  CohortSnapshot s;
  for (int k = 0; k < 5; ++k) s.unstale_deltas.push_back(random_vector(arch, 40 + k));
  CohortSnapshot scaled = s;
  for (auto& d : scaled.unstale_deltas) d *= 37.5;
  CHECK(*adaptive_threshold(scaled) == doctest::Approx(*adaptive_threshold(s)).epsilon(1e-12));
  for (std::uint64_t k = 0; k < 10; ++k) {
    const auto stale = random_vector(arch, 90 + k);
    CHECK(is_unique(stale, s) == is_unique(stale * 0.003, s));
    CHECK(assess_uniqueness(stale * 12.0, s).mean_distance ==
          doctest::Approx(assess_uniqueness(stale, s).mean_distance).epsilon(1e-12));
  }
}

TEST_CASE("uniqueness against tight cohorts") {
  CohortSnapshot tight{.epoch = 3, .unstale_deltas = {vec4(1, 0.001), vec4(1, -0.001), vec4(1, 0)}};
  CHECK_FALSE(is_unique(vec4(1, 0), tight));
  CHECK(is_unique(vec4(0, 1), tight));
  const auto d = assess_uniqueness(vec4(0, 1), tight);
  CHECK(d.mean_distance == doctest::Approx(1.0).epsilon(1e-5));
  REQUIRE(d.threshold);
  CHECK(*d.threshold < 1e-5);
}

TEST_CASE("a cohort of fewer than two disables the detector") {
  CohortSnapshot lonely{.epoch = 0, .unstale_deltas = {vec4(1, 0)}};
  const auto d = assess_uniqueness(vec4(1, 0), lonely);
  CHECK(d.unique);
  CHECK_FALSE(d.threshold);
  CHECK(is_unique(vec4(1, 0), CohortSnapshot{}));
}
