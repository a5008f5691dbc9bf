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

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "stalefl/aggregate.hpp"
#include "stalefl/baselines.hpp"
#include "stalefl/history.hpp"

using namespace stalefl;
using stalefl::testing::random_vector;

namespace {

const ModelArch kArch{{3, 2, 2}};

ParamVector constant(const ModelArch& arch, double v) {
  ParamVector p(arch);
  for (auto& x : p.values()) x = v;
  return p;
}

}  // namespace

TEST_CASE("staleness weight closed forms") {
  const WeightingParams p{.a = 0.25, .b = 10.0};
  CHECK(staleness_weight(10.0, p) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(staleness_weight(110.0, p) < 1e-10);
  // 1 / (1 + e^{-2.5}) evaluated by hand: e^{-2.5} = 0.0820849986238988.
  CHECK(staleness_weight(0.0, p) == doctest::Approx(1.0 / 1.0820849986238988).epsilon(1e-14));
}

TEST_CASE("staleness weight is strictly decreasing and inside (0, 1)") {
  const WeightingParams p;
  double prev = 1.0;
  for (int tau = 0; tau <= 100; ++tau) {
    const double w = staleness_weight(tau, p);
    CHECK(w > 0.0);
    CHECK(w < 1.0);
    CHECK(w < prev);
    prev = w;
  }
}

TEST_CASE("first-order compensation identities") {
  const auto g = random_vector(kArch, 1);
  const auto w = random_vector(kArch, 2);
  const auto v = random_vector(kArch, 3);
  CHECK(first_order_compensate(g, w, w, {.lambda = 0.3}) == g);
  CHECK(first_order_compensate(g, w, v, {.lambda = 0.0}) == g);
}

TEST_CASE("first-order compensation is exact on a unit-curvature quadratic") {
  // L(w) = w^2 / 2: g(w) = w and the Hessian is 1. With lambda * g^2 = 1 the
  // Taylor correction g + (w_now - w_base) recovers g(w_now) = w_now.
  const ModelArch scalar{{1, 1}};
  ParamVector w_base(scalar), w_now(scalar), g(scalar);
  w_base[0] = 2.0;
  w_now[0] = 1.3;
  g[0] = w_base[0];
  const double lambda = 1.0 / (g[0] * g[0]);
  const auto out = first_order_compensate(g, w_now, w_base, {.lambda = lambda});
  CHECK(out[0] == doctest::Approx(w_now[0]).epsilon(1e-15));
}

TEST_CASE("first-order compensation matches the elementwise formula") {
  const auto g = random_vector(kArch, 4);
  const auto w = random_vector(kArch, 5);
  const auto b = random_vector(kArch, 6);
  const auto out = first_order_compensate(g, w, b, {.lambda = 0.7});
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(out[i] == doctest::Approx(g[i] + 0.7 * g[i] * g[i] * (w[i] - b[i])).epsilon(1e-14));
  }
}

TEST_CASE("w-pred with a stationary model equals first-order toward it") {
  GlobalHistory h(20);
  const auto w = random_vector(kArch, 7);
  for (int e = 0; e <= 12; ++e) h.push(e, w);
  const auto g = random_vector(kArch, 8);
  const FirstOrderParams p{.lambda = 0.3};
  CHECK(w_pred_compensate(g, h, 8, 4, p) == first_order_compensate(g, w, w, p));
  CHECK(w_pred_compensate(g, h, 8, 0, p) == g);
}

TEST_CASE("w-pred extrapolates a constant drift linearly") {
  GlobalHistory h(40);
  const auto w0 = random_vector(kArch, 9);
  const auto delta = constant(kArch, 0.01);
  for (int e = 0; e <= 30; ++e) h.push(e, w0 + delta * static_cast<double>(e));
  const auto g = random_vector(kArch, 10);
  const FirstOrderParams p{.lambda = 0.4};
  const int base = 20, tau = 7;
  CHECK(w_pred_window(tau) == 5);
  CHECK(w_pred_window(3) == 3);
  // Hand computation: predicted weights = w_base + tau * delta.
  const auto out = w_pred_compensate(g, h, base, tau, p);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double disp = tau * 0.01;
    CHECK(out[i] == doctest::Approx(g[i] + 0.4 * g[i] * g[i] * disp).epsilon(1e-12));
  }
}

TEST_CASE("w-pred falls back to first-order without enough history") {
  GlobalHistory h(40);
  for (int e = 0; e <= 1; ++e) h.push(e, random_vector(kArch, 20 + e));
  const auto g = random_vector(kArch, 11);
  const FirstOrderParams p;
  CHECK(w_pred_compensate(g, h, 0, 5, p) == first_order_compensate(g, h.latest(), h.at(0), p));
}

TEST_CASE("asyn-tiers: one tier reduces to fedavg") {
  std::vector<ModelUpdate> ups;
  for (int k = 0; k < 4; ++k) {
    ups.push_back({.client_id = k, .delta = random_vector(kArch, 30 + k), .num_samples = 2u + k});
  }
  AsynTiers tiers;
  const auto out = tiers.aggregate({ups, {}}, {4, 0});
  REQUIRE(out);
  CHECK(*out == aggregate_fedavg(ups));
}

TEST_CASE("asyn-tiers: tiers combine by client counts and reuse stale aggregates") {
  const auto a = constant(kArch, 1.0);
  const auto b = constant(kArch, 11.0);
  AsynTiers tiers;
  const auto first = tiers.aggregate({std::vector<ModelUpdate>{{.delta = a}},
                                      std::vector<ModelUpdate>{{.delta = b}}},
                                     {9, 1});
  REQUIRE(first);
  for (double v : first->values()) CHECK(v == doctest::Approx((9 * 1.0 + 11.0) / 10));

  // The stale tier is silent: its last aggregate is reused.
  const auto a2 = constant(kArch, 2.0);
  const auto second = tiers.aggregate(
      std::array<std::vector<ModelUpdate>, 2>{std::vector<ModelUpdate>{{.delta = a2}}, {}}, {9, 1});
  REQUIRE(second);
  for (double v : second->values()) CHECK(v == doctest::Approx((9 * 2.0 + 11.0) / 10));

  AsynTiers empty;
  CHECK_FALSE(empty.aggregate(std::array<std::vector<ModelUpdate>, 2>{}, {3, 2}));
}

TEST_CASE("asyn-tiers matches a brute-force two-stage mean") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    std::array<std::vector<ModelUpdate>, 2> fresh;
    for (int tier = 0; tier < 2; ++tier) {
      for (int k = 0; k < 1 + static_cast<int>(rng() % 4); ++k) {
        fresh[tier].push_back({.delta = random_vector(kArch, rng()), .num_samples = 1 + rng() % 9});
      }
    }
    const std::array<std::size_t, 2> counts = {1 + rng() % 10, 1 + rng() % 10};
    AsynTiers tiers;
    const auto out = tiers.aggregate(fresh, counts);
    REQUIRE(out);
    for (std::size_t i = 0; i < kArch.num_params(); ++i) {
      double total = 0.0;
      for (int tier = 0; tier < 2; ++tier) {
        double num = 0, den = 0;
        for (const auto& u : fresh[tier]) {
          num += static_cast<double>(u.num_samples) * u.delta[i];
          den += static_cast<double>(u.num_samples);
        }
        total += static_cast<double>(counts[tier]) * num / den;
      }
      CHECK((*out)[i] == doctest::Approx(total / static_cast<double>(counts[0] + counts[1])).epsilon(1e-12));
    }
  }
}
