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

#include "stalefl/harness.hpp"

namespace stalefl {
namespace {

// Desk-scale fixed-data setting shared by most sweeps.
constexpr const char* kDeskBase = R"(
scenario = fixed_data
num_clients = 20
alpha = 0.1
total_epochs = 200
seeds = 1, 2, 3
methods = unweighted, weighted, first_order, w_pred, asyn_tiers, ours
data.num_classes = 10
data.dim = 16
data.samples_per_class = 100
staleness.target_class = 5
staleness.num_stale_clients = 3
staleness.epochs = 40
model.hidden = 32
opt.learning_rate = 0.05
data.spread = 0.25
gi.stop_tol = 0.03
gi.max_iters = 1000
)";

std::string with(const char* base, const std::string& extra) {
  return std::string(base) + extra;
}

PresetVariant variant(std::string label,
                      std::vector<std::pair<std::string, std::string>> overrides) {
  return PresetVariant{std::move(label), std::move(overrides)};
}

}  // namespace

const std::vector<Preset>& presets() {
  static const std::vector<Preset> kPresets = {
      {"main_comparison", "fixed-data comparison of every method at alpha 0.1, tau 40",
       with(kDeskBase, "methods = unweighted, weighted, first_order, w_pred, asyn_tiers, "
                       "ours, unstale_oracle\n"),
       {}},
      {"alpha_sweep", "data heterogeneity sweep",
       kDeskBase,
       {variant("alpha_1", {{"alpha", "1"}}),
        variant("alpha_0.1", {{"alpha", "0.1"}}),
        variant("alpha_0.01", {{"alpha", "0.01"}})}},
      {"staleness_sweep", "fixed-data staleness sweep",
       kDeskBase,
       {variant("tau_10", {{"staleness.epochs", "10"}}),
        variant("tau_20", {{"staleness.epochs", "20"}}),
        variant("tau_40", {{"staleness.epochs", "40"}}),
        variant("tau_50", {{"staleness.epochs", "50"}})}},
      {"variant_staleness_sweep", "variant-data staleness sweep at variation rate 1",
       with(kDeskBase, "scenario = variant_data\nvariation.rate = 1\n"),
       {variant("tau_10", {{"staleness.epochs", "10"}}),
        variant("tau_20", {{"staleness.epochs", "20"}}),
        variant("tau_40", {{"staleness.epochs", "40"}}),
        variant("tau_50", {{"staleness.epochs", "50"}})}},
      {"variation_rate_sweep", "variant-data variation-rate sweep at tau 40",
       with(kDeskBase, "scenario = variant_data\n"),
       {variant("rate_0.5", {{"variation.rate", "0.5"}}),
        variant("rate_1", {{"variation.rate", "1"}}),
        variant("rate_2", {{"variation.rate", "2"}}),
        variant("rate_5", {{"variation.rate", "5"}})}},
      {"sparsification_sweep", "inversion sparsification rate vs accuracy",
       with(kDeskBase, "methods = ours\n"),
       {variant("rate_0", {{"gi.sparsification_rate", "0"}}),
        variant("rate_0.5", {{"gi.sparsification_rate", "0.5"}}),
        variant("rate_0.9", {{"gi.sparsification_rate", "0.9"}}),
        variant("rate_0.95", {{"gi.sparsification_rate", "0.95"}}),
        variant("rate_0.99", {{"gi.sparsification_rate", "0.99"}})}},
      {"switch_points", "switch enabled, disabled, and forced at fixed epochs",
       with(kDeskBase, "methods = ours\n"),
       {variant("detected", {}),
        variant("no_switch", {{"switch.enabled", "false"}}),
        variant("forced_135", {{"switch.forced_epoch", "135"}}),
        variant("forced_175", {{"switch.forced_epoch", "175"}})}},
      {"gamma_window_sweep", "length of the gamma handover window",
       with(kDeskBase, "methods = ours\n"),
       {variant("window_0", {{"switch.window_fraction", "0"}}),
        variant("window_0.05", {{"switch.window_fraction", "0.05"}}),
        variant("window_0.1", {{"switch.window_fraction", "0.1"}}),
        variant("window_0.2", {{"switch.window_fraction", "0.2"}}),
        variant("window_0.4", {{"switch.window_fraction", "0.4"}})}},
      {"uniqueness", "one-class-per-client detector scenario",
       with(kDeskBase, "methods = ours\ndata.partition = one_class\n"
                       "staleness.num_stale_clients = 4\n"),
       {}},
      {"lambda_sweep", "first-order compensation lambda sensitivity",
       with(kDeskBase, "methods = first_order, w_pred\n"),
       {variant("lambda_0.1", {{"first_order.lambda", "0.1"}}),
        variant("lambda_0.3", {{"first_order.lambda", "0.3"}}),
        variant("lambda_0.5", {{"first_order.lambda", "0.5"}})}},
  };
  return kPresets;
}

}  // namespace stalefl
