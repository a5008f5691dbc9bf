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
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stalefl/config.hpp"
#include "stalefl/nn.hpp"
#include "stalefl/switch.hpp"

namespace stalefl {

struct Evaluation {
  std::vector<double> per_class;  // NaN for classes absent from the test set
  double overall = 0.0;
};

// Argmax predictions of `weights` on a hard-labelled test set.
Evaluation evaluate(const ParamVector& weights, const Dataset& test);
Evaluation evaluate_logits(const Matrix& logits, const std::vector<int>& labels,
                           int num_classes);

// Everything a run needs before its first epoch.
struct Scenario {
  ModelArch arch;
  std::vector<Dataset> clients;
  Dataset test;
  std::vector<int> stale_ids;    // ascending
  std::vector<bool> is_stale;    // per client
  std::vector<Dataset> pools;    // variant-data replacement pools, per client
  ParamVector init;
  std::size_t median_client_size = 1;
  // Per stale client: none of the unstale clients holds its majority class.
  std::vector<bool> truth_unique;
};

Scenario build_scenario(const ExperimentConfig& config, std::uint64_t seed);

// One row per aggregation round; `epoch` is the 0-based round index and the
// accuracies are those of the model produced by that round.
struct MetricsRecord {
  int epoch = 0;
  Method method = Method::kOurs;
  std::uint64_t seed = 0;
  double overall_acc = 0.0;
  double target_class_acc = 0.0;  // NaN when the class has no test samples
  std::optional<double> e1;
  std::optional<double> e2;
  std::optional<SwitchMode> switch_state;
  std::optional<long long> gi_iters;
  std::optional<double> wallclock_ms;
};

struct DetectorRecord {
  int epoch = 0;
  int client_id = 0;
  double mean_dc = 0.0;
  std::optional<double> threshold;
  bool unique = true;
  bool truth_unique = true;  // not written to CSV
};

struct SwitchRecord {
  int epoch = 0;
  SwitchMode mode = SwitchMode::kEstimating;
  double gamma = 1.0;
  std::optional<int> switch_epoch;
};

struct RunResult {
  Method method = Method::kOurs;
  std::uint64_t seed = 0;
  std::vector<MetricsRecord> metrics;
  std::vector<DetectorRecord> detector;
  std::vector<SwitchRecord> switching;
  bool aborted = false;
  std::string abort_reason;
};

struct RunHooks {
  // Called after every round with the new global weights.
  std::function<void(int epoch, const ParamVector& weights)> on_epoch;
  // D_rec CSVs are written here when config.gi_dump_d_rec is set.
  std::filesystem::path d_rec_dir;
};

// Worker threads for per-client work: STALEFL_THREADS, default 1.
int thread_count();

RunResult run_training(const ExperimentConfig& config, Method method,
                       std::uint64_t seed, const RunHooks& hooks = {});

// First configured method and seed.
std::vector<MetricsRecord> run_training(const ExperimentConfig& config);

}  // namespace stalefl
