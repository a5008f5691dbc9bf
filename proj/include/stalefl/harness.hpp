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
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stalefl/config.hpp"
#include "stalefl/sim.hpp"

namespace stalefl {

// A named sweep: a base config plus per-variant key overrides.
struct PresetVariant {
  std::string label;
  std::vector<std::pair<std::string, std::string>> overrides;
};

struct Preset {
  std::string name;
  std::string description;
  std::string base;  // config text
  std::vector<PresetVariant> variants;

  ExperimentConfig base_config() const;
  ExperimentConfig variant_config(const PresetVariant& v,
                                  const ExperimentConfig& base) const;
};

const std::vector<Preset>& presets();
// Throws ConfigError for an unknown name.
const Preset& find_preset(const std::string& name);

// Parsed metrics.csv row; accuracies as written.
struct MetricsRow {
  int epoch = 0;
  std::string method;
  std::uint64_t seed = 0;
  double overall_acc = 0.0;
  std::optional<double> target_class_acc;
  std::optional<double> e1;
  std::optional<double> e2;
  std::string switch_state;
  std::optional<long long> gi_iters;
};

std::string metrics_csv_header();
std::string format_metrics_row(const MetricsRecord& r);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

struct RelativeTime {
  std::map<std::uint64_t, std::optional<double>> per_seed;  // nullopt: not reached
  std::optional<double> median;
};

// Epochs until reference_method first reaches target_method's final
// target-class accuracy, over the epochs target_method needed to first reach
// it. Throws PreconditionError when either method is missing.
RelativeTime compare_epochs_to_accuracy(const std::vector<MetricsRow>& metrics,
                                        const std::string& reference_method,
                                        const std::string& target_method);

// Per-method, per-seed and median statistics of one metrics.csv.
std::string summarize_metrics(const std::vector<MetricsRow>& metrics);

// Writes metrics.csv, detector_seed<S>.csv, switch_seed<S>.csv into out_dir
// and returns the RunResults. Exit code 0, or 2 if any run aborted.
struct SuiteOutcome {
  int exit_code = 0;
  std::vector<RunResult> runs;
};
SuiteOutcome run_suite(const ExperimentConfig& config, const std::filesystem::path& out_dir);

// Runs every preset variant into out_dir/<label>/ and writes a combined
// summary.json. A preset with no variants runs once into out_dir.
int run_preset(const Preset& preset, const ExperimentConfig& base,
               const std::filesystem::path& out_dir);

// Rebuilds summary.json for a directory written by run_suite/run_preset and
// returns its text.
std::string summarize_dir(const std::filesystem::path& dir);

}  // namespace stalefl
