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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stalefl/baselines.hpp"
#include "stalefl/inversion.hpp"
#include "stalefl/nn.hpp"
#include "stalefl/switch.hpp"

namespace stalefl {

enum class Method {
  kUnweighted,
  kWeighted,
  kFirstOrder,
  kWPred,
  kAsynTiers,
  kOurs,
  kUnstaleOracle,
};

std::string_view to_string(Method method);
Method parse_method(std::string_view name);  // throws ConfigError
const std::vector<Method>& all_methods();

enum class ScenarioKind { kFixedData, kVariantData };
enum class PartitionKind { kDirichlet, kOneClass };
// pipelined: a stale client starts a round every epoch, each delivered tau
// epochs later. fixed: one round in flight per stale client.
enum class Cadence { kPipelined, kFixed };

struct DataConfig {
  std::string source = "blobs";  // blobs | csv
  std::string csv_path;
  std::string test_csv_path;
  int num_classes = 10;
  int dim = 16;
  int samples_per_class = 100;
  int test_samples_per_class = 50;
  double spread = 0.1;
  PartitionKind partition = PartitionKind::kDirichlet;
  // Replacement pool for the variant-data scenario.
  double variant_shift = 0.3;
  double variant_spread = 0.15;
  int variant_samples_per_class = 400;
};

struct ModelConfig {
  std::vector<std::size_t> hidden = {32};
  Activation activation = Activation::kRelu;
};

struct StalenessConfig {
  int target_class = 5;
  int num_stale_clients = 10;
  int epochs = 40;
  Cadence cadence = Cadence::kPipelined;
};

struct ExperimentConfig {
  ScenarioKind scenario = ScenarioKind::kFixedData;
  int num_clients = 100;
  double alpha = 0.1;
  int total_epochs = 200;
  std::vector<std::uint64_t> seeds = {1};
  std::vector<Method> methods = {Method::kOurs};
  double noise_variance = 0.0;
  std::string out_dir = "out";
  bool record_wallclock = false;

  DataConfig data;
  ModelConfig model;
  StalenessConfig staleness;
  OptConfig opt;
  // reference_size, unroll_steps and seed are filled in per run.
  GIConfig gi;
  bool gi_warm_start = true;
  bool gi_dump_d_rec = false;
  WeightingParams weighting;
  FirstOrderParams first_order;
  double variation_rate = 0.0;
  SwitchConfig switching;
  bool detector_enabled = true;

  // Throws ConfigError naming the offending key.
  void validate() const;
  ModelArch arch() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&);
};

// Flat `key = value` text, dotted section prefixes, `#` comments. Unknown
// keys, malformed values and constraint violations raise ConfigError with the
// line number.
// Keys not mentioned keep their value from `base`.
ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path,
                             ExperimentConfig base = {});

// Sets one key on an existing config (no validation).
void set_config_value(ExperimentConfig& config, std::string_view key,
                      std::string_view value);

// Every key, one per line, in a stable order; parse_config reads it back to an
// equal config.
std::string serialize_config(const ExperimentConfig& config);

std::vector<std::string> config_keys();

}  // namespace stalefl
