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

// Command-line front end: `stalefl run ...` and `stalefl summarize ...`.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "stalefl/config.hpp"
#include "stalefl/errors.hpp"
#include "stalefl/harness.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRunAbort = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated-learning simulator with stale-update compensation"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string method;
  std::string preset_name;
  auto* run = app.add_subcommand("run", "run an experiment config or preset");
  run->add_option("--config", config_path, "flat key = value config file");
  run->add_option("--seed", seed, "run this seed only");
  run->add_option("--out-dir", out_dir, "output directory (overrides out_dir)");
  run->add_option("--method", method, "run this method only");
  run->add_option("--preset", preset_name, "named sweep preset");

  std::string in_dir;
  auto* summarize = app.add_subcommand("summarize", "rebuild summary.json from CSVs");
  summarize->add_option("--in", in_dir, "directory written by run")->required();

  CLI11_PARSE(app, argc, argv);

  if (*summarize) {
    try {
      std::cout << stalefl::summarize_dir(in_dir);
      return kOk;
    } catch (const stalefl::Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kConfigError;
    }
  }

  if (config_path.empty() && preset_name.empty()) {
    std::cerr << "error: run needs --config or --preset\n";
    return kConfigError;
  }
  stalefl::ExperimentConfig config;
  const stalefl::Preset* preset = nullptr;
  try {
    if (!preset_name.empty()) {
      preset = &stalefl::find_preset(preset_name);
      config = preset->base_config();
    }
    if (!config_path.empty()) config = stalefl::load_config(config_path, config);
    if (seed) config.seeds = {*seed};
    if (!method.empty()) config.methods = {stalefl::parse_method(method)};
    if (!out_dir.empty()) config.out_dir = out_dir;
    config.validate();
    if (preset) {
      for (const auto& v : preset->variants) preset->variant_config(v, config);
    }
  } catch (const stalefl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const stalefl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    const int code = preset ? stalefl::run_preset(*preset, config, config.out_dir)
                            : stalefl::run_suite(config, config.out_dir).exit_code;
    if (code != kOk) std::cerr << "one or more runs aborted; see summary.json\n";
    return code;
  } catch (const stalefl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "run aborted: " << e.what() << "\n";
    return kRunAbort;
  }
}
