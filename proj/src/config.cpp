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

#include "stalefl/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "stalefl/errors.hpp"

namespace stalefl {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::kUnweighted: return "unweighted";
    case Method::kWeighted: return "weighted";
    case Method::kFirstOrder: return "first_order";
    case Method::kWPred: return "w_pred";
    case Method::kAsynTiers: return "asyn_tiers";
    case Method::kOurs: return "ours";
    case Method::kUnstaleOracle: return "unstale_oracle";
  }
  return "?";
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> kAll = {
      Method::kUnweighted, Method::kWeighted, Method::kFirstOrder,
      Method::kWPred,      Method::kAsynTiers, Method::kOurs,
      Method::kUnstaleOracle};
  return kAll;
}

Method parse_method(std::string_view name) {
  for (Method m : all_methods()) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown method '" + std::string(name) + "'", "methods");
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = s.find(',');
    const auto item = trim(s.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value,
                            std::string_view expected) {
  throw ConfigError(std::string(key) + ": expected " + std::string(expected) +
                        ", got '" + std::string(value) + "'",
                    std::string(key));
}

template <typename T>
T parse_number(std::string_view key, std::string_view value, std::string_view what) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) bad_value(key, value, what);
  return out;
}

int to_int(std::string_view k, std::string_view v) {
  return parse_number<int>(k, v, "an integer");
}
double to_double(std::string_view k, std::string_view v) {
  return parse_number<double>(k, v, "a number");
}
bool to_bool(std::string_view k, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(k, v, "true or false");
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}
std::string fmt(bool v) { return v ? "true" : "false"; }

template <typename T>
std::string join(const std::vector<T>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_same_v<T, Method>) {
      out += to_string(items[i]);
    } else {
      out += std::to_string(items[i]);
    }
  }
  return out;
}

struct Field {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, std::string_view key, std::string_view)> set;
};

#define STALEFL_INT(k, member)                                                   \
  Field{k, [](const ExperimentConfig& c) { return std::to_string(c.member); },   \
        [](ExperimentConfig& c, std::string_view key, std::string_view v) {      \
          c.member = to_int(key, v);                                             \
        }}
#define STALEFL_DOUBLE(k, member)                                                \
  Field{k, [](const ExperimentConfig& c) { return fmt(c.member); },              \
        [](ExperimentConfig& c, std::string_view key, std::string_view v) {      \
          c.member = to_double(key, v);                                          \
        }}
#define STALEFL_BOOL(k, member)                                                  \
  Field{k, [](const ExperimentConfig& c) { return fmt(c.member); },              \
        [](ExperimentConfig& c, std::string_view key, std::string_view v) {      \
          c.member = to_bool(key, v);                                            \
        }}
#define STALEFL_STRING(k, member)                                                \
  Field{k, [](const ExperimentConfig& c) { return c.member; },                   \
        [](ExperimentConfig& c, std::string_view, std::string_view v) {          \
          c.member = std::string(v);                                             \
        }}

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = {
      Field{"scenario",
            [](const ExperimentConfig& c) -> std::string {
              return c.scenario == ScenarioKind::kFixedData ? "fixed_data"
                                                            : "variant_data";
            },
            [](ExperimentConfig& c, std::string_view k, std::string_view v) {
              if (v == "fixed_data") {
                c.scenario = ScenarioKind::kFixedData;
              } else if (v == "variant_data") {
                c.scenario = ScenarioKind::kVariantData;
              } else {
                bad_value(k, v, "fixed_data or variant_data");
              }
            }},
      STALEFL_INT("num_clients", num_clients),
      STALEFL_DOUBLE("alpha", alpha),
      STALEFL_INT("total_epochs", total_epochs),
      Field{"seeds", [](const ExperimentConfig& c) { return join(c.seeds); },
            [](ExperimentConfig& c, std::string_view k, std::string_view v) {
              c.seeds.clear();
              for (auto item : split_list(v)) {
                c.seeds.push_back(
                    parse_number<std::uint64_t>(k, item, "unsigned integers"));
              }
            }},
      Field{"methods", [](const ExperimentConfig& c) { return join(c.methods); },
            [](ExperimentConfig& c, std::string_view, std::string_view v) {
              c.methods.clear();
              for (auto item : split_list(v)) c.methods.push_back(parse_method(item));
            }},
      STALEFL_DOUBLE("noise_variance", noise_variance),
      STALEFL_STRING("out_dir", out_dir),
      STALEFL_BOOL("record_wallclock", record_wallclock),

      STALEFL_STRING("data.source", data.source),
      STALEFL_STRING("data.csv_path", data.csv_path),
      STALEFL_STRING("data.test_csv_path", data.test_csv_path),
      STALEFL_INT("data.num_classes", data.num_classes),
      STALEFL_INT("data.dim", data.dim),
      STALEFL_INT("data.samples_per_class", data.samples_per_class),
      STALEFL_INT("data.test_samples_per_class", data.test_samples_per_class),
      STALEFL_DOUBLE("data.spread", data.spread),
      Field{"data.partition",
            [](const ExperimentConfig& c) -> std::string {
              return c.data.partition == PartitionKind::kDirichlet ? "dirichlet"
                                                                   : "one_class";
            },
            [](ExperimentConfig& c, std::string_view k, std::string_view v) {
              if (v == "dirichlet") {
                c.data.partition = PartitionKind::kDirichlet;
              } else if (v == "one_class") {
                c.data.partition = PartitionKind::kOneClass;
              } else {
                bad_value(k, v, "dirichlet or one_class");
              }
            }},
      STALEFL_DOUBLE("data.variant_shift", data.variant_shift),
      STALEFL_DOUBLE("data.variant_spread", data.variant_spread),
      STALEFL_INT("data.variant_samples_per_class", data.variant_samples_per_class),

      Field{"model.hidden",
            [](const ExperimentConfig& c) { return join(c.model.hidden); },
            [](ExperimentConfig& c, std::string_view k, std::string_view v) {
              c.model.hidden.clear();
              for (auto item : split_list(v)) {
                c.model.hidden.push_back(
                    parse_number<std::size_t>(k, item, "positive integers"));
              }
            }},
      Field{"model.activation",
            [](const ExperimentConfig& c) {
              return std::string(to_string(c.model.activation));
            },
            [](ExperimentConfig& c, std::string_view k, std::string_view v) {
              try {
                c.model.activation = parse_activation(v);
              } catch (const Error&) {
                bad_value(k, v, "relu or tanh");
              }
            }},

      STALEFL_INT("staleness.target_class", staleness.target_class),
      STALEFL_INT("staleness.num_stale_clients", staleness.num_stale_clients),
      STALEFL_INT("staleness.epochs", staleness.epochs),
      Field{"staleness.cadence",
            [](const ExperimentConfig& c) -> std::string {
              return c.staleness.cadence == Cadence::kPipelined ? "pipelined" : "fixed";
            },
            [](ExperimentConfig& c, std::string_view k, std::string_view v) {
              if (v == "pipelined") {
                c.staleness.cadence = Cadence::kPipelined;
              } else if (v == "fixed") {
                c.staleness.cadence = Cadence::kFixed;
              } else {
                bad_value(k, v, "pipelined or fixed");
              }
            }},

      Field{"opt.kind",
            [](const ExperimentConfig& c) { return std::string(to_string(c.opt.kind)); },
            [](ExperimentConfig& c, std::string_view k, std::string_view v) {
              try {
                c.opt.kind = parse_optimizer(v);
              } catch (const Error&) {
                bad_value(k, v, "sgd, sgd_momentum or fedprox");
              }
            }},
      STALEFL_DOUBLE("opt.learning_rate", opt.learning_rate),
      STALEFL_DOUBLE("opt.momentum", opt.momentum),
      STALEFL_DOUBLE("opt.prox_mu", opt.prox_mu),
      STALEFL_INT("opt.local_steps", opt.local_steps),
      Field{"opt.batch_size",
            [](const ExperimentConfig& c) {
              return c.opt.batch_size ? std::to_string(*c.opt.batch_size)
                                      : std::string("full");
            },
            [](ExperimentConfig& c, std::string_view k, std::string_view v) {
              if (v == "full") {
                c.opt.batch_size.reset();
              } else {
                c.opt.batch_size = to_int(k, v);
              }
            }},

      STALEFL_DOUBLE("gi.d_rec_fraction", gi.d_rec_fraction),
      STALEFL_INT("gi.max_iters", gi.max_iters),
      STALEFL_DOUBLE("gi.inner_lr", gi.inner_lr),
      STALEFL_DOUBLE("gi.stop_tol", gi.stop_tol),
      STALEFL_DOUBLE("gi.sparsification_rate", gi.sparsification_rate),
      STALEFL_BOOL("gi.warm_start", gi_warm_start),
      STALEFL_BOOL("gi.dump_d_rec", gi_dump_d_rec),

      STALEFL_DOUBLE("weighting.a", weighting.a),
      STALEFL_DOUBLE("weighting.b", weighting.b),
      STALEFL_DOUBLE("first_order.lambda", first_order.lambda),
      STALEFL_DOUBLE("variation.rate", variation_rate),

      STALEFL_BOOL("switch.enabled", switching.enabled),
      STALEFL_INT("switch.smoothing_window", switching.smoothing_window),
      STALEFL_DOUBLE("switch.window_fraction", switching.window_fraction),
      Field{"switch.forced_epoch",
            [](const ExperimentConfig& c) {
              return c.switching.forced_epoch
                         ? std::to_string(*c.switching.forced_epoch)
                         : std::string("none");
            },
            [](ExperimentConfig& c, std::string_view k, std::string_view v) {
              if (v == "none") {
                c.switching.forced_epoch.reset();
              } else {
                c.switching.forced_epoch = to_int(k, v);
              }
            }},
      STALEFL_BOOL("detector.enabled", detector_enabled),
  };
  return kFields;
}

#undef STALEFL_INT
#undef STALEFL_DOUBLE
#undef STALEFL_BOOL
#undef STALEFL_STRING

const Field* find_field(std::string_view key) {
  for (const auto& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

void require(bool ok, const char* key, const std::string& message) {
  if (!ok) throw ConfigError(message, key);
}

}  // namespace

void ExperimentConfig::validate() const {
  require(num_clients >= 1, "num_clients", "num_clients must be >= 1");
  require(alpha > 0.0, "alpha", "alpha must be > 0");
  require(total_epochs >= 1, "total_epochs", "total_epochs must be >= 1");
  require(!seeds.empty(), "seeds", "seeds must list at least one seed");
  require(!methods.empty(), "methods", "methods must list at least one method");
  require(noise_variance >= 0.0, "noise_variance", "noise_variance must be >= 0");

  require(data.source == "blobs" || data.source == "csv", "data.source",
          "data.source must be blobs or csv");
  if (data.source == "csv") {
    require(!data.csv_path.empty(), "data.csv_path",
            "data.csv_path is required when data.source = csv");
  }
  require(data.num_classes >= 2, "data.num_classes", "data.num_classes must be >= 2");
  require(data.dim >= 1, "data.dim", "data.dim must be >= 1");
  require(data.samples_per_class >= 1, "data.samples_per_class",
          "data.samples_per_class must be >= 1");
  require(data.test_samples_per_class >= 1, "data.test_samples_per_class",
          "data.test_samples_per_class must be >= 1");
  require(data.spread > 0.0, "data.spread", "data.spread must be > 0");
  require(data.variant_shift >= 0.0, "data.variant_shift",
          "data.variant_shift must be >= 0");
  require(data.variant_spread > 0.0, "data.variant_spread",
          "data.variant_spread must be > 0");
  require(data.variant_samples_per_class >= 1, "data.variant_samples_per_class",
          "data.variant_samples_per_class must be >= 1");

  for (std::size_t h : model.hidden) {
    require(h >= 1, "model.hidden", "model.hidden sizes must be >= 1");
  }

  require(staleness.target_class >= 0 && staleness.target_class < data.num_classes,
          "staleness.target_class", "staleness.target_class must be in [0, num_classes)");
  require(staleness.num_stale_clients >= 0 && staleness.num_stale_clients <= num_clients,
          "staleness.num_stale_clients",
          "staleness.num_stale_clients must be in [0, num_clients]");
  require(staleness.epochs >= 0, "staleness.epochs", "staleness.epochs must be >= 0");

  opt.validate();
  require(opt.local_steps >= 1, "opt.local_steps", "opt.local_steps must be >= 1");

  GIConfig g = gi;
  g.unroll_steps = opt.local_steps;
  g.validate();

  require(weighting.a > 0.0, "weighting.a", "weighting.a must be > 0");
  require(first_order.lambda >= 0.0, "first_order.lambda",
          "first_order.lambda must be >= 0");
  require(variation_rate >= 0.0, "variation.rate", "variation.rate must be >= 0");
  require(switching.smoothing_window >= 1, "switch.smoothing_window",
          "switch.smoothing_window must be >= 1");
  require(switching.window_fraction >= 0.0, "switch.window_fraction",
          "switch.window_fraction must be >= 0");
  if (switching.forced_epoch) {
    require(*switching.forced_epoch >= 0, "switch.forced_epoch",
            "switch.forced_epoch must be >= 0");
  }
}

ModelArch ExperimentConfig::arch() const {
  ModelArch a;
  a.layer_dims.push_back(static_cast<std::size_t>(data.dim));
  for (std::size_t h : model.hidden) a.layer_dims.push_back(h);
  a.layer_dims.push_back(static_cast<std::size_t>(data.num_classes));
  a.activation = model.activation;
  return a;
}

// Serialization is lossless (shortest round-trip floats), so equality of the
// serialized forms is equality of every field.
bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

void set_config_value(ExperimentConfig& config, std::string_view key,
                      std::string_view value) {
  const Field* f = find_field(key);
  if (!f) {
    throw ConfigError("unknown key '" + std::string(key) + "'", std::string(key));
  }
  f->set(config, key, trim(value));
}

ExperimentConfig parse_config(std::string_view text, ExperimentConfig base) {
  ExperimentConfig config = std::move(base);
  std::vector<std::pair<std::string, int>> seen;  // key -> line
  int line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value",
                        {}, line_no);
    }
    const std::string key(trim(line.substr(0, eq)));
    try {
      set_config_value(config, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what(), key,
                        line_no);
    }
    seen.emplace_back(key, line_no);
  }
  try {
    config.validate();
  } catch (const ConfigError& e) {
    int line = 0;
    for (const auto& [k, l] : seen) {
      if (k == e.key()) line = l;
    }
    if (line == 0) throw;
    throw ConfigError("line " + std::to_string(line) + ": " + e.what(), e.key(), line);
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::move(base));
}

std::string serialize_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& f : fields()) {
    out += f.key;
    out += " = ";
    out += f.get(config);
    out += '\n';
  }
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

}  // namespace stalefl
