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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "stalefl/errors.hpp"

namespace stalefl {

using nlohmann::json;

ExperimentConfig Preset::base_config() const { return parse_config(base); }

ExperimentConfig Preset::variant_config(const PresetVariant& v,
                                        const ExperimentConfig& base_cfg) const {
  ExperimentConfig c = base_cfg;
  for (const auto& [key, value] : v.overrides) set_config_value(c, key, value);
  c.validate();
  return c;
}

const Preset& find_preset(const std::string& name) {
  for (const auto& p : presets()) {
    if (p.name == name) return p;
  }
  throw ConfigError("unknown preset '" + name + "'", "preset");
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string general(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::optional<double> opt_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// First row index (1-based count of epochs) at which acc >= level.
std::optional<int> epochs_to_reach(const std::vector<const MetricsRow*>& rows, double level) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i]->target_class_acc && *rows[i]->target_class_acc >= level) {
      return static_cast<int>(i) + 1;
    }
  }
  return std::nullopt;
}

std::map<std::uint64_t, std::vector<const MetricsRow*>> rows_by_seed(
    const std::vector<MetricsRow>& metrics, const std::string& method) {
  std::map<std::uint64_t, std::vector<const MetricsRow*>> out;
  for (const auto& r : metrics) {
    if (r.method == method) out[r.seed].push_back(&r);
  }
  for (auto& [seed, rows] : out) {
    std::stable_sort(rows.begin(), rows.end(), [](const MetricsRow* a, const MetricsRow* b) {
      return a->epoch < b->epoch;
    });
  }
  return out;
}

json summary_json(const std::vector<MetricsRow>& metrics) {
  std::vector<std::string> methods;
  for (const auto& r : metrics) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
      methods.push_back(r.method);
    }
  }
  const bool have_ours = std::find(methods.begin(), methods.end(), "ours") != methods.end();
  json out = json::object();
  for (const auto& m : methods) {
    json per_seed = json::object();
    std::map<std::string, std::vector<double>> pooled;
    std::optional<RelativeTime> rel;
    if (have_ours) rel = compare_epochs_to_accuracy(metrics, m, "ours");
    for (const auto& [seed, rows] : rows_by_seed(metrics, m)) {
      json s = json::object();
      auto put = [&](const char* key, std::optional<double> v) {
        s[key] = v ? json(*v) : json(nullptr);
        if (v) pooled[key].push_back(*v);
      };
      std::optional<double> best_target;
      double best_overall = 0.0;
      for (const auto* r : rows) {
        if (r->target_class_acc) {
          best_target = std::max(best_target.value_or(-1.0), *r->target_class_acc);
        }
        best_overall = std::max(best_overall, r->overall_acc);
      }
      double tail = 0.0;
      int tail_n = 0;
      const std::size_t from = rows.size() > 50 ? rows.size() - 50 : 0;
      for (std::size_t i = from; i < rows.size(); ++i) {
        if (rows[i]->target_class_acc) {
          tail += *rows[i]->target_class_acc;
          ++tail_n;
        }
      }
      put("final_target_acc", rows.back()->target_class_acc);
      put("best_target_acc", best_target);
      put("final_overall_acc", rows.back()->overall_acc);
      put("best_overall_acc", best_overall);
      put("mean_last50_target_acc",
          tail_n ? std::optional<double>(tail / tail_n) : std::nullopt);
      s["epochs"] = rows.size();
      if (rel) {
        const auto& v = rel->per_seed[seed];
        s["relative_time_vs_ours"] = v ? json(*v) : json("not reached");
      }
      per_seed[std::to_string(seed)] = s;
    }
    json median = json::object();
    for (const auto& [key, vals] : pooled) median[key] = median_of(vals);
    if (rel) {
      median["relative_time_vs_ours"] = rel->median ? json(*rel->median) : json("not reached");
    }
    out[m] = json{{"seeds", per_seed}, {"median", median}};
  }
  return out;
}

json read_aborts(const std::filesystem::path& dir) {
  json aborted = json::array();
  std::ifstream in(dir / "aborts.csv");
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    const auto cols = split_csv(line);
    if (cols.size() < 3) continue;
    std::string reason = cols[2];
    for (std::size_t i = 3; i < cols.size(); ++i) reason += "," + cols[i];
    aborted.push_back({{"method", cols[0]}, {"seed", std::stoull(cols[1])}, {"reason", reason}});
  }
  return aborted;
}

json dir_summary(const std::filesystem::path& dir) {
  return json{{"methods", summary_json(read_metrics_csv(dir / "metrics.csv"))},
              {"aborted", read_aborts(dir)}};
}

}  // namespace

std::string metrics_csv_header() {
  return "epoch,method,seed,overall_acc,target_class_acc,e1,e2,switch_state,gi_iters,"
         "wallclock_ms";
}

std::string format_metrics_row(const MetricsRecord& r) {
  std::string s = std::to_string(r.epoch) + "," + std::string(to_string(r.method)) + "," +
                  std::to_string(r.seed) + "," + fixed(r.overall_acc, 6) + ",";
  if (!std::isnan(r.target_class_acc)) s += fixed(r.target_class_acc, 6);
  s += ",";
  if (r.e1) s += general(*r.e1);
  s += ",";
  if (r.e2) s += general(*r.e2);
  s += ",";
  if (r.switch_state) s += to_string(*r.switch_state);
  s += ",";
  if (r.gi_iters) s += std::to_string(*r.gi_iters);
  s += ",";
  if (r.wallclock_ms) s += fixed(*r.wallclock_ms, 3);
  return s;
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != metrics_csv_header()) {
    throw FormatError(path.string() + ": unexpected metrics header");
  }
  std::vector<MetricsRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 10) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 10 columns");
    }
    MetricsRow r;
    r.epoch = std::stoi(c[0]);
    r.method = c[1];
    r.seed = std::stoull(c[2]);
    r.overall_acc = std::stod(c[3]);
    r.target_class_acc = opt_double(c[4]);
    r.e1 = opt_double(c[5]);
    r.e2 = opt_double(c[6]);
    r.switch_state = c[7];
    if (!c[8].empty()) r.gi_iters = std::stoll(c[8]);
    rows.push_back(std::move(r));
  }
  return rows;
}

RelativeTime compare_epochs_to_accuracy(const std::vector<MetricsRow>& metrics,
                                        const std::string& reference_method,
                                        const std::string& target_method) {
  const auto ref = rows_by_seed(metrics, reference_method);
  const auto tgt = rows_by_seed(metrics, target_method);
  if (ref.empty() || tgt.empty()) {
    throw PreconditionError("both methods must be present in the metrics");
  }
  RelativeTime out;
  std::vector<double> ratios;
  for (const auto& [seed, rows] : tgt) {
    auto it = ref.find(seed);
    if (it == ref.end()) continue;
    const auto level = rows.back()->target_class_acc;
    std::optional<double> ratio;
    if (level) {
      const auto e_t = epochs_to_reach(rows, *level);
      const auto e_r = epochs_to_reach(it->second, *level);
      if (e_t && e_r) ratio = static_cast<double>(*e_r) / *e_t;
    }
    out.per_seed[seed] = ratio;
    ratios.push_back(ratio.value_or(std::numeric_limits<double>::infinity()));
  }
  if (!ratios.empty()) {
    const double m = median_of(ratios);
    if (std::isfinite(m)) out.median = m;
  }
  return out;
}

std::string summarize_metrics(const std::vector<MetricsRow>& metrics) {
  return summary_json(metrics).dump(2);
}

SuiteOutcome run_suite(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  SuiteOutcome outcome;
  std::string metrics = metrics_csv_header() + "\n";
  std::string aborts = "method,seed,reason\n";
  RunHooks hooks;
  if (config.gi_dump_d_rec) hooks.d_rec_dir = out_dir / "d_rec";
  for (std::uint64_t seed : config.seeds) {
    std::string detector = "epoch,client_id,mean_dc,threshold,unique\n";
    std::string switching = "epoch,mode,gamma,switch_epoch\n";
    bool any_detector = false;
    for (Method m : config.methods) {
      RunResult r = run_training(config, m, seed, hooks);
      for (const auto& rec : r.metrics) metrics += format_metrics_row(rec) + "\n";
      for (const auto& d : r.detector) {
        detector += std::to_string(d.epoch) + "," + std::to_string(d.client_id) + "," +
                    general(d.mean_dc) + "," + (d.threshold ? general(*d.threshold) : "") +
                    "," + (d.unique ? "1" : "0") + "\n";
        any_detector = true;
      }
      for (const auto& s : r.switching) {
        switching += std::to_string(s.epoch) + "," + std::string(to_string(s.mode)) + "," +
                     fixed(s.gamma, 6) + "," +
                     (s.switch_epoch ? std::to_string(*s.switch_epoch) : "") + "\n";
      }
      if (r.aborted) {
        outcome.exit_code = 2;
        aborts += std::string(to_string(m)) + "," + std::to_string(seed) + "," +
                  r.abort_reason + "\n";
      }
      outcome.runs.push_back(std::move(r));
    }
    const std::string tag = "seed" + std::to_string(seed) + ".csv";
    if (any_detector) write_file(out_dir / ("detector_" + tag), detector);
    if (std::find(config.methods.begin(), config.methods.end(), Method::kOurs) !=
        config.methods.end()) {
      write_file(out_dir / ("switch_" + tag), switching);
    }
  }
  write_file(out_dir / "metrics.csv", metrics);
  write_file(out_dir / "aborts.csv", aborts);
  write_file(out_dir / "config.txt", serialize_config(config));
  write_file(out_dir / "summary.json", dir_summary(out_dir).dump(2) + "\n");
  return outcome;
}

int run_preset(const Preset& preset, const ExperimentConfig& base,
               const std::filesystem::path& out_dir) {
  if (preset.variants.empty()) return run_suite(base, out_dir).exit_code;
  int code = 0;
  for (const auto& v : preset.variants) {
    const int c = run_suite(preset.variant_config(v, base), out_dir / v.label).exit_code;
    code = std::max(code, c);
  }
  summarize_dir(out_dir);
  return code;
}

std::string summarize_dir(const std::filesystem::path& dir) {
  json out;
  if (std::filesystem::exists(dir / "metrics.csv")) {
    out = dir_summary(dir);
  } else {
    json variants = json::object();
    std::set<std::filesystem::path> subdirs;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      if (e.is_directory() && std::filesystem::exists(e.path() / "metrics.csv")) {
        subdirs.insert(e.path());
      }
    }
    if (subdirs.empty()) throw Error("no metrics.csv under " + dir.string());
    for (const auto& p : subdirs) variants[p.filename().string()] = dir_summary(p);
    out = json{{"variants", variants}};
  }
  const std::string text = out.dump(2) + "\n";
  write_file(dir / "summary.json", text);
  return text;
}

}  // namespace stalefl
