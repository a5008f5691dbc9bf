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

#include "stalefl/sim.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

#include "stalefl/aggregate.hpp"
#include "stalefl/baselines.hpp"
#include "stalefl/data.hpp"
#include "stalefl/detector.hpp"
#include "stalefl/errors.hpp"
#include "stalefl/history.hpp"
#include "stalefl/inversion.hpp"
#include "stalefl/random.hpp"

namespace stalefl {
namespace {

// Stream identifiers for derive_seed.
enum : std::uint64_t {
  kStreamFamily = 1,
  kStreamTrain,
  kStreamTest,
  kStreamPartition,
  kStreamInit,
  kStreamShuffle,
  kStreamNoise,
  kStreamVariation,
  kStreamPool,
  kStreamGi,
  kStreamShift,
};

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

int majority_class(const Dataset& d) {
  const auto counts = d.class_counts();
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

// Pool rows whose class mix follows the client's: up to 4x the client's
// count of each class it holds.
Dataset client_pool(const Dataset& client, const Dataset& pool_all, std::uint64_t seed) {
  const auto counts = client.class_counts();
  const auto labels = pool_all.argmax_labels();
  std::vector<std::size_t> rows;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) continue;
    std::vector<std::size_t> of_class;
    for (std::size_t r = 0; r < labels.size(); ++r) {
      if (labels[r] == static_cast<int>(c)) of_class.push_back(r);
    }
    Rng rng(derive_seed(seed, {c}));
    std::shuffle(of_class.begin(), of_class.end(), rng);
    const std::size_t take = std::min(of_class.size(), 4 * counts[c]);
    rows.insert(rows.end(), of_class.begin(), of_class.begin() + take);
  }
  std::sort(rows.begin(), rows.end());
  return pool_all.subset(rows);
}

void write_d_rec(const std::filesystem::path& dir, std::uint64_t seed, Method method,
                 int client, int epoch, const Dataset& d) {
  std::filesystem::create_directories(dir);
  const auto path = dir / ("seed" + std::to_string(seed) + "_" +
                           std::string(to_string(method)) + "_client" +
                           std::to_string(client) + "_epoch" + std::to_string(epoch) +
                           ".csv");
  std::ofstream out(path);
  for (std::size_t j = 0; j < d.dim(); ++j) out << 'f' << j << ',';
  for (int c = 0; c < d.num_classes(); ++c) {
    out << 'p' << c << (c + 1 < d.num_classes() ? "," : "\n");
  }
  out.precision(9);
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j < d.dim(); ++j) out << d.features()(i, j) << ',';
    for (int c = 0; c < d.num_classes(); ++c) {
      out << d.targets()(i, c) << (c + 1 < d.num_classes() ? "," : "\n");
    }
  }
}

}  // namespace

int thread_count() {
  if (const char* env = std::getenv("STALEFL_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

Evaluation evaluate_logits(const Matrix& logits, const std::vector<int>& labels,
                           int num_classes) {
  if (labels.empty()) throw PreconditionError("evaluation needs a nonempty test set");
  if (static_cast<std::size_t>(logits.rows()) != labels.size() ||
      logits.cols() != num_classes) {
    throw ShapeError("logits do not match the test set");
  }
  std::vector<double> correct(num_classes, 0.0);
  std::vector<double> count(num_classes, 0.0);
  double total_correct = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Eigen::Index pred = 0;
    logits.row(static_cast<Eigen::Index>(i)).maxCoeff(&pred);
    const int y = labels[i];
    count[y] += 1.0;
    if (pred == y) {
      correct[y] += 1.0;
      total_correct += 1.0;
    }
  }
  Evaluation e;
  e.per_class.resize(num_classes);
  for (int c = 0; c < num_classes; ++c) {
    e.per_class[c] =
        count[c] > 0 ? correct[c] / count[c] : std::numeric_limits<double>::quiet_NaN();
  }
  e.overall = total_correct / static_cast<double>(labels.size());
  return e;
}

Evaluation evaluate(const ParamVector& weights, const Dataset& test) {
  if (test.empty()) throw PreconditionError("evaluation needs a nonempty test set");
  return evaluate_logits(forward(weights, test.features()), test.labels(),
                         test.num_classes());
}

Scenario build_scenario(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  const auto& dc = config.data;
  Scenario s{.arch = config.arch(), .init = ParamVector(config.arch())};
  Dataset train;
  std::optional<BlobFamily> family;
  if (dc.source == "csv") {
    if (dc.test_csv_path.empty()) {
      throw ConfigError("data.test_csv_path is required when data.source = csv",
                        "data.test_csv_path");
    }
    train = read_csv_dataset(dc.csv_path, dc.num_classes);
    s.test = read_csv_dataset(dc.test_csv_path, dc.num_classes);
    if (static_cast<int>(train.dim()) != dc.dim) {
      throw ConfigError("data.dim does not match the CSV feature count", "data.dim");
    }
  } else {
    family = make_blob_family(dc.num_classes, dc.dim, dc.spread,
                              derive_seed(seed, {kStreamFamily}));
    train = sample_blobs(*family, dc.samples_per_class, derive_seed(seed, {kStreamTrain}));
    s.test = sample_blobs(*family, dc.test_samples_per_class,
                          derive_seed(seed, {kStreamTest}));
  }

  if (dc.partition == PartitionKind::kDirichlet) {
    s.clients = dirichlet_partition(
        train, PartitionSpec{.num_clients = config.num_clients,
                             .alpha = config.alpha,
                             .seed = derive_seed(seed, {kStreamPartition})});
  } else {
    s.clients = one_class_partition(train, config.num_clients,
                                    derive_seed(seed, {kStreamPartition}));
  }

  const int tau = config.staleness.epochs;
  if (tau > 0 && config.staleness.num_stale_clients > 0) {
    s.stale_ids = select_stale_clients(
        s.clients, StalenessPlan{config.staleness.target_class,
                                 config.staleness.num_stale_clients, tau});
  }
  s.is_stale.assign(s.clients.size(), false);
  for (int id : s.stale_ids) s.is_stale[id] = true;

  for (int id : s.stale_ids) {
    const int c = majority_class(s.clients[id]);
    bool unique = true;
    for (std::size_t j = 0; j < s.clients.size(); ++j) {
      if (!s.is_stale[j] && s.clients[j].class_counts()[c] > 0) unique = false;
    }
    s.truth_unique.push_back(unique);
  }

  std::vector<std::size_t> sizes;
  for (const auto& d : s.clients) sizes.push_back(d.size());
  std::nth_element(sizes.begin(), sizes.begin() + sizes.size() / 2, sizes.end());
  s.median_client_size = std::max<std::size_t>(1, sizes[sizes.size() / 2]);

  if (config.scenario == ScenarioKind::kVariantData) {
    if (!family) {
      throw ConfigError("the variant_data scenario needs data.source = blobs", "scenario");
    }
    const BlobFamily shifted = shifted_family(*family, dc.variant_shift, dc.variant_spread,
                                              derive_seed(seed, {kStreamShift}));
    const Dataset pool_all = sample_blobs(shifted, dc.variant_samples_per_class,
                                          derive_seed(seed, {kStreamPool}));
    for (std::size_t i = 0; i < s.clients.size(); ++i) {
      s.pools.push_back(client_pool(s.clients[i], pool_all,
                                    derive_seed(seed, {kStreamPool, i})));
    }
    // The model is judged on both the original and the drifted distribution.
    s.test = Dataset::concat(
        s.test, sample_blobs(shifted, dc.test_samples_per_class,
                             derive_seed(seed, {kStreamTest, kStreamShift})));
  }

  s.init = ParamVector::random_init(s.arch, derive_seed(seed, {kStreamInit}));
  return s;
}

RunResult run_training(const ExperimentConfig& config, Method method, std::uint64_t seed,
                       const RunHooks& hooks) {
  Scenario sc = build_scenario(config, seed);
  const int tau = method == Method::kUnstaleOracle ? 0 : config.staleness.epochs;
  const bool any_stale = tau > 0 && !sc.stale_ids.empty();
  if (!any_stale) std::fill(sc.is_stale.begin(), sc.is_stale.end(), false);
  const int num_clients = static_cast<int>(sc.clients.size());
  const int target = config.staleness.target_class;
  const bool variant = config.scenario == ScenarioKind::kVariantData &&
                       config.variation_rate > 0.0;
  const bool ours = method == Method::kOurs;

  std::vector<VariationSpec> variation;
  if (variant) {
    for (int i = 0; i < num_clients; ++i) {
      variation.push_back(VariationSpec{config.variation_rate, sc.pools[i],
                                        derive_seed(seed, {kStreamVariation,
                                                           static_cast<std::uint64_t>(i)})});
    }
  }

  std::vector<int> unstale_ids;
  for (int i = 0; i < num_clients; ++i) {
    if (!sc.is_stale[i]) unstale_ids.push_back(i);
  }
  std::map<int, std::size_t> stale_index;  // client id -> position in stale_ids
  for (std::size_t k = 0; k < sc.stale_ids.size(); ++k) stale_index[sc.stale_ids[k]] = k;

  GIConfig gi = config.gi;
  gi.reference_size = sc.median_client_size;
  gi.unroll_steps = config.opt.local_steps;

  RunResult result{.method = method, .seed = seed};
  ParamVector w = sc.init;
  GlobalHistory history(static_cast<std::size_t>(tau) + 8);
  history.push(0, w);
  DelayQueue queue;
  std::map<int, CohortSnapshot> cohorts;
  SwitchController switcher(config.switching);
  AsynTiers tiers;
  std::vector<std::optional<GIResult>> warm(num_clients);
  // (client, estimate epoch) -> (estimated delta, stale delta used then)
  std::map<std::pair<int, int>, std::pair<ParamVector, ParamVector>> pending_est;

  for (int t = 0; t < config.total_epochs; ++t) {
    const auto started = std::chrono::steady_clock::now();
    if (variant) {
      for (int i = 0; i < num_clients; ++i) {
        sc.clients[i] = apply_variation(sc.clients[i], variation[i], t);
      }
    }

    // Delivered stale rounds free their clients before dispatch.
    std::vector<ModelUpdate> arrivals = queue.pop_arrivals(t);

    std::vector<int> dispatch;
    for (int i = 0; i < num_clients; ++i) {
      if (sc.is_stale[i] && config.staleness.cadence == Cadence::kFixed &&
          queue.in_flight(i)) {
        continue;
      }
      dispatch.push_back(i);
    }
    std::vector<std::optional<ModelUpdate>> trained(dispatch.size());
    parallel_for(dispatch.size(), [&](std::size_t k) {
      const int i = dispatch[k];
      const auto cid = static_cast<std::uint64_t>(i);
      const auto ut = static_cast<std::uint64_t>(t);
      const ParamVector* ref = config.opt.kind == OptimizerKind::kFedProx ? &w : nullptr;
      ParamVector trained_w = local_update(w, sc.clients[i], config.opt, ref,
                                           derive_seed(seed, {kStreamShuffle, cid, ut}));
      ModelUpdate u{.client_id = i,
                    .base_epoch = t,
                    .arrival_epoch = sc.is_stale[i] ? t + tau : t,
                    .delta = trained_w - w,
                    .num_samples = sc.clients[i].size()};
      if (config.noise_variance > 0.0) {
        u = add_gaussian_noise(u, config.noise_variance,
                               derive_seed(seed, {kStreamNoise, cid, ut}));
      }
      trained[k] = std::move(u);
    });

    std::vector<ModelUpdate> fresh;
    for (auto& u : trained) {
      if (sc.is_stale[u->client_id]) {
        queue.push(std::move(*u));
      } else {
        fresh.push_back(std::move(*u));
      }
    }
    if (any_stale) {
      CohortSnapshot& cohort = cohorts[t];
      cohort.epoch = t;
      for (const auto& u : fresh) cohort.unstale_deltas.push_back(u.delta);
      while (!cohorts.empty() && cohorts.begin()->first < t - tau) {
        cohorts.erase(cohorts.begin());
      }
    }

    MetricsRecord rec{.epoch = t, .method = method, .seed = seed};
    std::vector<ModelUpdate> stale_contrib;
    std::vector<double> stale_weights;
    long long gi_iters = 0;

    if (ours) {
      // True updates for earlier estimate epochs close the E1/E2 loop.
      double e1_sum = 0.0;
      double e2_sum = 0.0;
      int pairs = 0;
      for (const auto& u : arrivals) {
        auto it = pending_est.find({u.client_id, u.base_epoch});
        if (it == pending_est.end()) continue;
        const double e1 = l1_distance(it->second.first, u.delta);
        const double e2 = l1_distance(it->second.second, u.delta);
        switcher.record_errors(u.base_epoch, e1, e2);
        e1_sum += e1;
        e2_sum += e2;
        ++pairs;
        pending_est.erase(it);
      }
      if (pairs > 0) {
        rec.e1 = e1_sum / pairs;
        rec.e2 = e2_sum / pairs;
      }
      switcher.advance(t);

      std::vector<UniquenessDecision> decisions(arrivals.size());
      for (std::size_t k = 0; k < arrivals.size(); ++k) {
        const auto& u = arrivals[k];
        if (config.detector_enabled) {
          auto c = cohorts.find(u.base_epoch);
          decisions[k] = c == cohorts.end() ? UniquenessDecision{}
                                            : assess_uniqueness(u.delta, c->second);
          result.detector.push_back(DetectorRecord{
              .epoch = t,
              .client_id = u.client_id,
              .mean_dc = decisions[k].mean_distance,
              .threshold = decisions[k].threshold,
              .unique = decisions[k].unique,
              .truth_unique = sc.truth_unique[stale_index.at(u.client_id)]});
        }
      }

      const bool estimating = switcher.mode() != SwitchMode::kVanilla;
      std::vector<std::optional<GIResult>> inverted(arrivals.size());
      std::vector<std::optional<ParamVector>> estimates(arrivals.size());
      if (estimating) {
        parallel_for(arrivals.size(), [&](std::size_t k) {
          if (!decisions[k].unique) return;
          const auto& u = arrivals[k];
          GIConfig g = gi;
          g.seed = derive_seed(seed, {kStreamGi, static_cast<std::uint64_t>(u.client_id),
                                      static_cast<std::uint64_t>(t)});
          const GIResult* warm_start =
              config.gi_warm_start && warm[u.client_id] ? &*warm[u.client_id] : nullptr;
          inverted[k] = invert(u, history.at(u.base_epoch), config.opt, g, warm_start);
          estimates[k] = estimate_unstale(w, inverted[k]->d_rec, config.opt);
        });
      }
      for (std::size_t k = 0; k < arrivals.size(); ++k) {
        const auto& u = arrivals[k];
        ModelUpdate contrib = u;
        if (estimates[k]) {
          gi_iters += inverted[k]->iters_used;
          if (config.gi_dump_d_rec && !hooks.d_rec_dir.empty()) {
            write_d_rec(hooks.d_rec_dir, seed, method, u.client_id, t, inverted[k]->d_rec);
          }
          pending_est.insert_or_assign({u.client_id, t},
                                       std::make_pair(*estimates[k], u.delta));
          contrib.delta = switcher.mode() == SwitchMode::kBlending
                              ? switcher.blended_update(*estimates[k], u.delta)
                              : *estimates[k];
          warm[u.client_id] = std::move(inverted[k]);
        }
        stale_contrib.push_back(std::move(contrib));
        stale_weights.push_back(1.0);
      }
      rec.switch_state = switcher.mode();
      rec.gi_iters = gi_iters;
      result.switching.push_back(SwitchRecord{t, switcher.mode(), switcher.gamma(),
                                              switcher.switch_epoch()});
    } else {
      for (const auto& u : arrivals) {
        ModelUpdate contrib = u;
        double weight = 1.0;
        const auto& w_base = history.at(u.base_epoch);
        switch (method) {
          case Method::kWeighted:
            weight = staleness_weight(u.staleness(), config.weighting);
            break;
          case Method::kFirstOrder: {
            // Deltas point downhill; compensation works on gradient form.
            ParamVector g = u.delta * -1.0;
            contrib.delta = first_order_compensate(g, w, w_base, config.first_order) * -1.0;
            break;
          }
          case Method::kWPred: {
            ParamVector g = u.delta * -1.0;
            contrib.delta = w_pred_compensate(g, history, u.base_epoch, u.staleness(),
                                              config.first_order) *
                            -1.0;
            break;
          }
          default:
            break;
        }
        stale_contrib.push_back(std::move(contrib));
        stale_weights.push_back(weight);
      }
    }

    std::optional<ParamVector> global_delta;
    if (method == Method::kAsynTiers) {
      std::array<std::vector<ModelUpdate>, AsynTiers::kTiers> by_tier{fresh, stale_contrib};
      global_delta = tiers.aggregate(by_tier, {unstale_ids.size(), sc.stale_ids.size()});
    } else {
      std::vector<ModelUpdate> all = fresh;
      std::vector<double> weights(fresh.size(), 1.0);
      for (std::size_t k = 0; k < stale_contrib.size(); ++k) {
        all.push_back(std::move(stale_contrib[k]));
        weights.push_back(stale_weights[k]);
      }
      if (!all.empty()) global_delta = aggregate_fedavg(all, weights);
    }
    if (global_delta) w += *global_delta;

    if (!w.all_finite()) {
      result.aborted = true;
      result.abort_reason = "global weights became non-finite at epoch " + std::to_string(t);
      break;
    }
    history.push(t + 1, w);

    const Evaluation ev = evaluate(w, sc.test);
    rec.overall_acc = ev.overall;
    rec.target_class_acc = ev.per_class[target];
    if (config.record_wallclock) {
      rec.wallclock_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - started)
                             .count();
    }
    result.metrics.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(t, w);
  }
  return result;
}

std::vector<MetricsRecord> run_training(const ExperimentConfig& config) {
  return run_training(config, config.methods.front(), config.seeds.front()).metrics;
}

}  // namespace stalefl
