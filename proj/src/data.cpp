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

#include "stalefl/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "stalefl/errors.hpp"
#include "stalefl/random.hpp"

namespace stalefl {

BlobFamily make_blob_family(int num_classes, int dim, double spread,
                            std::uint64_t seed) {
  if (num_classes <= 0 || dim <= 0) {
    throw PreconditionError("blob family needs positive classes and dim");
  }
  if (spread < 0.0) throw PreconditionError("spread must be >= 0");
  BlobFamily family;
  family.spread = spread;
  family.centers.resize(num_classes, dim);
  Rng rng(derive_seed(seed, {0xb10b}));
  std::uniform_real_distribution<double> unif(0.15, 0.85);
  for (Eigen::Index i = 0; i < family.centers.size(); ++i) {
    family.centers.data()[i] = unif(rng);
  }
  return family;
}

BlobFamily shifted_family(const BlobFamily& base, double shift, double spread,
                          std::uint64_t seed) {
  BlobFamily out = base;
  out.spread = spread;
  Rng rng(derive_seed(seed, {0x5417f7}));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index c = 0; c < out.centers.rows(); ++c) {
    RowVector dir(out.centers.cols());
    for (Eigen::Index j = 0; j < dir.size(); ++j) dir[j] = normal(rng);
    const double norm = dir.norm();
    if (norm > 0.0) dir *= shift / norm;
    out.centers.row(c) = (out.centers.row(c) + dir).cwiseMax(0.0).cwiseMin(1.0);
  }
  return out;
}

Dataset sample_blobs(const BlobFamily& family, int samples_per_class,
                     std::uint64_t seed) {
  if (samples_per_class <= 0) {
    throw PreconditionError("samples_per_class must be positive");
  }
  const int classes = family.num_classes();
  const int dim = family.dim();
  Matrix features(static_cast<Eigen::Index>(classes) * samples_per_class, dim);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(features.rows()));
  Rng rng(derive_seed(seed, {0x5a3b1e}));
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Index row = 0;
  for (int c = 0; c < classes; ++c) {
    for (int s = 0; s < samples_per_class; ++s, ++row) {
      for (int j = 0; j < dim; ++j) {
        const double v = family.centers(c, j) + family.spread * normal(rng);
        features(row, j) = std::clamp(v, 0.0, 1.0);
      }
      labels.push_back(c);
    }
  }
  return Dataset::with_hard_labels(std::move(features), std::move(labels), classes);
}

Dataset make_blobs(int num_classes, int dim, int samples_per_class,
                   double spread, std::uint64_t seed) {
  return sample_blobs(make_blob_family(num_classes, dim, spread, seed),
                      samples_per_class, seed);
}

// ---------------------------------------------------------------------------
// Partitioning

namespace {

std::vector<double> sample_dirichlet(double alpha, int k, Rng& rng) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> p(static_cast<std::size_t>(k));
  // Tiny alphas can underflow every draw to zero; redraw in that case.
  for (int attempt = 0; attempt < 1000; ++attempt) {
    double sum = 0.0;
    for (double& v : p) {
      v = gamma(rng);
      sum += v;
    }
    if (sum > 0.0 && std::isfinite(sum)) {
      for (double& v : p) v /= sum;
      return p;
    }
  }
  // Degenerate limit of alpha -> 0: a single client takes the class.
  std::fill(p.begin(), p.end(), 0.0);
  p[std::uniform_int_distribution<int>(0, k - 1)(rng)] = 1.0;
  return p;
}

std::vector<std::vector<int>> rows_by_class(const Dataset& dataset) {
  std::vector<std::vector<int>> rows(static_cast<std::size_t>(dataset.num_classes()));
  const auto& labels = dataset.labels();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    rows[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));
  }
  return rows;
}

}  // namespace

std::vector<std::vector<std::size_t>> dirichlet_partition_indices(
    const Dataset& dataset, const PartitionSpec& spec) {
  if (!dataset.has_hard_labels()) {
    throw PreconditionError("dirichlet_partition needs hard labels");
  }
  if (spec.num_clients <= 0) {
    throw ConfigError("num_clients must be positive", "num_clients");
  }
  if (!(spec.alpha > 0.0)) throw ConfigError("alpha must be > 0", "alpha");
  if (dataset.size() < static_cast<std::size_t>(spec.num_clients)) {
    throw PartitionError("fewer samples than clients");
  }

  const auto by_class = rows_by_class(dataset);
  const auto k = static_cast<std::size_t>(spec.num_clients);
  Rng rng(derive_seed(spec.seed, {0xd1c41e7}));
  std::vector<std::vector<std::size_t>> parts;

  constexpr int kMaxRetries = 100;
  for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
    parts.assign(k, {});
    for (const auto& class_rows : by_class) {
      std::vector<int> rows = class_rows;
      std::shuffle(rows.begin(), rows.end(), rng);
      const std::vector<double> p = sample_dirichlet(spec.alpha, spec.num_clients, rng);
      // Cut points at round(cumsum(p) * n_c).
      const double n = static_cast<double>(rows.size());
      double cum = 0.0;
      std::size_t start = 0;
      for (std::size_t client = 0; client < k; ++client) {
        cum += p[client];
        std::size_t end = client + 1 == k
                              ? rows.size()
                              : std::min(rows.size(),
                                         static_cast<std::size_t>(std::llround(cum * n)));
        end = std::max(end, start);
        for (std::size_t r = start; r < end; ++r) {
          parts[client].push_back(static_cast<std::size_t>(rows[r]));
        }
        start = end;
      }
    }
    const bool ok = std::none_of(parts.begin(), parts.end(),
                                 [](const auto& p) { return p.empty(); });
    if (ok) break;
    if (attempt == kMaxRetries) {
      if (!spec.repair_fallback) {
        throw PartitionError("could not give every client a sample after " +
                             std::to_string(kMaxRetries) + " resamples");
      }
      for (auto& part : parts) {
        if (!part.empty()) continue;
        auto donor = std::max_element(
            parts.begin(), parts.end(),
            [](const auto& a, const auto& b) { return a.size() < b.size(); });
        part.push_back(donor->back());
        donor->pop_back();
      }
    }
  }
  for (auto& part : parts) std::sort(part.begin(), part.end());
  return parts;
}

std::vector<Dataset> dirichlet_partition(const Dataset& dataset,
                                         const PartitionSpec& spec) {
  std::vector<Dataset> out;
  for (const auto& rows : dirichlet_partition_indices(dataset, spec)) {
    out.push_back(dataset.subset(rows));
  }
  return out;
}

std::vector<Dataset> one_class_partition(const Dataset& dataset, int num_clients,
                                         std::uint64_t seed) {
  if (num_clients <= 0) throw ConfigError("num_clients must be positive", "num_clients");
  const auto by_class = rows_by_class(dataset);
  Rng rng(derive_seed(seed, {0x0c1a55}));
  std::uniform_int_distribution<int> pick(0, dataset.num_classes() - 1);
  std::vector<int> client_class(static_cast<std::size_t>(num_clients));
  for (int& c : client_class) {
    // Only classes that actually have samples.
    do {
      c = pick(rng);
    } while (by_class[static_cast<std::size_t>(c)].empty());
  }
  std::vector<std::vector<std::size_t>> parts(static_cast<std::size_t>(num_clients));
  for (int c = 0; c < dataset.num_classes(); ++c) {
    std::vector<std::size_t> holders;
    for (int i = 0; i < num_clients; ++i) {
      if (client_class[static_cast<std::size_t>(i)] == c) holders.push_back(static_cast<std::size_t>(i));
    }
    if (holders.empty()) continue;
    const auto& rows = by_class[static_cast<std::size_t>(c)];
    if (rows.size() < holders.size()) throw PartitionError("class too small to split");
    for (std::size_t r = 0; r < rows.size(); ++r) {
      parts[holders[r % holders.size()]].push_back(static_cast<std::size_t>(rows[r]));
    }
  }
  std::vector<Dataset> out;
  for (auto& rows : parts) {
    std::sort(rows.begin(), rows.end());
    out.push_back(dataset.subset(rows));
  }
  return out;
}

std::vector<int> select_stale_clients(const std::vector<Dataset>& partitions,
                                      const StalenessPlan& plan) {
  const int num_clients = static_cast<int>(partitions.size());
  if (plan.num_stale_clients > num_clients) {
    throw ConfigError("num_stale_clients exceeds num_clients",
                      "staleness.num_stale_clients");
  }
  if (plan.num_stale_clients < 0) {
    throw ConfigError("num_stale_clients must be >= 0", "staleness.num_stale_clients");
  }
  if (num_clients == 0) return {};
  const int classes = partitions.front().num_classes();
  if (plan.target_class < 0 || plan.target_class >= classes) {
    throw PreconditionError("target_class outside the label space");
  }
  std::vector<std::pair<std::size_t, int>> ranked;  // (count, id)
  for (int i = 0; i < num_clients; ++i) {
    const auto counts = partitions[static_cast<std::size_t>(i)].class_counts();
    ranked.emplace_back(counts[static_cast<std::size_t>(plan.target_class)], i);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first > b.first;
  });
  std::vector<int> chosen;
  for (int i = 0; i < plan.num_stale_clients; ++i) chosen.push_back(ranked[static_cast<std::size_t>(i)].second);
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

// ---------------------------------------------------------------------------
// Variation

long long variation_count(double rate, int epochs) {
  return std::llround(rate * static_cast<double>(epochs));
}

Dataset apply_variation(const Dataset& client_data, const VariationSpec& spec,
                        int epoch) {
  if (spec.rate < 0.0) throw PreconditionError("variation rate must be >= 0");
  const long long begin = variation_count(spec.rate, epoch);
  const long long end = variation_count(spec.rate, epoch + 1);
  if (end <= begin || client_data.empty()) return client_data;
  if (spec.pool.empty()) throw PreconditionError("variation pool is empty");

  const std::size_t n = client_data.size();
  const std::size_t pool_n = spec.pool.size();
  std::vector<std::size_t> perm(n), pool_perm(pool_n);
  std::iota(perm.begin(), perm.end(), 0);
  std::iota(pool_perm.begin(), pool_perm.end(), 0);
  Rng rng(derive_seed(spec.seed, {0x7a41a7, n, pool_n}));
  std::shuffle(perm.begin(), perm.end(), rng);
  std::shuffle(pool_perm.begin(), pool_perm.end(), rng);

  Dataset out = client_data;
  for (long long k = begin; k < end; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    out.replace_row(perm[kk % n], spec.pool, pool_perm[kk % pool_n]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV ingestion

Dataset read_csv_dataset(const std::filesystem::path& path,
                         std::optional<int> num_classes) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 2 || header.back() != "label") {
    throw FormatError(path.string() + ": header must be f0,...,f{d-1},label");
  }
  const std::size_t dim = header.size() - 1;
  for (std::size_t j = 0; j < dim; ++j) {
    if (header[j] != "f" + std::to_string(j)) {
      throw FormatError(path.string() + ": unexpected column '" + header[j] + "'");
    }
  }

  std::vector<double> values;
  std::vector<int> labels;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    try {
      while (std::getline(ss, cell, ',')) {
        if (col < dim) {
          values.push_back(std::clamp(std::stod(cell), 0.0, 1.0));
        } else if (col == dim) {
          labels.push_back(std::stoi(cell));
        }
        ++col;
      }
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": unparsable value '" + cell + "'");
    }
    if (col != dim + 1) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected " + std::to_string(dim + 1) + " columns");
    }
  }
  if (labels.empty()) throw FormatError(path.string() + ": no rows");
  const int classes =
      num_classes.value_or(*std::max_element(labels.begin(), labels.end()) + 1);
  Matrix features(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(dim));
  std::copy(values.begin(), values.end(), features.data());
  return Dataset::with_hard_labels(std::move(features), std::move(labels), classes);
}

}  // namespace stalefl
