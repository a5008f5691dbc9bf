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
#include <vector>

#include "stalefl/nn.hpp"

namespace stalefl {

// Gaussian class clusters in [0,1]^dim.
struct BlobFamily {
  Matrix centers;  // num_classes x dim
  double spread = 0.1;

  int num_classes() const { return static_cast<int>(centers.rows()); }
  int dim() const { return static_cast<int>(centers.cols()); }
};

// Centers drawn uniformly from [0.15, 0.85]^dim.
BlobFamily make_blob_family(int num_classes, int dim, double spread,
                            std::uint64_t seed);

// A second family over the same classes: every center moved by a random
// direction of length `shift` (clipped to the unit cube), with a new spread.
BlobFamily shifted_family(const BlobFamily& base, double shift, double spread,
                          std::uint64_t seed);

// Class-sorted samples, `samples_per_class` per class, features clipped to
// [0,1].
Dataset sample_blobs(const BlobFamily& family, int samples_per_class,
                     std::uint64_t seed);

Dataset make_blobs(int num_classes, int dim, int samples_per_class,
                   double spread, std::uint64_t seed);

struct PartitionSpec {
  int num_clients = 20;
  double alpha = 0.1;
  std::uint64_t seed = 0;
  // After 100 failed whole-partition resamples, move single samples from the
  // largest client into empty ones instead of failing.
  bool repair_fallback = true;
};

// Per-class Dirichlet(alpha) proportions over clients; disjoint, covering.
std::vector<Dataset> dirichlet_partition(const Dataset& dataset,
                                         const PartitionSpec& spec);

// Row indices behind dirichlet_partition (same draws).
std::vector<std::vector<std::size_t>> dirichlet_partition_indices(
    const Dataset& dataset, const PartitionSpec& spec);

// Every client holds samples of a single randomly drawn class; a class's
// samples are split evenly among the clients that drew it.
std::vector<Dataset> one_class_partition(const Dataset& dataset, int num_clients,
                                         std::uint64_t seed);

struct StalenessPlan {
  int target_class = 0;
  int num_stale_clients = 10;
  int staleness_epochs = 0;
};

// The num_stale_clients clients holding the most target_class samples, ties
// broken by lower client id. Returned in ascending id order.
std::vector<int> select_stale_clients(const std::vector<Dataset>& partitions,
                                      const StalenessPlan& plan);

struct VariationSpec {
  double rate = 0.0;  // samples replaced per epoch
  Dataset pool;
  std::uint64_t seed = 0;
};

// Replacements scheduled for `epoch` (0-based): the k-th replacement overall,
// k in [round(rate*epoch), round(rate*(epoch+1))), overwrites row perm[k % n]
// with pool row pool_perm[k % pool_n]; both permutations come from spec.seed.
Dataset apply_variation(const Dataset& client_data, const VariationSpec& spec,
                        int epoch);

// Total replacements after `epochs` epochs.
long long variation_count(double rate, int epochs);

// CSV with header f0,...,f{d-1},label. Features are clipped to [0,1].
Dataset read_csv_dataset(const std::filesystem::path& path,
                         std::optional<int> num_classes = std::nullopt);

}  // namespace stalefl
