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
#include <optional>
#include <vector>

#include "stalefl/nn.hpp"
#include "stalefl/update.hpp"

namespace stalefl {

// Positions of the largest-magnitude coordinates of a vector.
struct SparsityMask {
  std::vector<std::size_t> indices;  // ascending
  std::size_t source_len = 0;

  std::size_t size() const { return indices.size(); }
  static SparsityMask all(std::size_t len);
};

// Keeps max(1, round((1 - rate) * len)) coordinates with the largest |value|,
// ties broken by lower index. rate must lie in [0, 1).
SparsityMask top_k_mask(std::span<const double> values, double rate);
SparsityMask top_k_mask(const ParamVector& target_delta, double rate);

// Mean absolute difference over the masked coordinates.
double disparity(const ParamVector& candidate, const ParamVector& target,
                 const SparsityMask& mask);
// Unmasked mean absolute difference.
double l1_distance(const ParamVector& a, const ParamVector& b);

struct GIConfig {
  double d_rec_fraction = 0.5;
  // Server-side estimate of a client's dataset size (median client size).
  std::size_t reference_size = 50;
  int max_iters = 200;
  double inner_lr = 0.05;  // Adam step size on D_rec
  // Stop once disparity <= stop_tol * mean |target| over the mask.
  double stop_tol = 0.1;
  double sparsification_rate = 0.95;
  int unroll_steps = 5;
  std::uint64_t seed = 0;

  std::size_t rec_size() const;
  void validate() const;  // throws ConfigError
};

struct GIResult {
  Dataset d_rec;             // continuous features, soft labels
  Matrix label_logits;       // softmax(label_logits) == d_rec targets
  double initial_disparity = 0.0;
  double final_disparity = 0.0;
  int iters_used = 0;
  bool converged = false;    // stop_tol reached
  int lr_halvings = 0;
  SparsityMask mask;
};

// Disparity between LocalUpdate(base; D_rec) - base and a target delta, as a
// differentiable function of D_rec's features and label logits. The client's
// local program is unrolled with full-batch steps.
class InversionObjective {
 public:
  InversionObjective(ParamVector base, ParamVector target_delta,
                     SparsityMask mask, OptConfig opt);

  struct Evaluation {
    double smooth = 0.0;  // Huber-smoothed masked L1 (the optimized loss)
    double l1 = 0.0;      // plain masked L1
    ParamVector candidate_delta;
    Matrix grad_features;
    Matrix grad_label_logits;
  };

  Evaluation evaluate(const Matrix& features, const Matrix& label_logits,
                      bool with_grad = true) const;

  const SparsityMask& mask() const { return mask_; }
  // Mean |target| over the mask.
  double target_scale() const { return target_scale_; }

  static constexpr double kHuberDelta = 1e-6;

 private:
  ParamVector base_;
  ParamVector target_;
  SparsityMask mask_;
  OptConfig opt_;
  double target_scale_ = 0.0;
};

// Recovers a dataset whose simulated local update from `base_snapshot`
// matches stale.delta on the top-K coordinates. `warm` seeds D_rec with a
// previous result instead of a uniform-random draw.
GIResult invert(const ModelUpdate& stale, const ParamVector& base_snapshot,
                const OptConfig& client_opt, const GIConfig& cfg,
                const GIResult* warm = nullptr);

// Same, starting from an explicit D_rec (label logits = log of its targets).
GIResult invert_from(const ModelUpdate& stale, const ParamVector& base_snapshot,
                     const OptConfig& client_opt, const GIConfig& cfg,
                     const Dataset& init);

// LocalUpdate(w_now; d_rec) - w_now with full-batch steps.
ParamVector estimate_unstale(const ParamVector& w_now, const Dataset& d_rec,
                             const OptConfig& client_opt);

struct RecoveryQuality {
  double mse = 0.0;   // mean best-match MSE
  double psnr = 0.0;  // mean of 10*log10(1/MSE) per matched pair
  double label_recovery_acc = 0.0;
};

RecoveryQuality recovery_quality(const Dataset& d_rec, const Dataset& d_true);

}  // namespace stalefl
