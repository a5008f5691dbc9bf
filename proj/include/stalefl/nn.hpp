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

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace stalefl {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

enum class Activation { kRelu, kTanh };

std::string_view to_string(Activation activation);
Activation parse_activation(std::string_view name);

// Dense MLP shape: layer_dims = {input, hidden..., output}. Hidden layers use
// `activation`; the output layer produces raw logits.
//
// Flat parameter layout, layer by layer: W_l stored row-major as
// (d_in x d_out), followed by the bias b_l (d_out).
struct ModelArch {
  std::vector<std::size_t> layer_dims;
  Activation activation = Activation::kRelu;

  std::size_t num_layers() const { return layer_dims.size() - 1; }
  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
  std::size_t num_params() const;
  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;

  // Throws ShapeError unless there are >= 2 dims, all positive.
  void validate() const;

  friend bool operator==(const ModelArch&, const ModelArch&) = default;
};

// Flat parameter / gradient / update vector tied to an architecture.
class ParamVector {
 public:
  explicit ParamVector(ModelArch arch);
  ParamVector(ModelArch arch, std::vector<double> values);

  // Uniform(-1/sqrt(d_in), 1/sqrt(d_in)) weights, zero biases.
  static ParamVector random_init(ModelArch arch, std::uint64_t seed);

  const ModelArch& arch() const { return arch_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  const std::vector<double>& data() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  Eigen::Map<const Matrix> weights(std::size_t layer) const;
  Eigen::Map<Matrix> weights(std::size_t layer);
  Eigen::Map<const RowVector> bias(std::size_t layer) const;
  Eigen::Map<RowVector> bias(std::size_t layer);
  Eigen::Map<const Eigen::VectorXd> vec() const;
  Eigen::Map<Eigen::VectorXd> vec();

  bool all_finite() const;
  bool same_shape(const ParamVector& other) const;

  ParamVector& operator+=(const ParamVector& other);
  ParamVector& operator-=(const ParamVector& other);
  ParamVector& operator*=(double s);
  friend ParamVector operator+(ParamVector a, const ParamVector& b) {
    return a += b;
  }
  friend ParamVector operator-(ParamVector a, const ParamVector& b) {
    return a -= b;
  }
  friend ParamVector operator*(ParamVector a, double s) { return a *= s; }
  friend ParamVector operator*(double s, ParamVector a) { return a *= s; }
  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  ModelArch arch_;
  std::vector<double> values_;
};

// Features (n x d, entries in [0,1]) plus hard or soft labels. Targets are
// always materialized as an n x C row-stochastic matrix.
class Dataset {
 public:
  Dataset() = default;

  static Dataset with_hard_labels(Matrix features, std::vector<int> labels,
                                  int num_classes);
  // Rows of `distribution` must be nonnegative and sum to 1 within 1e-6.
  static Dataset with_soft_labels(Matrix features, Matrix distribution);

  std::size_t size() const { return static_cast<std::size_t>(features_.rows()); }
  bool empty() const { return size() == 0; }
  std::size_t dim() const { return static_cast<std::size_t>(features_.cols()); }
  int num_classes() const { return num_classes_; }
  bool has_hard_labels() const { return hard_; }

  const Matrix& features() const { return features_; }
  const Matrix& targets() const { return targets_; }
  // Hard labels; throws PreconditionError for soft-labelled data.
  const std::vector<int>& labels() const;
  // argmax of each target row (the hard label when available).
  std::vector<int> argmax_labels() const;
  std::vector<std::size_t> class_counts() const;

  Dataset subset(std::span<const std::size_t> rows) const;
  // Overwrites row `row` with row `src_row` of `src` (same dims/classes).
  void replace_row(std::size_t row, const Dataset& src, std::size_t src_row);

  static Dataset concat(const Dataset& a, const Dataset& b);

  friend bool operator==(const Dataset& a, const Dataset& b);

 private:
  Matrix features_;
  Matrix targets_;
  std::vector<int> labels_;
  int num_classes_ = 0;
  bool hard_ = false;
};

enum class OptimizerKind { kSgd, kSgdMomentum, kFedProx };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

struct OptConfig {
  OptimizerKind kind = OptimizerKind::kSgdMomentum;
  double learning_rate = 0.01;
  double momentum = 0.5;   // kSgdMomentum only
  double prox_mu = 0.0;    // kFedProx only
  int local_steps = 5;
  std::optional<int> batch_size;  // nullopt = full batch

  void validate() const;  // throws ConfigError
};

// n x C logits.
Matrix forward(const ParamVector& params, const Matrix& features);

struct LossGrad {
  double loss;
  ParamVector grad;
};

// Mean softmax cross-entropy against the target distribution, and its exact
// gradient. Throws PreconditionError on empty data, ShapeError on mismatch.
LossGrad loss_and_grad(const ParamVector& params, const Dataset& data);
double loss(const ParamVector& params, const Dataset& data);

// Central-difference gradient of `loss`; test oracle.
ParamVector finite_diff_grad(const ParamVector& params, const Dataset& data,
                             double step);

struct OptimizerState {
  std::vector<double> velocity;
};

// One optimizer step in place. `global_ref` is required for kFedProx.
void optimizer_step(std::span<double> weights, std::span<const double> grad,
                    const OptConfig& opt, OptimizerState& state,
                    std::span<const double> global_ref = {});

using GradientFn =
    std::function<std::vector<double>(std::span<const double> weights, int step)>;

// Runs opt.local_steps optimizer steps of `grad_fn` starting at `weights`.
std::vector<double> run_local_steps(std::vector<double> weights,
                                    const GradientFn& grad_fn,
                                    const OptConfig& opt,
                                    std::span<const double> global_ref = {});

// Client local training: opt.local_steps steps from `base` on `data`.
// Minibatch order is drawn from `shuffle_seed`; `global_ref` is required iff
// opt.kind == kFedProx.
ParamVector local_update(const ParamVector& base, const Dataset& data,
                         const OptConfig& opt,
                         const ParamVector* global_ref = nullptr,
                         std::uint64_t shuffle_seed = 0);

}  // namespace stalefl
