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

#include "stalefl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "stalefl/errors.hpp"
#include "stalefl/random.hpp"

namespace stalefl {

std::string_view to_string(Activation activation) {
  return activation == Activation::kRelu ? "relu" : "tanh";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kSgd:
      return "sgd";
    case OptimizerKind::kSgdMomentum:
      return "sgd_momentum";
    case OptimizerKind::kFedProx:
      return "fedprox";
  }
  return "sgd";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "sgd_momentum") return OptimizerKind::kSgdMomentum;
  if (name == "fedprox") return OptimizerKind::kFedProx;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// ModelArch

std::size_t ModelArch::num_params() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    total += layer_dims[l] * layer_dims[l + 1] + layer_dims[l + 1];
  }
  return total;
}

std::size_t ModelArch::weight_offset(std::size_t layer) const {
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layer; ++l) {
    offset += layer_dims[l] * layer_dims[l + 1] + layer_dims[l + 1];
  }
  return offset;
}

std::size_t ModelArch::bias_offset(std::size_t layer) const {
  return weight_offset(layer) + layer_dims[layer] * layer_dims[layer + 1];
}

void ModelArch::validate() const {
  if (layer_dims.size() < 2) {
    throw ShapeError("architecture needs at least input and output dims");
  }
  for (std::size_t d : layer_dims) {
    if (d == 0) throw ShapeError("architecture dims must be positive");
  }
}

// ---------------------------------------------------------------------------
// ParamVector

ParamVector::ParamVector(ModelArch arch) : arch_(std::move(arch)) {
  arch_.validate();
  values_.assign(arch_.num_params(), 0.0);
}

ParamVector::ParamVector(ModelArch arch, std::vector<double> values)
    : arch_(std::move(arch)), values_(std::move(values)) {
  arch_.validate();
  if (values_.size() != arch_.num_params()) {
    throw ShapeError("parameter count " + std::to_string(values_.size()) +
                     " does not match architecture (" +
                     std::to_string(arch_.num_params()) + ")");
  }
  if (!all_finite()) throw PreconditionError("parameters must be finite");
}

ParamVector ParamVector::random_init(ModelArch arch, std::uint64_t seed) {
  ParamVector p(std::move(arch));
  Rng rng(seed);
  for (std::size_t l = 0; l < p.arch_.num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.arch_.layer_dims[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto w = p.weights(l);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  }
  return p;
}

Eigen::Map<const Matrix> ParamVector::weights(std::size_t layer) const {
  return {values_.data() + arch_.weight_offset(layer),
          static_cast<Eigen::Index>(arch_.layer_dims[layer]),
          static_cast<Eigen::Index>(arch_.layer_dims[layer + 1])};
}

Eigen::Map<Matrix> ParamVector::weights(std::size_t layer) {
  return {values_.data() + arch_.weight_offset(layer),
          static_cast<Eigen::Index>(arch_.layer_dims[layer]),
          static_cast<Eigen::Index>(arch_.layer_dims[layer + 1])};
}

Eigen::Map<const RowVector> ParamVector::bias(std::size_t layer) const {
  return {values_.data() + arch_.bias_offset(layer),
          static_cast<Eigen::Index>(arch_.layer_dims[layer + 1])};
}

Eigen::Map<RowVector> ParamVector::bias(std::size_t layer) {
  return {values_.data() + arch_.bias_offset(layer),
          static_cast<Eigen::Index>(arch_.layer_dims[layer + 1])};
}

Eigen::Map<const Eigen::VectorXd> ParamVector::vec() const {
  return {values_.data(), static_cast<Eigen::Index>(values_.size())};
}

Eigen::Map<Eigen::VectorXd> ParamVector::vec() {
  return {values_.data(), static_cast<Eigen::Index>(values_.size())};
}

bool ParamVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

bool ParamVector::same_shape(const ParamVector& other) const {
  return arch_ == other.arch_;
}

namespace {

void require_same_length(const ParamVector& a, const ParamVector& b) {
  if (a.size() != b.size()) {
    throw ShapeError("parameter vectors differ in length (" +
                     std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
}

}  // namespace

ParamVector& ParamVector::operator+=(const ParamVector& other) {
  require_same_length(*this, other);
  vec() += other.vec();
  return *this;
}

ParamVector& ParamVector::operator-=(const ParamVector& other) {
  require_same_length(*this, other);
  vec() -= other.vec();
  return *this;
}

ParamVector& ParamVector::operator*=(double s) {
  vec() *= s;
  return *this;
}

// ---------------------------------------------------------------------------
// Dataset

Dataset Dataset::with_hard_labels(Matrix features, std::vector<int> labels,
                                  int num_classes) {
  if (num_classes <= 0) throw PreconditionError("num_classes must be positive");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw ShapeError("feature rows and label count differ");
  }
  Dataset d;
  d.targets_ = Matrix::Zero(features.rows(), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw PreconditionError("label " + std::to_string(labels[i]) +
                              " outside [0, " + std::to_string(num_classes) +
                              ")");
    }
    d.targets_(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  d.features_ = std::move(features);
  d.labels_ = std::move(labels);
  d.num_classes_ = num_classes;
  d.hard_ = true;
  return d;
}

Dataset Dataset::with_soft_labels(Matrix features, Matrix distribution) {
  if (features.rows() != distribution.rows()) {
    throw ShapeError("feature rows and label rows differ");
  }
  if (distribution.cols() <= 0) {
    throw PreconditionError("soft labels need at least one class");
  }
  for (Eigen::Index i = 0; i < distribution.rows(); ++i) {
    if ((distribution.row(i).array() < 0.0).any() ||
        std::abs(distribution.row(i).sum() - 1.0) > 1e-6) {
      throw PreconditionError("soft label row " + std::to_string(i) +
                              " is not a probability distribution");
    }
  }
  Dataset d;
  d.num_classes_ = static_cast<int>(distribution.cols());
  d.features_ = std::move(features);
  d.targets_ = std::move(distribution);
  d.hard_ = false;
  return d;
}

const std::vector<int>& Dataset::labels() const {
  if (!hard_) throw PreconditionError("dataset has soft labels");
  return labels_;
}

std::vector<int> Dataset::argmax_labels() const {
  if (hard_) return labels_;
  std::vector<int> out(size());
  for (std::size_t i = 0; i < size(); ++i) {
    Eigen::Index best = 0;
    targets_.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
    out[i] = static_cast<int>(best);
  }
  return out;
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes_), 0);
  for (int label : argmax_labels()) ++counts[static_cast<std::size_t>(label)];
  return counts;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset d;
  d.num_classes_ = num_classes_;
  d.hard_ = hard_;
  d.features_.resize(static_cast<Eigen::Index>(rows.size()), features_.cols());
  d.targets_.resize(static_cast<Eigen::Index>(rows.size()), targets_.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= size()) throw ShapeError("subset row out of range");
    const auto src = static_cast<Eigen::Index>(rows[i]);
    d.features_.row(static_cast<Eigen::Index>(i)) = features_.row(src);
    d.targets_.row(static_cast<Eigen::Index>(i)) = targets_.row(src);
    if (hard_) d.labels_.push_back(labels_[rows[i]]);
  }
  return d;
}

void Dataset::replace_row(std::size_t row, const Dataset& src,
                          std::size_t src_row) {
  if (src.dim() != dim() || src.num_classes_ != num_classes_ ||
      src.hard_ != hard_) {
    throw ShapeError("replacement row has incompatible shape");
  }
  const auto r = static_cast<Eigen::Index>(row);
  const auto s = static_cast<Eigen::Index>(src_row);
  features_.row(r) = src.features_.row(s);
  targets_.row(r) = src.targets_.row(s);
  if (hard_) labels_[row] = src.labels_[src_row];
}

Dataset Dataset::concat(const Dataset& a, const Dataset& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.dim() != b.dim() || a.num_classes_ != b.num_classes_ ||
      a.hard_ != b.hard_) {
    throw ShapeError("cannot concatenate datasets of different shape");
  }
  Dataset d;
  d.num_classes_ = a.num_classes_;
  d.hard_ = a.hard_;
  d.features_.resize(a.features_.rows() + b.features_.rows(), a.features_.cols());
  d.features_ << a.features_, b.features_;
  d.targets_.resize(a.targets_.rows() + b.targets_.rows(), a.targets_.cols());
  d.targets_ << a.targets_, b.targets_;
  d.labels_ = a.labels_;
  d.labels_.insert(d.labels_.end(), b.labels_.begin(), b.labels_.end());
  return d;
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.num_classes_ == b.num_classes_ && a.hard_ == b.hard_ &&
         a.labels_ == b.labels_ && a.features_.rows() == b.features_.rows() &&
         a.features_.cols() == b.features_.cols() &&
         a.features_ == b.features_ && a.targets_ == b.targets_;
}

// ---------------------------------------------------------------------------
// OptConfig

void OptConfig::validate() const {
  if (!(learning_rate > 0.0)) {
    throw ConfigError("opt.learning_rate must be > 0", "opt.learning_rate");
  }
  if (momentum < 0.0 || momentum >= 1.0) {
    throw ConfigError("opt.momentum must be in [0, 1)", "opt.momentum");
  }
  if (prox_mu < 0.0) {
    throw ConfigError("opt.prox_mu must be >= 0", "opt.prox_mu");
  }
  if (local_steps < 0) {
    throw ConfigError("opt.local_steps must be >= 0", "opt.local_steps");
  }
  if (batch_size && *batch_size <= 0) {
    throw ConfigError("opt.batch_size must be positive", "opt.batch_size");
  }
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

void check_input(const ParamVector& params, const Matrix& features) {
  if (static_cast<std::size_t>(features.cols()) != params.arch().input_dim()) {
    throw ShapeError("feature width " + std::to_string(features.cols()) +
                     " does not match input dim " +
                     std::to_string(params.arch().input_dim()));
  }
}

void activate(Matrix& z, Activation act) {
  if (act == Activation::kRelu) {
    z = z.cwiseMax(0.0);
  } else {
    z = z.array().tanh().matrix();
  }
}

// Row-wise log-softmax.
Matrix log_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const double lse =
        m + std::log((logits.row(i).array() - m).exp().sum());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

void check_data(const ParamVector& params, const Dataset& data) {
  if (data.empty()) throw PreconditionError("dataset is empty");
  check_input(params, data.features());
  if (static_cast<std::size_t>(data.num_classes()) != params.arch().output_dim()) {
    throw ShapeError("dataset classes do not match model output dim");
  }
}

}  // namespace

Matrix forward(const ParamVector& params, const Matrix& features) {
  check_input(params, features);
  const ModelArch& arch = params.arch();
  Matrix a = features;
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    Matrix z = a * params.weights(l);
    z.rowwise() += params.bias(l);
    if (l + 1 < arch.num_layers()) activate(z, arch.activation);
    a = std::move(z);
  }
  return a;
}

double loss(const ParamVector& params, const Dataset& data) {
  check_data(params, data);
  const Matrix logp = log_softmax(forward(params, data.features()));
  return -(data.targets().array() * logp.array()).sum() /
         static_cast<double>(data.size());
}

LossGrad loss_and_grad(const ParamVector& params, const Dataset& data) {
  check_data(params, data);
  const ModelArch& arch = params.arch();
  const std::size_t layers = arch.num_layers();
  const double n = static_cast<double>(data.size());

  std::vector<Matrix> acts;
  acts.reserve(layers + 1);
  acts.push_back(data.features());
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix z = acts.back() * params.weights(l);
    z.rowwise() += params.bias(l);
    if (l + 1 < layers) activate(z, arch.activation);
    acts.push_back(std::move(z));
  }

  const Matrix logp = log_softmax(acts.back());
  const double value =
      -(data.targets().array() * logp.array()).sum() / n;

  ParamVector grad(arch);
  Matrix delta = (logp.array().exp().matrix() - data.targets()) / n;
  for (std::size_t l = layers; l-- > 0;) {
    grad.weights(l).noalias() = acts[l].transpose() * delta;
    grad.bias(l) = delta.colwise().sum();
    if (l == 0) break;
    Matrix back = delta * params.weights(l).transpose();
    if (arch.activation == Activation::kRelu) {
      back.array() *= (acts[l].array() > 0.0).cast<double>();
    } else {
      back.array() *= 1.0 - acts[l].array().square();
    }
    delta = std::move(back);
  }
  return {value, std::move(grad)};
}

ParamVector finite_diff_grad(const ParamVector& params, const Dataset& data,
                             double step) {
  if (!(step > 0.0)) throw PreconditionError("finite-difference step must be > 0");
  ParamVector grad(params.arch());
  ParamVector probe = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + step;
    const double up = loss(probe, data);
    probe[i] = orig - step;
    const double down = loss(probe, data);
    probe[i] = orig;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Optimizers

void optimizer_step(std::span<double> weights, std::span<const double> grad,
                    const OptConfig& opt, OptimizerState& state,
                    std::span<const double> global_ref) {
  if (grad.size() != weights.size()) throw ShapeError("gradient length mismatch");
  const std::size_t n = weights.size();
  switch (opt.kind) {
    case OptimizerKind::kSgd:
      for (std::size_t i = 0; i < n; ++i) weights[i] -= opt.learning_rate * grad[i];
      break;
    case OptimizerKind::kSgdMomentum:
      if (state.velocity.empty()) state.velocity.assign(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        state.velocity[i] = opt.momentum * state.velocity[i] + grad[i];
        weights[i] -= opt.learning_rate * state.velocity[i];
      }
      break;
    case OptimizerKind::kFedProx:
      if (global_ref.size() != n) {
        throw ConfigError("fedprox requires a global reference of matching length");
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double g = grad[i] + opt.prox_mu * (weights[i] - global_ref[i]);
        weights[i] -= opt.learning_rate * g;
      }
      break;
  }
}

std::vector<double> run_local_steps(std::vector<double> weights,
                                    const GradientFn& grad_fn,
                                    const OptConfig& opt,
                                    std::span<const double> global_ref) {
  opt.validate();
  if (opt.kind == OptimizerKind::kFedProx && global_ref.empty()) {
    throw ConfigError("fedprox requires a global reference model");
  }
  OptimizerState state;
  for (int step = 0; step < opt.local_steps; ++step) {
    const std::vector<double> g = grad_fn(weights, step);
    optimizer_step(weights, g, opt, state, global_ref);
  }
  return weights;
}

ParamVector local_update(const ParamVector& base, const Dataset& data,
                         const OptConfig& opt, const ParamVector* global_ref,
                         std::uint64_t shuffle_seed) {
  if (opt.kind == OptimizerKind::kFedProx && global_ref == nullptr) {
    throw ConfigError("fedprox requires a global reference model");
  }
  if (global_ref != nullptr && global_ref->size() != base.size()) {
    throw ShapeError("global reference length mismatch");
  }
  check_data(base, data);

  const std::size_t n = data.size();
  const bool full_batch = !opt.batch_size || static_cast<std::size_t>(*opt.batch_size) >= n;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(shuffle_seed);
  std::size_t cursor = n;  // forces a shuffle before the first minibatch

  ParamVector work = base;
  auto grad_fn = [&](std::span<const double> w, int) {
    std::copy(w.begin(), w.end(), work.values().begin());
    if (full_batch) return loss_and_grad(work, data).grad.data();
    const auto bs = static_cast<std::size_t>(*opt.batch_size);
    std::vector<std::size_t> rows;
    rows.reserve(bs);
    while (rows.size() < bs) {
      if (cursor == n) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      rows.push_back(order[cursor++]);
    }
    return loss_and_grad(work, data.subset(rows)).grad.data();
  };

  std::span<const double> ref;
  if (global_ref != nullptr) ref = global_ref->values();
  // Not routed through the checking constructor: a diverged client must reach
  // the caller, which decides how to abort.
  const std::vector<double> trained = run_local_steps(base.data(), grad_fn, opt, ref);
  ParamVector out(base.arch());
  std::copy(trained.begin(), trained.end(), out.values().begin());
  return out;
}

}  // namespace stalefl
