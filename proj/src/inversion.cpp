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

#include "stalefl/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "stalefl/autodiff.hpp"
#include "stalefl/errors.hpp"
#include "stalefl/random.hpp"

namespace stalefl {

// ---------------------------------------------------------------------------
// Masks and disparity

SparsityMask SparsityMask::all(std::size_t len) {
  SparsityMask m;
  m.source_len = len;
  m.indices.resize(len);
  std::iota(m.indices.begin(), m.indices.end(), 0);
  return m;
}

SparsityMask top_k_mask(std::span<const double> values, double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw PreconditionError("sparsification rate must lie in [0, 1)");
  }
  const std::size_t len = values.size();
  if (len == 0) throw PreconditionError("cannot mask an empty vector");
  const auto k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround((1.0 - rate) * static_cast<double>(len))),
      1, len);
  std::vector<std::size_t> order(len);
  std::iota(order.begin(), order.end(), 0);
  auto larger = [&](std::size_t a, std::size_t b) {
    const double ma = std::abs(values[a]);
    const double mb = std::abs(values[b]);
    return ma != mb ? ma > mb : a < b;
  };
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1),
                   order.end(), larger);
  SparsityMask mask;
  mask.source_len = len;
  mask.indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(mask.indices.begin(), mask.indices.end());
  return mask;
}

SparsityMask top_k_mask(const ParamVector& target_delta, double rate) {
  return top_k_mask(target_delta.values(), rate);
}

double disparity(const ParamVector& candidate, const ParamVector& target,
                 const SparsityMask& mask) {
  if (candidate.size() != target.size()) {
    throw ShapeError("disparity operands differ in length");
  }
  if (mask.indices.empty()) throw PreconditionError("disparity over an empty mask");
  if (mask.source_len != target.size()) throw ShapeError("mask built for another length");
  double sum = 0.0;
  for (std::size_t i : mask.indices) sum += std::abs(candidate[i] - target[i]);
  return sum / static_cast<double>(mask.indices.size());
}

double l1_distance(const ParamVector& a, const ParamVector& b) {
  if (a.size() != b.size()) throw ShapeError("l1_distance operands differ in length");
  if (a.size() == 0) return 0.0;
  return (a.vec() - b.vec()).cwiseAbs().mean();
}

// ---------------------------------------------------------------------------
// GIConfig

std::size_t GIConfig::rec_size() const {
  const auto n = static_cast<std::size_t>(
      std::llround(d_rec_fraction * static_cast<double>(reference_size)));
  return std::max<std::size_t>(n, 1);
}

void GIConfig::validate() const {
  if (!(d_rec_fraction > 0.0 && d_rec_fraction <= 1.0)) {
    throw ConfigError("gi.d_rec_fraction must lie in (0, 1]", "gi.d_rec_fraction");
  }
  if (max_iters < 0) throw ConfigError("gi.max_iters must be >= 0", "gi.max_iters");
  if (!(inner_lr > 0.0)) throw ConfigError("gi.inner_lr must be > 0", "gi.inner_lr");
  if (stop_tol < 0.0) throw ConfigError("gi.stop_tol must be >= 0", "gi.stop_tol");
  if (!(sparsification_rate >= 0.0 && sparsification_rate < 1.0)) {
    throw ConfigError("gi.sparsification_rate must lie in [0, 1)",
                      "gi.sparsification_rate");
  }
  if (unroll_steps < 0) throw ConfigError("gi.unroll_steps must be >= 0", "gi.unroll_steps");
}

// ---------------------------------------------------------------------------
// Objective

InversionObjective::InversionObjective(ParamVector base, ParamVector target_delta,
                                       SparsityMask mask, OptConfig opt)
    : base_(std::move(base)),
      target_(std::move(target_delta)),
      mask_(std::move(mask)),
      opt_(std::move(opt)) {
  if (!base_.same_shape(target_)) {
    throw ShapeError("base snapshot and target delta have different shapes");
  }
  if (mask_.indices.empty() || mask_.source_len != target_.size()) {
    throw PreconditionError("mask is empty or built for another length");
  }
  double sum = 0.0;
  for (std::size_t i : mask_.indices) sum += std::abs(target_[i]);
  target_scale_ = sum / static_cast<double>(mask_.indices.size());
}

InversionObjective::Evaluation InversionObjective::evaluate(
    const Matrix& features, const Matrix& label_logits, bool with_grad) const {
  const ModelArch& arch = base_.arch();
  if (static_cast<std::size_t>(features.cols()) != arch.input_dim() ||
      static_cast<std::size_t>(label_logits.cols()) != arch.output_dim() ||
      features.rows() != label_logits.rows() || features.rows() == 0) {
    throw ShapeError("D_rec shape does not match the model");
  }
  const std::size_t layers = arch.num_layers();
  const double inv_n = 1.0 / static_cast<double>(features.rows());

  ad::Tape tape;
  const ad::Var x = with_grad ? tape.variable(features) : tape.constant(features);
  const ad::Var logits_var =
      with_grad ? tape.variable(label_logits) : tape.constant(label_logits);
  const ad::Var targets = tape.softmax_rows(logits_var);

  std::vector<ad::Var> w(layers), b(layers), w0(layers), b0(layers);
  std::vector<ad::Var> vw(layers), vb(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    w0[l] = w[l] = tape.constant(Matrix(base_.weights(l)));
    b0[l] = b[l] = tape.constant(Matrix(base_.bias(l)));
  }

  for (int step = 0; step < opt_.local_steps; ++step) {
    std::vector<ad::Var> acts{x};
    std::vector<ad::Var> pre;
    for (std::size_t l = 0; l < layers; ++l) {
      ad::Var z = tape.add_row(tape.matmul(acts.back(), w[l]), b[l]);
      pre.push_back(z);
      if (l + 1 < layers) {
        acts.push_back(arch.activation == Activation::kRelu ? tape.relu(z) : tape.tanh(z));
      }
    }
    ad::Var g = tape.scale(tape.sub(tape.softmax_rows(pre.back()), targets), inv_n);

    std::vector<ad::Var> gw(layers), gb(layers);
    for (std::size_t l = layers; l-- > 0;) {
      gw[l] = tape.matmul_tn(acts[l], g);
      gb[l] = tape.col_sum(g);
      if (l == 0) break;
      const ad::Var back = tape.matmul_nt(g, w[l]);
      g = arch.activation == Activation::kRelu
              ? tape.mask_positive(back, pre[l - 1])
              : tape.hadamard(back, tape.one_minus_square(acts[l]));
    }

    for (std::size_t l = 0; l < layers; ++l) {
      ad::Var uw = gw[l];
      ad::Var ub = gb[l];
      switch (opt_.kind) {
        case OptimizerKind::kSgd:
          break;
        case OptimizerKind::kSgdMomentum:
          if (step > 0) {
            uw = tape.add(tape.scale(vw[l], opt_.momentum), uw);
            ub = tape.add(tape.scale(vb[l], opt_.momentum), ub);
          }
          vw[l] = uw;
          vb[l] = ub;
          break;
        case OptimizerKind::kFedProx:
          uw = tape.add(uw, tape.scale(tape.sub(w[l], w0[l]), opt_.prox_mu));
          ub = tape.add(ub, tape.scale(tape.sub(b[l], b0[l]), opt_.prox_mu));
          break;
      }
      w[l] = tape.sub(w[l], tape.scale(uw, opt_.learning_rate));
      b[l] = tape.sub(b[l], tape.scale(ub, opt_.learning_rate));
    }
  }

  Evaluation out{0.0, 0.0, ParamVector(arch), Matrix(), Matrix()};
  for (std::size_t l = 0; l < layers; ++l) {
    out.candidate_delta.weights(l) = tape.value(w[l]) - base_.weights(l);
    out.candidate_delta.bias(l) = tape.value(b[l]).row(0) - base_.bias(l);
  }

  const double m = static_cast<double>(mask_.indices.size());
  ParamVector seed(arch);
  for (std::size_t i : mask_.indices) {
    const double r = out.candidate_delta[i] - target_[i];
    const double a = std::abs(r);
    out.l1 += a;
    out.smooth += a > kHuberDelta ? a - 0.5 * kHuberDelta : 0.5 * r * r / kHuberDelta;
    seed[i] = std::clamp(r / kHuberDelta, -1.0, 1.0) / m;
  }
  out.l1 /= m;
  out.smooth /= m;

  if (with_grad) {
    std::vector<std::pair<ad::Var, Matrix>> seeds;
    for (std::size_t l = 0; l < layers; ++l) {
      seeds.emplace_back(w[l], Matrix(seed.weights(l)));
      seeds.emplace_back(b[l], Matrix(seed.bias(l)));
    }
    tape.backward(seeds);
    out.grad_features = tape.grad(x);
    out.grad_label_logits = tape.grad(logits_var);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Inversion

namespace {

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

bool finite(const InversionObjective::Evaluation& e) {
  return std::isfinite(e.l1) && e.grad_features.allFinite() &&
         e.grad_label_logits.allFinite();
}

struct Adam {
  Matrix m, v;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  void reset(const Matrix& like) {
    m = Matrix::Zero(like.rows(), like.cols());
    v = Matrix::Zero(like.rows(), like.cols());
  }
  void step(Matrix& param, const Matrix& grad, double lr, int t) {
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

GIResult run_inversion(const ModelUpdate& stale, const ParamVector& base_snapshot,
                       const OptConfig& client_opt, const GIConfig& cfg,
                       Matrix features, Matrix logits) {
  cfg.validate();
  if (!base_snapshot.same_shape(stale.delta)) {
    throw ShapeError("base snapshot does not match the stale update");
  }
  OptConfig opt = client_opt;
  opt.local_steps = cfg.unroll_steps;
  opt.batch_size.reset();
  opt.validate();

  GIResult result;
  result.mask = top_k_mask(stale.delta, cfg.sparsification_rate);
  const InversionObjective objective(base_snapshot, stale.delta, result.mask, opt);
  const double tolerance = cfg.stop_tol * objective.target_scale();

  auto eval = objective.evaluate(features, logits);
  if (!finite(eval)) throw InversionError("non-finite disparity at the initial D_rec");
  result.initial_disparity = eval.l1;
  double best = eval.l1;
  Matrix best_features = features;
  Matrix best_logits = logits;

  double lr = cfg.inner_lr;
  Adam adam_x, adam_y;
  adam_x.reset(features);
  adam_y.reset(logits);
  int adam_t = 0;
  int iter = 0;
  bool converged = eval.l1 <= tolerance;

  while (!converged && iter < cfg.max_iters) {
    ++iter;
    ++adam_t;
    adam_x.step(features, eval.grad_features, lr, adam_t);
    adam_y.step(logits, eval.grad_label_logits, lr, adam_t);
    features = features.cwiseMax(0.0).cwiseMin(1.0);

    eval = objective.evaluate(features, logits);
    if (!finite(eval)) {
      if (result.lr_halvings == 3) {
        throw InversionError("non-finite values in gradient inversion for client " +
                             std::to_string(stale.client_id) + " at epoch " +
                             std::to_string(stale.arrival_epoch) + " after " +
                             std::to_string(iter) + " iterations; inner_lr=" +
                             std::to_string(lr));
      }
      ++result.lr_halvings;
      lr *= 0.5;
      features = best_features;
      logits = best_logits;
      adam_x.reset(features);
      adam_y.reset(logits);
      adam_t = 0;
      eval = objective.evaluate(features, logits);
      continue;
    }
    if (eval.l1 < best) {
      best = eval.l1;
      best_features = features;
      best_logits = logits;
    }
    converged = eval.l1 <= tolerance;
  }

  result.iters_used = iter;
  result.converged = converged;
  result.final_disparity = best;
  result.d_rec = Dataset::with_soft_labels(best_features, softmax_rows(best_logits));
  result.label_logits = std::move(best_logits);
  return result;
}

}  // namespace

GIResult invert(const ModelUpdate& stale, const ParamVector& base_snapshot,
                const OptConfig& client_opt, const GIConfig& cfg,
                const GIResult* warm) {
  const ModelArch& arch = base_snapshot.arch();
  if (warm != nullptr) {
    if (warm->d_rec.dim() != arch.input_dim() ||
        static_cast<std::size_t>(warm->label_logits.cols()) != arch.output_dim()) {
      throw ShapeError("warm-start D_rec does not match the model");
    }
    return run_inversion(stale, base_snapshot, client_opt, cfg,
                         warm->d_rec.features(), warm->label_logits);
  }
  const auto n = static_cast<Eigen::Index>(cfg.rec_size());
  Matrix features(n, static_cast<Eigen::Index>(arch.input_dim()));
  Rng rng(derive_seed(cfg.seed, {0x61e7}));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Eigen::Index i = 0; i < features.size(); ++i) features.data()[i] = unif(rng);
  Matrix logits = Matrix::Zero(n, static_cast<Eigen::Index>(arch.output_dim()));
  return run_inversion(stale, base_snapshot, client_opt, cfg, std::move(features),
                       std::move(logits));
}

GIResult invert_from(const ModelUpdate& stale, const ParamVector& base_snapshot,
                     const OptConfig& client_opt, const GIConfig& cfg,
                     const Dataset& init) {
  if (init.empty()) throw PreconditionError("initial D_rec is empty");
  Matrix logits = init.targets().cwiseMax(1e-12).array().log().matrix();
  return run_inversion(stale, base_snapshot, client_opt, cfg, init.features(),
                       std::move(logits));
}

ParamVector estimate_unstale(const ParamVector& w_now, const Dataset& d_rec,
                             const OptConfig& client_opt) {
  OptConfig opt = client_opt;
  opt.batch_size.reset();
  if (opt.local_steps == 0) return ParamVector(w_now.arch());
  return local_update(w_now, d_rec, opt, &w_now) - w_now;
}

RecoveryQuality recovery_quality(const Dataset& d_rec, const Dataset& d_true) {
  if (d_rec.dim() != d_true.dim()) throw ShapeError("feature dims differ");
  if (d_rec.empty() || d_true.empty()) throw PreconditionError("empty dataset");
  RecoveryQuality q;
  const double dim = static_cast<double>(d_rec.dim());
  for (Eigen::Index i = 0; i < d_rec.features().rows(); ++i) {
    const double best =
        (d_true.features().rowwise() - d_rec.features().row(i)).rowwise().squaredNorm().minCoeff() /
        dim;
    q.mse += best;
    q.psnr += best > 0.0 ? 10.0 * std::log10(1.0 / best)
                         : std::numeric_limits<double>::infinity();
  }
  const double n = static_cast<double>(d_rec.size());
  q.mse /= n;
  q.psnr /= n;

  const auto rec_counts = d_rec.class_counts();
  const auto true_counts = d_true.class_counts();
  const double nt = static_cast<double>(d_true.size());
  const std::size_t classes = std::min(rec_counts.size(), true_counts.size());
  for (std::size_t c = 0; c < classes; ++c) {
    q.label_recovery_acc += std::min(static_cast<double>(rec_counts[c]) / n,
                                     static_cast<double>(true_counts[c]) / nt);
  }
  return q;
}

}  // namespace stalefl
