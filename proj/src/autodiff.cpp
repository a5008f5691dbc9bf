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

#include "stalefl/autodiff.hpp"

#include "stalefl/errors.hpp"

namespace stalefl::ad {

Var Tape::push(Matrix value, bool requires_grad, Backprop backprop) {
  nodes_.push_back(Node{std::move(value), Matrix(), requires_grad,
                        requires_grad ? std::move(backprop) : Backprop()});
  return Var{nodes_.size() - 1};
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, {}); }

Var Tape::variable(Matrix value) { return push(std::move(value), true, {}); }

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[v.id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(std::span<const std::pair<Var, Matrix>> seeds) {
  for (Node& n : nodes_) n.grad.resize(0, 0);
  for (const auto& [v, g] : seeds) {
    if (g.rows() != value(v).rows() || g.cols() != value(v).cols()) {
      throw ShapeError("backward seed shape mismatch");
    }
    accumulate(v, g);
  }
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0 || !n.backprop) continue;
    // The closure only touches parents, which precede i.
    const Matrix g = n.grad;
    n.backprop(*this, g);
  }
}

namespace {

void require_same(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string("shape mismatch in ") + op);
  }
}

}  // namespace

Var Tape::add(Var a, Var b) {
  require_same(value(a), value(b), "add");
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(value(a) + value(b), rg, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var Tape::sub(Var a, Var b) {
  require_same(value(a), value(b), "sub");
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(value(a) - value(b), rg, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.requires_grad(b)) t.accumulate(b, -g);
  });
}

Var Tape::scale(Var a, double s) {
  return push(value(a) * s, requires_grad(a),
              [a, s](Tape& t, const Matrix& g) { t.accumulate(a, g * s); });
}

Var Tape::hadamard(Var a, Var b) {
  require_same(value(a), value(b), "hadamard");
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(value(a).cwiseProduct(value(b)), rg, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
    if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
  });
}

Var Tape::matmul(Var a, Var b) {
  if (value(a).cols() != value(b).rows()) throw ShapeError("shape mismatch in matmul");
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(value(a) * value(b), rg, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.requires_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

Var Tape::matmul_tn(Var a, Var b) {
  if (value(a).rows() != value(b).rows()) throw ShapeError("shape mismatch in matmul_tn");
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(value(a).transpose() * value(b), rg, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, t.value(b) * g.transpose());
    if (t.requires_grad(b)) t.accumulate(b, t.value(a) * g);
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  if (value(a).cols() != value(b).cols()) throw ShapeError("shape mismatch in matmul_nt");
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(value(a) * value(b).transpose(), rg, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * t.value(b));
    if (t.requires_grad(b)) t.accumulate(b, g.transpose() * t.value(a));
  });
}

Var Tape::add_row(Var a, Var row) {
  if (value(row).rows() != 1 || value(row).cols() != value(a).cols()) {
    throw ShapeError("shape mismatch in add_row");
  }
  Matrix out = value(a);
  out.rowwise() += value(row).row(0);
  const bool rg = requires_grad(a) || requires_grad(row);
  return push(std::move(out), rg, [a, row](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.requires_grad(row)) t.accumulate(row, g.colwise().sum());
  });
}

Var Tape::col_sum(Var a) {
  return push(value(a).colwise().sum(), requires_grad(a), [a](Tape& t, const Matrix& g) {
    t.accumulate(a, g.replicate(t.value(a).rows(), 1));
  });
}

Var Tape::relu(Var a) {
  return push(value(a).cwiseMax(0.0), requires_grad(a), [a](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct((t.value(a).array() > 0.0).cast<double>().matrix()));
  });
}

Var Tape::tanh(Var a) {
  Matrix out = value(a).array().tanh().matrix();
  const Var self{nodes_.size()};
  return push(std::move(out), requires_grad(a), [a, self](Tape& t, const Matrix& g) {
    const Matrix& y = t.value(self);
    t.accumulate(a, g.cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

Var Tape::one_minus_square(Var a) {
  return push((1.0 - value(a).array().square()).matrix(), requires_grad(a),
              [a](Tape& t, const Matrix& g) {
                t.accumulate(a, (-2.0 * t.value(a).array() * g.array()).matrix());
              });
}

Var Tape::mask_positive(Var g_in, Var z) {
  require_same(value(g_in), value(z), "mask_positive");
  Matrix out = value(g_in).cwiseProduct((value(z).array() > 0.0).cast<double>().matrix());
  return push(std::move(out), requires_grad(g_in), [g_in, z](Tape& t, const Matrix& g) {
    t.accumulate(g_in, g.cwiseProduct((t.value(z).array() > 0.0).cast<double>().matrix()));
  });
}

Var Tape::softmax_rows(Var a) {
  const Matrix& x = value(a);
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    out.row(i) = (x.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  const Var self{nodes_.size()};
  return push(std::move(out), requires_grad(a), [a, self](Tape& t, const Matrix& g) {
    const Matrix& y = t.value(self);
    const Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
    Matrix ga = g;
    ga.colwise() -= dot;
    t.accumulate(a, ga.cwiseProduct(y));
  });
}

}  // namespace stalefl::ad
