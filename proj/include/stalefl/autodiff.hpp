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

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "stalefl/nn.hpp"

// A small reverse-mode tape over dense matrices. Only the operations needed
// to express an MLP's forward pass, its analytic backward pass, and optimizer
// updates are provided, which is enough to differentiate through unrolled
// local training.
namespace stalefl::ad {

struct Var {
  std::size_t id = 0;
};

class Tape {
 public:
  Var constant(Matrix value);
  Var variable(Matrix value);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  // Gradient from the last backward(); zero when the node was not reached.
  Matrix grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Reverse sweep seeded with d(output)/d(var) for every seed pair.
  void backward(std::span<const std::pair<Var, Matrix>> seeds);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double s);
  Var hadamard(Var a, Var b);
  Var matmul(Var a, Var b);     // a * b
  Var matmul_tn(Var a, Var b);  // a^T * b
  Var matmul_nt(Var a, Var b);  // a * b^T
  Var add_row(Var a, Var row);  // a + 1 * row
  Var col_sum(Var a);           // 1 x cols
  Var relu(Var a);
  Var tanh(Var a);
  Var one_minus_square(Var a);
  // g masked by z > 0; z is treated as piecewise constant.
  Var mask_positive(Var g, Var z);
  Var softmax_rows(Var a);

 private:
  using Backprop = std::function<void(Tape&, const Matrix& out_grad)>;

  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backprop backprop;
  };

  Var push(Matrix value, bool requires_grad, Backprop backprop);
  void accumulate(Var v, const Matrix& g);

  std::vector<Node> nodes_;
};

}  // namespace stalefl::ad
