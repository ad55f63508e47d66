// Copyright 2026 The vqad Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VQAD_AUTOGRAD_HPP_
#define VQAD_AUTOGRAD_HPP_

// Minimal reverse-mode differentiation over single-sample tensors. A Tape
// records every operation of one forward pass; backward() replays them in
// reverse and accumulates parameter gradients into Param::grad.

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vqad/tensor.hpp"

namespace vqad::ag {

// Trainable tensor with its gradient accumulator and optimizer moments.
struct Param {
  Param() = default;
  Param(std::string name, Tensor value);

  void zero_grad() { grad.fill(0.0f); }

  std::string name;
  Tensor value;
  Tensor grad;
  Tensor m;
  Tensor v;
};

class Tape;

class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }
  const Tensor& value() const;
  const Tensor& grad() const;
  const std::vector<int>& shape() const { return value().shape(); }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Value that never receives a gradient.
  Var constant(Tensor value);
  // Differentiable input whose gradient is readable after backward().
  Var leaf(Tensor value);
  // Parameter leaf; backward() adds its gradient into p.grad.
  Var param(Param& p);

  // Seeds d(scalar)/d(scalar) = 1 and propagates to every leaf.
  void backward(Var scalar);

  // Operation plumbing.
  Var record(Tensor value, bool needs_grad, Backward fn);
  const Tensor& value(int id) const { return nodes_[id].value; }
  Tensor& grad(int id);
  bool has_grad(int id) const { return !nodes_[id].grad.empty(); }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    Backward backward;
    Param* param = nullptr;
  };

  std::vector<Node> nodes_;
};

// Convolution geometry. `taps` restricts the kernel to the listed (ky, kx)
// offsets; weights at other offsets are treated as zero and receive no
// gradient. An empty list means the full kernel.
struct ConvSpec {
  int stride = 1;
  int pad = 0;
  std::vector<std::pair<int, int>> taps;
};

// x: (Cin, H, W); weight: (Cout, Cin, KH, KW); bias: (Cout) or invalid Var.
Var conv2d(Var x, Var weight, Var bias, const ConvSpec& spec);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, float factor);
Var relu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var detach(Var a);
Var upsample2x(Var a);
Var slice_channels(Var a, int begin, int end);

// Rows of a (N, D) table at `indices`, laid out as a (D, H, W) map.
Var gather_rows(Var table, std::span<const int> indices, int height, int width);

// Scalar reductions.
Var sum(Var a);
Var sum_square(Var a);
Var mean_abs(Var a);
Var mean_square(Var a);

// Mean over positions of -log softmax(logits)[target] with logits (N, H, W).
Var cross_entropy(Var logits, std::span<const int> targets);

}  // namespace vqad::ag

#endif  // VQAD_AUTOGRAD_HPP_
