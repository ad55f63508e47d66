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

#ifndef VQAD_LAYERS_HPP_
#define VQAD_LAYERS_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "vqad/autograd.hpp"

namespace vqad::nn {

// Owns every trainable tensor of a model. Layers refer to parameters by
// index so models stay copyable values.
class ParamStore {
 public:
  int add(std::string name, Tensor value);

  ag::Param& operator[](int index) { return params_[index]; }
  const ag::Param& operator[](int index) const { return params_[index]; }
  std::size_t size() const { return params_.size(); }
  std::vector<ag::Param>& params() { return params_; }
  const std::vector<ag::Param>& params() const { return params_; }

  void zero_grad();
  double grad_norm() const;
  std::size_t scalar_count() const;

 private:
  std::vector<ag::Param> params_;
};

// Binds stored parameters onto a tape, either as trainable leaves or as
// frozen constants for inference.
class Binder {
 public:
  Binder(ag::Tape& tape, ParamStore& store) : tape_(tape), mutable_(&store), store_(store) {}
  Binder(ag::Tape& tape, const ParamStore& store) : tape_(tape), store_(store) {}

  ag::Var operator()(int index) const;
  ag::Tape& tape() const { return tape_; }

 private:
  ag::Tape& tape_;
  ParamStore* mutable_ = nullptr;
  const ParamStore& store_;
};

struct Conv2d {
  int weight = -1;
  int bias = -1;
  ag::ConvSpec spec;

  // He-uniform weights over the active fan-in, zero bias.
  static Conv2d create(ParamStore& store, const std::string& name, int in, int out,
                       int kernel, int stride, int pad, std::mt19937_64& rng,
                       std::vector<std::pair<int, int>> taps = {});

  ag::Var operator()(const Binder& bind, ag::Var x) const;
};

// x + conv1x1(relu(conv3x3(relu(x))))
struct ResidualBlock {
  Conv2d inner;
  Conv2d outer;

  static ResidualBlock create(ParamStore& store, const std::string& name, int channels,
                              std::mt19937_64& rng);
  ag::Var operator()(const Binder& bind, ag::Var x) const;
};

struct AdamOptions {
  float learning_rate = 2e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
};

class Adam {
 public:
  explicit Adam(AdamOptions options) : options_(options) {}

  // Applies one update using grad * grad_scale, then clears gradients.
  void step(ParamStore& store, float grad_scale);
  static void reset_moments(ag::Param& p);
  long steps() const { return steps_; }

 private:
  AdamOptions options_;
  long steps_ = 0;
};

// Kernel offsets of a k x k raster-causal mask. Type A excludes the centre.
std::vector<std::pair<int, int>> causal_taps(int kernel, bool include_centre);

}  // namespace vqad::nn

#endif  // VQAD_LAYERS_HPP_
