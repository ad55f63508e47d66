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

#include "vqad/layers.hpp"

#include <cmath>

#include "vqad/error.hpp"

namespace vqad::nn {

int ParamStore::add(std::string name, Tensor value) {
  params_.emplace_back(std::move(name), std::move(value));
  return static_cast<int>(params_.size()) - 1;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double ParamStore::grad_norm() const {
  double acc = 0.0;
  for (const auto& p : params_)
    for (float g : p.grad.values()) acc += static_cast<double>(g) * g;
  return std::sqrt(acc);
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

ag::Var Binder::operator()(int index) const {
  if (index < 0) return {};
  if (mutable_ != nullptr) return tape_.param((*mutable_)[index]);
  return tape_.constant(store_[index].value);
}

Conv2d Conv2d::create(ParamStore& store, const std::string& name, int in, int out,
                      int kernel, int stride, int pad, std::mt19937_64& rng,
                      std::vector<std::pair<int, int>> taps) {
  Conv2d conv;
  conv.spec.stride = stride;
  conv.spec.pad = pad;
  conv.spec.taps = std::move(taps);
  const int active = conv.spec.taps.empty() ? kernel * kernel
                                            : static_cast<int>(conv.spec.taps.size());
  const float bound = std::sqrt(6.0f / static_cast<float>(in * active));
  std::uniform_real_distribution<float> dist(-bound, bound);
  Tensor w({out, in, kernel, kernel});
  for (auto& x : w.storage()) x = dist(rng);
  if (!conv.spec.taps.empty()) {
    // Zero the masked offsets so checkpoints show the effective kernel.
    std::vector<char> keep(kernel * kernel, 0);
    for (auto [ky, kx] : conv.spec.taps) keep[ky * kernel + kx] = 1;
    for (std::size_t i = 0; i < w.size(); ++i)
      if (!keep[i % (kernel * kernel)]) w[i] = 0.0f;
  }
  conv.weight = store.add(name + ".weight", std::move(w));
  conv.bias = store.add(name + ".bias", Tensor({out}));
  return conv;
}

ag::Var Conv2d::operator()(const Binder& bind, ag::Var x) const {
  return ag::conv2d(x, bind(weight), bind(bias), spec);
}

ResidualBlock ResidualBlock::create(ParamStore& store, const std::string& name,
                                    int channels, std::mt19937_64& rng) {
  ResidualBlock block;
  block.inner = Conv2d::create(store, name + ".inner", channels, channels, 3, 1, 1, rng);
  block.outer = Conv2d::create(store, name + ".outer", channels, channels, 1, 1, 0, rng);
  return block;
}

ag::Var ResidualBlock::operator()(const Binder& bind, ag::Var x) const {
  ag::Var h = inner(bind, ag::relu(x));
  h = outer(bind, ag::relu(h));
  return ag::add(x, h);
}

void Adam::step(ParamStore& store, float grad_scale) {
  ++steps_;
  const float b1 = options_.beta1, b2 = options_.beta2;
  const float c1 = 1.0f - static_cast<float>(std::pow(b1, steps_));
  const float c2 = 1.0f - static_cast<float>(std::pow(b2, steps_));
  const float lr = options_.learning_rate;
  for (auto& p : store.params()) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const float g = p.grad[i] * grad_scale;
      p.m[i] = b1 * p.m[i] + (1.0f - b1) * g;
      p.v[i] = b2 * p.v[i] + (1.0f - b2) * g * g;
      const float mhat = p.m[i] / c1;
      const float vhat = p.v[i] / c2;
      p.value[i] -= lr * mhat / (std::sqrt(vhat) + options_.epsilon);
    }
    p.zero_grad();
  }
}

void Adam::reset_moments(ag::Param& p) {
  p.m.fill(0.0f);
  p.v.fill(0.0f);
}

std::vector<std::pair<int, int>> causal_taps(int kernel, bool include_centre) {
  if (kernel < 1 || kernel % 2 == 0) throw InputError("causal kernel must be odd");
  const int c = kernel / 2;
  std::vector<std::pair<int, int>> taps;
  for (int ky = 0; ky < kernel; ++ky)
    for (int kx = 0; kx < kernel; ++kx)
      if (ky < c || (ky == c && (kx < c || (include_centre && kx == c))))
        taps.emplace_back(ky, kx);
  return taps;
}

}  // namespace vqad::nn
