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

#include <benchmark/benchmark.h>

#include <random>

#include "vqad/autoencoder.hpp"
#include "vqad/evaluation.hpp"
#include "vqad/prior.hpp"
#include "vqad/quantizer.hpp"

namespace {

using namespace vqad;

Tensor uniform(std::vector<int> shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (auto& v : t.storage()) v = u(rng);
  return t;
}

void BM_Quantize(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int d = static_cast<int>(state.range(1));
  const Codebook cb = Codebook::uniform_init(n, d, 0);
  const LatentGrid z(uniform({d, 16, 16}, 1));
  for (auto _ : state) benchmark::DoNotOptimize(quantize(z, cb));
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_Quantize)->Args({64, 16})->Args({1024, 64});

void BM_Encode(benchmark::State& state) {
  const Autoencoder ae(AutoencoderConfig::desk_scale(), 0);
  const Image img(uniform({1, 64, 64}, 2));
  for (auto _ : state) benchmark::DoNotOptimize(ae.encode(img));
}
BENCHMARK(BM_Encode)->Unit(benchmark::kMillisecond);

void BM_Reconstruct(benchmark::State& state) {
  const Autoencoder ae(AutoencoderConfig::desk_scale(), 0);
  const Codebook cb = Codebook::uniform_init(64, 16, 0);
  const Image img(uniform({1, 64, 64}, 3));
  for (auto _ : state) benchmark::DoNotOptimize(ae.decode(quantize(ae.encode(img), cb).quantized));
}
BENCHMARK(BM_Reconstruct)->Unit(benchmark::kMillisecond);

void BM_PriorConditionals(benchmark::State& state) {
  const PriorModel m(PriorConfig::desk_scale(64, 16, 16), 0);
  CodeGrid g(16, 16);
  std::mt19937_64 rng(4);
  for (auto& i : g.indices) i = static_cast<int>(rng() % 64);
  for (auto _ : state) benchmark::DoNotOptimize(m.conditionals(g));
}
BENCHMARK(BM_PriorConditionals)->Unit(benchmark::kMillisecond);

void BM_Auroc(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Tensor s = uniform({n}, 5);
  std::vector<std::uint8_t> y(n);
  for (int i = 0; i < n; ++i) y[i] = i % 10 == 0;
  for (auto _ : state) benchmark::DoNotOptimize(auroc(s.storage(), y));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Auroc)->Arg(1 << 14)->Arg(1 << 18);

}  // namespace

BENCHMARK_MAIN();
