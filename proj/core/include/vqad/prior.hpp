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

#ifndef VQAD_PRIOR_HPP_
#define VQAD_PRIOR_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "vqad/layers.hpp"
#include "vqad/quantizer.hpp"

namespace vqad {

// Masked-convolution autoregressive model over code grids, factorised in
// raster order: p(Z) = prod_i p(z_i | z_<i).
struct PriorConfig {
  int vocab_size = 1024;
  int height = 14;
  int width = 14;
  int hidden = 128;
  int layers = 6;
  // Kernel of the first (centre-excluding) layer; later layers use 3x3.
  int first_kernel = 7;
  // Test fixture switch: false disables every mask and breaks causality.
  bool masked = true;

  static PriorConfig desk_scale(int vocab_size, int height, int width);
  void validate() const;
};

// Per-position categorical distributions, (cells, n) row-major.
class Conditionals {
 public:
  Conditionals(int vocab_size, int cells)
      : vocab_(vocab_size), probs_(static_cast<std::size_t>(vocab_size) * cells) {}

  int vocab_size() const { return vocab_; }
  int cells() const { return static_cast<int>(probs_.size() / vocab_); }
  std::span<const double> at(int cell) const {
    return {probs_.data() + static_cast<std::size_t>(cell) * vocab_, static_cast<std::size_t>(vocab_)};
  }
  std::span<double> at(int cell) {
    return {probs_.data() + static_cast<std::size_t>(cell) * vocab_, static_cast<std::size_t>(vocab_)};
  }
  int argmax(int cell) const;

 private:
  int vocab_;
  std::vector<double> probs_;
};

class PriorModel {
 public:
  PriorModel() = default;
  PriorModel(const PriorConfig& config, std::uint64_t seed);

  const PriorConfig& config() const { return config_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  // Hash of the codebook whose codes the model was fitted on (0 if unbound).
  std::uint64_t codebook_id() const { return codebook_id_; }
  void set_codebook_id(std::uint64_t id) { codebook_id_ = id; }

  // (n, H, W) logits; position i depends only on codes before i.
  ag::Var logits(const nn::Binder& bind, std::span<const int> codes) const;
  Conditionals conditionals(const CodeGrid& grid) const;

  void check_grid(const CodeGrid& grid) const;

 private:
  struct GatedLayer {
    nn::Conv2d conv;
    nn::Conv2d project;  // unused on the first layer
  };

  PriorConfig config_;
  nn::ParamStore params_;
  std::uint64_t codebook_id_ = 0;
  int embedding_ = -1;
  std::vector<GatedLayer> layers_;
  nn::Conv2d head_hidden_;
  nn::Conv2d head_out_;
};

// Floor applied to probabilities before taking logs.
inline constexpr double kProbabilityFloor = 1e-8;

// log p(z_i = grid_i | grid_<i) per raster position, floored at log(1e-8).
std::vector<double> conditional_log_likelihoods(const PriorModel& model, const CodeGrid& grid);

struct PriorEpochMetrics {
  int epoch = 0;
  double nll = 0.0;
};

struct PriorTrainOptions {
  int epochs = 30;
  int batch_size = 16;
  float learning_rate = 1e-3f;
  std::uint64_t seed = 0;
  std::function<void(const PriorEpochMetrics&)> on_epoch;
};

struct PriorTrainResult {
  PriorModel model;
  std::vector<PriorEpochMetrics> history;
};

// Fits the prior by minimising mean per-position negative log-likelihood.
// The grid shape is taken from the data; config.height/width are ignored.
PriorTrainResult train_prior(std::span<const CodeGrid> grids, PriorConfig config,
                             const PriorTrainOptions& options);

// True iff the conditional at `position` moves by less than 1e-6 under 8
// random rewrites of every later position.
bool causality_probe(const PriorModel& model, const CodeGrid& grid, int position,
                     std::uint64_t seed = 0);

std::string prior_metrics_csv(std::span<const PriorEpochMetrics> history);

void save_prior(const std::filesystem::path& path, const PriorModel& model, int epoch);
PriorModel load_prior(const std::filesystem::path& path, int* epoch = nullptr);

}  // namespace vqad

#endif  // VQAD_PRIOR_HPP_
