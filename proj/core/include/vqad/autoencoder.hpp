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

#ifndef VQAD_AUTOENCODER_HPP_
#define VQAD_AUTOENCODER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vqad/image.hpp"
#include "vqad/layers.hpp"
#include "vqad/quantizer.hpp"

namespace vqad {

struct AutoencoderConfig {
  // Output width of each encoder stage; the last entry equals latent_dim.
  std::vector<int> channels{32, 64, 128, 64};
  int downsample_factor = 16;
  int latent_dim = 64;
  bool use_residual_blocks = false;
  int codebook_size = 1024;
  int image_channels = 1;

  // 64x64 grayscale inputs, 16x16 codes, n = 64, d = 16.
  static AutoencoderConfig desk_scale();
  void validate() const;
  int stride2_stages() const;
};

// Strided convolutional encoder and mirrored nearest-upsampling decoder.
class Autoencoder {
 public:
  Autoencoder() = default;
  Autoencoder(const AutoencoderConfig& config, std::uint64_t seed);

  const AutoencoderConfig& config() const { return config_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  LatentGrid encode(const Image& image) const;
  // Output clamped to [0, 1].
  Image decode(const LatentGrid& quantized) const;

  ag::Var encode(const nn::Binder& bind, ag::Var image) const;
  ag::Var decode(const nn::Binder& bind, ag::Var quantized) const;

  void check_image(const Image& image) const;

 private:
  struct DecoderStage {
    bool upsample = false;
    nn::Conv2d conv;
  };

  AutoencoderConfig config_;
  nn::ParamStore params_;
  std::vector<nn::Conv2d> encoder_;
  std::vector<nn::ResidualBlock> encoder_blocks_;
  std::vector<nn::ResidualBlock> decoder_blocks_;
  std::vector<DecoderStage> decoder_;
};

enum class ReconstructionNorm { kL1, kL2 };

// Mean over pixels and channels of |x - x_hat| (L1) or (x - x_hat)^2 (L2).
double reconstruction_loss(const Image& x, const Image& x_hat, ReconstructionNorm norm);

enum class QuantizerKind { kDistance, kGumbel, kDistanceKMeans };

std::string to_string(QuantizerKind kind);
QuantizerKind parse_quantizer_kind(const std::string& text);
std::string to_string(ReconstructionNorm norm);
ReconstructionNorm parse_reconstruction_norm(const std::string& text);

struct EpochMetrics {
  int epoch = 0;
  double rec_loss = 0.0;
  double vq_loss = 0.0;
  double total_loss = 0.0;
  // Embeddings selected by no latent vector during the epoch.
  int dead_codes = 0;
};

struct Stage1Options {
  QuantizerKind quantizer = QuantizerKind::kDistanceKMeans;
  int epochs = 40;
  int batch_size = 16;
  float learning_rate = 2e-4f;
  float commitment_weight = 1.0f;
  ReconstructionNorm norm = ReconstructionNorm::kL1;
  int kmeans_iters = 10;
  // Upper bound on latent vectors pooled per epoch for k-means.
  int kmeans_pool_limit = 1 << 18;
  double gumbel_temperature_start = 1.0;
  double gumbel_temperature_end = 0.1;
  std::uint64_t seed = 0;
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct Stage1Result {
  Autoencoder model;
  Codebook codebook;
  std::vector<EpochMetrics> history;
};

// Minimises reconstruction + VQ loss; with kDistanceKMeans the codebook is
// re-positioned by k-means over the epoch's latents at every epoch end.
Stage1Result train_stage1(std::span<const Image> dataset, const AutoencoderConfig& config,
                          const Stage1Options& options);

// decode(quantize(encode(x))).
Image reconstruct(const Autoencoder& model, const Codebook& codebook, const Image& image);
// Mean reconstruction loss of `reconstruct` over a dataset.
double mean_reconstruction_loss(const Autoencoder& model, const Codebook& codebook,
                                std::span<const Image> images, ReconstructionNorm norm);

std::string epoch_metrics_csv(std::span<const EpochMetrics> history);

struct Stage1Checkpoint {
  Autoencoder model;
  Codebook codebook;
  int epoch = 0;
};

void save_stage1(const std::filesystem::path& path, const Autoencoder& model,
                 const Codebook& codebook, int epoch);
Stage1Checkpoint load_stage1(const std::filesystem::path& path);

}  // namespace vqad

#endif  // VQAD_AUTOENCODER_HPP_
