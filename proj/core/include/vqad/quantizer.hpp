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

#ifndef VQAD_QUANTIZER_HPP_
#define VQAD_QUANTIZER_HPP_

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "vqad/autograd.hpp"
#include "vqad/io.hpp"
#include "vqad/tensor.hpp"

namespace vqad {

// n embedding vectors of dimension d, stored row-major (n, d).
class Codebook {
 public:
  Codebook() = default;
  Codebook(int size, int dim);
  Codebook(int size, int dim, std::vector<float> embeddings);

  // Components drawn uniformly from [-1/n, 1/n].
  static Codebook uniform_init(int size, int dim, std::uint64_t seed);
  static Codebook from_tensor(const Tensor& t);

  int size() const { return size_; }
  int dim() const { return dim_; }
  std::span<const float> row(int i) const {
    return {embeddings_.data() + static_cast<std::size_t>(i) * dim_, static_cast<std::size_t>(dim_)};
  }
  std::span<float> row(int i) {
    return {embeddings_.data() + static_cast<std::size_t>(i) * dim_, static_cast<std::size_t>(dim_)};
  }
  const std::vector<float>& embeddings() const { return embeddings_; }
  Tensor as_tensor() const { return Tensor({size_, dim_}, embeddings_); }

  // Content hash over (n, d, values); identifies a codebook across files.
  std::uint64_t hash() const;

  void serialize(io::ByteWriter& out) const;
  static Codebook deserialize(io::ByteReader& in);

 private:
  int size_ = 0;
  int dim_ = 0;
  std::vector<float> embeddings_;
};

// "LGQ1" | u32 n | u32 d | n*d float32, little-endian.
void write_codebook(const std::filesystem::path& path, const Codebook& codebook);
Codebook read_codebook(const std::filesystem::path& path);

// Continuous encoder output: a (d, H', W') channel-major grid.
class LatentGrid {
 public:
  LatentGrid() = default;
  LatentGrid(int dim, int height, int width) : data_({dim, height, width}) {}
  explicit LatentGrid(Tensor data);

  int dim() const { return data_.dim(0); }
  int height() const { return data_.dim(1); }
  int width() const { return data_.dim(2); }
  int cells() const { return height() * width(); }

  float at(int c, int y, int x) const { return data_.at(c, y, x); }
  float& at(int c, int y, int x) { return data_.at(c, y, x); }
  // Component c of the vector at raster cell p.
  float component(int cell, int c) const {
    return data_[static_cast<std::size_t>(c) * cells() + cell];
  }
  std::vector<float> vector_at(int cell) const;

  const Tensor& tensor() const { return data_; }
  Tensor& tensor() { return data_; }

 private:
  Tensor data_;
};

// Codebook indices of one image in raster (row-major) order.
struct CodeGrid {
  int height = 0;
  int width = 0;
  std::vector<int> indices;
  std::uint64_t codebook_id = 0;

  CodeGrid() = default;
  CodeGrid(int h, int w, std::uint64_t id = 0)
      : height(h), width(w), indices(static_cast<std::size_t>(h) * w, 0), codebook_id(id) {}

  std::size_t cells() const { return indices.size(); }
  int& at(int y, int x) { return indices[static_cast<std::size_t>(y) * width + x]; }
  int at(int y, int x) const { return indices[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const CodeGrid&) const = default;
};

struct QuantizeResult {
  CodeGrid codes;
  LatentGrid quantized;
};

// Index of the nearest embedding by Euclidean distance; lowest index on ties.
int nearest_embedding(std::span<const float> vector, const Codebook& codebook);

QuantizeResult quantize(const LatentGrid& latent, const Codebook& codebook);

// (d, H', W') map of embeddings at `codes`.
LatentGrid lookup(const CodeGrid& codes, const Codebook& codebook);

// Forward value is `quantized` exactly; the gradient reaching the output is
// routed unchanged to `latent` and nothing flows into `quantized`.
ag::Var straight_through_compose(ag::Var latent, ag::Var quantized);

// Per latent vector: |sg[z_e] - z_q|^2 + w |sg[z_q] - z_e|^2, averaged over
// cells. The first term trains the codebook, the second the encoder.
double vq_loss(const LatentGrid& latent, const LatentGrid& quantized, double commitment_weight);
ag::Var vq_loss(ag::Var latent, ag::Var quantized, float commitment_weight);

struct KMeansResult {
  Codebook codebook;
  // Total within-cluster squared distance after each assignment step.
  std::vector<double> inertia;
  int iterations = 0;
  int reseeded = 0;
};

// Lloyd iterations with k = n initialised from the current embeddings.
// `latents` holds count * d values. Empty clusters are re-seeded on a
// uniformly drawn latent.
KMeansResult kmeans_aggregate(std::span<const float> latents, const Codebook& codebook,
                              int max_iters, std::uint64_t seed);

struct GumbelOptions {
  double temperature = 1.0;
  std::uint64_t seed = 0;
  bool add_noise = true;
  // Training mode mixes embeddings by the relaxed weights; evaluation mode
  // takes the argmax embedding.
  bool training = true;
};

struct GumbelResult {
  CodeGrid codes;
  LatentGrid quantized;
  // (cells, n) relaxed weights, row-major.
  std::vector<double> weights;
};

GumbelResult gumbel_quantize(const LatentGrid& latent, const Codebook& codebook,
                             const GumbelOptions& options);

// (n, H', W') standard Gumbel samples.
Tensor sample_gumbel_noise(int size, int height, int width, std::mt19937_64& rng);

// Differentiable relaxation: softmax((-|z - e_j|^2 + noise_j) / temperature)
// weighted sum of embeddings, per cell. Gradients reach latent and codebook.
ag::Var gumbel_mix(ag::Var latent, ag::Var codebook, const Tensor& noise, float temperature);

struct UtilizationStats {
  std::vector<long> counts;
  int dead_count = 0;
  // Number of grids inspected; counts sum to sample_size * cells per grid.
  long sample_size = 0;
  long latent_vectors = 0;
};

UtilizationStats utilization(std::span<const CodeGrid> grids, const Codebook& codebook);
// Same statistics over a flat list of indices (no codebook identity check).
UtilizationStats utilization_of_indices(std::span<const int> indices, int codebook_size);

}  // namespace vqad

#endif  // VQAD_QUANTIZER_HPP_
