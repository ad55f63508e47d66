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

#include "vqad/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "vqad/error.hpp"

namespace vqad {

namespace {

constexpr char kCodebookMagic[] = "LGQ1";

double squared_distance(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = static_cast<double>(a[i]) - b[i];
    acc += diff * diff;
  }
  return acc;
}

void require_finite(const Tensor& t, const char* what) {
  for (float v : t.values()) {
    if (!std::isfinite(v)) throw InputError(std::string(what) + " contains non-finite values");
  }
}

void require_matching_dim(const LatentGrid& latent, const Codebook& codebook) {
  if (latent.dim() != codebook.dim()) {
    throw ContractError("latent dimension " + std::to_string(latent.dim()) +
                        " does not match codebook dimension " + std::to_string(codebook.dim()));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Codebook

Codebook::Codebook(int size, int dim)
    : Codebook(size, dim, std::vector<float>(static_cast<std::size_t>(std::max(size, 0)) *
                                             std::max(dim, 0))) {}

Codebook::Codebook(int size, int dim, std::vector<float> embeddings)
    : size_(size), dim_(dim), embeddings_(std::move(embeddings)) {
  if (size < 1 || dim < 1) throw InputError("codebook needs n >= 1 and d >= 1");
  if (embeddings_.size() != static_cast<std::size_t>(size) * dim) {
    throw ContractError("codebook expects " + std::to_string(size * dim) + " values, got " +
                        std::to_string(embeddings_.size()));
  }
  for (float v : embeddings_)
    if (!std::isfinite(v)) throw InputError("codebook contains non-finite values");
}

Codebook Codebook::uniform_init(int size, int dim, std::uint64_t seed) {
  Codebook cb(size, dim);
  std::mt19937_64 rng(seed);
  const float bound = 1.0f / static_cast<float>(size);
  std::uniform_real_distribution<float> dist(-bound, bound);
  for (auto& v : cb.embeddings_) v = dist(rng);
  return cb;
}

Codebook Codebook::from_tensor(const Tensor& t) {
  if (t.rank() != 2) throw ContractError("codebook tensor must be (n, d)");
  return Codebook(t.dim(0), t.dim(1), t.storage());
}

std::uint64_t Codebook::hash() const {
  io::ByteWriter w;
  serialize(w);
  return io::fnv1a(w.bytes());
}

void Codebook::serialize(io::ByteWriter& out) const {
  out.magic(kCodebookMagic);
  out.u32(static_cast<std::uint32_t>(size_));
  out.u32(static_cast<std::uint32_t>(dim_));
  out.floats(embeddings_);
}

Codebook Codebook::deserialize(io::ByteReader& in) {
  in.expect_magic(kCodebookMagic);
  const auto n = static_cast<int>(in.u32());
  const auto d = static_cast<int>(in.u32());
  if (n < 1 || d < 1) throw IntegrityError(in.context() + ": empty codebook");
  std::vector<float> values(static_cast<std::size_t>(n) * d);
  in.floats(values);
  return Codebook(n, d, std::move(values));
}

void write_codebook(const std::filesystem::path& path, const Codebook& codebook) {
  io::ByteWriter w;
  codebook.serialize(w);
  io::write_file_atomic(path, w.bytes());
}

Codebook read_codebook(const std::filesystem::path& path) {
  io::ByteReader r(io::read_file(path), path.string());
  Codebook cb = Codebook::deserialize(r);
  if (r.remaining() != 0) throw IntegrityError(path.string() + ": trailing bytes after codebook");
  return cb;
}

// ---------------------------------------------------------------------------
// Grids

LatentGrid::LatentGrid(Tensor data) : data_(std::move(data)) {
  if (data_.rank() != 3) throw ContractError("latent grid must be (d, H, W)");
}

std::vector<float> LatentGrid::vector_at(int cell) const {
  std::vector<float> v(dim());
  for (int c = 0; c < dim(); ++c) v[c] = component(cell, c);
  return v;
}

int nearest_embedding(std::span<const float> vector, const Codebook& codebook) {
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int i = 0; i < codebook.size(); ++i) {
    const double dist = squared_distance(vector, codebook.row(i));
    if (dist < best_dist) {
      best_dist = dist;
      best = i;
    }
  }
  return best;
}

QuantizeResult quantize(const LatentGrid& latent, const Codebook& codebook) {
  require_matching_dim(latent, codebook);
  require_finite(latent.tensor(), "latent grid");
  QuantizeResult result{CodeGrid(latent.height(), latent.width(), codebook.hash()),
                        LatentGrid(latent.dim(), latent.height(), latent.width())};
  const int cells = latent.cells();
  std::vector<float> v(latent.dim());
  for (int p = 0; p < cells; ++p) {
    for (int c = 0; c < latent.dim(); ++c) v[c] = latent.component(p, c);
    const int idx = nearest_embedding(v, codebook);
    result.codes.indices[p] = idx;
    auto e = codebook.row(idx);
    for (int c = 0; c < latent.dim(); ++c)
      result.quantized.tensor()[static_cast<std::size_t>(c) * cells + p] = e[c];
  }
  return result;
}

LatentGrid lookup(const CodeGrid& codes, const Codebook& codebook) {
  LatentGrid out(codebook.dim(), codes.height, codes.width);
  const int cells = static_cast<int>(codes.cells());
  for (int p = 0; p < cells; ++p) {
    const int idx = codes.indices[p];
    if (idx < 0 || idx >= codebook.size()) {
      throw InputError("code index " + std::to_string(idx) + " outside codebook of size " +
                       std::to_string(codebook.size()));
    }
    auto e = codebook.row(idx);
    for (int c = 0; c < codebook.dim(); ++c)
      out.tensor()[static_cast<std::size_t>(c) * cells + p] = e[c];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Straight-through and VQ loss

ag::Var straight_through_compose(ag::Var latent, ag::Var quantized) {
  ag::Tape& tape = *latent.tape();
  if (!latent.value().same_shape(quantized.value())) {
    throw ContractError("straight-through: latent " + shape_string(latent.shape()) +
                        " vs quantized " + shape_string(quantized.shape()));
  }
  const int il = latent.id();
  const int self = static_cast<int>(tape.size());
  return tape.record(quantized.value(), tape.needs_grad(il), [=](ag::Tape& t) {
    const Tensor& g = t.grad(self);
    Tensor& d = t.grad(il);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
  });
}

double vq_loss(const LatentGrid& latent, const LatentGrid& quantized, double commitment_weight) {
  if (!latent.tensor().same_shape(quantized.tensor())) {
    throw ContractError("vq_loss: latent and quantized grids differ in shape");
  }
  if (!(commitment_weight >= 0.0)) throw InputError("vq_loss: commitment weight must be >= 0");
  double acc = 0.0;
  const auto& a = latent.tensor();
  const auto& b = quantized.tensor();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = static_cast<double>(a[i]) - b[i];
    acc += diff * diff;
  }
  // Both terms have the same forward value; they differ only in gradient routing.
  return (1.0 + commitment_weight) * acc / latent.cells();
}

ag::Var vq_loss(ag::Var latent, ag::Var quantized, float commitment_weight) {
  if (!(commitment_weight >= 0.0f)) throw InputError("vq_loss: commitment weight must be >= 0");
  if (!latent.value().same_shape(quantized.value()) || latent.value().rank() != 3) {
    throw ContractError("vq_loss: latent and quantized grids differ in shape");
  }
  const float inv_cells =
      1.0f / static_cast<float>(latent.value().dim(1) * latent.value().dim(2));
  ag::Var codebook_term = ag::sum_square(ag::sub(ag::detach(latent), quantized));
  ag::Var commitment_term = ag::sum_square(ag::sub(latent, ag::detach(quantized)));
  return ag::scale(ag::add(codebook_term, ag::scale(commitment_term, commitment_weight)),
                   inv_cells);
}

// ---------------------------------------------------------------------------
// k-means aggregation

KMeansResult kmeans_aggregate(std::span<const float> latents, const Codebook& codebook,
                              int max_iters, std::uint64_t seed) {
  const int d = codebook.dim();
  const int k = codebook.size();
  if (latents.empty()) throw InputError("kmeans_aggregate: empty latent collection");
  if (latents.size() % d != 0) {
    throw ContractError("kmeans_aggregate: latent buffer is not a multiple of d = " +
                        std::to_string(d));
  }
  if (max_iters < 0) throw InputError("kmeans_aggregate: max_iters must be >= 0");
  const std::size_t count = latents.size() / d;
  auto point = [&](std::size_t i) { return latents.subspan(i * d, d); };

  KMeansResult result{codebook, {}, 0, 0};
  Codebook& centroids = result.codebook;
  std::vector<int> assign(count, -1);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, count - 1);

  auto assign_all = [&]() {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      const int best = nearest_embedding(point(i), centroids);
      inertia += squared_distance(point(i), centroids.row(best));
      if (best != assign[i]) {
        assign[i] = best;
        changed = true;
      }
    }
    result.inertia.push_back(inertia);
    return changed;
  };

  assign_all();
  std::vector<double> sums(static_cast<std::size_t>(k) * d);
  std::vector<long> members(k);
  for (int it = 0; it < max_iters; ++it) {
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(members.begin(), members.end(), 0);
    for (std::size_t i = 0; i < count; ++i) {
      const int c = assign[i];
      ++members[c];
      auto p = point(i);
      for (int j = 0; j < d; ++j) sums[static_cast<std::size_t>(c) * d + j] += p[j];
    }
    for (int c = 0; c < k; ++c) {
      auto row = centroids.row(c);
      if (members[c] == 0) {
        auto p = point(pick(rng));
        std::copy(p.begin(), p.end(), row.begin());
        ++result.reseeded;
        continue;
      }
      for (int j = 0; j < d; ++j) {
        row[j] = static_cast<float>(sums[static_cast<std::size_t>(c) * d + j] / members[c]);
      }
    }
    ++result.iterations;
    if (!assign_all()) break;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Gumbel-softmax relaxation

Tensor sample_gumbel_noise(int size, int height, int width, std::mt19937_64& rng) {
  Tensor noise({size, height, width});
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (auto& g : noise.storage()) {
    const double u = std::clamp(uni(rng), 1e-12, 1.0 - 1e-12);
    g = static_cast<float>(-std::log(-std::log(u)));
  }
  return noise;
}

GumbelResult gumbel_quantize(const LatentGrid& latent, const Codebook& codebook,
                             const GumbelOptions& options) {
  if (!(options.temperature > 0.0)) throw InputError("gumbel_quantize: temperature must be > 0");
  require_matching_dim(latent, codebook);
  require_finite(latent.tensor(), "latent grid");
  const int n = codebook.size(), d = codebook.dim(), cells = latent.cells();

  Tensor noise({n, latent.height(), latent.width()});
  if (options.add_noise) {
    std::mt19937_64 rng(options.seed);
    noise = sample_gumbel_noise(n, latent.height(), latent.width(), rng);
  }

  GumbelResult result{CodeGrid(latent.height(), latent.width(), codebook.hash()),
                      LatentGrid(d, latent.height(), latent.width()),
                      std::vector<double>(static_cast<std::size_t>(cells) * n)};
  std::vector<float> v(d);
  std::vector<double> score(n);
  for (int p = 0; p < cells; ++p) {
    for (int c = 0; c < d; ++c) v[c] = latent.component(p, c);
    int best = 0;
    for (int j = 0; j < n; ++j) {
      score[j] = -squared_distance(v, codebook.row(j)) + noise[static_cast<std::size_t>(j) * cells + p];
      if (score[j] > score[best]) best = j;
    }
    const double top = score[best];
    double z = 0.0;
    double* w = result.weights.data() + static_cast<std::size_t>(p) * n;
    for (int j = 0; j < n; ++j) {
      w[j] = std::exp((score[j] - top) / options.temperature);
      z += w[j];
    }
    for (int j = 0; j < n; ++j) w[j] /= z;
    result.codes.indices[p] = best;
    for (int c = 0; c < d; ++c) {
      double value = 0.0;
      if (options.training) {
        for (int j = 0; j < n; ++j) value += w[j] * codebook.row(j)[c];
      } else {
        value = codebook.row(best)[c];
      }
      result.quantized.tensor()[static_cast<std::size_t>(c) * cells + p] =
          static_cast<float>(value);
    }
  }
  return result;
}

ag::Var gumbel_mix(ag::Var latent, ag::Var codebook, const Tensor& noise, float temperature) {
  if (!(temperature > 0.0f)) throw InputError("gumbel_mix: temperature must be > 0");
  ag::Tape& tape = *latent.tape();
  const Tensor& z = latent.value();
  const Tensor& e = codebook.value();
  if (z.rank() != 3 || e.rank() != 2 || z.dim(0) != e.dim(1)) {
    throw ContractError("gumbel_mix: latent " + shape_string(z.shape()) + " vs codebook " +
                        shape_string(e.shape()));
  }
  const int d = z.dim(0), n = e.dim(0);
  const int cells = z.dim(1) * z.dim(2);
  if (noise.shape() != std::vector<int>{n, z.dim(1), z.dim(2)}) {
    throw ContractError("gumbel_mix: noise shape " + shape_string(noise.shape()));
  }

  auto weights = std::make_shared<std::vector<float>>(static_cast<std::size_t>(cells) * n);
  Tensor out({d, z.dim(1), z.dim(2)});
  std::vector<double> score(n);
  for (int p = 0; p < cells; ++p) {
    double top = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      double dist = 0.0;
      for (int c = 0; c < d; ++c) {
        const double diff = static_cast<double>(z[static_cast<std::size_t>(c) * cells + p]) -
                            e[static_cast<std::size_t>(j) * d + c];
        dist += diff * diff;
      }
      score[j] = (-dist + noise[static_cast<std::size_t>(j) * cells + p]) / temperature;
      top = std::max(top, score[j]);
    }
    double total = 0.0;
    for (int j = 0; j < n; ++j) total += (score[j] = std::exp(score[j] - top));
    float* w = weights->data() + static_cast<std::size_t>(p) * n;
    for (int j = 0; j < n; ++j) w[j] = static_cast<float>(score[j] / total);
    for (int c = 0; c < d; ++c) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += w[j] * e[static_cast<std::size_t>(j) * d + c];
      out[static_cast<std::size_t>(c) * cells + p] = static_cast<float>(acc);
    }
  }

  const int iz = latent.id(), ie = codebook.id();
  const int self = static_cast<int>(tape.size());
  return tape.record(std::move(out), tape.needs_grad(iz) || tape.needs_grad(ie),
                     [=](ag::Tape& t) {
    const Tensor& g = t.grad(self);
    const Tensor& zv = t.value(iz);
    const Tensor& ev = t.value(ie);
    Tensor* dz = t.needs_grad(iz) ? &t.grad(iz) : nullptr;
    Tensor* de = t.needs_grad(ie) ? &t.grad(ie) : nullptr;
    std::vector<double> dy(n), ds(n);
    for (int p = 0; p < cells; ++p) {
      const float* w = weights->data() + static_cast<std::size_t>(p) * n;
      double mean = 0.0;
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int c = 0; c < d; ++c)
          acc += static_cast<double>(g[static_cast<std::size_t>(c) * cells + p]) *
                 ev[static_cast<std::size_t>(j) * d + c];
        dy[j] = acc;
        mean += w[j] * acc;
      }
      for (int j = 0; j < n; ++j) ds[j] = w[j] * (dy[j] - mean);
      for (int j = 0; j < n; ++j) {
        const double coef = 2.0 * ds[j] / temperature;
        for (int c = 0; c < d; ++c) {
          const std::size_t zi = static_cast<std::size_t>(c) * cells + p;
          const std::size_t ei = static_cast<std::size_t>(j) * d + c;
          const double diff = static_cast<double>(zv[zi]) - ev[ei];
          if (dz) (*dz)[zi] -= static_cast<float>(coef * diff);
          if (de) (*de)[ei] += static_cast<float>(w[j] * g[zi] + coef * diff);
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Utilization

UtilizationStats utilization_of_indices(std::span<const int> indices, int codebook_size) {
  UtilizationStats stats;
  stats.counts.assign(codebook_size, 0);
  for (int idx : indices) {
    if (idx < 0 || idx >= codebook_size) {
      throw InputError("code index " + std::to_string(idx) + " outside codebook of size " +
                       std::to_string(codebook_size));
    }
    ++stats.counts[idx];
  }
  stats.latent_vectors = static_cast<long>(indices.size());
  stats.dead_count =
      static_cast<int>(std::count(stats.counts.begin(), stats.counts.end(), 0L));
  return stats;
}

UtilizationStats utilization(std::span<const CodeGrid> grids, const Codebook& codebook) {
  const std::uint64_t id = codebook.hash();
  std::vector<int> all;
  for (const auto& g : grids) {
    if (g.codebook_id != id) {
      throw InputError("code grid references codebook " + io::hex64(g.codebook_id) +
                       ", expected " + io::hex64(id));
    }
    all.insert(all.end(), g.indices.begin(), g.indices.end());
  }
  UtilizationStats stats = utilization_of_indices(all, codebook.size());
  stats.sample_size = static_cast<long>(grids.size());
  return stats;
}

}  // namespace vqad
