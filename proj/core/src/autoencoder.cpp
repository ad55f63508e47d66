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

#include "vqad/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "parallel.hpp"
#include "vqad/error.hpp"
#include "vqad/io.hpp"

namespace vqad {

namespace {

constexpr char kStage1Magic[] = "LGA1";
constexpr std::uint32_t kStage1Version = 1;

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

nlohmann::json config_to_json(const AutoencoderConfig& c) {
  return {{"channels", c.channels},
          {"downsample_factor", c.downsample_factor},
          {"latent_dim", c.latent_dim},
          {"use_residual_blocks", c.use_residual_blocks},
          {"codebook_size", c.codebook_size},
          {"image_channels", c.image_channels}};
}

AutoencoderConfig config_from_json(const nlohmann::json& j) {
  AutoencoderConfig c;
  c.channels = j.at("channels").get<std::vector<int>>();
  c.downsample_factor = j.at("downsample_factor").get<int>();
  c.latent_dim = j.at("latent_dim").get<int>();
  c.use_residual_blocks = j.at("use_residual_blocks").get<bool>();
  c.codebook_size = j.at("codebook_size").get<int>();
  c.image_channels = j.at("image_channels").get<int>();
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

AutoencoderConfig AutoencoderConfig::desk_scale() {
  AutoencoderConfig c;
  c.channels = {16, 32, 32, 16};
  c.downsample_factor = 4;
  c.latent_dim = 16;
  c.codebook_size = 64;
  c.image_channels = 1;
  return c;
}

int AutoencoderConfig::stride2_stages() const {
  int s = 0;
  for (int f = downsample_factor; f > 1; f >>= 1) ++s;
  return s;
}

void AutoencoderConfig::validate() const {
  if (channels.empty()) throw InputError("autoencoder needs at least one stage");
  for (int c : channels)
    if (c < 1) throw InputError("stage widths must be positive");
  if (downsample_factor < 2 || !is_power_of_two(downsample_factor)) {
    throw InputError("downsample_factor must be a power of two >= 2, got " +
                     std::to_string(downsample_factor));
  }
  if (stride2_stages() > static_cast<int>(channels.size())) {
    throw InputError("downsample_factor " + std::to_string(downsample_factor) + " needs " +
                     std::to_string(stride2_stages()) + " stages, only " +
                     std::to_string(channels.size()) + " configured");
  }
  if (channels.back() != latent_dim) {
    throw InputError("last stage width " + std::to_string(channels.back()) +
                     " must equal latent_dim " + std::to_string(latent_dim));
  }
  if (codebook_size < 1) throw InputError("codebook_size must be >= 1");
  if (image_channels != 1 && image_channels != 3) throw InputError("image_channels must be 1 or 3");
}

// ---------------------------------------------------------------------------
// Model

Autoencoder::Autoencoder(const AutoencoderConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const int stages = static_cast<int>(config_.channels.size());
  const int strided = config_.stride2_stages();

  int in = config_.image_channels;
  for (int i = 0; i < stages; ++i) {
    const int out = config_.channels[i];
    const std::string name = "encoder." + std::to_string(i);
    if (i == stages - 1 && config_.use_residual_blocks) {
      for (int b = 0; b < 2; ++b) {
        encoder_blocks_.push_back(nn::ResidualBlock::create(
            params_, "encoder.res" + std::to_string(b), in, rng));
      }
    }
    if (i < strided) {
      encoder_.push_back(nn::Conv2d::create(params_, name, in, out, 4, 2, 1, rng));
    } else if (i == stages - 1) {
      encoder_.push_back(nn::Conv2d::create(params_, name, in, out, 1, 1, 0, rng));
    } else {
      encoder_.push_back(nn::Conv2d::create(params_, name, in, out, 3, 1, 1, rng));
    }
    in = out;
  }

  for (int i = stages - 1; i >= 0; --i) {
    const int from = config_.channels[i];
    const int to = i == 0 ? config_.image_channels : config_.channels[i - 1];
    const std::string name = "decoder." + std::to_string(stages - 1 - i);
    DecoderStage stage;
    if (i < strided) {
      stage.upsample = true;
      stage.conv = nn::Conv2d::create(params_, name, from, to, 3, 1, 1, rng);
    } else if (i == stages - 1) {
      stage.conv = nn::Conv2d::create(params_, name, from, to, 1, 1, 0, rng);
    } else {
      stage.conv = nn::Conv2d::create(params_, name, from, to, 3, 1, 1, rng);
    }
    decoder_.push_back(stage);
    if (i == stages - 1 && config_.use_residual_blocks && i > 0) {
      for (int b = 0; b < 2; ++b) {
        decoder_blocks_.push_back(nn::ResidualBlock::create(
            params_, "decoder.res" + std::to_string(b), to, rng));
      }
    }
  }
}

void Autoencoder::check_image(const Image& image) const {
  if (image.channels() != config_.image_channels) {
    throw InputError("image has " + std::to_string(image.channels()) + " channels, model expects " +
                     std::to_string(config_.image_channels));
  }
  const int f = config_.downsample_factor;
  if (image.height() % f != 0 || image.width() % f != 0) {
    throw InputError("image size " + std::to_string(image.height()) + "x" +
                     std::to_string(image.width()) + " is not divisible by the downsampling factor " +
                     std::to_string(f));
  }
  for (float v : image.tensor().values())
    if (!std::isfinite(v)) throw InputError("image contains non-finite values");
}

ag::Var Autoencoder::encode(const nn::Binder& bind, ag::Var x) const {
  const int stages = static_cast<int>(encoder_.size());
  for (int i = 0; i < stages; ++i) {
    if (i == stages - 1)
      for (const auto& block : encoder_blocks_) x = block(bind, x);
    x = encoder_[i](bind, x);
    if (i + 1 < stages) x = ag::relu(x);
  }
  return x;
}

ag::Var Autoencoder::decode(const nn::Binder& bind, ag::Var z) const {
  const int stages = static_cast<int>(decoder_.size());
  for (int i = 0; i < stages; ++i) {
    if (decoder_[i].upsample) z = ag::upsample2x(z);
    z = decoder_[i].conv(bind, z);
    if (i + 1 < stages) {
      z = ag::relu(z);
      if (i == 0)
        for (const auto& block : decoder_blocks_) z = block(bind, z);
    }
  }
  return ag::sigmoid(z);
}

LatentGrid Autoencoder::encode(const Image& image) const {
  check_image(image);
  ag::Tape tape;
  nn::Binder bind(tape, params_);
  return LatentGrid(encode(bind, tape.constant(image.tensor())).value());
}

Image Autoencoder::decode(const LatentGrid& quantized) const {
  if (quantized.dim() != config_.latent_dim) {
    throw ContractError("decoder expects latent dimension " + std::to_string(config_.latent_dim) +
                        ", got " + std::to_string(quantized.dim()));
  }
  ag::Tape tape;
  nn::Binder bind(tape, params_);
  return clamp_unit(decode(bind, tape.constant(quantized.tensor())).value());
}

// ---------------------------------------------------------------------------
// Losses

double reconstruction_loss(const Image& x, const Image& x_hat, ReconstructionNorm norm) {
  if (!x.same_shape(x_hat)) {
    throw InputError("reconstruction_loss: image shapes " + shape_string(x.tensor().shape()) +
                     " and " + shape_string(x_hat.tensor().shape()) + " differ");
  }
  if (x.size() == 0) return 0.0;
  double acc = 0.0;
  const auto a = x.tensor().values();
  const auto b = x_hat.tensor().values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = static_cast<double>(a[i]) - b[i];
    acc += norm == ReconstructionNorm::kL1 ? std::fabs(diff) : diff * diff;
  }
  return acc / static_cast<double>(a.size());
}

std::string to_string(QuantizerKind kind) {
  switch (kind) {
    case QuantizerKind::kDistance:
      return "distance";
    case QuantizerKind::kGumbel:
      return "gumbel";
    case QuantizerKind::kDistanceKMeans:
      return "distance+kmeans";
  }
  return "?";
}

QuantizerKind parse_quantizer_kind(const std::string& text) {
  if (text == "distance") return QuantizerKind::kDistance;
  if (text == "gumbel") return QuantizerKind::kGumbel;
  if (text == "distance+kmeans" || text == "kmeans") return QuantizerKind::kDistanceKMeans;
  throw InputError("unknown quantizer kind '" + text +
                   "' (expected distance, gumbel or distance+kmeans)");
}

std::string to_string(ReconstructionNorm norm) {
  return norm == ReconstructionNorm::kL1 ? "l1" : "l2";
}

ReconstructionNorm parse_reconstruction_norm(const std::string& text) {
  if (text == "l1" || text == "L1") return ReconstructionNorm::kL1;
  if (text == "l2" || text == "L2") return ReconstructionNorm::kL2;
  throw InputError("unknown reconstruction norm '" + text + "' (expected l1 or l2)");
}

// ---------------------------------------------------------------------------
// Training

Stage1Result train_stage1(std::span<const Image> dataset, const AutoencoderConfig& config,
                          const Stage1Options& options) {
  if (dataset.empty()) throw InputError("train_stage1: empty dataset");
  if (options.epochs < 0 || options.batch_size < 1) {
    throw InputError("train_stage1: epochs must be >= 0 and batch_size >= 1");
  }
  config.validate();

  Stage1Result result{Autoencoder(config, options.seed), Codebook(), {}};
  Autoencoder& model = result.model;
  for (const auto& image : dataset) model.check_image(image);

  nn::ParamStore codebook_store;
  const int codebook_param = codebook_store.add(
      "codebook",
      Codebook::uniform_init(config.codebook_size, config.latent_dim, options.seed + 1).as_tensor());
  nn::Adam model_opt({options.learning_rate});
  nn::Adam codebook_opt({options.learning_rate});

  std::mt19937_64 order_rng(options.seed ^ 0x5851f42d4c957f2dull);
  std::mt19937_64 noise_rng(options.seed ^ 0x14057b7ef767814full);
  std::mt19937_64 pool_rng(options.seed ^ 0x2545f4914f6cdd1dull);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  const int n = config.codebook_size;
  const int d = config.latent_dim;
  const bool use_kmeans = options.quantizer == QuantizerKind::kDistanceKMeans;
  const bool use_gumbel = options.quantizer == QuantizerKind::kGumbel;

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    const double temperature =
        options.epochs > 1
            ? options.gumbel_temperature_start +
                  (options.gumbel_temperature_end - options.gumbel_temperature_start) *
                      (epoch - 1) / (options.epochs - 1)
            : options.gumbel_temperature_start;

    std::vector<float> pool;
    long pool_seen = 0;
    std::vector<long> usage(n, 0);
    double rec_sum = 0.0, vq_sum = 0.0;

    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      const Codebook codebook = Codebook::from_tensor(codebook_store[codebook_param].value);
      for (std::size_t k = start; k < end; ++k) {
        const Image& image = dataset[order[k]];
        ag::Tape tape;
        nn::Binder model_bind(tape, model.params());
        nn::Binder codebook_bind(tape, codebook_store);
        ag::Var x = tape.constant(image.tensor());
        ag::Var ze = model.encode(model_bind, x);
        ag::Var table = codebook_bind(codebook_param);
        const int h = ze.value().dim(1), w = ze.value().dim(2), cells = h * w;

        std::vector<int> codes(cells);
        ag::Var decoder_input;
        ag::Var vq;
        if (use_gumbel) {
          Tensor noise = sample_gumbel_noise(n, h, w, noise_rng);
          decoder_input = gumbel_mix(ze, table, noise, static_cast<float>(temperature));
          const Tensor& zv = ze.value();
          std::vector<float> v(d);
          for (int p = 0; p < cells; ++p) {
            for (int c = 0; c < d; ++c) v[c] = zv[static_cast<std::size_t>(c) * cells + p];
            codes[p] = nearest_embedding(v, codebook);
          }
        } else {
          const Tensor& zv = ze.value();
          std::vector<float> v(d);
          for (int p = 0; p < cells; ++p) {
            for (int c = 0; c < d; ++c) v[c] = zv[static_cast<std::size_t>(c) * cells + p];
            codes[p] = nearest_embedding(v, codebook);
          }
          ag::Var zq = ag::gather_rows(table, codes, h, w);
          decoder_input = straight_through_compose(ze, zq);
          vq = vq_loss(ze, zq, options.commitment_weight);
        }

        ag::Var x_hat = model.decode(model_bind, decoder_input);
        ag::Var diff = ag::sub(x_hat, x);
        ag::Var rec = options.norm == ReconstructionNorm::kL1 ? ag::mean_abs(diff)
                                                              : ag::mean_square(diff);
        ag::Var total = vq.valid() ? ag::add(rec, vq) : rec;
        tape.backward(total);

        rec_sum += rec.value()[0];
        if (vq.valid()) vq_sum += vq.value()[0];
        for (int code : codes) ++usage[code];

        if (use_kmeans) {
          const Tensor& zv = ze.value();
          for (int p = 0; p < cells; ++p, ++pool_seen) {
            std::size_t slot;
            if (pool.size() < static_cast<std::size_t>(options.kmeans_pool_limit) * d) {
              slot = pool.size() / d;
              pool.resize(pool.size() + d);
            } else {
              std::uniform_int_distribution<long> pick(0, pool_seen);
              const long j = pick(pool_rng);
              if (j >= options.kmeans_pool_limit) continue;
              slot = static_cast<std::size_t>(j);
            }
            for (int c = 0; c < d; ++c)
              pool[slot * d + c] = zv[static_cast<std::size_t>(c) * cells + p];
          }
        }
      }
      const float scale = 1.0f / static_cast<float>(end - start);
      model_opt.step(model.params(), scale);
      codebook_opt.step(codebook_store, scale);
    }

    for (const auto* store : {&model.params(), &codebook_store})
      for (const auto& p : store->params())
        for (float v : p.value.values())
          if (!std::isfinite(v)) throw TrainingError(epoch, "parameters became non-finite");

    if (use_kmeans && !pool.empty()) {
      KMeansResult km = kmeans_aggregate(
          pool, Codebook::from_tensor(codebook_store[codebook_param].value),
          options.kmeans_iters, options.seed * 1000003ull + static_cast<std::uint64_t>(epoch));
      codebook_store[codebook_param].value = km.codebook.as_tensor();
      nn::Adam::reset_moments(codebook_store[codebook_param]);
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.rec_loss = rec_sum / static_cast<double>(dataset.size());
    m.vq_loss = vq_sum / static_cast<double>(dataset.size());
    m.total_loss = m.rec_loss + m.vq_loss;
    m.dead_codes = static_cast<int>(std::count(usage.begin(), usage.end(), 0L));
    if (!std::isfinite(m.total_loss)) throw TrainingError(epoch, "loss became non-finite");
    result.history.push_back(m);
    if (options.on_epoch) options.on_epoch(m);
  }

  result.codebook = Codebook::from_tensor(codebook_store[codebook_param].value);
  return result;
}

Image reconstruct(const Autoencoder& model, const Codebook& codebook, const Image& image) {
  return model.decode(quantize(model.encode(image), codebook).quantized);
}

double mean_reconstruction_loss(const Autoencoder& model, const Codebook& codebook,
                                std::span<const Image> images, ReconstructionNorm norm) {
  if (images.empty()) return 0.0;
  std::vector<double> losses(images.size());
  detail::parallel_for(images.size(), [&](std::size_t i) {
    losses[i] = reconstruction_loss(images[i], reconstruct(model, codebook, images[i]), norm);
  });
  double acc = 0.0;
  for (double l : losses) acc += l;
  return acc / static_cast<double>(images.size());
}

std::string epoch_metrics_csv(std::span<const EpochMetrics> history) {
  std::ostringstream os;
  os << "epoch,rec_loss,vq_loss,total_loss,dead_codes\n";
  char buf[160];
  for (const auto& m : history) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%d\n", m.epoch, m.rec_loss, m.vq_loss,
                  m.total_loss, m.dead_codes);
    os << buf;
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_stage1(const std::filesystem::path& path, const Autoencoder& model,
                 const Codebook& codebook, int epoch) {
  if (codebook.dim() != model.config().latent_dim) {
    throw ContractError("codebook dimension does not match the autoencoder latent_dim");
  }
  io::ByteWriter w;
  w.magic(kStage1Magic);
  w.u32(kStage1Version);
  w.str(config_to_json(model.config()).dump());
  w.u32(static_cast<std::uint32_t>(epoch));
  w.u64(codebook.hash());
  io::write_params(w, model.params());
  codebook.serialize(w);
  io::write_file_atomic(path, w.bytes());
}

Stage1Checkpoint load_stage1(const std::filesystem::path& path) {
  io::ByteReader r(io::read_file(path), path.string());
  r.expect_magic(kStage1Magic);
  const std::uint32_t version = r.u32();
  if (version != kStage1Version) {
    throw IntegrityError(path.string() + ": unsupported stage-1 checkpoint version " +
                         std::to_string(version));
  }
  AutoencoderConfig config;
  try {
    config = config_from_json(nlohmann::json::parse(r.str()));
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(path.string() + ": malformed config header: " + e.what());
  }
  Stage1Checkpoint ckpt{Autoencoder(config, 0), Codebook(), 0};
  ckpt.epoch = static_cast<int>(r.u32());
  const std::uint64_t recorded_hash = r.u64();
  io::read_params(r, ckpt.model.params());
  ckpt.codebook = Codebook::deserialize(r);
  if (ckpt.codebook.hash() != recorded_hash) {
    throw IntegrityError(path.string() + ": embedded codebook does not match its recorded hash");
  }
  return ckpt;
}

}  // namespace vqad
