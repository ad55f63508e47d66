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

#include "vqad/prior.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "vqad/error.hpp"
#include "vqad/io.hpp"

namespace vqad {

namespace {

constexpr char kPriorMagic[] = "LGP1";
constexpr std::uint32_t kPriorVersion = 1;

ag::Var gate(ag::Var a, int hidden) {
  return ag::mul(ag::tanh(ag::slice_channels(a, 0, hidden)),
                 ag::sigmoid(ag::slice_channels(a, hidden, 2 * hidden)));
}

}  // namespace

PriorConfig PriorConfig::desk_scale(int vocab_size, int height, int width) {
  PriorConfig c;
  c.vocab_size = vocab_size;
  c.height = height;
  c.width = width;
  c.hidden = 32;
  c.layers = 5;
  c.first_kernel = 5;
  return c;
}

void PriorConfig::validate() const {
  if (vocab_size < 1) throw InputError("prior vocab_size must be >= 1");
  if (height < 1 || width < 1) throw InputError("prior grid shape must be positive");
  if (hidden < 1 || layers < 1) throw InputError("prior needs hidden >= 1 and layers >= 1");
  if (first_kernel < 1 || first_kernel % 2 == 0) throw InputError("first_kernel must be odd");
}

int Conditionals::argmax(int cell) const {
  auto p = at(cell);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

PriorModel::PriorModel(const PriorConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const int h = config_.hidden;

  Tensor table({config_.vocab_size, h});
  std::uniform_real_distribution<float> unit(-1.0f, 1.0f);
  for (auto& v : table.storage()) v = unit(rng);
  embedding_ = params_.add("prior.embedding", std::move(table));

  for (int l = 0; l < config_.layers; ++l) {
    const std::string name = "prior.layer" + std::to_string(l);
    const int k = l == 0 ? config_.first_kernel : 3;
    auto taps = config_.masked ? nn::causal_taps(k, l != 0) : std::vector<std::pair<int, int>>{};
    GatedLayer layer;
    layer.conv = nn::Conv2d::create(params_, name + ".conv", h, 2 * h, k, 1, k / 2, rng, taps);
    if (l > 0) layer.project = nn::Conv2d::create(params_, name + ".project", h, h, 1, 1, 0, rng);
    layers_.push_back(layer);
  }
  head_hidden_ = nn::Conv2d::create(params_, "prior.head.hidden", h, h, 1, 1, 0, rng);
  head_out_ = nn::Conv2d::create(params_, "prior.head.out", h, config_.vocab_size, 1, 1, 0, rng);
  // Zero output layer: an untrained model predicts the uniform distribution.
  params_[head_out_.weight].value.fill(0.0f);
}

void PriorModel::check_grid(const CodeGrid& grid) const {
  if (grid.height != config_.height || grid.width != config_.width) {
    throw InputError("code grid " + std::to_string(grid.height) + "x" + std::to_string(grid.width) +
                     " does not match prior grid " + std::to_string(config_.height) + "x" +
                     std::to_string(config_.width));
  }
  if (grid.indices.size() != static_cast<std::size_t>(grid.height) * grid.width) {
    throw InputError("code grid index count does not match its shape");
  }
  for (int idx : grid.indices) {
    if (idx < 0 || idx >= config_.vocab_size) {
      throw InputError("code " + std::to_string(idx) + " outside vocabulary of size " +
                       std::to_string(config_.vocab_size));
    }
  }
}

ag::Var PriorModel::logits(const nn::Binder& bind, std::span<const int> codes) const {
  const int h = config_.hidden;
  ag::Var x = ag::gather_rows(bind(embedding_), codes, config_.height, config_.width);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    ag::Var g = gate(layers_[l].conv(bind, x), h);
    // The first layer never sees its own position, so it has no skip path.
    x = l == 0 ? g : ag::add(x, layers_[l].project(bind, g));
  }
  ag::Var y = ag::relu(head_hidden_(bind, ag::relu(x)));
  return head_out_(bind, y);
}

Conditionals PriorModel::conditionals(const CodeGrid& grid) const {
  check_grid(grid);
  ag::Tape tape;
  nn::Binder bind(tape, params_);
  const Tensor& lv = logits(bind, grid.indices).value();
  const int n = config_.vocab_size;
  const int cells = static_cast<int>(grid.cells());
  Conditionals out(n, cells);
  for (int p = 0; p < cells; ++p) {
    auto probs = out.at(p);
    double top = lv[p];
    for (int k = 1; k < n; ++k) top = std::max(top, static_cast<double>(lv[static_cast<std::size_t>(k) * cells + p]));
    double z = 0.0;
    for (int k = 0; k < n; ++k) {
      probs[k] = std::exp(static_cast<double>(lv[static_cast<std::size_t>(k) * cells + p]) - top);
      z += probs[k];
    }
    for (auto& v : probs) v /= z;
  }
  return out;
}

std::vector<double> conditional_log_likelihoods(const PriorModel& model, const CodeGrid& grid) {
  const Conditionals cond = model.conditionals(grid);
  std::vector<double> out(grid.cells());
  for (std::size_t p = 0; p < out.size(); ++p) {
    out[p] = std::log(std::max(cond.at(static_cast<int>(p))[grid.indices[p]], kProbabilityFloor));
  }
  return out;
}

PriorTrainResult train_prior(std::span<const CodeGrid> grids, PriorConfig config,
                             const PriorTrainOptions& options) {
  if (grids.empty()) throw InputError("train_prior: empty code grid collection");
  if (options.epochs < 0 || options.batch_size < 1) {
    throw InputError("train_prior: epochs must be >= 0 and batch_size >= 1");
  }
  const CodeGrid& first = grids.front();
  for (const auto& g : grids) {
    if (g.height != first.height || g.width != first.width) {
      throw InputError("train_prior: code grids have heterogeneous shapes");
    }
    if (g.codebook_id != first.codebook_id) {
      throw InputError("train_prior: code grids reference different codebooks");
    }
  }
  config.height = first.height;
  config.width = first.width;

  PriorTrainResult result{PriorModel(config, options.seed), {}};
  PriorModel& model = result.model;
  model.set_codebook_id(first.codebook_id);
  for (const auto& g : grids) model.check_grid(g);

  nn::Adam opt({options.learning_rate});
  std::mt19937_64 order_rng(options.seed ^ 0x632be59bd9b4e019ull);
  std::vector<std::size_t> order(grids.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double nll = 0.0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      for (std::size_t k = start; k < end; ++k) {
        const CodeGrid& grid = grids[order[k]];
        ag::Tape tape;
        nn::Binder bind(tape, model.params());
        ag::Var loss = ag::cross_entropy(model.logits(bind, grid.indices), grid.indices);
        tape.backward(loss);
        nll += loss.value()[0];
      }
      opt.step(model.params(), 1.0f / static_cast<float>(end - start));
    }
    PriorEpochMetrics m{epoch, nll / static_cast<double>(grids.size())};
    if (!std::isfinite(m.nll)) throw TrainingError(epoch, "prior NLL became non-finite");
    result.history.push_back(m);
    if (options.on_epoch) options.on_epoch(m);
  }
  return result;
}

bool causality_probe(const PriorModel& model, const CodeGrid& grid, int position,
                     std::uint64_t seed) {
  const int cells = static_cast<int>(grid.cells());
  if (position < 0 || position >= cells) throw InputError("causality_probe: position out of range");
  const Conditionals base = model.conditionals(grid);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> code(0, model.config().vocab_size - 1);
  for (int trial = 0; trial < 8; ++trial) {
    CodeGrid perturbed = grid;
    for (int p = position + 1; p < cells; ++p) perturbed.indices[p] = code(rng);
    const Conditionals probe = model.conditionals(perturbed);
    auto a = base.at(position);
    auto b = probe.at(position);
    for (std::size_t k = 0; k < a.size(); ++k)
      if (std::fabs(a[k] - b[k]) >= 1e-6) return false;
  }
  return true;
}

std::string prior_metrics_csv(std::span<const PriorEpochMetrics> history) {
  std::ostringstream os;
  os << "epoch,nll\n";
  char buf[64];
  for (const auto& m : history) {
    std::snprintf(buf, sizeof buf, "%d,%.9g\n", m.epoch, m.nll);
    os << buf;
  }
  return os.str();
}

void save_prior(const std::filesystem::path& path, const PriorModel& model, int epoch) {
  const PriorConfig& c = model.config();
  nlohmann::json j = {{"vocab_size", c.vocab_size}, {"height", c.height},
                      {"width", c.width},           {"hidden", c.hidden},
                      {"layers", c.layers},         {"first_kernel", c.first_kernel},
                      {"masked", c.masked}};
  io::ByteWriter w;
  w.magic(kPriorMagic);
  w.u32(kPriorVersion);
  w.str(j.dump());
  w.u32(static_cast<std::uint32_t>(epoch));
  w.u64(model.codebook_id());
  io::write_params(w, model.params());
  io::write_file_atomic(path, w.bytes());
}

PriorModel load_prior(const std::filesystem::path& path, int* epoch) {
  io::ByteReader r(io::read_file(path), path.string());
  r.expect_magic(kPriorMagic);
  const std::uint32_t version = r.u32();
  if (version != kPriorVersion) {
    throw IntegrityError(path.string() + ": unsupported prior checkpoint version " +
                         std::to_string(version));
  }
  PriorConfig c;
  try {
    const auto j = nlohmann::json::parse(r.str());
    c.vocab_size = j.at("vocab_size").get<int>();
    c.height = j.at("height").get<int>();
    c.width = j.at("width").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.layers = j.at("layers").get<int>();
    c.first_kernel = j.at("first_kernel").get<int>();
    c.masked = j.at("masked").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(path.string() + ": malformed config header: " + e.what());
  }
  PriorModel model(c, 0);
  const int stored_epoch = static_cast<int>(r.u32());
  if (epoch != nullptr) *epoch = stored_epoch;
  model.set_codebook_id(r.u64());
  io::read_params(r, model.params());
  return model;
}

}  // namespace vqad
