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

#include "vqad/restoration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "json.hpp"
#include "vqad/error.hpp"
#include "vqad/io.hpp"

namespace vqad {

void RestorationConfig::validate() const {
  if (likelihood_threshold) {
    const double t = *likelihood_threshold;
    if (std::isnan(t) || t == std::numeric_limits<double>::infinity()) {
      throw InputError("likelihood threshold must be finite or -inf");
    }
  }
  if (!(percentile >= 0.0 && percentile <= 100.0)) throw InputError("percentile must be in [0, 100]");
  if (smoothing_radius < 0) throw InputError("smoothing_radius must be >= 0");
}

std::string to_string(ReplacementRule rule) {
  return rule == ReplacementRule::kArgmax ? "argmax" : "sample";
}

ReplacementRule parse_replacement_rule(const std::string& text) {
  if (text == "argmax") return ReplacementRule::kArgmax;
  if (text == "sample") return ReplacementRule::kSample;
  throw InputError("unknown replacement rule '" + text + "' (expected argmax or sample)");
}

std::string to_string(ThresholdMode mode) {
  return mode == ThresholdMode::kLogLikelihood ? "likelihood" : "percentile";
}

ThresholdMode parse_threshold_mode(const std::string& text) {
  if (text == "likelihood") return ThresholdMode::kLogLikelihood;
  if (text == "percentile") return ThresholdMode::kPercentile;
  throw InputError("unknown threshold mode '" + text + "' (expected likelihood or percentile)");
}

float AnomalyMap::max() const {
  return scores.empty() ? 0.0f : *std::max_element(scores.begin(), scores.end());
}

double AnomalyMap::mean() const {
  if (scores.empty()) return 0.0;
  double acc = 0.0;
  for (float s : scores) acc += s;
  return acc / static_cast<double>(scores.size());
}

namespace {

double log_prob(const Conditionals& cond, int cell, int code) {
  return std::log(std::max(cond.at(cell)[code], kProbabilityFloor));
}

int sample_code(std::span<const double> probs, std::mt19937_64& rng) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace

CodeRestoration restore_codes(const CodeGrid& grid, const PriorModel& model,
                              const RestorationConfig& config) {
  config.validate();
  model.check_grid(grid);
  const int cells = static_cast<int>(grid.cells());
  const int n = model.config().vocab_size;

  CodeRestoration out{grid, std::vector<std::uint8_t>(cells, 0), 0, 0.0};
  Conditionals cond = model.conditionals(grid);

  double threshold = config.likelihood_threshold.value_or(-std::log(static_cast<double>(n)));
  if (config.threshold_mode == ThresholdMode::kPercentile) {
    std::vector<double> ll(cells);
    for (int p = 0; p < cells; ++p) ll[p] = log_prob(cond, p, grid.indices[p]);
    std::sort(ll.begin(), ll.end());
    const auto k = static_cast<std::size_t>(std::ceil(config.percentile / 100.0 * cells));
    threshold = k >= ll.size() ? std::numeric_limits<double>::max() : ll[k];
  }
  out.threshold = threshold;

  std::mt19937_64 rng(config.seed);
  for (int p = 0; p < cells; ++p) {
    const int current = out.codes.indices[p];
    if (!(log_prob(cond, p, current) < threshold)) continue;
    const int replacement = config.replacement_rule == ReplacementRule::kArgmax
                                ? cond.argmax(p)
                                : sample_code(cond.at(p), rng);
    if (replacement == current) continue;
    out.codes.indices[p] = replacement;
    out.replaced[p] = 1;
    ++out.replacements;
    // Causality: conditionals at positions <= p are unaffected by the edit.
    if (config.sequential_rescoring && p + 1 < cells) cond = model.conditionals(out.codes);
  }
  return out;
}

AnomalyMap residual_map(const Image& original, const Image& restored, int smoothing_radius) {
  if (!original.same_shape(restored)) {
    throw ContractError("residual_map: image shapes " + shape_string(original.tensor().shape()) +
                        " and " + shape_string(restored.tensor().shape()) + " differ");
  }
  if (smoothing_radius < 0) throw InputError("smoothing_radius must be >= 0");
  const int h = original.height(), w = original.width(), c = original.channels();
  AnomalyMap map{h, w, std::vector<float>(static_cast<std::size_t>(h) * w, 0.0f), {}};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = 0; k < c; ++k) acc += std::fabs(static_cast<double>(original.at(k, y, x)) - restored.at(k, y, x));
      map.scores[static_cast<std::size_t>(y) * w + x] = static_cast<float>(acc / c);
    }
  if (smoothing_radius == 0) return map;

  const int r = smoothing_radius;
  const double sigma = r / 2.0;
  std::vector<double> kernel(2 * r + 1);
  double norm = 0.0;
  for (int i = -r; i <= r; ++i) norm += (kernel[i + r] = std::exp(-0.5 * i * i / (sigma * sigma)));
  for (auto& k : kernel) k /= norm;

  // Separable pass with replicated borders.
  std::vector<double> tmp(map.scores.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += kernel[i + r] * map.scores[static_cast<std::size_t>(y) * w + std::clamp(x + i, 0, w - 1)];
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += kernel[i + r] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x];
      map.scores[static_cast<std::size_t>(y) * w + x] = static_cast<float>(std::max(acc, 0.0));
    }
  return map;
}

Detection detect(const Image& image, const Autoencoder& autoencoder, const Codebook& codebook,
                 const PriorModel& model, const RestorationConfig& config) {
  config.validate();
  if (model.codebook_id() != 0 && model.codebook_id() != codebook.hash()) {
    throw IntegrityError("prior was fitted on codebook " + io::hex64(model.codebook_id()) +
                         " but the autoencoder checkpoint carries " + io::hex64(codebook.hash()));
  }
  Detection det;
  det.codes = quantize(autoencoder.encode(image), codebook).codes;
  det.restoration = restore_codes(det.codes, model, config);
  det.restored = autoencoder.decode(lookup(det.restoration.codes, codebook));
  det.map = residual_map(image, det.restored, config.smoothing_radius);
  return det;
}

BinaryMask binarize(const AnomalyMap& map, double threshold) {
  if (!std::isfinite(threshold)) throw InputError("binarize: threshold must be finite");
  BinaryMask mask(map.height, map.width);
  for (std::size_t i = 0; i < map.scores.size(); ++i) mask.values[i] = map.scores[i] >= threshold ? 1 : 0;
  return mask;
}

std::string detection_record(const std::string& image_id, const Detection& detection) {
  nlohmann::ordered_json j;
  j["image"] = image_id;
  j["max_score"] = detection.map.max();
  j["mean_score"] = detection.map.mean();
  j["replacements"] = detection.restoration.replacements;
  return j.dump();
}

}  // namespace vqad
