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

#ifndef VQAD_RESTORATION_HPP_
#define VQAD_RESTORATION_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vqad/autoencoder.hpp"
#include "vqad/image.hpp"
#include "vqad/prior.hpp"
#include "vqad/quantizer.hpp"

namespace vqad {

enum class ReplacementRule { kArgmax, kSample };
enum class ThresholdMode { kLogLikelihood, kPercentile };

struct RestorationConfig {
  // Log-probability cutoff; unset means log(1/n). -inf disables replacement.
  std::optional<double> likelihood_threshold;
  ThresholdMode threshold_mode = ThresholdMode::kLogLikelihood;
  // Percentile mode flags the lowest `percentile` % of positions.
  double percentile = 5.0;
  ReplacementRule replacement_rule = ReplacementRule::kArgmax;
  bool sequential_rescoring = true;
  int smoothing_radius = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

std::string to_string(ReplacementRule rule);
ReplacementRule parse_replacement_rule(const std::string& text);
std::string to_string(ThresholdMode mode);
ThresholdMode parse_threshold_mode(const std::string& text);

// Per-pixel non-negative anomaly scores.
struct AnomalyMap {
  int height = 0;
  int width = 0;
  std::vector<float> scores;
  std::string source_id;

  float at(int y, int x) const { return scores[static_cast<std::size_t>(y) * width + x]; }
  float max() const;
  double mean() const;
};

struct CodeRestoration {
  CodeGrid codes;
  // 1 where the returned code differs from the input code.
  std::vector<std::uint8_t> replaced;
  int replacements = 0;
  // Threshold actually applied (resolves the default and percentile modes).
  double threshold = 0.0;
};

// Raster walk replacing codes whose conditional log-likelihood falls below
// the threshold. With sequential rescoring later positions are scored against
// the already repaired prefix.
CodeRestoration restore_codes(const CodeGrid& grid, const PriorModel& model,
                              const RestorationConfig& config);

// Channel-mean absolute difference, Gaussian-smoothed with sigma = radius/2
// over a (2r+1)^2 window (radius 0 disables smoothing).
AnomalyMap residual_map(const Image& original, const Image& restored, int smoothing_radius);

struct Detection {
  Image restored;
  AnomalyMap map;
  CodeGrid codes;
  CodeRestoration restoration;
};

// encode -> quantize -> restore_codes -> decode -> residual map.
Detection detect(const Image& image, const Autoencoder& autoencoder, const Codebook& codebook,
                 const PriorModel& model, const RestorationConfig& config);

// mask[p] = 1 iff score[p] >= threshold.
BinaryMask binarize(const AnomalyMap& map, double threshold);

// Sidecar line: {"image":..,"max_score":..,"mean_score":..,"replacements":..}
std::string detection_record(const std::string& image_id, const Detection& detection);

}  // namespace vqad

#endif  // VQAD_RESTORATION_HPP_
