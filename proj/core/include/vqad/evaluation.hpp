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

#ifndef VQAD_EVALUATION_HPP_
#define VQAD_EVALUATION_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vqad/autoencoder.hpp"
#include "vqad/data.hpp"
#include "vqad/image.hpp"
#include "vqad/prior.hpp"
#include "vqad/quantizer.hpp"
#include "vqad/restoration.hpp"

namespace vqad {

using PixelLabels = BinaryMask;

// Probability that a random positive outscores a random negative (ties 1/2),
// from rank statistics. Throws UndefinedMetricError unless both classes occur.
double auroc(std::span<const float> scores, std::span<const std::uint8_t> labels);

// 2|A and B| / (|A| + |B|); 1 when both masks are empty.
double dice(const BinaryMask& pred, const BinaryMask& truth);

struct DiceResult {
  double dice = 0.0;
  double threshold = 0.0;
};

// Candidate thresholds: sorted pooled scores at indices floor(k (N-1) / (T-1)).
std::vector<double> score_quantiles(std::span<const AnomalyMap> maps, int num_thresholds);

// One global threshold maximizing dataset-level DICE (pooled TP / pooled sizes)
// over the quantile grid. The first maximizing threshold wins.
DiceResult best_dice(std::span<const AnomalyMap> maps, std::span<const PixelLabels> truth,
                     int num_thresholds = 101);
// Dataset-level DICE of binarize(maps, threshold).
double pooled_dice(std::span<const AnomalyMap> maps, std::span<const PixelLabels> truth,
                   double threshold);

struct CategoryMetrics {
  std::string category;
  int images = 0;
  // NaN when the category lacks one of the two pixel classes.
  double auroc = 0.0;
  // At the pooled threshold.
  double dice = 0.0;
};

struct MetricsReport {
  double rec_loss = 0.0;
  double auroc = 0.0;
  double dice = 0.0;
  double dice_threshold = 0.0;
  int num_thresholds = 101;
  std::vector<CategoryMetrics> per_category;
};

// maps[i] scores test[i].
MetricsReport evaluate_maps(std::span<const AnomalyMap> maps, std::span<const LabeledImage> test,
                            double rec_loss, int num_thresholds = 101);

// Columns: scope,images,rec_loss,auroc,dice,dice_threshold
std::string metrics_csv(const MetricsReport& report);
std::string metrics_text(const MetricsReport& report);

// ---------------------------------------------------------------------------
// Full pipeline and ablation

struct PipelineSettings {
  AutoencoderConfig autoencoder = AutoencoderConfig::desk_scale();
  Stage1Options stage1;
  // vocab_size / height / width are filled in from the trained stage 1.
  PriorConfig prior;
  PriorTrainOptions prior_train;
  RestorationConfig restoration;

  static PipelineSettings desk_scale();
};

struct TrainedPipeline {
  Autoencoder autoencoder;
  Codebook codebook;
  PriorModel prior;
  std::vector<EpochMetrics> stage1_history;
  std::vector<PriorEpochMetrics> prior_history;
  // Mean reconstruction loss over the training set.
  double rec_loss = 0.0;
  // Dead codes over the training-set code grids.
  int dead_codes = 0;
};

// Seeds every stochastic component from `seed`.
TrainedPipeline train_pipeline(std::span<const Image> train, const PipelineSettings& settings,
                               std::uint64_t seed);

std::vector<CodeGrid> encode_all(const Autoencoder& autoencoder, const Codebook& codebook,
                                 std::span<const Image> images);
std::vector<Detection> detect_all(const TrainedPipeline& pipeline, std::span<const LabeledImage> test,
                                  const RestorationConfig& restoration);

struct AblationVariant {
  std::string name;
  QuantizerKind quantizer = QuantizerKind::kDistance;
  bool residual_blocks = false;
  // Codebook size override; 0 keeps the configured size, -1 means the live
  // code count of the distance variant under the same seed.
  int codebook_size = 0;
};

// distance | distance-residual | gumbel | kmeans | kmeans-reduced[:n]
AblationVariant parse_ablation_variant(const std::string& text);

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  double rec_loss = 0.0;
  double auroc = 0.0;
  double dice = 0.0;
  double dice_threshold = 0.0;
  int dead_codes = 0;
};

struct AblationTable {
  std::vector<AblationRow> rows;
  // One per variant, in first-appearance order; seed field is unused.
  std::vector<AblationRow> means;
};

AblationTable run_ablation(const Dataset& data, std::span<const AblationVariant> variants,
                           std::span<const std::uint64_t> seeds, const PipelineSettings& settings);

// Columns: variant,seed,rec_loss,auroc,dice,dice_threshold,dead_codes
// Mean rows carry seed "mean".
std::string ablation_csv(const AblationTable& table);
// Desk-scale table followed by the published full-scale reference values.
std::string ablation_text(const AblationTable& table);

}  // namespace vqad

#endif  // VQAD_EVALUATION_HPP_
