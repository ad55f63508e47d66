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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "vqad/error.hpp"
#include "vqad/evaluation.hpp"

namespace vqad {
namespace {

double pairwise_auroc(const std::vector<float>& s, const std::vector<std::uint8_t>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

AnomalyMap make_map(int h, int w, std::vector<float> s) { return {h, w, std::move(s), {}}; }

BinaryMask make_mask(int h, int w, std::vector<std::uint8_t> v) {
  BinaryMask m(h, w);
  m.values = std::move(v);
  return m;
}

TEST(Auroc, HandCases) {
  const std::vector<std::uint8_t> y = {0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(auroc(std::vector<float>{0.1f, 0.2f, 0.3f, 0.4f}, y), 1.0);
  EXPECT_DOUBLE_EQ(auroc(std::vector<float>{0.4f, 0.3f, 0.2f, 0.1f}, y), 0.0);
  EXPECT_DOUBLE_EQ(auroc(std::vector<float>{0.5f, 0.5f, 0.5f, 0.5f}, y), 0.5);
  EXPECT_DOUBLE_EQ(auroc(std::vector<float>{0.1f, 0.4f, 0.35f, 0.8f}, y), 0.75);
}

TEST(Auroc, Errors) {
  EXPECT_THROW(auroc(std::vector<float>{0.1f, 0.2f}, std::vector<std::uint8_t>{1, 1}), UndefinedMetricError);
  EXPECT_THROW(auroc(std::vector<float>{0.1f, 0.2f}, std::vector<std::uint8_t>{0, 0}), UndefinedMetricError);
  EXPECT_THROW(auroc(std::vector<float>{0.1f}, std::vector<std::uint8_t>{0, 1}), InputError);
  EXPECT_THROW(auroc(std::vector<float>{0.1f, NAN}, std::vector<std::uint8_t>{0, 1}), InputError);
}

TEST(Auroc, MatchesPairwiseOracleWithTies) {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 50 + trial * 7;
    std::vector<float> s(n);
    std::vector<std::uint8_t> y(n);
    std::uniform_int_distribution<int> level(0, 9);  // coarse levels force ties
    std::bernoulli_distribution pos(0.3);
    for (int i = 0; i < n; ++i) {
      s[i] = level(rng) * 0.1f;
      y[i] = pos(rng);
    }
    y[0] = 0;
    y[1] = 1;
    EXPECT_NEAR(auroc(s, y), pairwise_auroc(s, y), 1e-12);
  }
}

TEST(Auroc, InvariantUnderMonotoneTransform) {
  std::mt19937_64 rng(62);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> s(500), t(500);
  std::vector<std::uint8_t> y(500);
  for (int i = 0; i < 500; ++i) {
    s[i] = u(rng);
    t[i] = std::exp(3.0f * s[i]) - 7.0f;
    y[i] = u(rng) < s[i] ? 1 : 0;
  }
  EXPECT_DOUBLE_EQ(auroc(s, y), auroc(t, y));
}

TEST(Dice, HandCases) {
  const BinaryMask a = make_mask(2, 2, {1, 1, 0, 0});
  EXPECT_DOUBLE_EQ(dice(a, a), 1.0);
  EXPECT_DOUBLE_EQ(dice(a, make_mask(2, 2, {0, 0, 1, 1})), 0.0);
  EXPECT_NEAR(dice(make_mask(2, 2, {1, 1, 1, 0}), make_mask(2, 2, {1, 0, 0, 0})), 0.5, 1e-15);
  EXPECT_NEAR(dice(make_mask(1, 4, {1, 1, 0, 0}), make_mask(1, 4, {1, 1, 1, 0})), 0.8, 1e-15);
  EXPECT_NEAR(dice(make_mask(1, 4, {1, 0, 0, 0}), make_mask(1, 4, {1, 1, 0, 0})), 2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(dice(BinaryMask(2, 2), BinaryMask(2, 2)), 1.0);
  EXPECT_DOUBLE_EQ(dice(a, BinaryMask(2, 2)), 0.0);
  EXPECT_THROW(dice(a, BinaryMask(1, 4)), InputError);
}

TEST(BestDice, SeparableScoresReachOne) {
  const std::vector<AnomalyMap> maps = {make_map(1, 4, {0.9f, 0.8f, 0.1f, 0.2f}),
                                        make_map(1, 4, {0.0f, 0.3f, 0.95f, 0.1f})};
  const std::vector<PixelLabels> truth = {make_mask(1, 4, {1, 1, 0, 0}), make_mask(1, 4, {0, 0, 1, 0})};
  const DiceResult r = best_dice(maps, truth);
  EXPECT_DOUBLE_EQ(r.dice, 1.0);
  EXPECT_GT(r.threshold, 0.3);
  EXPECT_LE(r.threshold, 0.81);
}

TEST(BestDice, ConstantScoresGiveEverything) {
  const std::vector<AnomalyMap> maps = {make_map(1, 4, {0.5f, 0.5f, 0.5f, 0.5f})};
  const std::vector<PixelLabels> truth = {make_mask(1, 4, {1, 0, 0, 0})};
  const DiceResult r = best_dice(maps, truth);
  EXPECT_NEAR(r.dice, 2.0 / 5.0, 1e-15);
  EXPECT_EQ(r.threshold, 0.5);
}

TEST(BestDice, MatchesExhaustiveBinarizeOracle) {
  std::mt19937_64 rng(63);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<AnomalyMap> maps;
  std::vector<PixelLabels> truth;
  for (int i = 0; i < 6; ++i) {
    AnomalyMap m = make_map(8, 8, std::vector<float>(64));
    BinaryMask t(8, 8);
    for (int p = 0; p < 64; ++p) {
      t.values[p] = (i % 2 == 1) && (p % 8 < 3) && (p / 8 < 4);
      m.scores[p] = u(rng) + (t.values[p] ? 0.4f : 0.0f);
    }
    maps.push_back(m);
    truth.push_back(t);
  }
  const DiceResult r = best_dice(maps, truth, 101);
  double best = -1.0, best_thr = 0.0;
  for (double thr : score_quantiles(maps, 101)) {
    std::size_t inter = 0, pred = 0, pos = 0;
    for (std::size_t i = 0; i < maps.size(); ++i) {
      const BinaryMask b = binarize(maps[i], thr);
      for (std::size_t p = 0; p < b.size(); ++p) {
        inter += b.values[p] && truth[i].values[p];
        pred += b.values[p];
        pos += truth[i].values[p];
      }
    }
    const double d = 2.0 * inter / static_cast<double>(pred + pos);
    if (d > best) {
      best = d;
      best_thr = thr;
    }
  }
  EXPECT_NEAR(r.dice, best, 1e-12);
  EXPECT_EQ(r.threshold, best_thr);
  EXPECT_NEAR(pooled_dice(maps, truth, r.threshold), r.dice, 1e-12);
}

TEST(ScoreQuantiles, EndpointsAndErrors) {
  const std::vector<AnomalyMap> maps = {make_map(1, 3, {3.0f, 1.0f, 2.0f})};
  const auto q = score_quantiles(maps, 3);
  EXPECT_EQ(q, (std::vector<double>{1.0, 2.0, 3.0}));
  EXPECT_THROW(score_quantiles(maps, 1), InputError);
  const std::vector<PixelLabels> none = {BinaryMask(1, 3)};
  EXPECT_THROW(best_dice(maps, none), UndefinedMetricError);
}

std::vector<LabeledImage> labeled_set() {
  std::vector<LabeledImage> test(3);
  test[0] = {"defect/000", "defect", Image(1, 1, 4), make_mask(1, 4, {1, 1, 0, 0})};
  test[1] = {"good/000", "good", Image(1, 1, 4), BinaryMask(1, 4)};
  test[2] = {"good/001", "good", Image(1, 1, 4), BinaryMask(1, 4)};
  return test;
}

TEST(EvaluateMaps, ReportAndCsv) {
  const std::vector<AnomalyMap> maps = {make_map(1, 4, {0.9f, 0.8f, 0.1f, 0.2f}),
                                        make_map(1, 4, {0.1f, 0.2f, 0.3f, 0.1f}),
                                        make_map(1, 4, {0.0f, 0.1f, 0.2f, 0.3f})};
  const MetricsReport r = evaluate_maps(maps, labeled_set(), 0.25);
  EXPECT_DOUBLE_EQ(r.auroc, 1.0);
  EXPECT_DOUBLE_EQ(r.dice, 1.0);
  ASSERT_EQ(r.per_category.size(), 2u);
  EXPECT_EQ(r.per_category[0].category, "defect");
  EXPECT_TRUE(std::isnan(r.per_category[1].auroc));

  const std::string csv = metrics_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "scope,images,rec_loss,auroc,dice,dice_threshold");
  EXPECT_NE(csv.find("\npooled,3,0.25,1,1,"), std::string::npos);
  EXPECT_NE(csv.find("\ngood,2,0.25,nan,1,"), std::string::npos);
  EXPECT_NE(metrics_text(r).find("best of 101"), std::string::npos);

  EXPECT_THROW(evaluate_maps(std::span<const AnomalyMap>(maps).first(2), labeled_set(), 0.0), InputError);
}

TEST(Ablation, VariantParsing) {
  EXPECT_EQ(parse_ablation_variant("gumbel").quantizer, QuantizerKind::kGumbel);
  EXPECT_TRUE(parse_ablation_variant("distance-residual").residual_blocks);
  EXPECT_EQ(parse_ablation_variant("kmeans").quantizer, QuantizerKind::kDistanceKMeans);
  EXPECT_EQ(parse_ablation_variant("kmeans-reduced").codebook_size, -1);
  EXPECT_EQ(parse_ablation_variant("kmeans-reduced:48").codebook_size, 48);
  EXPECT_THROW(parse_ablation_variant("kmeans-reduced:x"), InputError);
  EXPECT_THROW(parse_ablation_variant("kmeans-reduced:0"), InputError);
  EXPECT_THROW(parse_ablation_variant("vqgan"), InputError);
}

TEST(Ablation, CsvLayout) {
  AblationTable t;
  t.rows = {{"kmeans", 0, 0.5, 0.75, 0.25, 0.125, 3}, {"kmeans", 1, 0.25, 0.25, 0.75, 0.375, 1}};
  t.means = {{"kmeans", 0, 0.375, 0.5, 0.5, 0.25, 2}};
  EXPECT_EQ(ablation_csv(t),
            "variant,seed,rec_loss,auroc,dice,dice_threshold,dead_codes\n"
            "kmeans,0,0.5,0.75,0.25,0.125,3\n"
            "kmeans,1,0.25,0.25,0.75,0.375,1\n"
            "kmeans,mean,0.375,0.5,0.5,0.25,2\n");
}

}  // namespace
}  // namespace vqad
