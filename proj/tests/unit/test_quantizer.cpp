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

#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "test_util.hpp"
#include "vqad/error.hpp"
#include "vqad/io.hpp"
#include "vqad/quantizer.hpp"

namespace vqad {
namespace {

LatentGrid random_latent(int d, int h, int w, std::mt19937_64& rng) {
  return LatentGrid(testing::random_tensor({d, h, w}, rng, -1.0f, 1.0f));
}

Codebook random_codebook(int n, int d, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> e(static_cast<std::size_t>(n) * d);
  for (auto& v : e) v = u(rng);
  return Codebook(n, d, e);
}

int brute_force_nearest(const std::vector<float>& z, const Codebook& cb) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int k = 0; k < cb.size(); ++k) {
    double d = 0.0;
    for (int c = 0; c < cb.dim(); ++c) {
      const double diff = static_cast<double>(z[c]) - cb.row(k)[c];
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

TEST(Quantize, NearestByInspection) {
  Codebook cb(2, 2, {0.0f, 0.0f, 1.0f, 1.0f});
  LatentGrid z(2, 1, 1);
  z.at(0, 0, 0) = 0.1f;
  z.at(1, 0, 0) = 0.2f;
  const QuantizeResult r = quantize(z, cb);
  EXPECT_EQ(r.codes.indices[0], 0);
  EXPECT_EQ(r.quantized.at(0, 0, 0), 0.0f);
  EXPECT_EQ(r.quantized.at(1, 0, 0), 0.0f);

  z.at(0, 0, 0) = 1.0f;
  z.at(1, 0, 0) = 1.0f;
  const QuantizeResult s = quantize(z, cb);
  EXPECT_EQ(s.codes.indices[0], 1);
  EXPECT_EQ(vq_loss(z, s.quantized, 1.0), 0.0);
}

TEST(Quantize, MatchesBruteForceOracle) {
  std::mt19937_64 rng(11);
  const Codebook cb = random_codebook(16, 8, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const LatentGrid z = random_latent(8, 4, 4, rng);
    const QuantizeResult r = quantize(z, cb);
    for (int p = 0; p < z.cells(); ++p) {
      EXPECT_EQ(r.codes.indices[p], brute_force_nearest(z.vector_at(p), cb));
      for (int c = 0; c < 8; ++c) EXPECT_EQ(r.quantized.component(p, c), cb.row(r.codes.indices[p])[c]);
    }
  }
}

TEST(Quantize, TiesResolveToLowestIndex) {
  Codebook cb(3, 1, {1.0f, -1.0f, 1.0f});
  LatentGrid z(1, 1, 1);
  z.at(0, 0, 0) = 0.0f;
  EXPECT_EQ(quantize(z, cb).codes.indices[0], 0);
}

TEST(Quantize, Errors) {
  Codebook cb(4, 3);
  EXPECT_THROW(quantize(LatentGrid(2, 2, 2), cb), ContractError);
  LatentGrid bad(3, 1, 1);
  bad.at(1, 0, 0) = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(quantize(bad, cb), InputError);
  EXPECT_THROW(Codebook(2, 1, {0.0f, std::numeric_limits<float>::infinity()}), InputError);
}

TEST(Quantize, CodesCarryCodebookHash) {
  std::mt19937_64 rng(12);
  const Codebook cb = random_codebook(4, 2, rng);
  const QuantizeResult r = quantize(random_latent(2, 2, 2, rng), cb);
  EXPECT_EQ(r.codes.codebook_id, cb.hash());
  const LatentGrid back = lookup(r.codes, cb);
  EXPECT_EQ(back.tensor().storage(), r.quantized.tensor().storage());
}

TEST(Codebook, UniformInitRange) {
  const Codebook cb = Codebook::uniform_init(64, 8, 3);
  for (float v : cb.embeddings()) {
    EXPECT_GE(v, -1.0f / 64);
    EXPECT_LE(v, 1.0f / 64);
  }
  EXPECT_EQ(Codebook::uniform_init(64, 8, 3).embeddings(), cb.embeddings());
}

TEST(Codebook, FileRoundTripAndIntegrity) {
  std::mt19937_64 rng(13);
  const Codebook cb = random_codebook(5, 3, rng);
  const auto dir = testing::temp_dir("codebook");
  write_codebook(dir / "cb.bin", cb);
  const Codebook back = read_codebook(dir / "cb.bin");
  EXPECT_EQ(back.embeddings(), cb.embeddings());
  EXPECT_EQ(back.hash(), cb.hash());

  Codebook other = cb;
  other.row(0)[0] += 1.0f;
  EXPECT_NE(other.hash(), cb.hash());

  std::string bytes = io::read_file(dir / "cb.bin");
  io::write_file_atomic(dir / "short.bin", bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_codebook(dir / "short.bin"), IntegrityError);
  io::write_file_atomic(dir / "long.bin", bytes + "x");
  EXPECT_THROW(read_codebook(dir / "long.bin"), IntegrityError);
  io::write_file_atomic(dir / "magic.bin", "XXXX" + bytes.substr(4));
  EXPECT_THROW(read_codebook(dir / "magic.bin"), IntegrityError);
}

TEST(StraightThrough, ForwardIsQuantizedAndGradientBypasses) {
  std::mt19937_64 rng(14);
  const Tensor l = testing::random_tensor({2, 2, 2}, rng);
  const Tensor q = testing::random_tensor({2, 2, 2}, rng);
  ag::Tape tape;
  ag::Var lv = tape.leaf(l);
  ag::Var out = straight_through_compose(lv, tape.constant(q));
  EXPECT_EQ(out.value().storage(), q.storage());
  tape.backward(ag::sum_square(out));
  for (std::size_t i = 0; i < q.size(); ++i) EXPECT_FLOAT_EQ(lv.grad()[i], 2.0f * q[i]);
}

TEST(StraightThrough, IdentityWhenLatentEqualsQuantized) {
  std::mt19937_64 rng(15);
  const Tensor l = testing::random_tensor({3, 2, 2}, rng);
  ag::Tape tape;
  ag::Var out = straight_through_compose(tape.leaf(l), tape.constant(l));
  EXPECT_EQ(out.value().storage(), l.storage());
}

TEST(VqLoss, HandCasesAndOracle) {
  LatentGrid z(2, 1, 1), q(2, 1, 1);
  q.at(0, 0, 0) = 1.0f;
  EXPECT_EQ(vq_loss(z, q, 1.0), 2.0);
  EXPECT_EQ(vq_loss(z, z, 1.0), 0.0);
  EXPECT_THROW(vq_loss(z, q, -0.5), InputError);

  std::mt19937_64 rng(16);
  const LatentGrid a = random_latent(4, 3, 3, rng), b = random_latent(4, 3, 3, rng);
  double acc = 0.0;
  for (int p = 0; p < 9; ++p)
    for (int c = 0; c < 4; ++c) {
      const double d = static_cast<double>(a.component(p, c)) - b.component(p, c);
      acc += d * d;
    }
  EXPECT_NEAR(vq_loss(a, b, 1.0), 2.0 * acc / 9.0, 1e-12);

  ag::Tape tape;
  ag::Var v = vq_loss(tape.constant(a.tensor()), tape.constant(b.tensor()), 1.0f);
  EXPECT_NEAR(v.value()[0], 2.0 * acc / 9.0, 1e-5);
}

TEST(VqLoss, StopGradientSplitsTerms) {
  // codebook term pulls q toward z, commitment term (weight w) pulls z toward q.
  const Tensor z({1, 1, 1}, std::vector<float>{0.0f});
  const Tensor q({1, 1, 1}, std::vector<float>{1.0f});
  ag::Tape tape;
  ag::Var zv = tape.leaf(z), qv = tape.leaf(q);
  tape.backward(vq_loss(zv, qv, 0.25f));
  EXPECT_FLOAT_EQ(qv.grad()[0], 2.0f);
  EXPECT_FLOAT_EQ(zv.grad()[0], -0.5f);
}

TEST(KMeans, CentroidOfTwoPoints) {
  const std::vector<float> pts = {0.0f, 0.0f, 2.0f, 2.0f};
  const KMeansResult r = kmeans_aggregate(pts, Codebook(1, 2, {5.0f, -5.0f}), 10, 0);
  EXPECT_FLOAT_EQ(r.codebook.row(0)[0], 1.0f);
  EXPECT_FLOAT_EQ(r.codebook.row(0)[1], 1.0f);
}

TEST(KMeans, ConvergesToClusterMeans) {
  std::mt19937_64 rng(17);
  std::normal_distribution<float> noise(0.0f, 0.1f);
  std::vector<float> pts;
  double mean[2][2] = {{0, 0}, {0, 0}};
  for (int i = 0; i < 200; ++i) {
    const int c = i % 2;
    const float x = 10.0f * c + noise(rng), y = 10.0f * c + noise(rng);
    pts.push_back(x);
    pts.push_back(y);
    mean[c][0] += x / 100.0;
    mean[c][1] += y / 100.0;
  }
  const KMeansResult r = kmeans_aggregate(pts, Codebook(2, 2, {-50.0f, -50.0f, 60.0f, 60.0f}), 20, 1);
  for (int c = 0; c < 2; ++c)
    for (int k = 0; k < 2; ++k) EXPECT_NEAR(r.codebook.row(c)[k], mean[c][k], 1e-5);
  for (std::size_t i = 1; i < r.inertia.size(); ++i) EXPECT_LE(r.inertia[i], r.inertia[i - 1] + 1e-9);
}

TEST(KMeans, IdenticalLatentsReseedDeadEmbeddings) {
  const std::vector<float> pts(3 * 10, 0.5f);
  const KMeansResult r = kmeans_aggregate(pts, Codebook(4, 3, std::vector<float>(12, -3.0f)), 5, 2);
  for (int k = 0; k < 4; ++k)
    for (int c = 0; c < 3; ++c) EXPECT_FLOAT_EQ(r.codebook.row(k)[c], 0.5f);
  EXPECT_GT(r.reseeded, 0);
}

TEST(KMeans, Deterministic) {
  std::mt19937_64 rng(18);
  std::vector<float> pts(400 * 4);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (auto& v : pts) v = u(rng);
  const Codebook cb = Codebook::uniform_init(16, 4, 0);
  EXPECT_EQ(kmeans_aggregate(pts, cb, 10, 7).codebook.embeddings(),
            kmeans_aggregate(pts, cb, 10, 7).codebook.embeddings());
  EXPECT_THROW(kmeans_aggregate({}, cb, 10, 7), InputError);
}

TEST(Gumbel, NoiselessEvaluationEqualsQuantize) {
  std::mt19937_64 rng(19);
  const Codebook cb = random_codebook(8, 3, rng);
  const LatentGrid z = random_latent(3, 3, 3, rng);
  GumbelOptions o;
  o.add_noise = false;
  o.training = false;
  o.temperature = 1e-3;
  const GumbelResult g = gumbel_quantize(z, cb, o);
  const QuantizeResult q = quantize(z, cb);
  EXPECT_EQ(g.codes.indices, q.codes.indices);
  EXPECT_EQ(g.quantized.tensor().storage(), q.quantized.tensor().storage());
}

TEST(Gumbel, EquidistantWeightsAreHalf) {
  Codebook cb(2, 1, {-1.0f, 1.0f});
  LatentGrid z(1, 1, 1);
  for (double t : {0.1, 1.0, 10.0}) {
    GumbelOptions o;
    o.add_noise = false;
    o.temperature = t;
    const GumbelResult g = gumbel_quantize(z, cb, o);
    EXPECT_NEAR(g.weights[0], 0.5, 1e-12);
    EXPECT_NEAR(g.weights[1], 0.5, 1e-12);
  }
}

TEST(Gumbel, TrainingOutputInConvexHullAndReproducible) {
  std::mt19937_64 rng(20);
  const Codebook cb = random_codebook(6, 2, rng);
  const LatentGrid z = random_latent(2, 3, 3, rng);
  GumbelOptions o;
  o.seed = 99;
  const GumbelResult a = gumbel_quantize(z, cb, o);
  const GumbelResult b = gumbel_quantize(z, cb, o);
  EXPECT_EQ(a.codes.indices, b.codes.indices);
  EXPECT_EQ(a.weights, b.weights);
  for (int p = 0; p < 9; ++p) {
    double total = 0.0;
    for (int k = 0; k < 6; ++k) {
      const double w = a.weights[static_cast<std::size_t>(p) * 6 + k];
      EXPECT_GE(w, 0.0);
      total += w;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
    for (int c = 0; c < 2; ++c) {
      double mix = 0.0;
      for (int k = 0; k < 6; ++k) mix += a.weights[static_cast<std::size_t>(p) * 6 + k] * cb.row(k)[c];
      EXPECT_NEAR(a.quantized.component(p, c), mix, 1e-5);
    }
  }
  EXPECT_THROW(gumbel_quantize(z, cb, GumbelOptions{0.0}), InputError);
}

TEST(Gumbel, MixGradients) {
  std::mt19937_64 rng(21);
  const Tensor noise = sample_gumbel_noise(4, 2, 2, rng);
  std::vector<Tensor> in = {testing::random_tensor({3, 2, 2}, rng), testing::random_tensor({4, 3}, rng)};
  auto f = [&](ag::Tape&, std::vector<ag::Var>& v) { return ag::sum_square(gumbel_mix(v[0], v[1], noise, 0.7f)); };
  EXPECT_LT(testing::gradient_error(in, f, 1e-3), 2e-2);
}

TEST(Utilization, CountsAndDeadCodes) {
  const Codebook cb(4, 1);
  CodeGrid g(2, 2, cb.hash());
  const std::vector<CodeGrid> grids = {g};
  const UtilizationStats s = utilization(grids, cb);
  EXPECT_EQ(s.dead_count, 3);
  EXPECT_EQ(s.counts[0], 4);
  EXPECT_EQ(s.sample_size, 1);
  EXPECT_EQ(s.latent_vectors, 4);

  const UtilizationStats empty = utilization(std::vector<CodeGrid>{}, cb);
  EXPECT_EQ(empty.dead_count, 4);

  CodeGrid foreign(2, 2, cb.hash() ^ 1u);
  EXPECT_THROW(utilization(std::vector<CodeGrid>{foreign}, cb), InputError);
}

TEST(Utilization, MatchesHistogramOracle) {
  std::mt19937_64 rng(22);
  const Codebook cb(10, 1);
  std::uniform_int_distribution<int> pick(0, 6);
  std::vector<CodeGrid> grids(5, CodeGrid(3, 3, cb.hash()));
  std::map<int, long> hist;
  for (auto& g : grids)
    for (auto& i : g.indices) {
      i = pick(rng);
      ++hist[i];
    }
  const UtilizationStats s = utilization(grids, cb);
  int dead = 0;
  for (int k = 0; k < 10; ++k) {
    EXPECT_EQ(s.counts[k], hist.count(k) ? hist[k] : 0);
    dead += hist.count(k) ? 0 : 1;
  }
  EXPECT_EQ(s.dead_count, dead);
}

}  // namespace
}  // namespace vqad
