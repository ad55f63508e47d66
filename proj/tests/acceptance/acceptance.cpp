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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli/app.hpp"
#include "test_util.hpp"
#include "vqad/autograd.hpp"
#include "vqad/evaluation.hpp"
#include "vqad/io.hpp"
#include "vqad/prior.hpp"
#include "vqad/quantizer.hpp"
#include "vqad/restoration.hpp"

namespace vqad {
namespace {

namespace fs = std::filesystem;

// Pinned tolerances and limits.
constexpr int kOracleVectors = 1000;
constexpr double kOracleSeconds = 10.0;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradFdStep = 1e-4;
constexpr double kGradSeconds = 30.0;
constexpr int kKMeansClusters = 32;
constexpr int kDeadBeforeMin = 8;
constexpr int kDeadAfterMax = 2;
constexpr double kKMeansSeconds = 60.0;
constexpr double kNormTol = 1e-5;
constexpr int kRestoreTrials = 20;
constexpr int kRestoreMaxCorrupt = 3;
constexpr double kRestoreSeconds = 300.0;
constexpr double kMinAuroc = 0.90;
constexpr double kMinDice = 0.40;
constexpr double kPipelineSeconds = 7200.0;
constexpr int kMetricCases = 10;
constexpr int kMetricPixels = 10000;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// 1. quantize against exhaustive argmin.
Outcome quantizer_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  long mismatches = 0, total = 0;
  for (int d : {1, 3, 8}) {
    for (int n : {2, 17, 64}) {
      std::uniform_real_distribution<float> u(-1.0f, 1.0f);
      std::vector<float> emb(static_cast<std::size_t>(n) * d);
      for (auto& v : emb) v = u(rng);
      const Codebook cb(n, d, emb);
      LatentGrid z(d, 1, kOracleVectors);
      for (auto& v : z.tensor().storage()) v = u(rng);
      const QuantizeResult q = quantize(z, cb);
      for (int p = 0; p < kOracleVectors; ++p) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int k = 0; k < n; ++k) {
          double acc = 0.0;
          for (int c = 0; c < d; ++c) {
            const double diff = static_cast<double>(z.component(p, c)) - emb[static_cast<std::size_t>(k) * d + c];
            acc += diff * diff;
          }
          if (acc < best_d) {
            best_d = acc;
            best = k;
          }
        }
        mismatches += q.codes.indices[p] != best;
        ++total;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < kOracleSeconds,
          std::to_string(total) + " vectors over 9 (d, n) settings, " + std::to_string(mismatches) +
              " mismatches, " + fmt("%.2f s", secs)};
}

// 2. Straight-through gradient of a toy decoder loss against central
// differences of the surrogate in which the codes are frozen.
struct ToyProblem {
  int d = 4, h = 4, w = 4;
  std::vector<float> z0, q, weight, target;
  float bias = 0.1f;
  float commitment = 0.25f;
};

double toy_loss_double(const ToyProblem& t, const std::vector<double>& z) {
  const int cells = t.h * t.w;
  double rec = 0.0;
  for (int y = 0; y < t.h; ++y)
    for (int x = 0; x < t.w; ++x) {
      double acc = t.bias;
      for (int c = 0; c < t.d; ++c)
        for (int ky = 0; ky < 3; ++ky)
          for (int kx = 0; kx < 3; ++kx) {
            const int yy = y + ky - 1, xx = x + kx - 1;
            if (yy < 0 || yy >= t.h || xx < 0 || xx >= t.w) continue;
            const std::size_t i = static_cast<std::size_t>(c) * cells + yy * t.w + xx;
            acc += t.weight[(c * 3 + ky) * 3 + kx] * (t.q[i] + z[i] - t.z0[i]);
          }
      const double diff = std::tanh(acc) - t.target[y * t.w + x];
      rec += diff * diff;
    }
  double commit = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) commit += (z[i] - t.q[i]) * (z[i] - t.q[i]);
  return rec / cells + t.commitment * commit / cells;
}

Outcome straight_through_check() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  int grids = 0;
  for (int trial = 0; trial < 5; ++trial) {
    std::mt19937_64 rng(200 + trial);
    ToyProblem t;
    t.h = t.w = 1 + trial % 4;
    const Tensor z0 = testing::random_tensor({t.d, t.h, t.w}, rng, -1.0f, 1.0f);
    const Codebook cb = Codebook::from_tensor(testing::random_tensor({8, t.d}, rng, -1.0f, 1.0f));
    const Tensor weight = testing::random_tensor({1, t.d, 3, 3}, rng, -0.5f, 0.5f);
    const Tensor target = testing::random_tensor({1, t.h, t.w}, rng, -0.5f, 0.5f);
    const QuantizeResult qr = quantize(LatentGrid(z0), cb);
    t.z0 = z0.storage();
    t.q = qr.quantized.tensor().storage();
    t.weight = weight.storage();
    t.target = target.storage();

    ag::Tape tape;
    ag::Var z = tape.leaf(z0);
    ag::Var q = tape.constant(qr.quantized.tensor());
    ag::Var st = straight_through_compose(z, q);
    ag::Var out = ag::tanh(ag::conv2d(st, tape.constant(weight), tape.constant(Tensor({1}, std::vector<float>{t.bias})),
                                      ag::ConvSpec{1, 1, {}}));
    ag::Var loss = ag::add(ag::mean_square(ag::sub(out, tape.constant(target))), vq_loss(z, q, t.commitment));
    tape.backward(loss);

    std::vector<double> zd(t.z0.begin(), t.z0.end());
    std::vector<double> fd(zd.size());
    for (std::size_t i = 0; i < zd.size(); ++i) {
      const double keep = zd[i];
      zd[i] = keep + kGradFdStep;
      const double up = toy_loss_double(t, zd);
      zd[i] = keep - kGradFdStep;
      const double down = toy_loss_double(t, zd);
      zd[i] = keep;
      fd[i] = (up - down) / (2.0 * kGradFdStep);
    }
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < fd.size(); ++i) {
      num = std::max(num, std::fabs(fd[i] - z.grad()[i]));
      den = std::max(den, std::fabs(fd[i]));
    }
    worst = std::max(worst, num / den);
    ++grids;
  }
  const double secs = seconds_since(t0);
  return {worst <= kGradRelTol && secs < kGradSeconds,
          std::to_string(grids) + " grids up to 4x4, max relative error " + fmt("%.3g", worst) + " (limit " +
              fmt("%.0e", kGradRelTol) + "), " + fmt("%.2f s", secs)};
}

// 3. vq_loss identities.
Outcome vq_loss_identities() {
  std::mt19937_64 rng(300);
  bool zero_ok = true;
  for (double w : {0.0, 0.25, 1.0, 2.0}) {
    const LatentGrid z(testing::random_tensor({5, 3, 3}, rng, -2.0f, 2.0f));
    zero_ok = zero_ok && vq_loss(z, z, w) == 0.0;
  }
  LatentGrid a(2, 1, 1), b(2, 1, 1);
  b.at(0, 0, 0) = 1.0f;  // z = (0, 0), z_q = (1, 0), w = 1
  const double one_cell = vq_loss(a, b, 1.0);
  LatentGrid c(1, 1, 2), e(1, 1, 2);
  e.at(0, 0, 0) = 1.0f;  // two cells at distance 1, mean over cells
  e.at(0, 0, 1) = -1.0f;
  const double two_cells = vq_loss(c, e, 1.0);
  return {zero_ok && one_cell == 2.0 && two_cells == 2.0,
          "vq_loss(z, z, w) = 0 for w in {0, 0.25, 1, 2}: " + std::string(zero_ok ? "yes" : "no") +
              "; two-point cases " + fmt("%.17g and %.17g", one_cell, two_cells)};
}

// 4. k-means aggregation revives dead codes.
Outcome kmeans_effectiveness() {
  const auto t0 = Clock::now();
  const int d = 8, per_cluster = 100, n = kKMeansClusters;
  std::mt19937_64 rng(400);
  std::uniform_real_distribution<float> center(-10.0f, 10.0f);
  std::normal_distribution<float> noise(0.0f, 0.1f);
  std::vector<float> centers(static_cast<std::size_t>(n) * d);
  for (auto& v : centers) v = center(rng);
  std::vector<float> latents;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < per_cluster; ++i)
      for (int c = 0; c < d; ++c) latents.push_back(centers[k * d + c] + noise(rng));

  // Adversarial start: 8 embeddings on cluster centres, the other 24 parked
  // far outside the data where no latent selects them.
  std::vector<float> init(static_cast<std::size_t>(n) * d);
  for (int k = 0; k < n; ++k)
    for (int c = 0; c < d; ++c)
      init[k * d + c] = k < 8 ? centers[k * d + c] : 100.0f + static_cast<float>(k) + noise(rng);
  const Codebook before(n, d, init);

  auto dead = [&](const Codebook& cb) {
    std::vector<int> idx;
    for (std::size_t p = 0; p < latents.size() / d; ++p)
      idx.push_back(nearest_embedding(std::span<const float>(latents.data() + p * d, d), cb));
    return utilization_of_indices(idx, cb.size()).dead_count;
  };
  const int dead_before = dead(before);
  const KMeansResult km = kmeans_aggregate(latents, before, 20, 401);
  const int dead_after = dead(km.codebook);
  const double secs = seconds_since(t0);
  return {dead_before >= kDeadBeforeMin && dead_after <= kDeadAfterMax && secs < kKMeansSeconds,
          "dead codes " + std::to_string(dead_before) + " -> " + std::to_string(dead_after) + " (n = 32, " +
              std::to_string(km.iterations) + " iterations, " + std::to_string(km.reseeded) + " reseeds), " +
              fmt("%.2f s", secs)};
}

PriorConfig small_prior(int vocab, int h, int w) {
  PriorConfig c;
  c.vocab_size = vocab;
  c.height = h;
  c.width = w;
  c.hidden = 16;
  c.layers = 3;
  c.first_kernel = 3;
  return c;
}

void randomize(PriorModel& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 0.5f);
  for (auto& p : m.params().params())
    for (auto& v : p.value.storage()) v = n(rng);
}

CodeGrid random_grid(int h, int w, int vocab, std::mt19937_64& rng) {
  CodeGrid g(h, w);
  std::uniform_int_distribution<int> pick(0, vocab - 1);
  for (auto& i : g.indices) i = pick(rng);
  return g;
}

// 5. Conditionals are distributions and respect raster causality.
Outcome prior_causality() {
  std::mt19937_64 rng(500);
  PriorModel masked(small_prior(16, 4, 4), 1);
  randomize(masked, 2);
  double worst_sum = 0.0;
  int probes_ok = 0;
  for (int g = 0; g < 5; ++g) {
    const CodeGrid grid = random_grid(4, 4, 16, rng);
    const Conditionals c = masked.conditionals(grid);
    for (int p = 0; p < c.cells(); ++p) {
      double s = 0.0;
      for (double v : c.at(p)) s += v;
      worst_sum = std::max(worst_sum, std::fabs(s - 1.0));
    }
  }
  const CodeGrid probe_grid = random_grid(4, 4, 16, rng);
  for (int p = 0; p < 16; ++p) probes_ok += causality_probe(masked, probe_grid, p, 7);

  PriorConfig open = small_prior(16, 4, 4);
  open.masked = false;
  PriorModel unmasked(open, 1);
  randomize(unmasked, 2);
  int control_violations = 0;
  for (int p = 0; p < 16; ++p) control_violations += !causality_probe(unmasked, probe_grid, p, 7);

  return {worst_sum <= kNormTol && probes_ok == 16 && control_violations > 0,
          "max |sum - 1| " + fmt("%.2g", worst_sum) + ", probe passes at " + std::to_string(probes_ok) +
              "/16 positions, unmasked control violates at " + std::to_string(control_violations) + "/16"};
}

// 6. Constant-grid restoration.
Outcome toy_restoration() {
  const auto t0 = Clock::now();
  const int vocab = 16;
  const std::vector<int> constants = {2, 7, 11};
  std::vector<CodeGrid> train;
  for (int r = 0; r < 6; ++r)
    for (int v : constants) {
      CodeGrid g(4, 4);
      std::fill(g.indices.begin(), g.indices.end(), v);
      train.push_back(g);
    }
  PriorTrainOptions o;
  o.epochs = 40;
  o.batch_size = 6;
  o.learning_rate = 1e-2f;
  o.seed = 600;
  const PriorModel model = train_prior(train, small_prior(vocab, 4, 4), o).model;

  std::mt19937_64 rng(601);
  int exact = 0;
  for (int trial = 0; trial < kRestoreTrials; ++trial) {
    const int base = constants[trial % constants.size()];
    const int k = 1 + trial % kRestoreMaxCorrupt;
    // The first cell has no context to restore from, so it stays clean.
    std::vector<int> cells(15);
    std::iota(cells.begin(), cells.end(), 1);
    std::shuffle(cells.begin(), cells.end(), rng);
    CodeGrid g(4, 4);
    std::fill(g.indices.begin(), g.indices.end(), base);
    std::vector<std::uint8_t> expected(16, 0);
    std::uniform_int_distribution<int> pick(0, vocab - 2);
    for (int i = 0; i < k; ++i) {
      int v = pick(rng);
      if (v >= base) ++v;
      g.indices[cells[i]] = v;
      expected[cells[i]] = 1;
    }
    const CodeRestoration r = restore_codes(g, model, {});
    const bool ok = std::all_of(r.codes.indices.begin(), r.codes.indices.end(), [&](int v) { return v == base; }) &&
                    r.replaced == expected;
    exact += ok;
  }
  const double secs = seconds_since(t0);
  return {exact == kRestoreTrials && secs < kRestoreSeconds,
          std::to_string(exact) + "/" + std::to_string(kRestoreTrials) +
              " corrupted grids (1-3 cells) restored exactly with matching replacement masks, " + fmt("%.2f s", secs)};
}

// 8. Metric oracles.
Outcome metric_oracles() {
  std::mt19937_64 rng(800);
  int exact = 0;
  for (int t = 0; t < kMetricCases; ++t) {
    std::vector<float> s(kMetricPixels);
    std::vector<std::uint8_t> y(kMetricPixels);
    std::uniform_int_distribution<int> level(0, 999);  // coarse levels produce ties
    std::bernoulli_distribution pos(0.05 + 0.05 * t);
    for (int i = 0; i < kMetricPixels; ++i) {
      y[i] = pos(rng);
      s[i] = static_cast<float>(level(rng) + (y[i] ? 150 : 0)) / 1000.0f;
    }
    std::int64_t twice_wins = 0, npos = 0, nneg = 0;
    for (int i = 0; i < kMetricPixels; ++i) (y[i] ? npos : nneg)++;
    for (int i = 0; i < kMetricPixels; ++i) {
      if (!y[i]) continue;
      for (int j = 0; j < kMetricPixels; ++j) {
        if (y[j]) continue;
        twice_wins += s[i] > s[j] ? 2 : (s[i] == s[j] ? 1 : 0);
      }
    }
    const double oracle = static_cast<double>(twice_wins) / (2.0 * static_cast<double>(npos) * nneg);
    exact += auroc(s, y) == oracle;
  }
  auto mask = [](std::vector<std::uint8_t> v) {
    BinaryMask m(1, static_cast<int>(v.size()));
    m.values = std::move(v);
    return m;
  };
  const double d1 = dice(mask({1, 1, 0, 0}), mask({1, 1, 0, 0}));
  const double d0 = dice(mask({1, 1, 0, 0}), mask({0, 0, 1, 1}));
  const double d23 = dice(mask({1, 0, 0, 0}), mask({1, 1, 0, 0}));
  const bool dice_ok = d1 == 1.0 && d0 == 0.0 && d23 == 2.0 / 3.0;
  return {exact == kMetricCases && dice_ok,
          "auroc equals the pairwise oracle on " + std::to_string(exact) + "/10 cases of 10^4 pixels; dice " +
              fmt("%.4f / %.4f / %.4f", d1, d0, d23)};
}

// CLI driven end-to-end runs for criteria 7 and 9.
struct CliResult {
  int code = 0;
  std::string err;
};

CliResult vqad(std::vector<std::string> args) {
  args.insert(args.begin(), "vqad");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, err.str()};
}

struct PooledRow {
  bool found = false;
  double auroc = 0.0;
  double dice = 0.0;
};

PooledRow pooled_row(const std::string& csv) {
  PooledRow r;
  const auto at = csv.find("\npooled,");
  if (at == std::string::npos) return r;
  std::istringstream line(csv.substr(at + 1, csv.find('\n', at + 1) - at - 1));
  std::string field;
  std::vector<std::string> f;
  while (std::getline(line, field, ',')) f.push_back(field);
  if (f.size() != 6) return r;
  r.found = true;
  r.auroc = std::stod(f[3]);
  r.dice = std::stod(f[4]);
  return r;
}

// gen-synthetic, train-vqvae, train-prior, evaluate at defaults, seed 0.
bool full_pipeline(const fs::path& dir, std::string& error) {
  const std::string data = (dir / "data").string(), out = (dir / "run").string();
  const std::vector<std::vector<std::string>> steps = {
      {"gen-synthetic", "--seed", "0", "--out", data},
      {"train-vqvae", "--seed", "0", "--data.root", data, "--out", out},
      {"train-prior", "--seed", "0", "--data.root", data, "--out", out},
      {"evaluate", "--seed", "0", "--data.root", data, "--out", out},
  };
  for (const auto& s : steps) {
    const CliResult r = vqad(s);
    if (r.code != 0) {
      error = s.front() + " failed: " + r.err;
      return false;
    }
  }
  return true;
}

struct PipelineRuns {
  bool ok = false;
  std::string error;
  double seconds = 0.0;
  std::string first_csv, second_csv, reconstruction_csv;
};

PipelineRuns run_pipelines() {
  PipelineRuns runs;
  const fs::path root = testing::temp_dir("acceptance_pipeline");
  const auto t0 = Clock::now();
  if (!full_pipeline(root / "a", runs.error)) return runs;
  runs.seconds = seconds_since(t0);
  runs.first_csv = io::read_file(root / "a" / "run" / "metrics.csv");

  const std::string run = (root / "a" / "run").string();
  const CliResult r = vqad({"evaluate", "--seed", "0", "--data.root", (root / "a" / "data").string(), "--out",
                            (root / "a" / "reconstruction").string(), "--checkpoint.stage1", run + "/stage1.ckpt",
                            "--checkpoint.prior", run + "/prior.ckpt", "--restoration.threshold=-inf"});
  if (r.code != 0) {
    runs.error = "reconstruction evaluate failed: " + r.err;
    return runs;
  }
  runs.reconstruction_csv = io::read_file(root / "a" / "reconstruction" / "metrics.csv");

  if (!full_pipeline(root / "b", runs.error)) return runs;
  runs.second_csv = io::read_file(root / "b" / "run" / "metrics.csv");
  runs.ok = true;
  return runs;
}

// 7. End-to-end synthetic benchmark.
Outcome synthetic_benchmark(const PipelineRuns& runs) {
  if (!runs.ok && runs.first_csv.empty()) return {false, runs.error};
  const PooledRow restore = pooled_row(runs.first_csv);
  const PooledRow recon = pooled_row(runs.reconstruction_csv);
  if (!restore.found || !recon.found) return {false, "pooled row missing from metrics.csv"};
  const bool pass = restore.auroc >= kMinAuroc && restore.dice >= kMinDice && restore.auroc > recon.auroc &&
                    runs.seconds < kPipelineSeconds;
  return {pass, fmt("restoration AUROC %.4f DICE %.4f; reconstruction (tau = -inf) AUROC %.4f DICE %.4f", restore.auroc,
                    restore.dice, recon.auroc, recon.dice) +
                    fmt("; limits AUROC >= %.2f, DICE >= %.2f; %.0f s", kMinAuroc, kMinDice, runs.seconds)};
}

// 9. Determinism of the full pipeline.
Outcome determinism(const PipelineRuns& runs) {
  if (!runs.ok) return {false, runs.error};
  const bool same = runs.first_csv == runs.second_csv;
  return {same, std::string(same ? "identical" : "different") + " metrics.csv from two seed-0 runs (" +
                    std::to_string(runs.first_csv.size()) + " bytes)"};
}

}  // namespace
}  // namespace vqad

int main() {
  using namespace vqad;
  struct Criterion {
    int id;
    std::string name;
    std::function<Outcome()> run;
  };
  PipelineRuns runs;
  bool pipelines_done = false;
  auto pipelines = [&]() -> const PipelineRuns& {
    if (!pipelines_done) {
      runs = run_pipelines();
      pipelines_done = true;
    }
    return runs;
  };
  const std::vector<Criterion> criteria = {
      {1, "quantizer oracle equivalence", quantizer_oracle},
      {2, "straight-through gradient check", straight_through_check},
      {3, "vq-loss identities", vq_loss_identities},
      {4, "k-means aggregation effectiveness", kmeans_effectiveness},
      {5, "prior causality and normalization", prior_causality},
      {6, "toy restoration exactness", toy_restoration},
      {7, "end-to-end synthetic benchmark", [&] { return synthetic_benchmark(pipelines()); }},
      {8, "metric oracles", metric_oracles},
      {9, "determinism", [&] { return determinism(pipelines()); }},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %d %s: %s (%s)\n", c.id, o.pass ? "PASS" : "FAIL", c.name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
