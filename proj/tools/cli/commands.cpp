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

#include "cli/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <set>

#include "vqad/error.hpp"
#include "vqad/io.hpp"

namespace fs = std::filesystem;

namespace vqad::cli {

namespace {

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw InputError("missing " + what + ": " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
  io::write_file_atomic(path, text);
}

Dataset load(const RunConfig& config) {
  const DatasetSpec spec = config.dataset_spec();
  if (spec.layout != Layout::kSynthetic && !fs::is_directory(spec.root)) {
    throw InputError("dataset root does not exist: " + spec.root.string());
  }
  Dataset data = load_dataset(spec);
  if (data.train.empty()) throw InputError("no training images under " + spec.root.string());
  return data;
}

struct Checkpoints {
  Stage1Checkpoint stage1;
  PriorModel prior;
};

Checkpoints load_checkpoints(const RunConfig& config) {
  require_file(config.stage1_path(), "stage-1 checkpoint");
  require_file(config.prior_path(), "prior checkpoint");
  Checkpoints c{load_stage1(config.stage1_path()), load_prior(config.prior_path())};
  if (c.prior.codebook_id() != c.stage1.codebook.hash()) {
    throw IntegrityError("prior checkpoint " + config.prior_path().string() + " was fitted on codebook " +
                         io::hex64(c.prior.codebook_id()) + " but " + config.stage1_path().string() +
                         " holds codebook " + io::hex64(c.stage1.codebook.hash()));
  }
  return c;
}

Image fit(Image image, const RunConfig& config) {
  const int h = config.get_int("data.height"), w = config.get_int("data.width");
  if (image.height() != h || image.width() != w) image = resize_bilinear(image, h, w);
  return image;
}

}  // namespace

void cmd_gen_synthetic(const RunConfig& config, std::ostream& log) {
  const SyntheticBenchmark b = config.synthetic();
  generate_synthetic(b, config.out());
  log << "wrote synthetic " << to_string(b.texture) << " benchmark to " << config.out().string() << " ("
      << b.num_train << " train, " << b.num_test_normal << " normal, " << b.num_test_anomalous
      << " anomalous)\n";
}

void cmd_train_vqvae(const RunConfig& config, std::ostream& log) {
  const Dataset data = load(config);
  const AutoencoderConfig ae = config.autoencoder_config();
  Stage1Options options = config.stage1_options();
  options.on_epoch = [&](const EpochMetrics& m) {
    char line[160];
    std::snprintf(line, sizeof line, "epoch %d rec %.5f vq %.5f dead %d\n", m.epoch, m.rec_loss, m.vq_loss,
                  m.dead_codes);
    log << line << std::flush;
  };
  log << "training stage 1 on " << data.train.size() << " images (" << data.excluded << " excluded), quantizer "
      << to_string(options.quantizer) << '\n';
  const Stage1Result result = train_stage1(data.train, ae, options);
  fs::create_directories(config.out());
  save_stage1(config.stage1_path(), result.model, result.codebook, options.epochs);
  write_text(config.out() / "stage1_metrics.csv", epoch_metrics_csv(result.history));
  log << "codebook " << io::hex64(result.codebook.hash()) << " -> " << config.stage1_path().string() << '\n';
}

void cmd_aggregate_codebook(const RunConfig& config, std::ostream& log) {
  require_file(config.stage1_path(), "stage-1 checkpoint");
  const Dataset data = load(config);
  Stage1Checkpoint ckpt = load_stage1(config.stage1_path());

  std::vector<float> latents;
  for (const auto& img : data.train) {
    const LatentGrid z = ckpt.model.encode(img);
    for (int p = 0; p < z.cells(); ++p)
      for (int c = 0; c < z.dim(); ++c) latents.push_back(z.component(p, c));
  }
  const int before = utilization(encode_all(ckpt.model, ckpt.codebook, data.train), ckpt.codebook).dead_count;
  const KMeansResult km =
      kmeans_aggregate(latents, ckpt.codebook, config.get_int("quantizer.kmeans_iters"), config.seed());
  const int after = utilization(encode_all(ckpt.model, km.codebook, data.train), km.codebook).dead_count;

  fs::create_directories(config.out());
  save_stage1(config.stage1_path(), ckpt.model, km.codebook, ckpt.epoch);
  write_text(config.out() / "aggregate.csv", "stage,dead_codes\nbefore," + std::to_string(before) +
                                                 "\nafter," + std::to_string(after) + "\n");
  log << "dead codes " << before << " -> " << after << " (" << km.iterations << " iterations, " << km.reseeded
      << " reseeded); codebook " << io::hex64(km.codebook.hash()) << '\n';
}

void cmd_train_prior(const RunConfig& config, std::ostream& log) {
  require_file(config.stage1_path(), "stage-1 checkpoint");
  const Dataset data = load(config);
  const Stage1Checkpoint ckpt = load_stage1(config.stage1_path());
  const std::vector<CodeGrid> grids = encode_all(ckpt.model, ckpt.codebook, data.train);

  PriorConfig pc = config.prior_config();
  pc.vocab_size = ckpt.codebook.size();
  PriorTrainOptions options = config.prior_train_options();
  options.on_epoch = [&](const PriorEpochMetrics& m) {
    char line[96];
    std::snprintf(line, sizeof line, "epoch %d nll %.5f\n", m.epoch, m.nll);
    log << line << std::flush;
  };
  log << "training prior on " << grids.size() << " code grids\n";
  const PriorTrainResult result = train_prior(grids, pc, options);
  fs::create_directories(config.out());
  save_prior(config.prior_path(), result.model, options.epochs);
  write_text(config.out() / "prior_metrics.csv", prior_metrics_csv(result.history));
  log << "prior -> " << config.prior_path().string() << '\n';
}

void cmd_detect(const RunConfig& config, const std::vector<std::string>& inputs, std::ostream& log) {
  if (inputs.empty()) throw InputError("detect: no input images given");
  for (const auto& in : inputs) require_file(in, "input image");
  const Checkpoints ck = load_checkpoints(config);
  const RestorationConfig rc = config.restoration_config();
  const double mask_threshold = config.get_double("detect.mask_threshold");
  const int channels = config.get_int("data.channels");

  fs::create_directories(config.out());
  std::string records;
  std::set<std::string> used;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const fs::path path = inputs[i];
    // Same-named inputs from different folders get the folder as a prefix.
    std::string stem = path.stem().string();
    if (used.count(stem)) stem = path.parent_path().filename().string() + "_" + stem;
    while (used.count(stem)) stem += "_";
    used.insert(stem);
    const Image image = fit(read_image(path, channels), config);
    RestorationConfig cfg = rc;
    cfg.seed = rc.seed + i;
    const Detection d = detect(image, ck.stage1.model, ck.stage1.codebook, ck.prior, cfg);
    write_image(config.out() / (stem + "_restored.png"), d.restored);
    write_image16(config.out() / (stem + "_heatmap.png"), d.map.height, d.map.width, d.map.scores);
    write_mask(config.out() / (stem + "_mask.png"), binarize(d.map, mask_threshold));
    records += detection_record(stem, d) + "\n";
    log << stem << ": " << d.restoration.replacements << " codes replaced, max score " << d.map.max() << '\n';
  }
  write_text(config.out() / "detections.jsonl", records);
}

void cmd_evaluate(const RunConfig& config, std::ostream& log) {
  const Dataset data = load(config);
  const Checkpoints ck = load_checkpoints(config);
  const RestorationConfig rc = config.restoration_config();
  if (data.test.empty()) throw UndefinedMetricError("evaluate: dataset has no test images");

  TrainedPipeline p;
  p.autoencoder = ck.stage1.model;
  p.codebook = ck.stage1.codebook;
  p.prior = ck.prior;
  const std::vector<Detection> det = detect_all(p, data.test, rc);
  std::vector<AnomalyMap> maps;
  for (const auto& d : det) maps.push_back(d.map);
  const double rec = mean_reconstruction_loss(p.autoencoder, p.codebook, data.train,
                                              parse_reconstruction_norm(config.get("train.loss")));
  const MetricsReport report = evaluate_maps(maps, data.test, rec, config.get_int("evaluate.num_thresholds"));
  fs::create_directories(config.out());
  write_text(config.out() / "metrics.csv", metrics_csv(report));
  write_text(config.out() / "report.txt", metrics_text(report));
  char line[160];
  std::snprintf(line, sizeof line, "auroc %.4f dice %.4f (threshold %.4g) rec_loss %.5f\n", report.auroc,
                report.dice, report.dice_threshold, report.rec_loss);
  log << line;
}

void cmd_ablate(const RunConfig& config, std::ostream& log) {
  const Dataset data = load(config);
  std::vector<AblationVariant> variants;
  for (const auto& v : config.get_list("ablate.variants")) variants.push_back(parse_ablation_variant(v));
  std::vector<std::uint64_t> seeds;
  for (int s : config.get_int_list("ablate.seeds")) {
    if (s < 0) throw InputError("ablate.seeds must be non-negative");
    seeds.push_back(static_cast<std::uint64_t>(s));
  }
  log << "ablation: " << variants.size() << " variants x " << seeds.size() << " seeds\n";
  const AblationTable table = run_ablation(data, variants, seeds, config.pipeline_settings());
  fs::create_directories(config.out());
  write_text(config.out() / "ablation.csv", ablation_csv(table));
  write_text(config.out() / "ablation.txt", ablation_text(table));
  log << ablation_text(table);
}

}  // namespace vqad::cli
