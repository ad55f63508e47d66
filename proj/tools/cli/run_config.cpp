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

#include "cli/run_config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "vqad/error.hpp"

namespace vqad::cli {

const std::vector<KeyInfo>& config_keys() {
  static const std::vector<KeyInfo> keys = {
      {"seed", "0", "seed for every stochastic component"},
      {"out", "out", "output directory (dataset root for gen-synthetic)"},
      {"device", "cpu", "compute device; only cpu is available"},

      {"data.root", "", "dataset root directory"},
      {"data.layout", "mvtec", "mvtec | flat_slices | synthetic"},
      {"data.height", "64", "target image height"},
      {"data.width", "64", "target image width"},
      {"data.channels", "1", "1 (grayscale) or 3 (RGB)"},
      {"data.exclusion_threshold", "0.05", "drop training images with lower mean intensity"},

      {"synthetic.num_train", "200", "anomaly-free training images"},
      {"synthetic.num_test_normal", "20", "anomaly-free test images"},
      {"synthetic.num_test_anomalous", "20", "test images with one square defect"},
      {"synthetic.texture", "stripes", "stripes | checker | blobs"},
      {"synthetic.height", "64", "synthetic image height"},
      {"synthetic.width", "64", "synthetic image width"},

      {"autoencoder.channels", "16,32,32,16", "encoder stage widths; last equals latent_dim"},
      {"autoencoder.downsample", "4", "power-of-two spatial reduction"},
      {"autoencoder.latent_dim", "16", "embedding dimension d"},
      {"autoencoder.residual_blocks", "false", "insert residual blocks"},

      {"quantizer.kind", "distance+kmeans", "distance | gumbel | distance+kmeans"},
      {"quantizer.codebook_size", "64", "number of embeddings n"},
      {"quantizer.commitment", "1.0", "commitment weight"},
      {"quantizer.kmeans_iters", "10", "Lloyd iterations per aggregation"},
      {"quantizer.kmeans_pool", "262144", "latent vectors pooled per aggregation"},
      {"quantizer.gumbel_tau_start", "1.0", "initial Gumbel-softmax temperature"},
      {"quantizer.gumbel_tau_end", "0.1", "final Gumbel-softmax temperature"},

      {"train.epochs", "40", "stage-1 epochs"},
      {"train.batch_size", "16", "stage-1 batch size"},
      {"train.lr", "0.0002", "stage-1 Adam learning rate"},
      {"train.loss", "l1", "reconstruction norm: l1 | l2"},

      {"prior.hidden", "32", "prior feature width"},
      {"prior.layers", "5", "masked layers"},
      {"prior.first_kernel", "5", "first-layer kernel size (odd)"},
      {"prior.epochs", "30", "prior epochs"},
      {"prior.batch_size", "16", "prior batch size"},
      {"prior.lr", "0.001", "prior Adam learning rate"},

      {"restoration.threshold", "", "log-likelihood cutoff; empty means log(1/n); -inf disables"},
      {"restoration.mode", "likelihood", "likelihood | percentile"},
      {"restoration.percentile", "5", "percentile mode: flag the lowest q% of positions"},
      {"restoration.rule", "argmax", "argmax | sample"},
      {"restoration.sequential", "true", "rescore against the repaired prefix"},
      {"restoration.smoothing_radius", "2", "Gaussian smoothing radius in pixels"},

      {"checkpoint.stage1", "", "stage-1 checkpoint (default <out>/stage1.ckpt)"},
      {"checkpoint.prior", "", "prior checkpoint (default <out>/prior.ckpt)"},

      {"detect.mask_threshold", "0.2", "residual level written as anomalous in mask.png"},
      {"evaluate.num_thresholds", "101", "quantile thresholds in the DICE sweep"},

      {"ablate.variants", "distance,distance-residual,gumbel,kmeans-reduced,kmeans",
       "comma-separated quantizer variants"},
      {"ablate.seeds", "0", "comma-separated seeds"},
  };
  return keys;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& what, const std::string& value) {
  throw InputError("config key '" + key + "': expected " + what + ", got '" + value + "'");
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& k : config_keys()) values_[k.key] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw InputError("unknown config key '" + key + "'");
  it->second = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw InputError("unknown config key '" + key + "'");
  return it->second;
}

void RunConfig::parse_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw InputError(origin + ":" + std::to_string(lineno) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InputError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    if (!values_.count(key)) {
      throw InputError(origin + ":" + std::to_string(lineno) + ": unknown config key '" + key + "'");
    }
    values_[key] = trim(line.substr(eq + 1));
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  parse_text(ss.str(), path.string());
}

int RunConfig::get_int(const std::string& key) const {
  const std::string& v = get(key);
  char* end = nullptr;
  errno = 0;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || errno || x < std::numeric_limits<int>::min() ||
      x > std::numeric_limits<int>::max())
    bad_value(key, "an integer", v);
  return static_cast<int>(x);
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const std::string& v = get(key);
  char* end = nullptr;
  errno = 0;
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (v.empty() || v[0] == '-' || *end != '\0' || errno) bad_value(key, "a non-negative integer", v);
  return x;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0') bad_value(key, "a number", v);
  return x;
}

bool RunConfig::get_bool(const std::string& key) const {
  std::string v = get(key);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, "a boolean", v);
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const {
  std::vector<std::string> out;
  std::istringstream in(get(key));
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
  std::vector<int> out;
  for (const auto& item : get_list(key)) {
    char* end = nullptr;
    const long x = std::strtol(item.c_str(), &end, 10);
    if (*end != '\0') bad_value(key, "a comma-separated integer list", get(key));
    out.push_back(static_cast<int>(x));
  }
  return out;
}

std::filesystem::path RunConfig::stage1_path() const {
  const std::string& p = get("checkpoint.stage1");
  return p.empty() ? out() / "stage1.ckpt" : std::filesystem::path(p);
}

std::filesystem::path RunConfig::prior_path() const {
  const std::string& p = get("checkpoint.prior");
  return p.empty() ? out() / "prior.ckpt" : std::filesystem::path(p);
}

SyntheticBenchmark RunConfig::synthetic() const {
  SyntheticBenchmark b;
  b.num_train = get_int("synthetic.num_train");
  b.num_test_normal = get_int("synthetic.num_test_normal");
  b.num_test_anomalous = get_int("synthetic.num_test_anomalous");
  b.texture = parse_texture(get("synthetic.texture"));
  b.height = get_int("synthetic.height");
  b.width = get_int("synthetic.width");
  b.seed = seed();
  return b;
}

DatasetSpec RunConfig::dataset_spec() const {
  DatasetSpec spec;
  spec.root = get("data.root");
  spec.layout = parse_layout(get("data.layout"));
  spec.height = get_int("data.height");
  spec.width = get_int("data.width");
  spec.channels = get_int("data.channels");
  spec.exclusion_threshold = get_double("data.exclusion_threshold");
  spec.synthetic = synthetic();
  if (spec.layout != Layout::kSynthetic && spec.root.empty()) {
    throw InputError("data.root is not set");
  }
  return spec;
}

AutoencoderConfig RunConfig::autoencoder_config() const {
  AutoencoderConfig c;
  c.channels = get_int_list("autoencoder.channels");
  c.downsample_factor = get_int("autoencoder.downsample");
  c.latent_dim = get_int("autoencoder.latent_dim");
  c.use_residual_blocks = get_bool("autoencoder.residual_blocks");
  c.codebook_size = get_int("quantizer.codebook_size");
  c.image_channels = get_int("data.channels");
  c.validate();
  return c;
}

Stage1Options RunConfig::stage1_options() const {
  Stage1Options o;
  o.quantizer = parse_quantizer_kind(get("quantizer.kind"));
  o.epochs = get_int("train.epochs");
  o.batch_size = get_int("train.batch_size");
  o.learning_rate = static_cast<float>(get_double("train.lr"));
  o.commitment_weight = static_cast<float>(get_double("quantizer.commitment"));
  o.norm = parse_reconstruction_norm(get("train.loss"));
  o.kmeans_iters = get_int("quantizer.kmeans_iters");
  o.kmeans_pool_limit = get_int("quantizer.kmeans_pool");
  o.gumbel_temperature_start = get_double("quantizer.gumbel_tau_start");
  o.gumbel_temperature_end = get_double("quantizer.gumbel_tau_end");
  o.seed = seed();
  return o;
}

PriorConfig RunConfig::prior_config() const {
  PriorConfig c;
  c.vocab_size = get_int("quantizer.codebook_size");
  const int f = get_int("autoencoder.downsample");
  c.height = f > 0 ? get_int("data.height") / f : 0;
  c.width = f > 0 ? get_int("data.width") / f : 0;
  c.hidden = get_int("prior.hidden");
  c.layers = get_int("prior.layers");
  c.first_kernel = get_int("prior.first_kernel");
  return c;
}

PriorTrainOptions RunConfig::prior_train_options() const {
  PriorTrainOptions o;
  o.epochs = get_int("prior.epochs");
  o.batch_size = get_int("prior.batch_size");
  o.learning_rate = static_cast<float>(get_double("prior.lr"));
  o.seed = seed();
  return o;
}

RestorationConfig RunConfig::restoration_config() const {
  RestorationConfig c;
  if (!get("restoration.threshold").empty()) c.likelihood_threshold = get_double("restoration.threshold");
  c.threshold_mode = parse_threshold_mode(get("restoration.mode"));
  c.percentile = get_double("restoration.percentile");
  c.replacement_rule = parse_replacement_rule(get("restoration.rule"));
  c.sequential_rescoring = get_bool("restoration.sequential");
  c.smoothing_radius = get_int("restoration.smoothing_radius");
  c.seed = seed();
  c.validate();
  return c;
}

PipelineSettings RunConfig::pipeline_settings() const {
  PipelineSettings s;
  s.autoencoder = autoencoder_config();
  s.stage1 = stage1_options();
  s.prior = prior_config();
  s.prior_train = prior_train_options();
  s.restoration = restoration_config();
  return s;
}

std::string RunConfig::dump() const {
  std::ostringstream os;
  for (const auto& k : config_keys()) os << k.key << " = " << values_.at(k.key) << '\n';
  return os.str();
}

RunConfig resolve_config(const std::filesystem::path& file,
                         const std::map<std::string, std::string>& overrides) {
  RunConfig config;
  if (!file.empty()) config.load_file(file);
  for (const auto& [key, value] : overrides) config.set(key, value);
  if (config.get("device") != "cpu") {
    throw InputError("device '" + config.get("device") + "' is not available (only cpu)");
  }
  return config;
}

}  // namespace vqad::cli
