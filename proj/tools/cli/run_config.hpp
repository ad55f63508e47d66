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

#ifndef VQAD_TOOLS_CLI_RUN_CONFIG_HPP_
#define VQAD_TOOLS_CLI_RUN_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vqad/data.hpp"
#include "vqad/evaluation.hpp"

namespace vqad::cli {

struct KeyInfo {
  std::string key;
  std::string default_value;
  std::string help;
};

// Every recognised key with its built-in default (desk scale).
const std::vector<KeyInfo>& config_keys();

// Flat key/value configuration. Values resolve as
// command-line flag > config file > built-in default.
class RunConfig {
 public:
  RunConfig();

  // `key = value` lines; `[section]` prefixes following keys with "section.";
  // '#' starts a comment. Unknown keys are rejected.
  void load_file(const std::filesystem::path& path);
  void parse_text(const std::string& text, const std::string& origin);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  std::string get_string(const std::string& key) const { return get(key); }
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;

  std::uint64_t seed() const { return get_u64("seed"); }
  std::filesystem::path out() const { return get("out"); }
  std::filesystem::path stage1_path() const;
  std::filesystem::path prior_path() const;

  DatasetSpec dataset_spec() const;
  SyntheticBenchmark synthetic() const;
  AutoencoderConfig autoencoder_config() const;
  Stage1Options stage1_options() const;
  PriorConfig prior_config() const;
  PriorTrainOptions prior_train_options() const;
  RestorationConfig restoration_config() const;
  PipelineSettings pipeline_settings() const;

  // key = value lines in key order.
  std::string dump() const;

 private:
  std::map<std::string, std::string> values_;
};

// Builds the effective configuration from an optional file and explicit
// command-line overrides.
RunConfig resolve_config(const std::filesystem::path& file,
                         const std::map<std::string, std::string>& overrides);

}  // namespace vqad::cli

#endif  // VQAD_TOOLS_CLI_RUN_CONFIG_HPP_
