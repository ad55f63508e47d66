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

#include "cli/app.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cli/commands.hpp"
#include "cli/run_config.hpp"
#include "vqad/error.hpp"

namespace vqad::cli {

namespace {

struct Subcommand {
  std::string name;
  std::string description;
  CLI::App* app = nullptr;
  std::string config_file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  std::vector<std::string> inputs;
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"VQ-VAE anomaly detection with latent code restoration", "vqad"};
  app.require_subcommand(1);

  std::vector<std::unique_ptr<Subcommand>> subs;
  const std::vector<std::pair<std::string, std::string>> names = {
      {"gen-synthetic", "write the synthetic texture benchmark"},
      {"train-vqvae", "train the autoencoder and codebook"},
      {"aggregate-codebook", "one-shot k-means on a stage-1 checkpoint"},
      {"train-prior", "train the autoregressive prior on training codes"},
      {"detect", "restore and score input images"},
      {"evaluate", "pixel AUROC and DICE on the test split"},
      {"ablate", "quantizer ablation table"},
  };
  for (const auto& [name, description] : names) {
    auto sub = std::make_unique<Subcommand>();
    sub->name = name;
    sub->app = app.add_subcommand(name, description);
    sub->app->add_option("--config", sub->config_file, "key = value configuration file");
    for (const auto& k : config_keys()) {
      std::string help = k.help;
      if (!k.default_value.empty()) help += " [" + k.default_value + "]";
      sub->options[k.key] = sub->app->add_option("--" + k.key, sub->values[k.key], help);
    }
    if (name == "detect") sub->app->add_option("inputs", sub->inputs, "input images");
    subs.push_back(std::move(sub));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    const auto chosen = app.get_subcommands();
    err << "vqad: error: " << e.what() << '\n';
    if (!chosen.empty()) err << chosen.front()->help();
    return 2;
  }

  Subcommand* sub = nullptr;
  for (auto& s : subs)
    if (s->app->parsed()) sub = s.get();

  try {
    std::map<std::string, std::string> overrides;
    for (const auto& [key, opt] : sub->options)
      if (opt->count() > 0) overrides[key] = sub->values[key];
    const RunConfig config = resolve_config(sub->config_file, overrides);

    if (sub->name == "gen-synthetic") {
      cmd_gen_synthetic(config, out);
    } else if (sub->name == "train-vqvae") {
      cmd_train_vqvae(config, out);
    } else if (sub->name == "aggregate-codebook") {
      cmd_aggregate_codebook(config, out);
    } else if (sub->name == "train-prior") {
      cmd_train_prior(config, out);
    } else if (sub->name == "detect") {
      if (sub->inputs.empty()) {
        err << "vqad detect: error: no input images given\n" << sub->app->help();
        return 2;
      }
      cmd_detect(config, sub->inputs, out);
    } else if (sub->name == "evaluate") {
      cmd_evaluate(config, out);
    } else {
      cmd_ablate(config, out);
    }
  } catch (const std::exception& e) {
    err << "vqad " << sub->name << ": error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace vqad::cli
