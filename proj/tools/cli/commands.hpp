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

#ifndef VQAD_TOOLS_CLI_COMMANDS_HPP_
#define VQAD_TOOLS_CLI_COMMANDS_HPP_

#include <ostream>
#include <string>
#include <vector>

#include "cli/run_config.hpp"

namespace vqad::cli {

// Each command writes its artifacts under config.out() and progress lines to
// `log`. Failures surface as vqad::Error subclasses.

// Synthetic benchmark in the mvtec layout at <out>.
void cmd_gen_synthetic(const RunConfig& config, std::ostream& log);
// <out>/stage1.ckpt, <out>/stage1_metrics.csv
void cmd_train_vqvae(const RunConfig& config, std::ostream& log);
// One-shot k-means over the training latents; rewrites the stage-1 checkpoint
// and writes <out>/aggregate.csv.
void cmd_aggregate_codebook(const RunConfig& config, std::ostream& log);
// <out>/prior.ckpt, <out>/prior_metrics.csv
void cmd_train_prior(const RunConfig& config, std::ostream& log);
// Per input: <stem>_restored.png, <stem>_heatmap.png (16-bit), <stem>_mask.png;
// one JSON line per input in <out>/detections.jsonl.
void cmd_detect(const RunConfig& config, const std::vector<std::string>& inputs, std::ostream& log);
// <out>/metrics.csv, <out>/report.txt
void cmd_evaluate(const RunConfig& config, std::ostream& log);
// <out>/ablation.csv, <out>/ablation.txt
void cmd_ablate(const RunConfig& config, std::ostream& log);

}  // namespace vqad::cli

#endif  // VQAD_TOOLS_CLI_COMMANDS_HPP_
