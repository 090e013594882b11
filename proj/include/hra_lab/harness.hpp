// Copyright 2026 The HRA Lab Authors.
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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hra_lab/adapter_spec.hpp"
#include "hra_lab/backbone.hpp"
#include "hra_lab/checkpoint.hpp"
#include "hra_lab/synthetic.hpp"
#include "hra_lab/training.hpp"

namespace hra_lab {

inline constexpr std::string_view kGrowthCurveSchema = "hra-lab-growth-curve-v1";
inline constexpr std::string_view kCountParamsSchema = "hra-lab-count-params-v1";
inline constexpr std::string_view kLossCsvSchema = "hra-lab-losses-v1";
inline constexpr std::string_view kAblationSchema = "hra-lab-ablation-v1";

enum class TrainMode { kMultiTask, kOnline };

// One experiment, fully determined by its JSON document. Keys:
//   backbone.{layers*, model_dim*, ffn_dim, input_dim, vocab, seed}
//   adapter.{method*, variant, head, recurrent_dim, head_hidden, bottleneck,
//            placement, rank, lora_alpha, layer_mask, disable_recurrence,
//            unshare_weights, zero_init_head, seed}
//   tasks.{count*, seed, first_index, rule, min_labels, max_labels, max_gap,
//          noise, train_size, valid_size, test_size}
//   training.{steps*, mode, batch_size, seed, active_tasks,
//             optimizer.{kind, lr, beta1, beta2, eps}}
//   online.{pretrain_tasks.{count, first_index}, pretrain_steps, compare_joint}
//   growth.{methods, max_tasks}
//   output_dir
// (* required; training.steps only for commands that train.)
struct ExperimentConfig {
  BackboneDims backbone;
  AdapterSpec adapter;
  std::uint64_t adapter_seed = 0;
  TaskSetConfig tasks;
  TrainMode mode = TrainMode::kMultiTask;
  TrainConfig training;
  TaskSetConfig pretrain_tasks;
  std::size_t pretrain_steps = 0;
  bool compare_joint = false;
  std::vector<std::string> growth_methods;
  std::size_t growth_max_tasks = 128;
  std::string output_dir;

  json document;  // normalized input, the source of hash()
  std::string hash() const;
};

// Throws ConfigError naming the offending key.
ExperimentConfig parse_config(const json& doc, bool require_training);
// Applies "a.b.c=value" overrides; value is parsed as JSON when possible,
// otherwise taken as a string.
json apply_overrides(json doc, const std::vector<std::string>& sets);

// Output directory: relative paths resolve against $HRA_LAB_OUT (default ".").
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg);

// Growth-curve label ("hra-linear", "hra-ffn", "residual", "lora", "bitfit",
// "full") to a spec derived from the config's adapter sizes.
AdapterSpec spec_for_label(const std::string& label, const AdapterSpec& base);

struct GrowthRow {
  std::string method;
  std::size_t tasks;
  std::size_t total_params;
  double per_task_avg;
};

std::vector<GrowthRow> growth_curve(const ExperimentConfig& cfg);
std::string growth_curve_csv(const std::vector<GrowthRow>& rows, const std::string& comment);

struct AblationRow {
  std::string row;  // "base", "no_recurrence", "no_recurrence_unshared"
  ControllerVariant variant;
  bool disable_recurrence;
  bool unshare_weights;
  ParamCount count;
  TrainReport report;
};

std::vector<AblationRow> run_ablation(const ExperimentConfig& cfg);

// `hra-lab <command> [--config PATH] [--set k=v]...`; returns the exit code
// (0 ok, 2 config error, 3 runtime error).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hra_lab
