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

#include "hra_lab/synthetic.hpp"

#include "hra_lab/errors.hpp"
#include "hra_lab/rng.hpp"

namespace hra_lab {

std::string to_string(RuleFamily r) {
  switch (r) {
    case RuleFamily::kLinear: return "linear";
    case RuleFamily::kXor: return "xor";
    case RuleFamily::kMixed: return "mixed";
  }
  return "?";
}

RuleFamily parse_rule_family(const std::string& s) {
  if (s == "linear") return RuleFamily::kLinear;
  if (s == "xor") return RuleFamily::kXor;
  if (s == "mixed") return RuleFamily::kMixed;
  throw ConfigError("unknown task rule family '" + s + "'");
}

namespace {

std::size_t xor_bits(std::size_t vocab) {
  std::size_t bits = 1;
  while ((std::size_t{1} << bits) < vocab) ++bits;
  return bits;
}

Example make_example(const SyntheticTask& task, const TaskSetConfig& cfg, SplitMix64& rng) {
  const std::size_t latent_dim = cfg.input_dim - 1;
  const std::size_t count = cfg.min_labels + rng.below(cfg.max_labels - cfg.min_labels + 1);
  std::vector<std::vector<double>> frames;
  std::vector<int> labels;
  auto gap = [&](std::size_t min_gap) {
    const std::size_t n = min_gap + rng.below(cfg.max_gap - min_gap + 1);
    for (std::size_t i = 0; i < n; ++i) frames.emplace_back(cfg.input_dim, 0.0);
  };
  gap(0);
  for (std::size_t e = 0; e < count; ++e) {
    std::vector<double> frame(cfg.input_dim, 0.0);
    frame[0] = 1.0;
    for (std::size_t j = 0; j < latent_dim; ++j) frame[1 + j] = rng.normal();
    labels.push_back(task.label_for(std::span<const double>(frame).subspan(1)));
    frames.push_back(std::move(frame));
    gap(e + 1 < count ? 1 : 0);
  }
  for (auto& f : frames) {
    for (double& v : f) v += cfg.noise * rng.normal();
  }
  std::vector<double> data;
  for (const auto& f : frames) data.insert(data.end(), f.begin(), f.end());
  return Example{Tensor({frames.size(), cfg.input_dim}, std::move(data)), std::move(labels)};
}

}  // namespace

int SyntheticTask::label_for(std::span<const double> latent) const {
  std::vector<double> score(projection.dim(0), 0.0);
  for (std::size_t r = 0; r < score.size(); ++r) {
    for (std::size_t c = 0; c < latent.size(); ++c) score[r] += projection.at(r, c) * latent[c];
  }
  if (rule == RuleFamily::kLinear) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < score.size(); ++k) {
      if (score[k] > score[best]) best = k;
    }
    return static_cast<int>(best);
  }
  std::size_t label = 0;
  for (std::size_t k = 0; 2 * k + 1 < score.size(); ++k) {
    const bool a = score[2 * k] > 0.0, b = score[2 * k + 1] > 0.0;
    label |= static_cast<std::size_t>(a != b) << k;
  }
  return static_cast<int>(label % vocab);
}

void validate(const TaskSetConfig& cfg) {
  if (cfg.count < 1) throw ConfigError("tasks.count must be >= 1");
  if (cfg.input_dim < 2) throw ConfigError("tasks need input_dim >= 2 (marker + latent)");
  if (cfg.vocab < 1) throw ConfigError("tasks.vocab must be >= 1");
  if (cfg.min_labels < 1 || cfg.max_labels < cfg.min_labels) {
    throw ConfigError("tasks.min_labels/max_labels must satisfy 1 <= min <= max");
  }
  if (cfg.max_gap < 1) throw ConfigError("tasks.max_gap must be >= 1");
  if (cfg.train_size < 1 || cfg.valid_size < 1 || cfg.test_size < 1) {
    throw ConfigError("task split sizes must be >= 1");
  }
  if (!(cfg.noise >= 0.0)) throw ConfigError("tasks.noise must be >= 0");
}

std::vector<SyntheticTask> make_synthetic_tasks(const TaskSetConfig& cfg) {
  validate(cfg);
  std::vector<SyntheticTask> tasks;
  for (std::size_t i = 0; i < cfg.count; ++i) {
    SyntheticTask task;
    task.index = cfg.first_index + i;
    task.vocab = cfg.vocab;
    task.rule = cfg.rule == RuleFamily::kMixed
                    ? (task.index % 2 == 0 ? RuleFamily::kLinear : RuleFamily::kXor)
                    : cfg.rule;
    const std::uint64_t task_seed = derive_seed(cfg.seed, streams::kTask, task.index);
    SplitMix64 rng(task_seed);
    const std::size_t rows = task.rule == RuleFamily::kLinear ? cfg.vocab : 2 * xor_bits(cfg.vocab);
    task.projection = Tensor({rows, cfg.input_dim - 1});
    for (double& v : task.projection.data()) v = rng.normal();

    const std::size_t sizes[] = {cfg.train_size, cfg.valid_size, cfg.test_size};
    std::vector<Example>* splits[] = {&task.train, &task.valid, &task.test};
    for (std::size_t s = 0; s < 3; ++s) {
      SplitMix64 split_rng(derive_seed(task_seed, streams::kSplit, s));
      for (std::size_t e = 0; e < sizes[s]; ++e) splits[s]->push_back(make_example(task, cfg, split_rng));
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

}  // namespace hra_lab
