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
#include <span>
#include <string>
#include <vector>

#include "hra_lab/tensor.hpp"

namespace hra_lab {

// How a task maps latent event vectors to labels.
//   linear: label = argmax_k (G_n z)_k
//   xor:    bits b_j = [(G_n z)_j > 0]; label = Σ_k 2^k (b_2k xor b_2k+1) mod V
//   mixed:  even task indices linear, odd indices xor
enum class RuleFamily { kLinear, kXor, kMixed };

std::string to_string(RuleFamily r);
RuleFamily parse_rule_family(const std::string& s);

struct TaskSetConfig {
  std::size_t count = 1;
  std::uint64_t seed = 0;
  // Generator index of the first task; task i uses index first_index + i.
  std::size_t first_index = 0;
  RuleFamily rule = RuleFamily::kLinear;
  std::size_t input_dim = 4;  // one marker channel + input_dim - 1 latent channels
  std::size_t vocab = 2;
  std::size_t min_labels = 1;
  std::size_t max_labels = 3;
  std::size_t max_gap = 2;  // blank frames between events: [1, max_gap]
  double noise = 0.05;
  std::size_t train_size = 32;
  std::size_t valid_size = 8;
  std::size_t test_size = 8;
};

struct Example {
  Tensor input;  // [T×input_dim]
  std::vector<int> labels;
};

// Each event frame is [1, z] and each gap frame is [0, 0, ...], both plus
// Gaussian noise; the labels are the events' rule outputs in order. At least
// one gap frame separates consecutive events, so every example is CTC-feasible.
struct SyntheticTask {
  std::size_t index = 0;
  RuleFamily rule = RuleFamily::kLinear;
  Tensor projection;  // G_n
  std::size_t vocab = 2;
  std::vector<Example> train;
  std::vector<Example> valid;
  std::vector<Example> test;

  int label_for(std::span<const double> latent) const;
};

void validate(const TaskSetConfig& cfg);
// Same config -> bit-identical tasks.
std::vector<SyntheticTask> make_synthetic_tasks(const TaskSetConfig& cfg);

}  // namespace hra_lab
