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
#include <span>
#include <vector>

#include "hra_lab/autodiff.hpp"
#include "hra_lab/tensor.hpp"

namespace hra_lab {

// Connectionist Temporal Classification over log_probs [T×(V+1)] with the
// blank at index V. Labels are in [0, V) and non-empty.

struct CtcResult {
  double loss;      // -log p(labels | log_probs); +inf when infeasible
  Tensor grad;      // d loss / d log_probs; zero when infeasible
  bool feasible;
};

// Minimum frames that can emit `labels`: S plus one per adjacent repeat.
std::size_t ctc_min_frames(std::span<const int> labels);

// Log-space alpha/beta recursion over the 2S+1 extended label sequence.
CtcResult ctc_loss(const Tensor& log_probs, std::span<const int> labels);

// Enumerates all (V+1)^T frame strings; refuses (ContractError) above 10^6.
double ctc_brute_force(const Tensor& log_probs, std::span<const int> labels);

// Loss as a graph node whose backward uses the analytic gradient.
NodeId ctc_loss(Graph& g, NodeId log_probs, std::span<const int> labels);

// The same recursion spelled out with logsumexp/pick nodes, so the gradient
// comes from the tape instead of from alpha·beta posteriors.
NodeId ctc_loss_taped(Graph& g, NodeId log_probs, std::span<const int> labels);

// Best-path decode: per-frame argmax, merge repeats, drop blanks.
std::vector<int> greedy_decode(const Tensor& log_probs);

std::size_t edit_distance(std::span<const int> a, std::span<const int> b);

double log_sum_exp(double a, double b);

}  // namespace hra_lab
