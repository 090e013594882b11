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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "hra_lab/backbone.hpp"
#include "hra_lab/checkpoint.hpp"
#include "hra_lab/rng.hpp"
#include "hra_lab/tensor.hpp"

namespace hra_lab::testing {

inline Tensor random_tensor(Shape shape, SplitMix64& rng, double lo = -1.0, double hi = 1.0) {
  return uniform_tensor(std::move(shape), lo, hi, rng);
}

// Row-normalized log-probabilities with logits drawn from [-2, 2).
inline Tensor random_log_probs(std::size_t frames, std::size_t classes, SplitMix64& rng) {
  Tensor t = uniform_tensor({frames, classes}, -2.0, 2.0, rng);
  for (std::size_t r = 0; r < frames; ++r) {
    double m = t.at(r, 0);
    for (std::size_t c = 1; c < classes; ++c) m = std::max(m, t.at(r, c));
    double s = 0.0;
    for (std::size_t c = 0; c < classes; ++c) s += std::exp(t.at(r, c) - m);
    const double lse = m + std::log(s);
    for (std::size_t c = 0; c < classes; ++c) t.at(r, c) -= lse;
  }
  return t;
}

inline bool all_zero(const Tensor& t) {
  for (double v : t.data()) {
    if (v != 0.0) return false;
  }
  return true;
}

// Backbone with hand-set weights, built through the checkpoint loader.
inline FrozenBackbone backbone_with(const BackboneDims& dims, const TensorMap& weights) {
  NamedTensors named;
  for (const auto& [name, t] : weights) named.emplace_back(name, &t);
  json meta = {{"layers", dims.layers},       {"model_dim", dims.model_dim},
               {"ffn_dim", dims.ffn_dim},     {"input_dim", dims.input_dim},
               {"vocab", dims.vocab},         {"seed", dims.seed}};
  return FrozenBackbone::from_checkpoint(make_checkpoint(named, meta));
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("hra_lab_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace hra_lab::testing
