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

#include <cstdint>

#include "hra_lab/tensor.hpp"

namespace hra_lab {

// SplitMix64 (Steele, Lea & Flood). Every random quantity in the project is
// drawn from this generator so that streams are reproducible byte for byte:
//
//   state += 0x9e3779b97f4a7c15
//   z = state
//   z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9
//   z = (z ^ (z >> 27)) * 0x94d049bb133111eb
//   return z ^ (z >> 31)
//
// uniform() uses the top 53 bits: (next() >> 11) * 2^-53.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();
  // [0, 1)
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Box-Muller, cosine branch only; consumes exactly two draws.
  double normal();
  // Integer in [0, n) via the high word of a 128-bit product.
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t state_;
};

// Mixes a stream identifier into a base seed; used to give every consumer
// (backbone, controller, head n, task n, split, ...) an independent stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) with fan_in = shape.back().
Tensor fan_in_uniform(Shape shape, SplitMix64& rng);
Tensor uniform_tensor(Shape shape, double lo, double hi, SplitMix64& rng);

// Stream identifiers for derive_seed.
namespace streams {
inline constexpr std::uint64_t kController = 0x436f6e74726f6cULL;
inline constexpr std::uint64_t kHead = 0x48656164ULL;
inline constexpr std::uint64_t kBaseline = 0x42617365ULL;
inline constexpr std::uint64_t kTask = 0x5461736bULL;
inline constexpr std::uint64_t kSplit = 0x53706c6974ULL;
inline constexpr std::uint64_t kBatch = 0x4261746368ULL;
inline constexpr std::uint64_t kStage2Head = 0x5374673248ULL;
}  // namespace streams

}  // namespace hra_lab
