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

#include "hra_lab/adapters.hpp"

#include <algorithm>

#include "hra_lab/baselines.hpp"
#include "hra_lab/errors.hpp"
#include "hra_lab/hra.hpp"

namespace hra_lab {

void validate(const AdapterSpec& spec, const BackboneDims& dims) {
  validate(dims);
  switch (spec.method) {
    case Method::kHra:
      if (spec.recurrent_dim < 1) throw ConfigError("adapter.recurrent_dim must be >= 1");
      if (spec.head == HeadKind::kFfn && spec.head_hidden < 1) {
        throw ConfigError("adapter.head_hidden must be >= 1");
      }
      if (!spec.layer_mask.empty() && spec.layer_mask.size() != dims.layers) {
        throw ConfigError("adapter.layer_mask must have one entry per backbone layer");
      }
      break;
    case Method::kResidual:
      if (spec.bottleneck < 1) throw ConfigError("adapter.bottleneck must be >= 1");
      break;
    case Method::kLora:
      if (spec.rank < 1 || spec.rank > std::min(dims.model_dim, dims.ffn_dim)) {
        throw ConfigError("adapter.rank " + std::to_string(spec.rank) +
                          " must be in [1, min(model_dim, ffn_dim)]");
      }
      break;
    case Method::kBitFit:
    case Method::kFullFineTune:
      break;
  }
}

std::unique_ptr<Adapter> make_adapter(const AdapterSpec& spec, const FrozenBackbone& bb,
                                      std::size_t num_tasks, std::uint64_t seed) {
  validate(spec, bb.dims());
  const BackboneDims& dims = bb.dims();
  switch (spec.method) {
    case Method::kHra:
      return std::make_unique<HraAdapter>(spec, dims.layers, dims.model_dim, num_tasks, seed);
    case Method::kResidual: return std::make_unique<ResidualAdapter>(spec, dims, num_tasks, seed);
    case Method::kLora: return std::make_unique<LoraAdapter>(spec, dims, num_tasks, seed);
    case Method::kBitFit: return std::make_unique<BitFitAdapter>(dims, num_tasks);
    case Method::kFullFineTune: return std::make_unique<FullFineTuneAdapter>(bb, num_tasks);
  }
  throw ConfigError("unknown adapter method");
}

ParamCount adapter_param_count(const AdapterSpec& spec, const BackboneDims& dims,
                               std::size_t num_tasks) {
  validate(spec, dims);
  if (spec.method != Method::kHra) return baseline_param_count(spec, dims, num_tasks);
  ParamCount c = hra_param_count(dims.model_dim, spec.recurrent_dim, spec.head_hidden,
                                 spec.variant, spec.head, num_tasks);
  if (spec.unshare_weights) {
    c.shared *= dims.layers;
    c.per_task *= dims.layers;
    c.total = c.shared + num_tasks * c.per_task;
  }
  return c;
}

}  // namespace hra_lab
