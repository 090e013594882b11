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
#include <optional>
#include <string>
#include <vector>

#include "hra_lab/adapter.hpp"
#include "hra_lab/autodiff.hpp"
#include "hra_lab/checkpoint.hpp"
#include "hra_lab/tensor.hpp"

namespace hra_lab {

struct BackboneDims {
  std::size_t layers = 2;
  std::size_t model_dim = 8;
  std::size_t ffn_dim = 16;
  std::size_t input_dim = 4;
  std::size_t vocab = 2;  // labels 0..vocab-1; the CTC blank is index `vocab`
  std::uint64_t seed = 0;
};

// Stack of residual FFN blocks, block(z) = z + V2·relu(V1·z), between an
// input projection and an output projection to vocab + 1 logits. Weights
// are fixed at construction.
class FrozenBackbone {
 public:
  // Weights are drawn from SplitMix64(seed) in the order input projection,
  // (V1, V2) for each layer, output projection; each Uniform(±1/sqrt(fan_in)).
  explicit FrozenBackbone(const BackboneDims& dims);

  const BackboneDims& dims() const { return dims_; }
  std::size_t blank() const { return dims_.vocab; }

  const Tensor& input_projection() const { return input_projection_; }
  const Tensor& ffn_in(std::size_t layer) const { return ffn_in_.at(layer); }
  const Tensor& ffn_out(std::size_t layer) const { return ffn_out_.at(layer); }
  const Tensor& output_projection() const { return output_projection_; }

  NamedTensors named_weights() const;
  std::size_t parameter_count() const;
  static std::size_t parameter_count(const BackboneDims& dims);
  std::string weights_sha256() const;

  json checkpoint() const;
  static FrozenBackbone from_checkpoint(const json& doc);

 private:
  BackboneDims dims_;
  Tensor input_projection_;
  std::vector<Tensor> ffn_in_;
  std::vector<Tensor> ffn_out_;
  Tensor output_projection_;
};

FrozenBackbone build_backbone(const BackboneDims& dims);
void validate(const BackboneDims& dims);

// Backbone weights as constant nodes of one graph.
struct BackboneNodes {
  NodeId input_projection;
  std::vector<NodeId> ffn_in;
  std::vector<NodeId> ffn_out;
  NodeId output_projection;
};

BackboneNodes register_backbone(Graph& g, const FrozenBackbone& bb);

struct TraceNodes {
  std::vector<NodeId> block_outputs;      // x_l
  std::vector<NodeId> adapted;            // x'_l
  std::vector<NodeId> controller_states;  // h_l, when the adapter has a controller
  NodeId log_probs;
};

TraceNodes backbone_forward(Graph& g, const FrozenBackbone& bb, const BackboneNodes& weights,
                            NodeId input, AdapterPass* pass);

struct ForwardTrace {
  std::vector<Tensor> block_outputs;
  std::vector<Tensor> adapted;
  std::vector<Tensor> controller_states;
  Tensor log_probs;
};

// Throws RoutingError when an adapter is given without a registered task.
ForwardTrace backbone_forward(const FrozenBackbone& bb, const Tensor& input,
                              const Adapter* adapter = nullptr,
                              std::optional<TaskId> task = std::nullopt);

// Packs frames into a T×d tensor; throws EmptyInputError for T = 0.
Tensor frames_to_tensor(const std::vector<std::vector<double>>& frames);

}  // namespace hra_lab
