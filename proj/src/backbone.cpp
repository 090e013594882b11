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

#include "hra_lab/backbone.hpp"

#include <memory>

#include "hra_lab/errors.hpp"
#include "hra_lab/rng.hpp"

namespace hra_lab {

void validate(const BackboneDims& dims) {
  auto require = [](std::size_t v, const char* key) {
    if (v < 1) throw ConfigError(std::string("backbone.") + key + " must be >= 1");
  };
  require(dims.layers, "layers");
  require(dims.model_dim, "model_dim");
  require(dims.ffn_dim, "ffn_dim");
  require(dims.input_dim, "input_dim");
  require(dims.vocab, "vocab");
}

FrozenBackbone::FrozenBackbone(const BackboneDims& dims) : dims_(dims) {
  validate(dims);
  SplitMix64 rng(dims.seed);
  const std::size_t d = dims.model_dim;
  input_projection_ = fan_in_uniform({d, dims.input_dim}, rng);
  for (std::size_t l = 0; l < dims.layers; ++l) {
    ffn_in_.push_back(fan_in_uniform({dims.ffn_dim, d}, rng));
    ffn_out_.push_back(fan_in_uniform({d, dims.ffn_dim}, rng));
  }
  output_projection_ = fan_in_uniform({dims.vocab + 1, d}, rng);
}

FrozenBackbone build_backbone(const BackboneDims& dims) { return FrozenBackbone(dims); }

NamedTensors FrozenBackbone::named_weights() const {
  NamedTensors out;
  out.emplace_back("input_projection", &input_projection_);
  for (std::size_t l = 0; l < dims_.layers; ++l) {
    out.emplace_back("layers/" + std::to_string(l) + "/ffn_in", &ffn_in_[l]);
    out.emplace_back("layers/" + std::to_string(l) + "/ffn_out", &ffn_out_[l]);
  }
  out.emplace_back("output_projection", &output_projection_);
  return out;
}

std::size_t FrozenBackbone::parameter_count(const BackboneDims& dims) {
  return dims.model_dim * dims.input_dim + dims.layers * 2 * dims.model_dim * dims.ffn_dim +
         (dims.vocab + 1) * dims.model_dim;
}

std::size_t FrozenBackbone::parameter_count() const { return parameter_count(dims_); }

std::string FrozenBackbone::weights_sha256() const { return tensors_sha256(named_weights()); }

json FrozenBackbone::checkpoint() const {
  json meta = {{"layers", dims_.layers},     {"model_dim", dims_.model_dim},
               {"ffn_dim", dims_.ffn_dim},   {"input_dim", dims_.input_dim},
               {"vocab", dims_.vocab},       {"seed", dims_.seed}};
  return make_checkpoint(named_weights(), std::move(meta));
}

FrozenBackbone FrozenBackbone::from_checkpoint(const json& doc) {
  auto [tensors, meta] = parse_checkpoint(doc);
  BackboneDims dims;
  try {
    dims.layers = meta.at("layers").get<std::size_t>();
    dims.model_dim = meta.at("model_dim").get<std::size_t>();
    dims.ffn_dim = meta.at("ffn_dim").get<std::size_t>();
    dims.input_dim = meta.at("input_dim").get<std::size_t>();
    dims.vocab = meta.at("vocab").get<std::size_t>();
    dims.seed = meta.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("backbone checkpoint meta: ") + e.what());
  }
  FrozenBackbone bb(dims);
  auto assign = [&](const std::string& name, Tensor& slot) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ConfigError("backbone checkpoint is missing '" + name + "'");
    if (it->second.shape() != slot.shape()) {
      throw ConfigError("backbone checkpoint tensor '" + name + "' has the wrong shape");
    }
    slot = it->second;
  };
  assign("input_projection", bb.input_projection_);
  for (std::size_t l = 0; l < dims.layers; ++l) {
    assign("layers/" + std::to_string(l) + "/ffn_in", bb.ffn_in_[l]);
    assign("layers/" + std::to_string(l) + "/ffn_out", bb.ffn_out_[l]);
  }
  assign("output_projection", bb.output_projection_);
  return bb;
}

BackboneNodes register_backbone(Graph& g, const FrozenBackbone& bb) {
  BackboneNodes nodes;
  nodes.input_projection = g.constant(bb.input_projection());
  for (std::size_t l = 0; l < bb.dims().layers; ++l) {
    nodes.ffn_in.push_back(g.constant(bb.ffn_in(l)));
    nodes.ffn_out.push_back(g.constant(bb.ffn_out(l)));
  }
  nodes.output_projection = g.constant(bb.output_projection());
  return nodes;
}

TraceNodes backbone_forward(Graph& g, const FrozenBackbone& bb, const BackboneNodes& w,
                            NodeId input, AdapterPass* pass) {
  const Tensor& x = g.value(input);
  if (x.rank() != 2 || x.cols() != bb.dims().input_dim) {
    throw DimensionError("backbone input " + shape_string(x.shape()) + " does not match d_in = " +
                         std::to_string(bb.dims().input_dim));
  }
  AdapterPass identity;
  AdapterPass& hook = pass ? *pass : identity;

  TraceNodes trace;
  NodeId z = hook.apply_weight(g, WeightSite::kInputProjection, 0, input, w.input_projection);
  for (std::size_t l = 0; l < bb.dims().layers; ++l) {
    const NodeId hidden = g.relu(hook.apply_weight(g, WeightSite::kFfnIn, l, z, w.ffn_in[l]));
    const NodeId block = g.add(z, hook.apply_weight(g, WeightSite::kFfnOut, l, hidden, w.ffn_out[l]));
    const NodeId adapted = hook.adapt(g, l, z, block);
    trace.block_outputs.push_back(block);
    trace.adapted.push_back(adapted);
    if (auto h = hook.controller_state()) trace.controller_states.push_back(*h);
    z = adapted;
  }
  const NodeId logits =
      hook.apply_weight(g, WeightSite::kOutputProjection, 0, z, w.output_projection);
  trace.log_probs = g.log_softmax(logits);
  return trace;
}

ForwardTrace backbone_forward(const FrozenBackbone& bb, const Tensor& input, const Adapter* adapter,
                              std::optional<TaskId> task) {
  Graph g;
  std::unique_ptr<AdapterPass> pass;
  if (adapter) {
    if (!task) throw RoutingError("an adapter was given without a task");
    pass = adapter->begin(g, *task);
  }
  const BackboneNodes weights = register_backbone(g, bb);
  const TraceNodes nodes = backbone_forward(g, bb, weights, g.constant(input), pass.get());
  ForwardTrace trace;
  for (NodeId id : nodes.block_outputs) trace.block_outputs.push_back(g.value(id));
  for (NodeId id : nodes.adapted) trace.adapted.push_back(g.value(id));
  for (NodeId id : nodes.controller_states) trace.controller_states.push_back(g.value(id));
  trace.log_probs = g.value(nodes.log_probs);
  return trace;
}

Tensor frames_to_tensor(const std::vector<std::vector<double>>& frames) {
  if (frames.empty()) throw EmptyInputError("input sequence has no frames (T = 0)");
  const std::size_t width = frames.front().size();
  std::vector<double> data;
  data.reserve(frames.size() * width);
  for (const auto& f : frames) {
    if (f.size() != width) throw DimensionError("frames have inconsistent widths");
    data.insert(data.end(), f.begin(), f.end());
  }
  return Tensor({frames.size(), width}, std::move(data));
}

}  // namespace hra_lab
