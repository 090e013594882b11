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
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hra_lab/adapter.hpp"
#include "hra_lab/adapter_spec.hpp"
#include "hra_lab/autodiff.hpp"
#include "hra_lab/backbone.hpp"
#include "hra_lab/rng.hpp"

namespace hra_lab {

// Recurrent controller shared by every backbone layer and every task. The
// recurrence runs over layer depth; frames are processed independently.
//
//   IndRNN:     h_l = relu(x_l·Wᵀ + u ⊙ h_{l-1} + b)
//   VanillaRNN: h_l = tanh(x_l·Wᵀ + h_{l-1}·Uᵀ + b)
//   LightGRU:   z   = sigmoid(x_l·W_zᵀ + h_{l-1}·U_zᵀ + b_z)
//               h~  = relu(x_l·Wᵀ + h_{l-1}·U_hᵀ + b)
//               h_l = z ⊙ h_{l-1} + (1 - z) ⊙ h~
struct ControllerParams {
  ControllerVariant variant = ControllerVariant::kIndRnn;
  Tensor input_weight;  // W   [d_r×d]
  Tensor bias;          // b   [d_r]
  std::optional<Tensor> recurrent_scale;             // u   [d_r]      IndRNN
  std::optional<Tensor> recurrent_weight;            // U   [d_r×d_r]  VanillaRNN
  std::optional<Tensor> gate_input_weight;           // W_z [d_r×d]    LightGRU
  std::optional<Tensor> gate_recurrent_weight;       // U_z [d_r×d_r]  LightGRU
  std::optional<Tensor> candidate_recurrent_weight;  // U_h [d_r×d_r]  LightGRU
  std::optional<Tensor> gate_bias;                   // b_z [d_r]      LightGRU

  std::size_t input_dim() const { return input_weight.dim(1); }
  std::size_t hidden_dim() const { return input_weight.dim(0); }

  // Exactly the variant's extra weights must be present with matching
  // shapes; throws ConfigError otherwise.
  void validate() const;
  ParameterRefs named(const std::string& prefix);

  // W, W_z, U, U_z, U_h ~ Uniform(±1/sqrt(fan_in)); u ~ Uniform(0, 1); b = b_z = 0.
  static ControllerParams init(ControllerVariant variant, std::size_t model_dim,
                               std::size_t recurrent_dim, SplitMix64& rng);
};

// Per-task adapter head: o = h·Mᵀ (linear) or o = relu(h·M1ᵀ)·M2ᵀ (FFN).
struct TaskHead {
  HeadKind kind = HeadKind::kLinear;
  std::optional<Tensor> projection;  // M  [d×d_r]
  std::optional<Tensor> hidden;      // M1 [d_h×d_r]
  std::optional<Tensor> output;      // M2 [d×d_h]

  static TaskHead linear(Tensor projection);
  static TaskHead ffn(Tensor hidden, Tensor output);
  // zero_output zeroes M (linear) or M2 (FFN).
  static TaskHead init(HeadKind kind, std::size_t model_dim, std::size_t recurrent_dim,
                       std::size_t head_hidden, bool zero_output, SplitMix64& rng);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  void validate() const;
  ParameterRefs named(const std::string& prefix);
};

// Dense TaskId -> TaskHead table; ids are 0..size()-1.
class HeadRegistry {
 public:
  TaskId add(TaskHead head);
  const TaskHead& at(TaskId task) const;
  TaskHead& at(TaskId task);
  std::size_t size() const { return heads_.size(); }
  void clear() { heads_.clear(); }

 private:
  std::vector<TaskHead> heads_;
};

struct ControllerNodes {
  ControllerVariant variant;
  std::size_t hidden_dim;
  NodeId input_weight, bias;
  std::optional<NodeId> recurrent_scale, recurrent_weight;
  std::optional<NodeId> gate_input_weight, gate_recurrent_weight, candidate_recurrent_weight,
      gate_bias;
};

struct HeadNodes {
  HeadKind kind;
  std::optional<NodeId> projection, hidden, output;
};

// Puts the tensors on the graph, as trainable parameters named
// prefix + "/<field>" or as constants when `trainable` is false.
ControllerNodes register_controller(Graph& g, const ControllerParams& c, const std::string& prefix,
                                    bool trainable);
HeadNodes register_head(Graph& g, const TaskHead& head, const std::string& prefix, bool trainable);

NodeId controller_step(Graph& g, const ControllerNodes& c, NodeId x, NodeId h_prev);
NodeId head_apply(Graph& g, const HeadNodes& head, NodeId h);
// Returns (x'_l, h_l) with h_l = step(x_l, disable_recurrence ? 0 : h_prev)
// and x'_l = x_l + head(h_l).
std::pair<NodeId, NodeId> adapt_layer(Graph& g, const ControllerNodes& c, const HeadNodes& head,
                                      NodeId x, NodeId h_prev, bool disable_recurrence);

Tensor controller_step(const Tensor& x, const Tensor& h_prev, const ControllerParams& c);
Tensor head_apply(const Tensor& h, const TaskHead& head);
std::pair<Tensor, Tensor> adapt_layer(const Tensor& x, const Tensor& h_prev,
                                      const ControllerParams& c, const TaskHead& head,
                                      bool disable_recurrence);

// Hierarchical recurrent adapter: one controller and one head per task,
// both reused at every adapted layer. With unshare_weights the adapter
// instead holds one identically initialized (controller, head registry)
// copy per layer.
class HraAdapter : public Adapter {
 public:
  HraAdapter(const AdapterSpec& spec, std::size_t layers, std::size_t model_dim,
             std::size_t num_tasks, std::uint64_t seed);

  std::unique_ptr<AdapterPass> begin(Graph& g, TaskId task) const override;
  std::size_t num_tasks() const override { return registries_.front().size(); }
  ParameterRefs parameters() override;
  json meta() const override;

  const AdapterSpec& spec() const { return spec_; }
  std::size_t layers() const { return layers_; }
  std::size_t copies() const { return controllers_.size(); }
  bool layer_active(std::size_t layer) const;

  ControllerParams& controller(std::size_t copy = 0) { return controllers_.at(copy); }
  const ControllerParams& controller(std::size_t copy = 0) const { return controllers_.at(copy); }
  HeadRegistry& heads(std::size_t copy = 0) { return registries_.at(copy); }
  const HeadRegistry& heads(std::size_t copy = 0) const { return registries_.at(copy); }

  std::string controller_prefix(std::size_t copy) const;
  std::string head_prefix(TaskId task, std::size_t copy) const;

  // Drops every head and registers `num_tasks` fresh ones drawn from
  // streams (seed, stream, n).
  void reset_heads(std::size_t num_tasks, std::uint64_t seed, std::uint64_t stream);
  ParameterRefs controller_parameters();
  std::string controller_sha256() const;

 private:
  TaskHead fresh_head(std::uint64_t seed, std::uint64_t stream, std::size_t task) const;

  AdapterSpec spec_;
  std::size_t layers_;
  std::size_t model_dim_;
  std::vector<ControllerParams> controllers_;
  std::vector<HeadRegistry> registries_;
};

ForwardTrace hra_forward(const FrozenBackbone& bb, const HraAdapter& adapter, TaskId task,
                         const Tensor& input);

// shared: controller; per_task: one head; total = shared + N·per_task.
ParamCount hra_param_count(std::size_t model_dim, std::size_t recurrent_dim,
                           std::size_t head_hidden, ControllerVariant variant, HeadKind head,
                           std::size_t num_tasks);

}  // namespace hra_lab
