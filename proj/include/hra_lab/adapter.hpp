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

#include <compare>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hra_lab/autodiff.hpp"
#include "hra_lab/checkpoint.hpp"

namespace hra_lab {

// Index into an adapter's per-task parameters (the head registry for HRA).
struct TaskId {
  std::size_t value = 0;
  auto operator<=>(const TaskId&) const = default;
};

// Backbone weight applications an adapter may intercept.
enum class WeightSite { kInputProjection, kFfnIn, kFfnOut, kOutputProjection };

// Per-forward-pass adapter state (e.g. the controller's running hidden
// vector). Created by Adapter::begin for one (graph, task) pair.
class AdapterPass {
 public:
  virtual ~AdapterPass() = default;

  // Computes x·Wᵀ for a frozen backbone weight W.
  virtual NodeId apply_weight(Graph& g, WeightSite site, std::size_t layer, NodeId x,
                              NodeId frozen);
  // Maps block output x_l to the adapted x'_l that feeds the next block.
  virtual NodeId adapt(Graph& g, std::size_t layer, NodeId block_input, NodeId block_output);
  // Controller hidden state produced by the most recent adapt() call.
  virtual std::optional<NodeId> controller_state() const { return std::nullopt; }
};

using ParameterRefs = std::vector<std::pair<std::string, Tensor*>>;

class Adapter {
 public:
  virtual ~Adapter() = default;

  // Throws RoutingError when the task is not registered.
  virtual std::unique_ptr<AdapterPass> begin(Graph& g, TaskId task) const = 0;
  virtual std::size_t num_tasks() const = 0;
  // Every trainable tensor, in a stable order, under its checkpoint name.
  virtual ParameterRefs parameters() = 0;
  virtual json meta() const = 0;

  NamedTensors named_tensors() const;
  std::size_t element_count() const;
  void check_task(TaskId task) const;
  json checkpoint() const;
  // Assigns tensors by name; every parameter must be present with its shape.
  void load(const TensorMap& tensors);
};

}  // namespace hra_lab
