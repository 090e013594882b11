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

#include "hra_lab/adapter.hpp"

#include "hra_lab/errors.hpp"

namespace hra_lab {

NodeId AdapterPass::apply_weight(Graph& g, WeightSite, std::size_t, NodeId x, NodeId frozen) {
  return g.linear(x, frozen);
}

NodeId AdapterPass::adapt(Graph&, std::size_t, NodeId, NodeId block_output) {
  return block_output;
}

NamedTensors Adapter::named_tensors() const {
  NamedTensors out;
  // parameters() only hands out pointers; nothing is written through them here.
  for (auto& [name, t] : const_cast<Adapter*>(this)->parameters()) out.emplace_back(name, t);
  return out;
}

std::size_t Adapter::element_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named_tensors()) n += t->size();
  return n;
}

void Adapter::check_task(TaskId task) const {
  if (task.value >= num_tasks()) {
    throw RoutingError("task " + std::to_string(task.value) + " is not registered (" +
                       std::to_string(num_tasks()) + " tasks)");
  }
}

json Adapter::checkpoint() const { return make_checkpoint(named_tensors(), meta()); }

void Adapter::load(const TensorMap& tensors) {
  for (auto& [name, t] : parameters()) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ConfigError("checkpoint is missing tensor '" + name + "'");
    if (it->second.shape() != t->shape()) {
      throw ConfigError("checkpoint tensor '" + name + "' has shape " +
                        shape_string(it->second.shape()) + ", expected " +
                        shape_string(t->shape()));
    }
    *t = it->second;
  }
}

}  // namespace hra_lab
