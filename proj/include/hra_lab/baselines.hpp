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
#include <string>
#include <vector>

#include "hra_lab/adapter.hpp"
#include "hra_lab/adapter_spec.hpp"
#include "hra_lab/autodiff.hpp"
#include "hra_lab/backbone.hpp"

namespace hra_lab {

// Bottleneck FFN for one layer: A1 [d_b×d], A2 [d×d_b].
struct ResidualLayerParams {
  Tensor down;  // A1
  Tensor up;    // A2
};

// Low-rank update of one frozen matrix W [rows×cols]: ΔW = (alpha/r)·up·down.
struct LoraEntry {
  Tensor down;  // [r×cols]
  Tensor up;    // [rows×r], zero at init
  double alpha = 1.0;

  std::size_t rank() const { return down.dim(0); }
  double factor() const { return alpha / static_cast<double>(rank()); }
};

struct BitFitLayerParams {
  Tensor scale;  // γ, ones at init
  Tensor shift;  // β, zeros at init
};

// target + relu(source·A1ᵀ)·A2ᵀ. Sequential placement uses the block output
// as source; parallel placement uses the block input.
NodeId residual_adapter_apply(Graph& g, NodeId source, NodeId target, NodeId down, NodeId up);
Tensor residual_adapter_apply(const Tensor& x, const ResidualLayerParams& p);
Tensor residual_adapter_apply(const Tensor& block_input, const Tensor& block_output,
                              const ResidualLayerParams& p, Placement placement);

// x·Wᵀ + factor·(x·downᵀ)·upᵀ, never forming up·down.
NodeId lora_apply(Graph& g, NodeId x, NodeId frozen, NodeId down, NodeId up, double factor);
Tensor lora_apply(const Tensor& frozen, const LoraEntry& p, const Tensor& x);
// W + factor·up·down
Tensor lora_materialize(const Tensor& frozen, const LoraEntry& p);

NodeId bitfit_apply(Graph& g, NodeId x, NodeId scale, NodeId shift);
Tensor bitfit_apply(const Tensor& x, const BitFitLayerParams& p);

// Per-layer, per-task bottleneck adapters.
class ResidualAdapter : public Adapter {
 public:
  ResidualAdapter(const AdapterSpec& spec, const BackboneDims& dims, std::size_t num_tasks,
                  std::uint64_t seed);

  std::unique_ptr<AdapterPass> begin(Graph& g, TaskId task) const override;
  std::size_t num_tasks() const override { return params_.size(); }
  ParameterRefs parameters() override;
  json meta() const override;

  ResidualLayerParams& layer(TaskId task, std::size_t l) { return params_.at(task.value).at(l); }
  const ResidualLayerParams& layer(TaskId task, std::size_t l) const {
    return params_.at(task.value).at(l);
  }
  Placement placement() const { return spec_.placement; }
  static std::string prefix(TaskId task, std::size_t l);

 private:
  AdapterSpec spec_;
  BackboneDims dims_;
  std::vector<std::vector<ResidualLayerParams>> params_;  // [task][layer]
};

// Low-rank updates on both FFN matrices of every block, per task.
class LoraAdapter : public Adapter {
 public:
  LoraAdapter(const AdapterSpec& spec, const BackboneDims& dims, std::size_t num_tasks,
              std::uint64_t seed);

  std::unique_ptr<AdapterPass> begin(Graph& g, TaskId task) const override;
  std::size_t num_tasks() const override { return params_.size(); }
  ParameterRefs parameters() override;
  json meta() const override;

  // site is WeightSite::kFfnIn (V1) or WeightSite::kFfnOut (V2).
  LoraEntry& entry(TaskId task, std::size_t l, WeightSite site);
  const LoraEntry& entry(TaskId task, std::size_t l, WeightSite site) const;
  static std::string prefix(TaskId task, std::size_t l, WeightSite site);

 private:
  AdapterSpec spec_;
  BackboneDims dims_;
  std::vector<std::vector<LoraEntry>> params_;  // [task][2·layer + (site == kFfnOut)]
};

// Per-layer scale and shift of each block output, per task.
class BitFitAdapter : public Adapter {
 public:
  BitFitAdapter(const BackboneDims& dims, std::size_t num_tasks);

  std::unique_ptr<AdapterPass> begin(Graph& g, TaskId task) const override;
  std::size_t num_tasks() const override { return params_.size(); }
  ParameterRefs parameters() override;
  json meta() const override;

  BitFitLayerParams& layer(TaskId task, std::size_t l) { return params_.at(task.value).at(l); }
  const BitFitLayerParams& layer(TaskId task, std::size_t l) const {
    return params_.at(task.value).at(l);
  }
  static std::string prefix(TaskId task, std::size_t l);

 private:
  BackboneDims dims_;
  std::vector<std::vector<BitFitLayerParams>> params_;
};

// Trainable per-task copy of every backbone weight; the frozen backbone
// itself is never written.
class FullFineTuneAdapter : public Adapter {
 public:
  FullFineTuneAdapter(const FrozenBackbone& bb, std::size_t num_tasks);

  std::unique_ptr<AdapterPass> begin(Graph& g, TaskId task) const override;
  std::size_t num_tasks() const override { return copies_.size(); }
  ParameterRefs parameters() override;
  json meta() const override;

  static std::string name(TaskId task, WeightSite site, std::size_t layer);
  const Tensor& weight(TaskId task, WeightSite site, std::size_t layer) const;

 private:
  BackboneDims dims_;
  std::vector<TensorMap> copies_;  // keyed by name(task, site, layer)
};

// Closed-form counts. shared is always 0 for these methods.
ParamCount baseline_param_count(const AdapterSpec& spec, const BackboneDims& dims,
                                std::size_t num_tasks);

}  // namespace hra_lab
