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

#include "hra_lab/baselines.hpp"

#include <algorithm>

#include "hra_lab/errors.hpp"
#include "hra_lab/rng.hpp"

namespace hra_lab {

NodeId residual_adapter_apply(Graph& g, NodeId source, NodeId target, NodeId down, NodeId up) {
  return g.add(target, g.linear(g.relu(g.linear(source, down)), up));
}

Tensor residual_adapter_apply(const Tensor& x, const ResidualLayerParams& p) {
  return residual_adapter_apply(x, x, p, Placement::kSequential);
}

Tensor residual_adapter_apply(const Tensor& block_input, const Tensor& block_output,
                              const ResidualLayerParams& p, Placement placement) {
  if (p.up.rank() != 2 || p.down.rank() != 2 || p.up.dim(1) != p.down.dim(0)) {
    throw DimensionError("residual adapter: down " + shape_string(p.down.shape()) + " and up " +
                         shape_string(p.up.shape()) + " do not chain");
  }
  Graph g;
  const NodeId in = g.constant(block_input);
  const NodeId out = g.constant(block_output);
  const NodeId source = placement == Placement::kSequential ? out : in;
  return g.value(residual_adapter_apply(g, source, out, g.constant(p.down), g.constant(p.up)));
}

NodeId lora_apply(Graph& g, NodeId x, NodeId frozen, NodeId down, NodeId up, double factor) {
  return g.add(g.linear(x, frozen), g.scale(g.linear(g.linear(x, down), up), factor));
}

namespace {

void check_lora(const Tensor& frozen, const LoraEntry& p) {
  const std::size_t rows = frozen.dim(0), cols = frozen.dim(1);
  if (p.rank() > std::min(rows, cols)) {
    throw ConfigError("LoRA rank " + std::to_string(p.rank()) + " exceeds min(" +
                      std::to_string(rows) + ", " + std::to_string(cols) + ")");
  }
  if (p.down.shape() != Shape{p.rank(), cols} || p.up.shape() != Shape{rows, p.rank()}) {
    throw DimensionError("LoRA factors " + shape_string(p.up.shape()) + "·" +
                         shape_string(p.down.shape()) + " do not match W " +
                         shape_string(frozen.shape()));
  }
}

}  // namespace

Tensor lora_apply(const Tensor& frozen, const LoraEntry& p, const Tensor& x) {
  check_lora(frozen, p);
  Graph g;
  return g.value(lora_apply(g, g.constant(x), g.constant(frozen), g.constant(p.down),
                            g.constant(p.up), p.factor()));
}

Tensor lora_materialize(const Tensor& frozen, const LoraEntry& p) {
  check_lora(frozen, p);
  return add(frozen, scale(matmul(p.up, p.down), p.factor()));
}

NodeId bitfit_apply(Graph& g, NodeId x, NodeId scale, NodeId shift) {
  return g.add(g.mul(x, scale), shift);
}

Tensor bitfit_apply(const Tensor& x, const BitFitLayerParams& p) {
  Graph g;
  return g.value(bitfit_apply(g, g.constant(x), g.constant(p.scale), g.constant(p.shift)));
}

// ---------------------------------------------------------------------------
// Residual adapter

namespace {

class ResidualPass : public AdapterPass {
 public:
  ResidualPass(const ResidualAdapter& a, TaskId task) : adapter_(a), task_(task) {}

  NodeId adapt(Graph& g, std::size_t layer, NodeId block_input, NodeId block_output) override {
    const auto& p = adapter_.layer(task_, layer);
    const std::string prefix = ResidualAdapter::prefix(task_, layer);
    const NodeId down = g.parameter(prefix + "/down", p.down);
    const NodeId up = g.parameter(prefix + "/up", p.up);
    const NodeId source = adapter_.placement() == Placement::kSequential ? block_output : block_input;
    return residual_adapter_apply(g, source, block_output, down, up);
  }

 private:
  const ResidualAdapter& adapter_;
  TaskId task_;
};

}  // namespace

ResidualAdapter::ResidualAdapter(const AdapterSpec& spec, const BackboneDims& dims,
                                 std::size_t num_tasks, std::uint64_t seed)
    : spec_(spec), dims_(dims) {
  if (spec.bottleneck < 1) throw ConfigError("adapter.bottleneck must be >= 1");
  const std::size_t d = dims.model_dim, db = spec.bottleneck;
  for (std::size_t n = 0; n < num_tasks; ++n) {
    SplitMix64 rng(derive_seed(seed, streams::kBaseline, n));
    std::vector<ResidualLayerParams> layers;
    for (std::size_t l = 0; l < dims.layers; ++l) {
      Tensor down = fan_in_uniform({db, d}, rng);
      Tensor up = fan_in_uniform({d, db}, rng);
      if (spec.zero_init_head) up = Tensor({d, db});
      layers.push_back({std::move(down), std::move(up)});
    }
    params_.push_back(std::move(layers));
  }
}

std::string ResidualAdapter::prefix(TaskId task, std::size_t l) {
  return "residual/" + std::to_string(l) + "/" + std::to_string(task.value);
}

std::unique_ptr<AdapterPass> ResidualAdapter::begin(Graph&, TaskId task) const {
  check_task(task);
  return std::make_unique<ResidualPass>(*this, task);
}

ParameterRefs ResidualAdapter::parameters() {
  ParameterRefs out;
  for (std::size_t n = 0; n < params_.size(); ++n) {
    for (std::size_t l = 0; l < dims_.layers; ++l) {
      out.emplace_back(prefix(TaskId{n}, l) + "/down", &params_[n][l].down);
      out.emplace_back(prefix(TaskId{n}, l) + "/up", &params_[n][l].up);
    }
  }
  return out;
}

json ResidualAdapter::meta() const {
  return json{{"method", "residual"},        {"bottleneck", spec_.bottleneck},
              {"placement", to_string(spec_.placement)}, {"layers", dims_.layers},
              {"model_dim", dims_.model_dim}, {"num_tasks", num_tasks()}};
}

// ---------------------------------------------------------------------------
// LoRA

namespace {

std::size_t lora_slot(std::size_t l, WeightSite site) {
  if (site != WeightSite::kFfnIn && site != WeightSite::kFfnOut) {
    throw ContractError("LoRA only adapts the block FFN matrices");
  }
  return 2 * l + (site == WeightSite::kFfnOut ? 1 : 0);
}

class LoraPass : public AdapterPass {
 public:
  LoraPass(const LoraAdapter& a, TaskId task) : adapter_(a), task_(task) {}

  NodeId apply_weight(Graph& g, WeightSite site, std::size_t layer, NodeId x,
                      NodeId frozen) override {
    if (site != WeightSite::kFfnIn && site != WeightSite::kFfnOut) return g.linear(x, frozen);
    const LoraEntry& e = adapter_.entry(task_, layer, site);
    const std::string prefix = LoraAdapter::prefix(task_, layer, site);
    return lora_apply(g, x, frozen, g.parameter(prefix + "/down", e.down),
                      g.parameter(prefix + "/up", e.up), e.factor());
  }

 private:
  const LoraAdapter& adapter_;
  TaskId task_;
};

}  // namespace

LoraAdapter::LoraAdapter(const AdapterSpec& spec, const BackboneDims& dims, std::size_t num_tasks,
                         std::uint64_t seed)
    : spec_(spec), dims_(dims) {
  const std::size_t r = spec.rank;
  if (r < 1 || r > std::min(dims.model_dim, dims.ffn_dim)) {
    throw ConfigError("adapter.rank " + std::to_string(r) + " must be in [1, min(model_dim, ffn_dim)]");
  }
  const double alpha = spec.lora_alpha.value_or(static_cast<double>(r));
  for (std::size_t n = 0; n < num_tasks; ++n) {
    SplitMix64 rng(derive_seed(seed, streams::kBaseline, n));
    std::vector<LoraEntry> entries;
    for (std::size_t l = 0; l < dims.layers; ++l) {
      // V1 is [d_ff×d], V2 is [d×d_ff].
      entries.push_back({fan_in_uniform({r, dims.model_dim}, rng), Tensor({dims.ffn_dim, r}), alpha});
      entries.push_back({fan_in_uniform({r, dims.ffn_dim}, rng), Tensor({dims.model_dim, r}), alpha});
    }
    params_.push_back(std::move(entries));
  }
}

LoraEntry& LoraAdapter::entry(TaskId task, std::size_t l, WeightSite site) {
  return params_.at(task.value).at(lora_slot(l, site));
}

const LoraEntry& LoraAdapter::entry(TaskId task, std::size_t l, WeightSite site) const {
  return params_.at(task.value).at(lora_slot(l, site));
}

std::string LoraAdapter::prefix(TaskId task, std::size_t l, WeightSite site) {
  return "lora/" + std::to_string(l) + (site == WeightSite::kFfnIn ? ".ffn_in/" : ".ffn_out/") +
         std::to_string(task.value);
}

std::unique_ptr<AdapterPass> LoraAdapter::begin(Graph&, TaskId task) const {
  check_task(task);
  return std::make_unique<LoraPass>(*this, task);
}

ParameterRefs LoraAdapter::parameters() {
  ParameterRefs out;
  for (std::size_t n = 0; n < params_.size(); ++n) {
    for (std::size_t l = 0; l < dims_.layers; ++l) {
      for (WeightSite site : {WeightSite::kFfnIn, WeightSite::kFfnOut}) {
        LoraEntry& e = entry(TaskId{n}, l, site);
        out.emplace_back(prefix(TaskId{n}, l, site) + "/down", &e.down);
        out.emplace_back(prefix(TaskId{n}, l, site) + "/up", &e.up);
      }
    }
  }
  return out;
}

json LoraAdapter::meta() const {
  return json{{"method", "lora"},
              {"rank", spec_.rank},
              {"alpha", spec_.lora_alpha.value_or(static_cast<double>(spec_.rank))},
              {"layers", dims_.layers},
              {"model_dim", dims_.model_dim},
              {"ffn_dim", dims_.ffn_dim},
              {"num_tasks", num_tasks()}};
}

// ---------------------------------------------------------------------------
// BitFit

namespace {

class BitFitPass : public AdapterPass {
 public:
  BitFitPass(const BitFitAdapter& a, TaskId task) : adapter_(a), task_(task) {}

  NodeId adapt(Graph& g, std::size_t layer, NodeId, NodeId block_output) override {
    const auto& p = adapter_.layer(task_, layer);
    const std::string prefix = BitFitAdapter::prefix(task_, layer);
    return bitfit_apply(g, block_output, g.parameter(prefix + "/scale", p.scale),
                        g.parameter(prefix + "/shift", p.shift));
  }

 private:
  const BitFitAdapter& adapter_;
  TaskId task_;
};

}  // namespace

BitFitAdapter::BitFitAdapter(const BackboneDims& dims, std::size_t num_tasks) : dims_(dims) {
  for (std::size_t n = 0; n < num_tasks; ++n) {
    std::vector<BitFitLayerParams> layers;
    for (std::size_t l = 0; l < dims.layers; ++l) {
      layers.push_back({Tensor::full({dims.model_dim}, 1.0), Tensor({dims.model_dim})});
    }
    params_.push_back(std::move(layers));
  }
}

std::string BitFitAdapter::prefix(TaskId task, std::size_t l) {
  return "bitfit/" + std::to_string(l) + "/" + std::to_string(task.value);
}

std::unique_ptr<AdapterPass> BitFitAdapter::begin(Graph&, TaskId task) const {
  check_task(task);
  return std::make_unique<BitFitPass>(*this, task);
}

ParameterRefs BitFitAdapter::parameters() {
  ParameterRefs out;
  for (std::size_t n = 0; n < params_.size(); ++n) {
    for (std::size_t l = 0; l < dims_.layers; ++l) {
      out.emplace_back(prefix(TaskId{n}, l) + "/scale", &params_[n][l].scale);
      out.emplace_back(prefix(TaskId{n}, l) + "/shift", &params_[n][l].shift);
    }
  }
  return out;
}

json BitFitAdapter::meta() const {
  return json{{"method", "bitfit"},
              {"layers", dims_.layers},
              {"model_dim", dims_.model_dim},
              {"num_tasks", num_tasks()}};
}

// ---------------------------------------------------------------------------
// Full fine-tuning

namespace {

class FullPass : public AdapterPass {
 public:
  FullPass(const FullFineTuneAdapter& a, TaskId task) : adapter_(a), task_(task) {}

  NodeId apply_weight(Graph& g, WeightSite site, std::size_t layer, NodeId x, NodeId) override {
    const std::string name = FullFineTuneAdapter::name(task_, site, layer);
    return g.linear(x, g.parameter(name, adapter_.weight(task_, site, layer)));
  }

 private:
  const FullFineTuneAdapter& adapter_;
  TaskId task_;
};

}  // namespace

FullFineTuneAdapter::FullFineTuneAdapter(const FrozenBackbone& bb, std::size_t num_tasks)
    : dims_(bb.dims()) {
  for (std::size_t n = 0; n < num_tasks; ++n) {
    TensorMap copy;
    const TaskId t{n};
    copy.emplace(name(t, WeightSite::kInputProjection, 0), bb.input_projection());
    for (std::size_t l = 0; l < dims_.layers; ++l) {
      copy.emplace(name(t, WeightSite::kFfnIn, l), bb.ffn_in(l));
      copy.emplace(name(t, WeightSite::kFfnOut, l), bb.ffn_out(l));
    }
    copy.emplace(name(t, WeightSite::kOutputProjection, 0), bb.output_projection());
    copies_.push_back(std::move(copy));
  }
}

std::string FullFineTuneAdapter::name(TaskId task, WeightSite site, std::size_t layer) {
  const std::string p = "full/" + std::to_string(task.value) + "/";
  switch (site) {
    case WeightSite::kInputProjection: return p + "input_projection";
    case WeightSite::kFfnIn: return p + "layers/" + std::to_string(layer) + "/ffn_in";
    case WeightSite::kFfnOut: return p + "layers/" + std::to_string(layer) + "/ffn_out";
    case WeightSite::kOutputProjection: return p + "output_projection";
  }
  return p;
}

const Tensor& FullFineTuneAdapter::weight(TaskId task, WeightSite site, std::size_t layer) const {
  return copies_.at(task.value).at(name(task, site, layer));
}

std::unique_ptr<AdapterPass> FullFineTuneAdapter::begin(Graph&, TaskId task) const {
  check_task(task);
  return std::make_unique<FullPass>(*this, task);
}

ParameterRefs FullFineTuneAdapter::parameters() {
  ParameterRefs out;
  for (auto& copy : copies_) {
    for (auto& [name, t] : copy) out.emplace_back(name, &t);
  }
  return out;
}

json FullFineTuneAdapter::meta() const {
  return json{{"method", "full"}, {"layers", dims_.layers}, {"num_tasks", num_tasks()}};
}

ParamCount baseline_param_count(const AdapterSpec& spec, const BackboneDims& dims,
                                std::size_t num_tasks) {
  const std::size_t L = dims.layers, d = dims.model_dim;
  ParamCount c;
  switch (spec.method) {
    case Method::kResidual: c.per_task = L * 2 * d * spec.bottleneck; break;
    case Method::kLora:
      // V1 [d_ff×d] and V2 [d×d_ff]: r·(rows + cols) each.
      c.per_task = L * 2 * spec.rank * (dims.ffn_dim + d);
      break;
    case Method::kBitFit: c.per_task = L * 2 * d; break;
    case Method::kFullFineTune: c.per_task = FrozenBackbone::parameter_count(dims); break;
    case Method::kHra: throw ConfigError("baseline_param_count called for an HRA spec");
  }
  c.total = num_tasks * c.per_task;
  return c;
}

}  // namespace hra_lab
