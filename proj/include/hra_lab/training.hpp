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
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "hra_lab/adapter.hpp"
#include "hra_lab/adapter_spec.hpp"
#include "hra_lab/backbone.hpp"
#include "hra_lab/checkpoint.hpp"
#include "hra_lab/hra.hpp"
#include "hra_lab/synthetic.hpp"

namespace hra_lab {

enum class OptimizerKind { kSgd, kAdam };

std::string to_string(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& s);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  explicit OptimizerState(OptimizerConfig cfg = {}) : config(cfg) {}

  OptimizerConfig config;
  std::uint64_t step = 0;
  std::map<std::string, Tensor> first_moment;
  std::map<std::string, Tensor> second_moment;
};

// Parameter names excluded from updates.
class FreezeMask {
 public:
  FreezeMask() = default;
  explicit FreezeMask(std::set<std::string> names) : names_(std::move(names)) {}
  static FreezeMask of(const ParameterRefs& params);

  void add(const std::string& name) { names_.insert(name); }
  bool contains(const std::string& name) const { return names_.contains(name); }
  std::size_t size() const { return names_.size(); }

 private:
  std::set<std::string> names_;
};

// SGD: p -= lr·g. Adam: bias-corrected moments, p -= lr·m̂/(sqrt(v̂) + eps).
// Parameters absent from `grads` get a zero gradient. Throws NumericError
// (naming step and parameter) before touching anything if a gradient is
// non-finite.
void optimizer_step(const ParameterRefs& params, const std::map<std::string, Tensor>& grads,
                    OptimizerState& state, const FreezeMask& mask);

struct BatchItem {
  TaskId task;
  const Example* example;
};

// Mean CTC loss over the batch; each item is routed through its own task.
NodeId batch_loss(Graph& g, const FrozenBackbone& bb, const BackboneNodes& weights,
                  const Adapter& adapter, std::span<const BatchItem> batch);

// grad_check for a whole adapter: tape gradients of batch_loss against
// central differences over every adapter tensor. The adapter's values are
// restored before returning.
double adapter_grad_check(const FrozenBackbone& bb, Adapter& adapter,
                          std::span<const BatchItem> batch, double eps);

struct EvalResult {
  double loss = 0.0;
  double label_error_rate = 0.0;
  std::size_t examples = 0;
};

// Mean CTC loss and greedy-decode label error rate (total edit distance over
// total reference length). Throws ContractError on an empty split.
EvalResult evaluate(const FrozenBackbone& bb, const Adapter& adapter, TaskId task,
                    std::span<const Example> split);
double label_error_rate(std::span<const Tensor> log_probs, std::span<const std::vector<int>> refs);

struct TrainConfig {
  std::size_t steps = 100;
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  OptimizerConfig optimizer;
  // Registry slots to sample from; empty means every task.
  std::vector<std::size_t> active_tasks;
};

struct TaskMetrics {
  std::size_t task = 0;
  double valid_loss = 0.0;
  double label_error_rate = 0.0;
};

struct TrainReport {
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  std::vector<double> loss_curve;
  std::vector<std::string> task_mix;  // per-step hash of the batch's task ids
  double initial_train_loss = 0.0;
  double final_train_loss = 0.0;
  double final_valid_loss = 0.0;
  double label_error_rate = 0.0;
  std::vector<TaskMetrics> per_task;
  std::size_t parameter_elements = 0;  // enumerated from the adapter
  std::size_t trainable_elements = 0;  // minus frozen parameters
  std::string backbone_sha256;
  double wall_clock_seconds = 0.0;
  json extra = json::object();

  // Everything except wall-clock time, which would break byte-identical
  // reruns; see timing_json().
  json to_json() const;
  json timing_json() const;
  std::string loss_csv(const std::string& header_comment) const;
};

// Samples mixed-task batches (uniform task, then uniform example) and
// updates every unfrozen adapter parameter. Tasks map to registry slots by
// position. Throws RoutingError before any update if a task is unroutable.
TrainReport train_multi_task(const FrozenBackbone& bb, Adapter& adapter,
                             const std::vector<SyntheticTask>& tasks, const TrainConfig& cfg,
                             const FreezeMask& mask = {});

struct OnlineConfig {
  TrainConfig pretrain;
  TrainConfig adapt;
};

// Stage 1 trains controller and throwaway heads on `pretrain_tasks`. Stage 2
// freezes the controller, registers fresh heads for `new_tasks` and trains
// only those. Returns the stage-2 report; extra carries the stage-1 summary
// and the controller hash before and after stage 2.
TrainReport online_adapt(const FrozenBackbone& bb, HraAdapter& adapter,
                         const std::vector<SyntheticTask>& pretrain_tasks,
                         const std::vector<SyntheticTask>& new_tasks, const OnlineConfig& cfg);

}  // namespace hra_lab
