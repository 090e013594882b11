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

#include "hra_lab/training.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "hra_lab/ctc.hpp"
#include "hra_lab/errors.hpp"
#include "hra_lab/rng.hpp"

namespace hra_lab {

std::string to_string(OptimizerKind k) { return k == OptimizerKind::kSgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "adam") return OptimizerKind::kAdam;
  throw ConfigError("unknown optimizer '" + s + "'");
}

FreezeMask FreezeMask::of(const ParameterRefs& params) {
  FreezeMask m;
  for (const auto& [name, t] : params) m.add(name);
  return m;
}

void optimizer_step(const ParameterRefs& params, const std::map<std::string, Tensor>& grads,
                    OptimizerState& state, const FreezeMask& mask) {
  const std::uint64_t step = state.step + 1;
  for (const auto& [name, p] : params) {
    auto it = grads.find(name);
    if (it == grads.end()) continue;
    if (it->second.shape() != p->shape()) {
      throw DimensionError("gradient for '" + name + "' has shape " +
                           shape_string(it->second.shape()) + ", parameter has " +
                           shape_string(p->shape()));
    }
    if (!mask.contains(name) && !it->second.all_finite()) {
      throw NumericError("non-finite gradient at step " + std::to_string(step) +
                         " for parameter '" + name + "'");
    }
  }
  state.step = step;
  const OptimizerConfig& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
  for (const auto& [name, p] : params) {
    if (mask.contains(name)) continue;
    auto it = grads.find(name);
    const Tensor g = it == grads.end() ? Tensor(p->shape()) : it->second;
    if (c.kind == OptimizerKind::kSgd) {
      for (std::size_t i = 0; i < p->size(); ++i) (*p)[i] -= c.lr * g[i];
      continue;
    }
    auto [m_it, m_new] = state.first_moment.try_emplace(name, p->shape());
    auto [v_it, v_new] = state.second_moment.try_emplace(name, p->shape());
    Tensor& m = m_it->second;
    Tensor& v = v_it->second;
    for (std::size_t i = 0; i < p->size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      (*p)[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

NodeId batch_loss(Graph& g, const FrozenBackbone& bb, const BackboneNodes& weights,
                  const Adapter& adapter, std::span<const BatchItem> batch) {
  if (batch.empty()) throw ContractError("batch_loss on an empty batch");
  for (const BatchItem& item : batch) adapter.check_task(item.task);
  std::vector<NodeId> losses;
  losses.reserve(batch.size());
  for (const BatchItem& item : batch) {
    auto pass = adapter.begin(g, item.task);
    const TraceNodes trace =
        backbone_forward(g, bb, weights, g.constant(item.example->input), pass.get());
    losses.push_back(ctc_loss(g, trace.log_probs, item.example->labels));
  }
  return g.scale(g.add_n(losses), 1.0 / static_cast<double>(batch.size()));
}

namespace {

struct SplitTotals {
  double loss_sum = 0.0;
  std::size_t edits = 0;
  std::size_t reference_length = 0;
  std::size_t examples = 0;

  void merge(const SplitTotals& o) {
    loss_sum += o.loss_sum;
    edits += o.edits;
    reference_length += o.reference_length;
    examples += o.examples;
  }
  double mean_loss() const { return examples ? loss_sum / static_cast<double>(examples) : 0.0; }
  double error_rate() const {
    return reference_length ? static_cast<double>(edits) / static_cast<double>(reference_length)
                            : 0.0;
  }
};

SplitTotals run_split(const FrozenBackbone& bb, const Adapter& adapter, TaskId task,
                      std::span<const Example> split) {
  SplitTotals totals;
  for (const Example& ex : split) {
    const ForwardTrace trace = backbone_forward(bb, ex.input, &adapter, task);
    const CtcResult r = ctc_loss(trace.log_probs, ex.labels);
    const std::vector<int> hyp = greedy_decode(trace.log_probs);
    totals.loss_sum += r.loss;
    totals.edits += edit_distance(hyp, ex.labels);
    totals.reference_length += ex.labels.size();
    ++totals.examples;
  }
  return totals;
}

std::string batch_mix_hash(std::span<const BatchItem> batch) {
  std::string ids;
  for (const BatchItem& item : batch) ids += std::to_string(item.task.value) + ",";
  return sha256_hex(ids).substr(0, 16);
}

}  // namespace

EvalResult evaluate(const FrozenBackbone& bb, const Adapter& adapter, TaskId task,
                    std::span<const Example> split) {
  if (split.empty()) throw ContractError("evaluate: empty split");
  adapter.check_task(task);
  const SplitTotals t = run_split(bb, adapter, task, split);
  return EvalResult{t.mean_loss(), t.error_rate(), t.examples};
}

double label_error_rate(std::span<const Tensor> log_probs, std::span<const std::vector<int>> refs) {
  if (log_probs.size() != refs.size()) throw ContractError("label_error_rate: size mismatch");
  std::size_t edits = 0, total = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    edits += edit_distance(greedy_decode(log_probs[i]), refs[i]);
    total += refs[i].size();
  }
  return total ? static_cast<double>(edits) / static_cast<double>(total) : 0.0;
}

json TrainReport::to_json() const {
  json tasks = json::array();
  for (const auto& t : per_task) {
    tasks.push_back({{"task", t.task},
                     {"valid_loss", t.valid_loss},
                     {"label_error_rate", t.label_error_rate}});
  }
  json doc = {{"format", "hra-lab-report-v1"},
              {"seed", seed},
              {"steps", steps},
              {"loss_curve", loss_curve},
              {"initial_train_loss", initial_train_loss},
              {"final_train_loss", final_train_loss},
              {"final_valid_loss", final_valid_loss},
              {"label_error_rate", label_error_rate},
              {"per_task", tasks},
              {"parameter_elements", parameter_elements},
              {"trainable_elements", trainable_elements},
              {"backbone_sha256", backbone_sha256}};
  for (const auto& [k, v] : extra.items()) doc[k] = v;
  return doc;
}

json TrainReport::timing_json() const {
  return json{{"wall_clock_seconds", wall_clock_seconds}, {"steps", steps}};
}

std::string TrainReport::loss_csv(const std::string& header_comment) const {
  std::ostringstream os;
  if (!header_comment.empty()) os << "# " << header_comment << "\n";
  os << "step,loss,task_mix_hash\n";
  for (std::size_t i = 0; i < loss_curve.size(); ++i) {
    os << i << ',' << format_double(loss_curve[i]) << ',' << task_mix[i] << '\n';
  }
  return os.str();
}

double adapter_grad_check(const FrozenBackbone& bb, Adapter& adapter,
                          std::span<const BatchItem> batch, double eps) {
  const ParameterRefs params = adapter.parameters();
  std::vector<Tensor> original;
  original.reserve(params.size());
  for (const auto& [name, t] : params) original.push_back(*t);
  auto assign = [&](const std::vector<Tensor>& values) {
    for (std::size_t i = 0; i < params.size(); ++i) *params[i].second = values[i];
  };
  auto loss_at = [&](const std::vector<Tensor>& values) {
    assign(values);
    Graph g;
    return g.value(batch_loss(g, bb, register_backbone(g, bb), adapter, batch)).item();
  };

  std::vector<Tensor> analytic;
  std::vector<Tensor> numeric;
  try {
    Graph g;
    const NodeId loss = batch_loss(g, bb, register_backbone(g, bb), adapter, batch);
    const auto grads = g.backward_by_name(loss);
    for (const auto& [name, t] : params) {
      auto it = grads.find(name);
      analytic.push_back(it == grads.end() ? Tensor(t->shape()) : it->second);
    }
    numeric = numeric_gradient(loss_at, original, eps);
  } catch (...) {
    assign(original);
    throw;
  }
  assign(original);
  return max_relative_error(analytic, numeric);
}

TrainReport train_multi_task(const FrozenBackbone& bb, Adapter& adapter,
                             const std::vector<SyntheticTask>& tasks, const TrainConfig& cfg,
                             const FreezeMask& mask) {
  const auto started = std::chrono::steady_clock::now();
  if (tasks.empty()) throw ContractError("train_multi_task needs at least one task");
  if (cfg.batch_size < 1) throw ConfigError("training.batch_size must be >= 1");
  std::vector<std::size_t> active = cfg.active_tasks;
  if (active.empty()) {
    for (std::size_t i = 0; i < tasks.size(); ++i) active.push_back(i);
  }
  for (std::size_t slot : active) {
    if (slot >= tasks.size()) {
      throw RoutingError("active task " + std::to_string(slot) + " is not in the task set");
    }
    adapter.check_task(TaskId{slot});
  }

  auto measure = [&](auto split_of) {
    SplitTotals all;
    for (std::size_t slot : active) all.merge(run_split(bb, adapter, TaskId{slot}, split_of(tasks[slot])));
    return all;
  };
  auto train_split = [](const SyntheticTask& t) { return std::span<const Example>(t.train); };

  TrainReport report;
  report.seed = cfg.seed;
  report.steps = cfg.steps;
  report.backbone_sha256 = bb.weights_sha256();
  report.initial_train_loss = measure(train_split).mean_loss();

  const ParameterRefs params = adapter.parameters();
  OptimizerState opt(cfg.optimizer);
  SplitMix64 rng(derive_seed(cfg.seed, streams::kBatch));
  std::vector<BatchItem> batch(cfg.batch_size);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    for (BatchItem& item : batch) {
      const std::size_t slot = active[rng.below(active.size())];
      const auto& train = tasks[slot].train;
      item = BatchItem{TaskId{slot}, &train[rng.below(train.size())]};
    }
    Graph g;
    const BackboneNodes weights = register_backbone(g, bb);
    const NodeId loss = batch_loss(g, bb, weights, adapter, batch);
    report.loss_curve.push_back(g.value(loss).item());
    report.task_mix.push_back(batch_mix_hash(batch));
    optimizer_step(params, g.backward_by_name(loss), opt, mask);
  }

  report.final_train_loss = measure(train_split).mean_loss();
  SplitTotals valid;
  for (std::size_t slot : active) {
    const SplitTotals t = run_split(bb, adapter, TaskId{slot}, tasks[slot].valid);
    report.per_task.push_back({slot, t.mean_loss(), t.error_rate()});
    valid.merge(t);
  }
  report.final_valid_loss = valid.mean_loss();
  report.label_error_rate = valid.error_rate();
  report.parameter_elements = adapter.element_count();
  for (const auto& [name, t] : params) {
    if (!mask.contains(name)) report.trainable_elements += t->size();
  }
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

TrainReport online_adapt(const FrozenBackbone& bb, HraAdapter& adapter,
                         const std::vector<SyntheticTask>& pretrain_tasks,
                         const std::vector<SyntheticTask>& new_tasks, const OnlineConfig& cfg) {
  std::set<std::size_t> seen;
  for (const auto& t : pretrain_tasks) seen.insert(t.index);
  for (const auto& t : new_tasks) {
    if (seen.contains(t.index)) {
      throw ConfigError("online adaptation: task " + std::to_string(t.index) +
                        " is in both the pretraining and the new task set");
    }
  }
  if (adapter.num_tasks() != pretrain_tasks.size()) {
    throw ConfigError("online adaptation: adapter must start with one head per pretraining task");
  }

  const TrainReport stage1 = train_multi_task(bb, adapter, pretrain_tasks, cfg.pretrain);

  adapter.reset_heads(new_tasks.size(), cfg.adapt.seed, streams::kStage2Head);
  const FreezeMask frozen = FreezeMask::of(adapter.controller_parameters());
  const std::string before = adapter.controller_sha256();
  TrainReport stage2 = train_multi_task(bb, adapter, new_tasks, cfg.adapt, frozen);
  const std::string after = adapter.controller_sha256();

  stage2.extra["controller_sha256_before"] = before;
  stage2.extra["controller_sha256_after"] = after;
  stage2.extra["pretrain"] = json{{"steps", stage1.steps},
                                  {"seed", stage1.seed},
                                  {"initial_train_loss", stage1.initial_train_loss},
                                  {"final_train_loss", stage1.final_train_loss},
                                  {"final_valid_loss", stage1.final_valid_loss}};
  stage2.wall_clock_seconds += stage1.wall_clock_seconds;
  return stage2;
}

}  // namespace hra_lab
