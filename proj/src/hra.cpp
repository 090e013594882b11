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

#include "hra_lab/hra.hpp"

#include "hra_lab/errors.hpp"

namespace hra_lab {

namespace {

void expect_shape(const Tensor& t, const Shape& shape, const std::string& what) {
  if (t.shape() != shape) {
    throw ConfigError(what + " has shape " + shape_string(t.shape()) + ", expected " +
                      shape_string(shape));
  }
}

void expect_present(const std::optional<Tensor>& t, bool wanted, const std::string& what,
                    const std::string& variant) {
  if (t.has_value() != wanted) {
    throw ConfigError(what + (wanted ? " is required" : " must be absent") + " for the " +
                      variant + " controller");
  }
}

std::optional<NodeId> maybe_register(Graph& g, const std::optional<Tensor>& t,
                                     const std::string& name, bool trainable) {
  if (!t) return std::nullopt;
  return trainable ? g.parameter(name, *t) : g.constant(*t);
}

}  // namespace

void ControllerParams::validate() const {
  const std::string v = to_string(variant);
  if (input_weight.rank() != 2) throw ConfigError("controller input_weight must be a matrix");
  const std::size_t dr = hidden_dim(), d = input_dim();
  expect_shape(bias, {dr}, "controller bias");
  const bool ind = variant == ControllerVariant::kIndRnn;
  const bool rnn = variant == ControllerVariant::kVanillaRnn;
  const bool gru = variant == ControllerVariant::kLightGru;
  expect_present(recurrent_scale, ind, "recurrent_scale", v);
  expect_present(recurrent_weight, rnn, "recurrent_weight", v);
  expect_present(gate_input_weight, gru, "gate_input_weight", v);
  expect_present(gate_recurrent_weight, gru, "gate_recurrent_weight", v);
  expect_present(candidate_recurrent_weight, gru, "candidate_recurrent_weight", v);
  expect_present(gate_bias, gru, "gate_bias", v);
  if (ind) expect_shape(*recurrent_scale, {dr}, "recurrent_scale");
  if (rnn) expect_shape(*recurrent_weight, {dr, dr}, "recurrent_weight");
  if (gru) {
    expect_shape(*gate_input_weight, {dr, d}, "gate_input_weight");
    expect_shape(*gate_recurrent_weight, {dr, dr}, "gate_recurrent_weight");
    expect_shape(*candidate_recurrent_weight, {dr, dr}, "candidate_recurrent_weight");
    expect_shape(*gate_bias, {dr}, "gate_bias");
  }
}

ParameterRefs ControllerParams::named(const std::string& prefix) {
  ParameterRefs out;
  out.emplace_back(prefix + "/input_weight", &input_weight);
  out.emplace_back(prefix + "/bias", &bias);
  auto add = [&](std::optional<Tensor>& t, const char* name) {
    if (t) out.emplace_back(prefix + "/" + name, &*t);
  };
  add(recurrent_scale, "recurrent_scale");
  add(recurrent_weight, "recurrent_weight");
  add(gate_input_weight, "gate_input_weight");
  add(gate_recurrent_weight, "gate_recurrent_weight");
  add(candidate_recurrent_weight, "candidate_recurrent_weight");
  add(gate_bias, "gate_bias");
  return out;
}

ControllerParams ControllerParams::init(ControllerVariant variant, std::size_t model_dim,
                                        std::size_t recurrent_dim, SplitMix64& rng) {
  if (model_dim < 1 || recurrent_dim < 1) throw ConfigError("controller dims must be >= 1");
  ControllerParams c;
  c.variant = variant;
  c.input_weight = fan_in_uniform({recurrent_dim, model_dim}, rng);
  c.bias = Tensor({recurrent_dim});
  switch (variant) {
    case ControllerVariant::kIndRnn:
      c.recurrent_scale = uniform_tensor({recurrent_dim}, 0.0, 1.0, rng);
      break;
    case ControllerVariant::kVanillaRnn:
      c.recurrent_weight = fan_in_uniform({recurrent_dim, recurrent_dim}, rng);
      break;
    case ControllerVariant::kLightGru:
      c.gate_input_weight = fan_in_uniform({recurrent_dim, model_dim}, rng);
      c.gate_recurrent_weight = fan_in_uniform({recurrent_dim, recurrent_dim}, rng);
      c.candidate_recurrent_weight = fan_in_uniform({recurrent_dim, recurrent_dim}, rng);
      c.gate_bias = Tensor({recurrent_dim});
      break;
  }
  return c;
}

TaskHead TaskHead::linear(Tensor projection) {
  TaskHead h;
  h.kind = HeadKind::kLinear;
  h.projection = std::move(projection);
  h.validate();
  return h;
}

TaskHead TaskHead::ffn(Tensor hidden, Tensor output) {
  TaskHead h;
  h.kind = HeadKind::kFfn;
  h.hidden = std::move(hidden);
  h.output = std::move(output);
  h.validate();
  return h;
}

TaskHead TaskHead::init(HeadKind kind, std::size_t model_dim, std::size_t recurrent_dim,
                        std::size_t head_hidden, bool zero_output, SplitMix64& rng) {
  if (model_dim < 1 || recurrent_dim < 1 || (kind == HeadKind::kFfn && head_hidden < 1)) {
    throw ConfigError("head dims must be >= 1");
  }
  if (kind == HeadKind::kLinear) {
    Tensor m = fan_in_uniform({model_dim, recurrent_dim}, rng);
    return linear(zero_output ? Tensor({model_dim, recurrent_dim}) : std::move(m));
  }
  Tensor m1 = fan_in_uniform({head_hidden, recurrent_dim}, rng);
  Tensor m2 = fan_in_uniform({model_dim, head_hidden}, rng);
  return ffn(std::move(m1), zero_output ? Tensor({model_dim, head_hidden}) : std::move(m2));
}

std::size_t TaskHead::input_dim() const {
  return kind == HeadKind::kLinear ? projection->dim(1) : hidden->dim(1);
}

std::size_t TaskHead::output_dim() const {
  return kind == HeadKind::kLinear ? projection->dim(0) : output->dim(0);
}

void TaskHead::validate() const {
  if (kind == HeadKind::kLinear) {
    if (!projection || hidden || output) throw ConfigError("linear head needs exactly a projection");
    if (projection->rank() != 2) throw ConfigError("head projection must be a matrix");
    return;
  }
  if (projection || !hidden || !output) throw ConfigError("FFN head needs hidden and output weights");
  if (hidden->rank() != 2 || output->rank() != 2 || output->dim(1) != hidden->dim(0)) {
    throw DimensionError("FFN head: hidden " + shape_string(hidden->shape()) +
                         " and output " + shape_string(output->shape()) + " do not chain");
  }
}

ParameterRefs TaskHead::named(const std::string& prefix) {
  ParameterRefs out;
  if (projection) out.emplace_back(prefix + "/projection", &*projection);
  if (hidden) out.emplace_back(prefix + "/hidden", &*hidden);
  if (output) out.emplace_back(prefix + "/output", &*output);
  return out;
}

TaskId HeadRegistry::add(TaskHead head) {
  head.validate();
  heads_.push_back(std::move(head));
  return TaskId{heads_.size() - 1};
}

const TaskHead& HeadRegistry::at(TaskId task) const {
  if (task.value >= heads_.size()) {
    throw RoutingError("task " + std::to_string(task.value) + " has no registered head (" +
                       std::to_string(heads_.size()) + " heads)");
  }
  return heads_[task.value];
}

TaskHead& HeadRegistry::at(TaskId task) {
  return const_cast<TaskHead&>(static_cast<const HeadRegistry&>(*this).at(task));
}

ControllerNodes register_controller(Graph& g, const ControllerParams& c, const std::string& prefix,
                                    bool trainable) {
  c.validate();
  auto reg = [&](const Tensor& t, const char* name) {
    return trainable ? g.parameter(prefix + "/" + name, t) : g.constant(t);
  };
  ControllerNodes n;
  n.variant = c.variant;
  n.hidden_dim = c.hidden_dim();
  n.input_weight = reg(c.input_weight, "input_weight");
  n.bias = reg(c.bias, "bias");
  n.recurrent_scale = maybe_register(g, c.recurrent_scale, prefix + "/recurrent_scale", trainable);
  n.recurrent_weight = maybe_register(g, c.recurrent_weight, prefix + "/recurrent_weight", trainable);
  n.gate_input_weight =
      maybe_register(g, c.gate_input_weight, prefix + "/gate_input_weight", trainable);
  n.gate_recurrent_weight =
      maybe_register(g, c.gate_recurrent_weight, prefix + "/gate_recurrent_weight", trainable);
  n.candidate_recurrent_weight = maybe_register(g, c.candidate_recurrent_weight,
                                                prefix + "/candidate_recurrent_weight", trainable);
  n.gate_bias = maybe_register(g, c.gate_bias, prefix + "/gate_bias", trainable);
  return n;
}

HeadNodes register_head(Graph& g, const TaskHead& head, const std::string& prefix, bool trainable) {
  head.validate();
  return HeadNodes{head.kind, maybe_register(g, head.projection, prefix + "/projection", trainable),
                   maybe_register(g, head.hidden, prefix + "/hidden", trainable),
                   maybe_register(g, head.output, prefix + "/output", trainable)};
}

NodeId controller_step(Graph& g, const ControllerNodes& c, NodeId x, NodeId h_prev) {
  const Tensor& hv = g.value(h_prev);
  if (hv.rank() != 2 || hv.cols() != c.hidden_dim || hv.rows() != g.value(x).rows()) {
    throw DimensionError("controller state " + shape_string(hv.shape()) +
                         " does not match input " + shape_string(g.value(x).shape()) +
                         " and d_r = " + std::to_string(c.hidden_dim));
  }
  switch (c.variant) {
    case ControllerVariant::kIndRnn: {
      if (!c.recurrent_scale) throw ConfigError("IndRNN controller is missing recurrent_scale");
      const NodeId pre = g.add(g.add(g.linear(x, c.input_weight), g.mul(h_prev, *c.recurrent_scale)),
                               c.bias);
      return g.relu(pre);
    }
    case ControllerVariant::kVanillaRnn: {
      if (!c.recurrent_weight) throw ConfigError("RNN controller is missing recurrent_weight");
      const NodeId pre =
          g.add(g.add(g.linear(x, c.input_weight), g.linear(h_prev, *c.recurrent_weight)), c.bias);
      return g.tanh(pre);
    }
    case ControllerVariant::kLightGru: {
      if (!c.gate_input_weight || !c.gate_recurrent_weight || !c.candidate_recurrent_weight ||
          !c.gate_bias) {
        throw ConfigError("LightGRU controller is missing gate weights");
      }
      const NodeId z = g.sigmoid(g.add(
          g.add(g.linear(x, *c.gate_input_weight), g.linear(h_prev, *c.gate_recurrent_weight)),
          *c.gate_bias));
      const NodeId candidate = g.relu(g.add(
          g.add(g.linear(x, c.input_weight), g.linear(h_prev, *c.candidate_recurrent_weight)),
          c.bias));
      return g.add(g.mul(z, h_prev), g.mul(g.affine(z, -1.0, 1.0), candidate));
    }
  }
  throw ConfigError("unknown controller variant");
}

NodeId head_apply(Graph& g, const HeadNodes& head, NodeId h) {
  if (head.kind == HeadKind::kLinear) return g.linear(h, *head.projection);
  return g.linear(g.relu(g.linear(h, *head.hidden)), *head.output);
}

std::pair<NodeId, NodeId> adapt_layer(Graph& g, const ControllerNodes& c, const HeadNodes& head,
                                      NodeId x, NodeId h_prev, bool disable_recurrence) {
  if (disable_recurrence) h_prev = g.constant(Tensor({g.value(x).rows(), c.hidden_dim}));
  const NodeId h = controller_step(g, c, x, h_prev);
  const NodeId o = head_apply(g, head, h);
  if (g.value(o).shape() != g.value(x).shape()) {
    throw DimensionError("head output " + shape_string(g.value(o).shape()) +
                         " does not match backbone activation " + shape_string(g.value(x).shape()));
  }
  return {g.add(x, o), h};
}

Tensor controller_step(const Tensor& x, const Tensor& h_prev, const ControllerParams& c) {
  Graph g;
  const ControllerNodes nodes = register_controller(g, c, "controller", false);
  return g.value(controller_step(g, nodes, g.constant(x), g.constant(h_prev)));
}

Tensor head_apply(const Tensor& h, const TaskHead& head) {
  Graph g;
  const HeadNodes nodes = register_head(g, head, "head", false);
  const Tensor& hv = h;
  if (hv.rank() != 2 || hv.cols() != head.input_dim()) {
    throw DimensionError("head input " + shape_string(hv.shape()) + " does not match d_r = " +
                         std::to_string(head.input_dim()));
  }
  return g.value(head_apply(g, nodes, g.constant(h)));
}

std::pair<Tensor, Tensor> adapt_layer(const Tensor& x, const Tensor& h_prev,
                                      const ControllerParams& c, const TaskHead& head,
                                      bool disable_recurrence) {
  Graph g;
  const ControllerNodes cn = register_controller(g, c, "controller", false);
  const HeadNodes hn = register_head(g, head, "head", false);
  auto [xa, h] = adapt_layer(g, cn, hn, g.constant(x), g.constant(h_prev), disable_recurrence);
  return {g.value(xa), g.value(h)};
}

namespace {

class HraPass : public AdapterPass {
 public:
  HraPass(const HraAdapter& adapter, TaskId task)
      : adapter_(adapter),
        task_(task),
        controllers_(adapter.copies()),
        heads_(adapter.copies()) {}

  NodeId adapt(Graph& g, std::size_t layer, NodeId, NodeId block_output) override {
    if (!adapter_.layer_active(layer)) return block_output;
    const std::size_t copy = adapter_.copies() == 1 ? 0 : layer;
    if (!controllers_[copy]) {
      controllers_[copy] = register_controller(g, adapter_.controller(copy),
                                               adapter_.controller_prefix(copy), true);
      heads_[copy] = register_head(g, adapter_.heads(copy).at(task_),
                                   adapter_.head_prefix(task_, copy), true);
    }
    const NodeId h_prev =
        state_ ? *state_
               : g.constant(Tensor({g.value(block_output).rows(), controllers_[copy]->hidden_dim}));
    auto [adapted, h] = adapt_layer(g, *controllers_[copy], *heads_[copy], block_output, h_prev,
                                    adapter_.spec().disable_recurrence);
    state_ = h;
    return adapted;
  }

  std::optional<NodeId> controller_state() const override { return state_; }

 private:
  const HraAdapter& adapter_;
  TaskId task_;
  std::vector<std::optional<ControllerNodes>> controllers_;
  std::vector<std::optional<HeadNodes>> heads_;
  std::optional<NodeId> state_;
};

}  // namespace

HraAdapter::HraAdapter(const AdapterSpec& spec, std::size_t layers, std::size_t model_dim,
                       std::size_t num_tasks, std::uint64_t seed)
    : spec_(spec), layers_(layers), model_dim_(model_dim) {
  if (layers < 1 || model_dim < 1) throw ConfigError("HRA needs layers >= 1 and model_dim >= 1");
  if (spec.recurrent_dim < 1) throw ConfigError("adapter.recurrent_dim must be >= 1");
  if (spec.head == HeadKind::kFfn && spec.head_hidden < 1) {
    throw ConfigError("adapter.head_hidden must be >= 1");
  }
  if (!spec.layer_mask.empty() && spec.layer_mask.size() != layers) {
    throw ConfigError("adapter.layer_mask has " + std::to_string(spec.layer_mask.size()) +
                      " entries, backbone has " + std::to_string(layers) + " layers");
  }
  SplitMix64 rng(derive_seed(seed, streams::kController));
  const ControllerParams controller =
      ControllerParams::init(spec.variant, model_dim, spec.recurrent_dim, rng);
  const std::size_t copies = spec.unshare_weights ? layers : 1;
  controllers_.assign(copies, controller);
  registries_.resize(copies);
  reset_heads(num_tasks, seed, streams::kHead);
}

bool HraAdapter::layer_active(std::size_t layer) const {
  return spec_.layer_mask.empty() || spec_.layer_mask.at(layer);
}

std::string HraAdapter::controller_prefix(std::size_t copy) const {
  return copies() == 1 ? "controller" : "controller/" + std::to_string(copy);
}

std::string HraAdapter::head_prefix(TaskId task, std::size_t copy) const {
  std::string p = "heads/" + std::to_string(task.value);
  return copies() == 1 ? p : p + "/" + std::to_string(copy);
}

TaskHead HraAdapter::fresh_head(std::uint64_t seed, std::uint64_t stream, std::size_t task) const {
  SplitMix64 rng(derive_seed(seed, stream, task));
  return TaskHead::init(spec_.head, model_dim_, spec_.recurrent_dim, spec_.head_hidden,
                        spec_.zero_init_head, rng);
}

void HraAdapter::reset_heads(std::size_t num_tasks, std::uint64_t seed, std::uint64_t stream) {
  for (auto& r : registries_) r.clear();
  for (std::size_t n = 0; n < num_tasks; ++n) {
    const TaskHead head = fresh_head(seed, stream, n);
    for (auto& r : registries_) r.add(head);
  }
}

std::unique_ptr<AdapterPass> HraAdapter::begin(Graph&, TaskId task) const {
  check_task(task);
  return std::make_unique<HraPass>(*this, task);
}

ParameterRefs HraAdapter::controller_parameters() {
  ParameterRefs out;
  for (std::size_t c = 0; c < copies(); ++c) {
    auto refs = controllers_[c].named(controller_prefix(c));
    out.insert(out.end(), refs.begin(), refs.end());
  }
  return out;
}

ParameterRefs HraAdapter::parameters() {
  ParameterRefs out = controller_parameters();
  for (std::size_t n = 0; n < num_tasks(); ++n) {
    for (std::size_t c = 0; c < copies(); ++c) {
      auto refs = registries_[c].at(TaskId{n}).named(head_prefix(TaskId{n}, c));
      out.insert(out.end(), refs.begin(), refs.end());
    }
  }
  return out;
}

std::string HraAdapter::controller_sha256() const {
  NamedTensors named;
  for (auto& [name, t] : const_cast<HraAdapter*>(this)->controller_parameters()) {
    named.emplace_back(name, t);
  }
  return tensors_sha256(named);
}

json HraAdapter::meta() const {
  json mask = json::array();
  for (std::size_t l = 0; l < layers_; ++l) mask.push_back(layer_active(l));
  return json{{"method", "hra"},
              {"variant", to_string(spec_.variant)},
              {"head", to_string(spec_.head)},
              {"model_dim", model_dim_},
              {"recurrent_dim", spec_.recurrent_dim},
              {"head_hidden", spec_.head_hidden},
              {"layers", layers_},
              {"layer_mask", mask},
              {"disable_recurrence", spec_.disable_recurrence},
              {"unshare_weights", spec_.unshare_weights},
              {"num_tasks", num_tasks()}};
}

ForwardTrace hra_forward(const FrozenBackbone& bb, const HraAdapter& adapter, TaskId task,
                         const Tensor& input) {
  return backbone_forward(bb, input, &adapter, task);
}

ParamCount hra_param_count(std::size_t d, std::size_t dr, std::size_t dh,
                           ControllerVariant variant, HeadKind head, std::size_t num_tasks) {
  if (d < 1 || dr < 1 || (head == HeadKind::kFfn && dh < 1) || num_tasks < 1) {
    throw ConfigError("hra_param_count: dims and task count must be >= 1");
  }
  ParamCount c;
  switch (variant) {
    case ControllerVariant::kIndRnn: c.shared = dr * d + 2 * dr; break;
    case ControllerVariant::kVanillaRnn: c.shared = dr * d + dr * dr + dr; break;
    case ControllerVariant::kLightGru: c.shared = 2 * dr * d + 2 * dr * dr + 2 * dr; break;
  }
  c.per_task = head == HeadKind::kLinear ? d * dr : dh * dr + d * dh;
  c.total = c.shared + num_tasks * c.per_task;
  return c;
}

}  // namespace hra_lab
