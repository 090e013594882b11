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

#include "hra_lab/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hra_lab/errors.hpp"

namespace hra_lab {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kConstant: return "constant";
    case OpKind::kParameter: return "parameter";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kLinear: return "linear";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kRelu: return "relu";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kAffine: return "affine";
    case OpKind::kSum: return "sum";
    case OpKind::kLogSoftmax: return "log_softmax";
    case OpKind::kPick: return "pick";
    case OpKind::kLogSumExp: return "logsumexp";
    case OpKind::kAddN: return "add_n";
    case OpKind::kCustom: return "custom";
  }
  return "?";
}

namespace {

// Reduces a gradient of a's shape down to b's shape when b was broadcast
// over rows.
Tensor reduce_to(const Tensor& grad, const Shape& target) {
  if (grad.shape() == target) return grad;
  Tensor out(target);
  const std::size_t c = out.size();
  for (std::size_t i = 0; i < grad.size(); ++i) out[i % c] += grad[i];
  return out;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename Fn>
Tensor map(const Tensor& a, Fn fn) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = fn(a[i]);
  return out;
}

}  // namespace

const Graph::Node& Graph::node(NodeId id) const {
  if (id >= nodes_.size()) {
    throw ContractError("graph node " + std::to_string(id) + " does not exist");
  }
  return nodes_[id];
}

NodeId Graph::push(OpKind kind, std::vector<NodeId> inputs, Tensor value, BackwardFn backward) {
  bool requires_grad = false;
  for (NodeId in : inputs) requires_grad = requires_grad || node(in).requires_grad;
  nodes_.push_back(Node{kind, std::move(inputs), std::move(value), std::move(backward), {},
                        requires_grad});
  return nodes_.size() - 1;
}

NodeId Graph::constant(Tensor value) {
  return push(OpKind::kConstant, {}, std::move(value), nullptr);
}

NodeId Graph::parameter(const std::string& name, const Tensor& value) {
  if (auto it = parameters_by_name_.find(name); it != parameters_by_name_.end()) {
    return it->second;
  }
  const NodeId id = push(OpKind::kParameter, {}, value, nullptr);
  nodes_[id].name = name;
  nodes_[id].requires_grad = true;
  parameter_ids_.push_back(id);
  parameters_by_name_.emplace(name, id);
  return id;
}

NodeId Graph::find_parameter(const std::string& name) const {
  auto it = parameters_by_name_.find(name);
  return it == parameters_by_name_.end() ? nodes_.size() : it->second;
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  Tensor out = hra_lab::matmul(value(a), value(b));
  return push(OpKind::kMatMul, {a, b}, std::move(out),
              [](const Graph& g, NodeId self, const Tensor& grad) {
                const auto& in = g.node(self).inputs;
                const Tensor& av = g.value(in[0]);
                const Tensor& bv = g.value(in[1]);
                return std::vector<Tensor>{hra_lab::linear(grad, bv),
                                           hra_lab::matmul(transpose(av), grad)};
              });
}

NodeId Graph::linear(NodeId x, NodeId w) {
  Tensor out = hra_lab::linear(value(x), value(w));
  return push(OpKind::kLinear, {x, w}, std::move(out),
              [](const Graph& g, NodeId self, const Tensor& grad) {
                const auto& in = g.node(self).inputs;
                const Tensor& xv = g.value(in[0]);
                const Tensor& wv = g.value(in[1]);
                return std::vector<Tensor>{hra_lab::matmul(grad, wv),
                                           hra_lab::matmul(transpose(grad), xv)};
              });
}

NodeId Graph::add(NodeId a, NodeId b) {
  Tensor out = hra_lab::add(value(a), value(b));
  return push(OpKind::kAdd, {a, b}, std::move(out),
              [](const Graph& g, NodeId self, const Tensor& grad) {
                const auto& in = g.node(self).inputs;
                return std::vector<Tensor>{grad, reduce_to(grad, g.value(in[1]).shape())};
              });
}

NodeId Graph::mul(NodeId a, NodeId b) {
  Tensor out = hra_lab::mul(value(a), value(b));
  return push(OpKind::kMul, {a, b}, std::move(out),
              [](const Graph& g, NodeId self, const Tensor& grad) {
                const auto& in = g.node(self).inputs;
                const Tensor& av = g.value(in[0]);
                const Tensor& bv = g.value(in[1]);
                return std::vector<Tensor>{hra_lab::mul(grad, bv),
                                           reduce_to(hra_lab::mul(grad, av), bv.shape())};
              });
}

NodeId Graph::relu(NodeId a) {
  Tensor out = hra_lab::relu(value(a));
  return push(OpKind::kRelu, {a}, std::move(out),
              [](const Graph& g, NodeId self, const Tensor& grad) {
                const Tensor& xv = g.value(g.node(self).inputs[0]);
                Tensor d(grad.shape());
                // relu'(0) is 0.
                for (std::size_t i = 0; i < d.size(); ++i) d[i] = xv[i] > 0.0 ? grad[i] : 0.0;
                return std::vector<Tensor>{std::move(d)};
              });
}

NodeId Graph::tanh(NodeId a) {
  Tensor out = map(value(a), [](double x) { return std::tanh(x); });
  return push(OpKind::kTanh, {a}, std::move(out),
              [](const Graph& g, NodeId self, const Tensor& grad) {
                const Tensor& y = g.value(self);
                Tensor d(grad.shape());
                for (std::size_t i = 0; i < d.size(); ++i) d[i] = grad[i] * (1.0 - y[i] * y[i]);
                return std::vector<Tensor>{std::move(d)};
              });
}

NodeId Graph::sigmoid(NodeId a) {
  Tensor out = map(value(a), stable_sigmoid);
  return push(OpKind::kSigmoid, {a}, std::move(out),
              [](const Graph& g, NodeId self, const Tensor& grad) {
                const Tensor& y = g.value(self);
                Tensor d(grad.shape());
                for (std::size_t i = 0; i < d.size(); ++i) d[i] = grad[i] * y[i] * (1.0 - y[i]);
                return std::vector<Tensor>{std::move(d)};
              });
}

NodeId Graph::elementwise(Elementwise kind, NodeId a, NodeId b) {
  switch (kind) {
    case Elementwise::kMul: return mul(a, b);
    case Elementwise::kAdd: return add(a, b);
    default: throw ContractError("elementwise: unary kind given a second operand");
  }
}

NodeId Graph::elementwise(Elementwise kind, NodeId a) {
  switch (kind) {
    case Elementwise::kRelu: return relu(a);
    case Elementwise::kTanh: return tanh(a);
    case Elementwise::kSigmoid: return sigmoid(a);
    default: throw ContractError("elementwise: binary kind needs a second operand");
  }
}

NodeId Graph::affine(NodeId a, double factor, double offset) {
  Tensor out = map(value(a), [=](double x) { return factor * x + offset; });
  return push(OpKind::kAffine, {a}, std::move(out),
              [factor](const Graph&, NodeId, const Tensor& grad) {
                return std::vector<Tensor>{hra_lab::scale(grad, factor)};
              });
}

NodeId Graph::sum(NodeId a) {
  return push(OpKind::kSum, {a}, Tensor::scalar(hra_lab::sum(value(a))),
              [](const Graph& g, NodeId self, const Tensor& grad) {
                const Tensor& xv = g.value(g.node(self).inputs[0]);
                return std::vector<Tensor>{Tensor::full(xv.shape(), grad.item())};
              });
}

NodeId Graph::mean(NodeId a) {
  const double n = static_cast<double>(value(a).size());
  return scale(sum(a), 1.0 / n);
}

NodeId Graph::log_softmax(NodeId a) {
  const Tensor& x = value(a);
  const std::size_t cols = x.cols();
  Tensor out(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) m = std::max(m, x.at(r, c));
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += std::exp(x.at(r, c) - m);
    const double lse = m + std::log(s);
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) = x.at(r, c) - lse;
  }
  return push(OpKind::kLogSoftmax, {a}, std::move(out),
              [](const Graph& g, NodeId self, const Tensor& grad) {
                const Tensor& y = g.value(self);
                Tensor d(grad.shape());
                const std::size_t cols = y.cols();
                for (std::size_t r = 0; r < y.rows(); ++r) {
                  double gs = 0.0;
                  for (std::size_t c = 0; c < cols; ++c) gs += grad.at(r, c);
                  for (std::size_t c = 0; c < cols; ++c) {
                    d.at(r, c) = grad.at(r, c) - std::exp(y.at(r, c)) * gs;
                  }
                }
                return std::vector<Tensor>{std::move(d)};
              });
}

NodeId Graph::pick(NodeId a, std::size_t index) {
  const Tensor& x = value(a);
  if (index >= x.size()) {
    throw DimensionError("pick: index " + std::to_string(index) + " outside " +
                         shape_string(x.shape()));
  }
  return push(OpKind::kPick, {a}, Tensor::scalar(x[index]),
              [index](const Graph& g, NodeId self, const Tensor& grad) {
                Tensor d(g.value(g.node(self).inputs[0]).shape());
                d[index] = grad.item();
                return std::vector<Tensor>{std::move(d)};
              });
}

NodeId Graph::logsumexp(std::span<const NodeId> scalars) {
  if (scalars.empty()) throw ContractError("logsumexp of an empty list");
  double m = -std::numeric_limits<double>::infinity();
  for (NodeId s : scalars) m = std::max(m, value(s).item());
  double result = m;
  if (std::isfinite(m)) {
    double acc = 0.0;
    for (NodeId s : scalars) acc += std::exp(value(s).item() - m);
    result = m + std::log(acc);
  }
  return push(OpKind::kLogSumExp, std::vector<NodeId>(scalars.begin(), scalars.end()),
              Tensor::scalar(result), [](const Graph& g, NodeId self, const Tensor& grad) {
                const auto& in = g.node(self).inputs;
                const double y = g.value(self).item();
                std::vector<Tensor> out;
                out.reserve(in.size());
                for (NodeId s : in) {
                  const double w = std::isfinite(y) ? std::exp(g.value(s).item() - y) : 0.0;
                  out.push_back(Tensor::scalar(grad.item() * w));
                }
                return out;
              });
}

NodeId Graph::add_n(std::span<const NodeId> list) {
  if (list.empty()) throw ContractError("add_n of an empty list");
  Tensor acc = value(list[0]);
  for (std::size_t i = 1; i < list.size(); ++i) {
    if (value(list[i]).shape() != acc.shape()) {
      throw DimensionError("add_n: shape " + shape_string(value(list[i]).shape()) +
                           " differs from " + shape_string(acc.shape()));
    }
    acc = hra_lab::add(acc, value(list[i]));
  }
  return push(OpKind::kAddN, std::vector<NodeId>(list.begin(), list.end()), std::move(acc),
              [](const Graph& g, NodeId self, const Tensor& grad) {
                return std::vector<Tensor>(g.node(self).inputs.size(), grad);
              });
}

NodeId Graph::custom(std::vector<NodeId> inputs, Tensor value, BackwardFn backward) {
  return push(OpKind::kCustom, std::move(inputs), std::move(value), std::move(backward));
}

std::map<NodeId, Tensor> Graph::backward(NodeId loss) const {
  if (value(loss).size() != 1) {
    throw ContractError("backward: loss node " + std::to_string(loss) + " has shape " +
                        shape_string(value(loss).shape()) + ", expected a scalar");
  }
  // Contributions arrive from consumers in descending id order and are
  // summed in reverse, i.e. ascending consumer id.
  std::vector<std::vector<Tensor>> pending(loss + 1);
  pending[loss].push_back(Tensor::full(value(loss).shape(), 1.0));
  std::map<NodeId, Tensor> grads;
  for (NodeId id = loss + 1; id-- > 0;) {
    auto& contributions = pending[id];
    const Node& n = nodes_[id];
    if (contributions.empty() || !n.requires_grad) {
      contributions.clear();
      continue;
    }
    Tensor g = std::move(contributions.back());
    for (std::size_t k = contributions.size() - 1; k-- > 0;) g = hra_lab::add(g, contributions[k]);
    contributions.clear();
    contributions.shrink_to_fit();
    if (n.kind == OpKind::kParameter) {
      grads.emplace(id, std::move(g));
      continue;
    }
    if (!n.backward) continue;
    std::vector<Tensor> input_grads = n.backward(*this, id, g);
    for (std::size_t i = 0; i < n.inputs.size(); ++i) {
      const NodeId in = n.inputs[i];
      if (nodes_[in].requires_grad) pending[in].push_back(std::move(input_grads[i]));
    }
  }
  for (NodeId p : parameter_ids_) {
    if (!grads.contains(p)) grads.emplace(p, Tensor(nodes_[p].value.shape()));
  }
  return grads;
}

std::map<std::string, Tensor> Graph::backward_by_name(NodeId loss) const {
  std::map<std::string, Tensor> out;
  for (auto& [id, g] : backward(loss)) out.emplace(nodes_[id].name, std::move(g));
  return out;
}

std::vector<Tensor> numeric_gradient(const std::function<double(const std::vector<Tensor>&)>& f,
                                     const std::vector<Tensor>& params, double eps) {
  if (!(eps > 0.0)) throw ContractError("numeric_gradient: eps must be positive");
  std::vector<Tensor> probe = params;
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor g(params[p].shape());
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double orig = params[p][i];
      probe[p][i] = orig + eps;
      const double up = f(probe);
      probe[p][i] = orig - eps;
      const double down = f(probe);
      probe[p][i] = orig;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("numeric_gradient: non-finite function value at parameter " +
                           std::to_string(p) + " element " + std::to_string(i));
      }
      g[i] = (up - down) / (2.0 * eps);
    }
    out.push_back(std::move(g));
  }
  return out;
}

double grad_check(const GraphBuilder& f, const std::vector<Tensor>& params, double eps) {
  auto build = [&](const std::vector<Tensor>& values, Graph& g) {
    std::vector<NodeId> ids;
    ids.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      ids.push_back(g.parameter("p" + std::to_string(i), values[i]));
    }
    return std::pair{f(g, ids), ids};
  };

  Graph g;
  auto [loss, ids] = build(params, g);
  const double base = g.value(loss).item();
  if (!std::isfinite(base)) throw NumericError("grad_check: non-finite loss at the base point");
  const auto analytic = g.backward(loss);

  const auto numeric = numeric_gradient(
      [&](const std::vector<Tensor>& values) {
        Graph probe;
        return probe.value(build(values, probe).first).item();
      },
      params, eps);

  std::vector<Tensor> tape;
  tape.reserve(ids.size());
  for (NodeId id : ids) tape.push_back(analytic.at(id));
  return max_relative_error(tape, numeric);
}

double max_relative_error(const std::vector<Tensor>& analytic, const std::vector<Tensor>& numeric) {
  if (analytic.size() != numeric.size()) {
    throw ContractError("max_relative_error: gradient lists differ in length");
  }
  double worst = 0.0;
  for (std::size_t p = 0; p < analytic.size(); ++p) {
    const Tensor& a = analytic[p];
    const Tensor& n = numeric[p];
    if (a.shape() != n.shape()) {
      throw DimensionError("max_relative_error: shapes " + shape_string(a.shape()) + " and " +
                           shape_string(n.shape()) + " differ");
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double denom = std::max({1.0, std::fabs(a[i]), std::fabs(n[i])});
      worst = std::max(worst, std::fabs(a[i] - n[i]) / denom);
    }
  }
  return worst;
}

}  // namespace hra_lab
