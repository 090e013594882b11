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
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hra_lab/tensor.hpp"

namespace hra_lab {

using NodeId = std::size_t;

enum class OpKind {
  kConstant,
  kParameter,
  kMatMul,
  kLinear,
  kAdd,
  kMul,
  kRelu,
  kTanh,
  kSigmoid,
  kAffine,
  kSum,
  kLogSoftmax,
  kPick,
  kLogSumExp,
  kAddN,
  kCustom,
};

const char* op_name(OpKind kind);

enum class Elementwise { kRelu, kTanh, kSigmoid, kMul, kAdd };

class Graph;

// Maps the gradient of a node's output to one gradient per input, in input
// order. Inputs that do not require a gradient may receive an empty slot.
using BackwardFn = std::function<std::vector<Tensor>(const Graph& graph, NodeId self,
                                                     const Tensor& grad_out)>;

// Append-only reverse-mode tape. Nodes only reference earlier nodes, so the
// graph is acyclic by construction. Not thread-safe.
class Graph {
 public:
  struct Node {
    OpKind kind;
    std::vector<NodeId> inputs;
    Tensor value;
    BackwardFn backward;
    std::string name;  // parameters only
    bool requires_grad = false;
  };

  NodeId constant(Tensor value);
  // Registers a trainable leaf. Registering the same name again returns the
  // existing node, so a parameter read at many sites is one node.
  NodeId parameter(const std::string& name, const Tensor& value);

  NodeId matmul(NodeId a, NodeId b);
  NodeId linear(NodeId x, NodeId w);
  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId relu(NodeId a);
  NodeId tanh(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId elementwise(Elementwise kind, NodeId a, NodeId b);
  NodeId elementwise(Elementwise kind, NodeId a);
  // factor * a + offset
  NodeId affine(NodeId a, double factor, double offset);
  NodeId scale(NodeId a, double factor) { return affine(a, factor, 0.0); }
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  NodeId log_softmax(NodeId a);
  NodeId pick(NodeId a, std::size_t index);
  NodeId logsumexp(std::span<const NodeId> scalars);
  // Elementwise sum of same-shaped nodes, accumulated in list order.
  NodeId add_n(std::span<const NodeId> nodes);
  NodeId custom(std::vector<NodeId> inputs, Tensor value, BackwardFn backward);

  const Tensor& value(NodeId id) const { return node(id).value; }
  const Node& node(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

  const std::vector<NodeId>& parameter_ids() const { return parameter_ids_; }
  const std::string& parameter_name(NodeId id) const { return node(id).name; }
  // Returns the node registered under `name`, or size() when absent.
  NodeId find_parameter(const std::string& name) const;

  // Exact reverse-mode gradients of a scalar node with respect to every
  // parameter. Contributions into a node are summed in ascending order of
  // the consuming node's id.
  std::map<NodeId, Tensor> backward(NodeId loss) const;
  std::map<std::string, Tensor> backward_by_name(NodeId loss) const;

 private:
  NodeId push(OpKind kind, std::vector<NodeId> inputs, Tensor value, BackwardFn backward);

  std::vector<Node> nodes_;
  std::vector<NodeId> parameter_ids_;
  std::map<std::string, NodeId> parameters_by_name_;
};

// Builds a scalar loss node from parameter nodes (one per entry of the
// parameter list handed to grad_check).
using GraphBuilder = std::function<NodeId(Graph& graph, std::span<const NodeId> params)>;

// Central-difference gradient of a scalar function.
std::vector<Tensor> numeric_gradient(
    const std::function<double(const std::vector<Tensor>&)>& f,
    const std::vector<Tensor>& params, double eps);

// Max over all coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|).
// Throws NumericError when f is non-finite at any probe point.
double grad_check(const GraphBuilder& f, const std::vector<Tensor>& params, double eps);

// The same error measure over paired gradient lists.
double max_relative_error(const std::vector<Tensor>& analytic, const std::vector<Tensor>& numeric);

}  // namespace hra_lab
