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

#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "hra_lab/autodiff.hpp"
#include "hra_lab/errors.hpp"

namespace hra_lab {
namespace {

using testing::random_tensor;

// Projects an arbitrary node onto a scalar with fixed random weights so
// every output coordinate contributes a distinct gradient.
NodeId project(Graph& g, NodeId out, std::uint64_t seed) {
  SplitMix64 rng(seed ^ 0x5eed);
  const NodeId c = g.constant(random_tensor(g.value(out).shape(), rng));
  return g.sum(g.mul(out, c));
}

struct OpCase {
  const char* name;
  // Builds random parameters for one seed.
  std::function<std::vector<Tensor>(SplitMix64&, std::size_t, std::size_t, std::size_t)> make;
  std::function<NodeId(Graph&, std::span<const NodeId>)> apply;
};

std::vector<OpCase> op_cases() {
  return {
      {"matmul",
       [](SplitMix64& r, std::size_t m, std::size_t k, std::size_t n) {
         return std::vector<Tensor>{random_tensor({m, k}, r), random_tensor({k, n}, r)};
       },
       [](Graph& g, std::span<const NodeId> p) { return g.matmul(p[0], p[1]); }},
      {"linear",
       [](SplitMix64& r, std::size_t m, std::size_t k, std::size_t n) {
         return std::vector<Tensor>{random_tensor({m, k}, r), random_tensor({n, k}, r)};
       },
       [](Graph& g, std::span<const NodeId> p) { return g.linear(p[0], p[1]); }},
      {"add",
       [](SplitMix64& r, std::size_t m, std::size_t k, std::size_t) {
         return std::vector<Tensor>{random_tensor({m, k}, r), random_tensor({m, k}, r)};
       },
       [](Graph& g, std::span<const NodeId> p) { return g.add(p[0], p[1]); }},
      {"add broadcast",
       [](SplitMix64& r, std::size_t m, std::size_t k, std::size_t) {
         return std::vector<Tensor>{random_tensor({m, k}, r), random_tensor({k}, r)};
       },
       [](Graph& g, std::span<const NodeId> p) { return g.add(p[0], p[1]); }},
      {"mul",
       [](SplitMix64& r, std::size_t m, std::size_t k, std::size_t) {
         return std::vector<Tensor>{random_tensor({m, k}, r), random_tensor({m, k}, r)};
       },
       [](Graph& g, std::span<const NodeId> p) { return g.mul(p[0], p[1]); }},
      {"mul broadcast",
       [](SplitMix64& r, std::size_t m, std::size_t k, std::size_t) {
         return std::vector<Tensor>{random_tensor({m, k}, r), random_tensor({1, k}, r)};
       },
       [](Graph& g, std::span<const NodeId> p) { return g.mul(p[0], p[1]); }},
      {"relu",
       [](SplitMix64& r, std::size_t m, std::size_t k, std::size_t) {
         return std::vector<Tensor>{random_tensor({m, k}, r)};
       },
       [](Graph& g, std::span<const NodeId> p) { return g.relu(p[0]); }},
      {"tanh",
       [](SplitMix64& r, std::size_t m, std::size_t k, std::size_t) {
         return std::vector<Tensor>{random_tensor({m, k}, r, -2, 2)};
       },
       [](Graph& g, std::span<const NodeId> p) { return g.tanh(p[0]); }},
      {"sigmoid",
       [](SplitMix64& r, std::size_t m, std::size_t k, std::size_t) {
         return std::vector<Tensor>{random_tensor({m, k}, r, -3, 3)};
       },
       [](Graph& g, std::span<const NodeId> p) { return g.sigmoid(p[0]); }},
      {"affine",
       [](SplitMix64& r, std::size_t m, std::size_t k, std::size_t) {
         return std::vector<Tensor>{random_tensor({m, k}, r)};
       },
       [](Graph& g, std::span<const NodeId> p) { return g.affine(p[0], -1.75, 0.5); }},
      {"mean",
       [](SplitMix64& r, std::size_t m, std::size_t k, std::size_t) {
         return std::vector<Tensor>{random_tensor({m, k}, r)};
       },
       [](Graph& g, std::span<const NodeId> p) { return g.mean(p[0]); }},
      {"log_softmax",
       [](SplitMix64& r, std::size_t m, std::size_t k, std::size_t) {
         return std::vector<Tensor>{random_tensor({m, k}, r, -3, 3)};
       },
       [](Graph& g, std::span<const NodeId> p) { return g.log_softmax(p[0]); }},
      {"pick + logsumexp",
       [](SplitMix64& r, std::size_t m, std::size_t k, std::size_t) {
         return std::vector<Tensor>{random_tensor({m, k}, r, -3, 3)};
       },
       [](Graph& g, std::span<const NodeId> p) {
         std::vector<NodeId> picks;
         for (std::size_t i = 0; i < g.value(p[0]).size(); i += 2) picks.push_back(g.pick(p[0], i));
         return g.logsumexp(picks);
       }},
      {"add_n",
       [](SplitMix64& r, std::size_t m, std::size_t k, std::size_t) {
         return std::vector<Tensor>{random_tensor({m, k}, r), random_tensor({m, k}, r),
                                    random_tensor({m, k}, r)};
       },
       [](Graph& g, std::span<const NodeId> p) { return g.add_n(p); }},
  };
}

TEST_CASE("every differentiable op agrees with central differences over 100 seeds") {
  for (const OpCase& op : op_cases()) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      SplitMix64 rng(derive_seed(seed, 0x0b));
      const std::size_t m = 1 + rng.below(8), k = 1 + rng.below(8), n = 1 + rng.below(8);
      const auto params = op.make(rng, m, k, n);
      const double err = grad_check(
          [&](Graph& g, std::span<const NodeId> p) { return project(g, op.apply(g, p), seed); },
          params, 1e-5);
      worst = std::max(worst, err);
    }
    INFO(op.name);
    CHECK(worst <= 1e-5);
  }
}

TEST_CASE("composite graph on 3x3 inputs matches grad_check within 1e-6") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SplitMix64 rng(seed);
    const std::vector<Tensor> params{random_tensor({3, 3}, rng), random_tensor({3, 3}, rng),
                                     random_tensor({3}, rng)};
    const double err = grad_check(
        [](Graph& g, std::span<const NodeId> p) {
          const NodeId h = g.tanh(g.add(g.linear(p[0], p[1]), p[2]));
          const NodeId y = g.log_softmax(g.mul(g.sigmoid(h), g.relu(p[0])));
          return g.pick(g.sum(y), 0);
        },
        params, 1e-5);
    CHECK(err <= 1e-6);
  }
}

TEST_CASE("backward of sum(W x) is outer(ones, x)") {
  Graph g;
  const Tensor x = Tensor::matrix({{2}, {-3}, {5}});
  const NodeId w = g.parameter("w", Tensor::zeros({2, 3}));
  const NodeId loss = g.sum(g.matmul(w, g.constant(x)));
  const auto grads = g.backward(loss);
  CHECK(bit_equal(grads.at(w), Tensor::matrix({{2, -3, 5}, {2, -3, 5}})));
}

TEST_CASE("dead relu region has zero gradient") {
  Graph g;
  const NodeId x = g.constant(Tensor::vector({-1, -0.5, -4}));
  const NodeId w = g.parameter("w", Tensor::vector({0.3, 2, 1}));
  const auto grads = g.backward(g.sum(g.relu(g.mul(x, w))));
  CHECK(testing::all_zero(grads.at(w)));
}

TEST_CASE("relu derivative at exactly zero is zero") {
  Graph g;
  const NodeId w = g.parameter("w", Tensor::vector({0.0, 1.0}));
  const auto grads = g.backward(g.sum(g.relu(w)));
  CHECK(bit_equal(grads.at(w), Tensor::vector({0.0, 1.0})));
}

TEST_CASE("backward requires a scalar loss") {
  Graph g;
  const NodeId w = g.parameter("w", Tensor::vector({1, 2}));
  CHECK_THROWS_AS(g.backward(w), ContractError);
}

TEST_CASE("every parameter receives a shape-matched gradient, zero when unreachable") {
  Graph g;
  const NodeId a = g.parameter("a", Tensor::vector({1, 2}));
  const NodeId b = g.parameter("b", Tensor::zeros({3, 2}));
  const auto grads = g.backward(g.sum(a));
  REQUIRE(grads.size() == 2);
  CHECK(grads.at(b).shape() == Shape{3, 2});
  CHECK(testing::all_zero(grads.at(b)));
}

TEST_CASE("parameter registration is idempotent by name") {
  Graph g;
  const NodeId a = g.parameter("a", Tensor::vector({1}));
  CHECK(g.parameter("a", Tensor::vector({1})) == a);
  CHECK(g.find_parameter("a") == a);
  CHECK(g.find_parameter("zzz") == g.size());
  CHECK(g.parameter_ids().size() == 1);
}

TEST_CASE("backward is linear over summed subgraphs, bit-exact") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SplitMix64 rng(seed);
    const Tensor w0 = random_tensor({3, 4}, rng);
    const Tensor b0 = random_tensor({3}, rng);
    const Tensor x1 = random_tensor({2, 4}, rng);
    const Tensor x2 = random_tensor({5, 4}, rng);
    // Each parameter has exactly one consumer inside each subgraph.
    auto first = [&](Graph& g, NodeId w, NodeId b) {
      return g.sum(g.tanh(g.add(g.linear(g.constant(x1), w), b)));
    };
    auto second = [&](Graph& g, NodeId w, NodeId b) {
      return g.mean(g.relu(g.mul(g.linear(g.constant(x2), w), g.sigmoid(b))));
    };
    Graph g1;
    const NodeId w1 = g1.parameter("w", w0), c1 = g1.parameter("b", b0);
    const auto grad1 = g1.backward_by_name(first(g1, w1, c1));
    Graph g2;
    const NodeId w2 = g2.parameter("w", w0), c2 = g2.parameter("b", b0);
    const auto grad2 = g2.backward_by_name(second(g2, w2, c2));
    Graph g;
    const NodeId w = g.parameter("w", w0), c = g.parameter("b", b0);
    const NodeId l1 = first(g, w, c);
    const NodeId l2 = second(g, w, c);
    const auto both = g.backward_by_name(g.add(l1, l2));
    for (const char* name : {"w", "b"}) {
      CHECK(bit_equal(both.at(name), add(grad1.at(name), grad2.at(name))));
    }
  }
}

TEST_CASE("forward evaluation is deterministic") {
  auto run = [] {
    SplitMix64 rng(11);
    Graph g;
    const NodeId x = g.constant(random_tensor({4, 5}, rng));
    const NodeId w = g.parameter("w", random_tensor({3, 5}, rng));
    return g.value(g.log_softmax(g.tanh(g.linear(x, w))));
  };
  CHECK(bit_equal(run(), run()));
}

TEST_CASE("grad_check examples") {
  SplitMix64 rng(3);
  const Tensor c = random_tensor({6}, rng);
  const double linear_err = grad_check(
      [&](Graph& g, std::span<const NodeId> p) { return g.sum(g.mul(p[0], g.constant(c))); },
      {random_tensor({6}, rng)}, 1e-5);
  CHECK(linear_err <= 1e-10);
  const double quad_err = grad_check(
      [](Graph& g, std::span<const NodeId> p) { return g.sum(g.mul(p[0], p[0])); },
      {random_tensor({6}, rng, -5, 5)}, 1e-5);
  CHECK(quad_err <= 1e-8);
}

TEST_CASE("grad_check rejects bad eps and non-finite probes") {
  const std::vector<Tensor> p{Tensor::vector({1.0})};
  auto f = [](Graph& g, std::span<const NodeId> q) { return g.sum(q[0]); };
  CHECK_THROWS_AS(grad_check(f, p, 0.0), ContractError);
  CHECK_THROWS_AS(grad_check(
                      [](Graph& g, std::span<const NodeId> q) {
                        return g.sum(g.affine(q[0], 1e308, 1e308));
                      },
                      {Tensor::vector({1.5})}, 1e-5),
                  NumericError);
}

}  // namespace
}  // namespace hra_lab
