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

#include "doctest.h"
#include "helpers.hpp"
#include "hra_lab/adapters.hpp"
#include "hra_lab/baselines.hpp"
#include "hra_lab/errors.hpp"
#include "hra_lab/hra.hpp"

namespace hra_lab {
namespace {

using testing::random_tensor;

ControllerParams indrnn(Tensor w, Tensor u, Tensor b) {
  ControllerParams c;
  c.variant = ControllerVariant::kIndRnn;
  c.input_weight = std::move(w);
  c.recurrent_scale = std::move(u);
  c.bias = std::move(b);
  return c;
}

const ControllerVariant kVariants[] = {ControllerVariant::kIndRnn, ControllerVariant::kVanillaRnn,
                                       ControllerVariant::kLightGru};

TEST_CASE("controller: zero input and state give zero output for every variant") {
  for (ControllerVariant v : kVariants) {
    SplitMix64 rng(2);
    const ControllerParams c = ControllerParams::init(v, 5, 3, rng);
    const Tensor h = controller_step(Tensor::zeros({4, 5}), Tensor::zeros({4, 3}), c);
    CHECK(bit_equal(h, Tensor::zeros({4, 3})));
  }
}

TEST_CASE("controller: IndRNN with recurrence disabled is relu of the projection") {
  const auto c = indrnn(Tensor::identity(2), Tensor::vector({0, 0}), Tensor::vector({0, 0}));
  const Tensor h = controller_step(Tensor::matrix({{3, -3}}), Tensor::zeros({1, 2}), c);
  CHECK(bit_equal(h, Tensor::matrix({{3, 0}})));
}

TEST_CASE("controller: IndRNN scalar arithmetic") {
  const auto c = indrnn(Tensor::identity(2), Tensor::vector({0.5, 0.5}), Tensor::vector({0, 0}));
  const Tensor h = controller_step(Tensor::matrix({{1, -1}}), Tensor::matrix({{2, 2}}), c);
  CHECK(bit_equal(h, Tensor::matrix({{2, 0}})));
}

TEST_CASE("controller: VanillaRNN and LightGRU scalar arithmetic") {
  ControllerParams rnn;
  rnn.variant = ControllerVariant::kVanillaRnn;
  rnn.input_weight = Tensor::matrix({{1}});
  rnn.recurrent_weight = Tensor::matrix({{2}});
  rnn.bias = Tensor::vector({-0.25});
  // tanh(0.5·1 + 0.5·2 - 0.25)
  CHECK(controller_step(Tensor::matrix({{0.5}}), Tensor::matrix({{0.5}}), rnn).item() ==
        std::tanh(1.25));

  ControllerParams gru;
  gru.variant = ControllerVariant::kLightGru;
  gru.input_weight = Tensor::matrix({{1}});
  gru.candidate_recurrent_weight = Tensor::matrix({{0.5}});
  gru.bias = Tensor::vector({0});
  gru.gate_input_weight = Tensor::matrix({{1}});
  gru.gate_recurrent_weight = Tensor::matrix({{0}});
  gru.gate_bias = Tensor::vector({0});
  // z = sigmoid(0) = 0.5; candidate = relu(0 + 0.5·2) = 1; 0.5·2 + 0.5·1.
  CHECK(controller_step(Tensor::matrix({{0}}), Tensor::matrix({{2}}), gru).item() == 1.5);
}

TEST_CASE("controller: tanh keeps VanillaRNN states inside (-1, 1), relu keeps IndRNN >= 0") {
  SplitMix64 rng(8);
  const ControllerParams rnn = ControllerParams::init(ControllerVariant::kVanillaRnn, 4, 6, rng);
  const ControllerParams ind = ControllerParams::init(ControllerVariant::kIndRnn, 4, 6, rng);
  const Tensor x = random_tensor({7, 4}, rng, -5, 5);
  const Tensor h = random_tensor({7, 6}, rng, -5, 5);
  const Tensor h_rnn = controller_step(x, h, rnn);
  const Tensor h_ind = controller_step(x, h, ind);
  for (double v : h_rnn.data()) CHECK(std::abs(v) < 1.0);
  for (double v : h_ind.data()) CHECK(v >= 0.0);
  for (double v : ind.recurrent_scale->data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(testing::all_zero(ind.bias));
}

TEST_CASE("controller: missing or foreign variant weights are config errors") {
  auto c = indrnn(Tensor::identity(2), Tensor::vector({0, 0}), Tensor::vector({0, 0}));
  c.recurrent_scale.reset();
  CHECK_THROWS_AS(controller_step(Tensor::zeros({1, 2}), Tensor::zeros({1, 2}), c), ConfigError);
  c.recurrent_scale = Tensor::vector({0, 0});
  c.recurrent_weight = Tensor::identity(2);
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.recurrent_weight.reset();
  CHECK_THROWS_AS(controller_step(Tensor::zeros({1, 3}), Tensor::zeros({1, 2}), c),
                  DimensionError);
}

TEST_CASE("head: zero, identity and FFN arithmetic") {
  SplitMix64 rng(1);
  const Tensor h = random_tensor({3, 4}, rng);
  CHECK(bit_equal(head_apply(h, TaskHead::linear(Tensor::zeros({5, 4}))), Tensor::zeros({3, 5})));
  CHECK(bit_equal(head_apply(h, TaskHead::linear(Tensor::identity(4))), h));
  // M1 = [[1, -1]] (d_h = 1), M2 = [[2], [0]] (d = 2): relu(3 - 1)·[2, 0].
  const TaskHead ffn = TaskHead::ffn(Tensor::matrix({{1, -1}}), Tensor::matrix({{2}, {0}}));
  CHECK(bit_equal(head_apply(Tensor::matrix({{3, 1}}), ffn), Tensor::matrix({{4, 0}})));
  CHECK_THROWS_AS(head_apply(Tensor::zeros({1, 3}), ffn), DimensionError);
}

TEST_CASE("adapt_layer: zero head, disabled recurrence, composed example") {
  SplitMix64 rng(6);
  const ControllerParams c = ControllerParams::init(ControllerVariant::kIndRnn, 3, 2, rng);
  const Tensor x = random_tensor({4, 3}, rng);
  const Tensor h_prev = random_tensor({4, 2}, rng);
  const auto [x_zero, h_zero] =
      adapt_layer(x, h_prev, c, TaskHead::linear(Tensor::zeros({3, 2})), false);
  CHECK(bit_equal(x_zero, x));

  const TaskHead head = TaskHead::init(HeadKind::kFfn, 3, 2, 5, false, rng);
  const auto disabled = adapt_layer(x, h_prev, c, head, true);
  const auto from_zero = adapt_layer(x, Tensor::zeros({4, 2}), c, head, false);
  CHECK(bit_equal(disabled.first, from_zero.first));
  CHECK(bit_equal(disabled.second, from_zero.second));

  const auto ind = indrnn(Tensor::identity(2), Tensor::vector({0.5, 0.5}), Tensor::vector({0, 0}));
  const auto [x_out, h_out] = adapt_layer(Tensor::matrix({{1, -1}}), Tensor::matrix({{2, 2}}), ind,
                                          TaskHead::linear(Tensor::identity(2)), false);
  CHECK(bit_equal(h_out, Tensor::matrix({{2, 0}})));
  CHECK(bit_equal(x_out, Tensor::matrix({{3, -1}})));
}

TEST_CASE("hra_forward with one layer is a single adapt_layer call") {
  const FrozenBackbone bb(BackboneDims{1, 4, 6, 3, 2, 1});
  AdapterSpec spec;
  spec.recurrent_dim = 3;
  spec.head = HeadKind::kFfn;
  HraAdapter adapter(spec, 1, 4, 2, 5);
  SplitMix64 rng(2);
  const Tensor x = random_tensor({5, 3}, rng);
  const ForwardTrace tr = hra_forward(bb, adapter, TaskId{1}, x);
  const auto [x1, h1] = adapt_layer(tr.block_outputs[0], Tensor::zeros({5, 3}), adapter.controller(),
                                    adapter.heads().at(TaskId{1}), false);
  CHECK(bit_equal(tr.adapted[0], x1));
  CHECK(bit_equal(tr.controller_states[0], h1));
}

TEST_CASE("hra_forward equals a manual unrolling with h carried across layers") {
  const FrozenBackbone bb(BackboneDims{3, 4, 6, 3, 2, 1});
  AdapterSpec spec;
  spec.recurrent_dim = 5;
  for (ControllerVariant v : kVariants) {
    spec.variant = v;
    HraAdapter adapter(spec, 3, 4, 1, 11);
    SplitMix64 rng(3);
    const Tensor x = random_tensor({2, 3}, rng);
    const ForwardTrace tr = hra_forward(bb, adapter, TaskId{0}, x);
    Tensor z = linear(x, bb.input_projection());
    Tensor h = Tensor::zeros({2, 5});
    for (std::size_t l = 0; l < 3; ++l) {
      const Tensor block = add(z, linear(relu(linear(z, bb.ffn_in(l))), bb.ffn_out(l)));
      std::tie(z, h) = adapt_layer(block, h, adapter.controller(), adapter.heads().at(TaskId{0}), false);
      CHECK(bit_equal(tr.adapted[l], z));
      CHECK(bit_equal(tr.controller_states[l], h));
    }
  }
}

TEST_CASE("tasks with identical heads give identical traces; unknown task is a routing error") {
  const FrozenBackbone bb(BackboneDims{2, 4, 6, 3, 2, 1});
  HraAdapter adapter(AdapterSpec{}, 2, 4, 3, 0);
  adapter.heads().at(TaskId{2}) = adapter.heads().at(TaskId{0});
  SplitMix64 rng(1);
  const Tensor x = random_tensor({3, 3}, rng);
  CHECK(bit_equal(hra_forward(bb, adapter, TaskId{0}, x).log_probs,
                  hra_forward(bb, adapter, TaskId{2}, x).log_probs));
  CHECK_FALSE(bit_equal(hra_forward(bb, adapter, TaskId{0}, x).log_probs,
                        hra_forward(bb, adapter, TaskId{1}, x).log_probs));
  CHECK_THROWS_AS(hra_forward(bb, adapter, TaskId{3}, x), RoutingError);
}

TEST_CASE("changing one head changes only that task's trace") {
  const FrozenBackbone bb(BackboneDims{2, 4, 6, 3, 2, 1});
  HraAdapter adapter(AdapterSpec{}, 2, 4, 2, 0);
  SplitMix64 rng(1);
  const Tensor x = random_tensor({3, 3}, rng);
  const Tensor before0 = hra_forward(bb, adapter, TaskId{0}, x).log_probs;
  const Tensor before1 = hra_forward(bb, adapter, TaskId{1}, x).log_probs;
  Tensor& m = *adapter.heads().at(TaskId{1}).projection;
  m = scale(m, 1.5);
  CHECK(bit_equal(hra_forward(bb, adapter, TaskId{0}, x).log_probs, before0));
  CHECK_FALSE(bit_equal(hra_forward(bb, adapter, TaskId{1}, x).log_probs, before1));
}

TEST_CASE("disable_recurrence equals u = 0 bit-exact") {
  const FrozenBackbone bb(BackboneDims{3, 4, 6, 3, 2, 2});
  AdapterSpec spec;
  spec.recurrent_dim = 4;
  HraAdapter with_u(spec, 3, 4, 1, 7);
  with_u.controller().recurrent_scale = Tensor::zeros({4});
  spec.disable_recurrence = true;
  HraAdapter disabled(spec, 3, 4, 1, 7);
  SplitMix64 rng(5);
  const Tensor x = random_tensor({4, 3}, rng);
  const ForwardTrace a = hra_forward(bb, with_u, TaskId{0}, x);
  const ForwardTrace b = hra_forward(bb, disabled, TaskId{0}, x);
  CHECK(bit_equal(a.log_probs, b.log_probs));
  for (std::size_t l = 0; l < 3; ++l) {
    CHECK(bit_equal(a.adapted[l], b.adapted[l]));
    CHECK(bit_equal(a.controller_states[l], b.controller_states[l]));
  }
}

TEST_CASE("disabled recurrence is a shared recurrence-free adapter layer by layer") {
  const FrozenBackbone bb(BackboneDims{3, 4, 6, 3, 2, 2});
  AdapterSpec spec;
  spec.disable_recurrence = true;
  spec.variant = ControllerVariant::kLightGru;
  HraAdapter adapter(spec, 3, 4, 1, 7);
  SplitMix64 rng(5);
  const Tensor x = random_tensor({4, 3}, rng);
  const ForwardTrace tr = hra_forward(bb, adapter, TaskId{0}, x);
  for (std::size_t l = 0; l < 3; ++l) {
    const auto [x_l, h_l] = adapt_layer(tr.block_outputs[l], Tensor::zeros({4, 8}),
                                        adapter.controller(), adapter.heads().at(TaskId{0}), false);
    CHECK(bit_equal(tr.adapted[l], x_l));
  }
}

TEST_CASE("unshared weights start identical to the shared model and cost L times as much") {
  const FrozenBackbone bb(BackboneDims{3, 4, 6, 3, 2, 2});
  AdapterSpec spec;
  spec.head = HeadKind::kFfn;
  spec.disable_recurrence = true;
  HraAdapter shared(spec, 3, 4, 2, 13);
  spec.unshare_weights = true;
  HraAdapter unshared(spec, 3, 4, 2, 13);
  CHECK(unshared.copies() == 3);
  CHECK(unshared.element_count() == 3 * shared.element_count());
  SplitMix64 rng(5);
  const Tensor x = random_tensor({4, 3}, rng);
  CHECK(bit_equal(hra_forward(bb, shared, TaskId{1}, x).log_probs,
                  hra_forward(bb, unshared, TaskId{1}, x).log_probs));
}

TEST_CASE("recurrence-free unshared linear HRA equals a sequential residual adapter") {
  const BackboneDims dims{3, 4, 6, 3, 2, 2};
  const FrozenBackbone bb(dims);
  AdapterSpec spec;
  spec.recurrent_dim = 5;
  spec.disable_recurrence = true;
  spec.unshare_weights = true;
  HraAdapter hra(spec, 3, 4, 1, 21);
  AdapterSpec res_spec;
  res_spec.method = Method::kResidual;
  res_spec.bottleneck = 5;
  ResidualAdapter residual(res_spec, dims, 1, 0);
  SplitMix64 rng(4);
  for (std::size_t l = 0; l < 3; ++l) {
    // Perturb each copy so the layers genuinely differ, with b = 0.
    hra.controller(l).input_weight = random_tensor({5, 4}, rng);
    *hra.heads(l).at(TaskId{0}).projection = random_tensor({4, 5}, rng);
    residual.layer(TaskId{0}, l).down = hra.controller(l).input_weight;
    residual.layer(TaskId{0}, l).up = *hra.heads(l).at(TaskId{0}).projection;
  }
  const Tensor x = random_tensor({6, 3}, rng);
  const ForwardTrace a = hra_forward(bb, hra, TaskId{0}, x);
  const ForwardTrace b = backbone_forward(bb, x, &residual, TaskId{0});
  CHECK(bit_equal(a.log_probs, b.log_probs));
}

TEST_CASE("masked layers pass the block output through") {
  const FrozenBackbone bb(BackboneDims{3, 4, 6, 3, 2, 2});
  AdapterSpec spec;
  spec.layer_mask = {true, false, true};
  HraAdapter adapter(spec, 3, 4, 1, 3);
  SplitMix64 rng(5);
  const ForwardTrace tr = hra_forward(bb, adapter, TaskId{0}, random_tensor({2, 3}, rng));
  CHECK_FALSE(bit_equal(tr.adapted[0], tr.block_outputs[0]));
  CHECK(bit_equal(tr.adapted[1], tr.block_outputs[1]));
  CHECK_FALSE(bit_equal(tr.adapted[2], tr.block_outputs[2]));
  spec.layer_mask = {true};
  CHECK_THROWS_AS(validate(spec, bb.dims()), ConfigError);
}

TEST_CASE("count closed form: IndRNN d=8 d_r=4 linear") {
  const ParamCount one = hra_param_count(8, 4, 16, ControllerVariant::kIndRnn, HeadKind::kLinear, 1);
  CHECK(one.shared == 40);
  CHECK(one.per_task == 32);
  CHECK(one.total == 72);
  const ParamCount two = hra_param_count(8, 4, 16, ControllerVariant::kIndRnn, HeadKind::kLinear, 2);
  CHECK(two.shared == one.shared);
  CHECK(two.total - one.total == one.per_task);
  CHECK_THROWS_AS(hra_param_count(0, 4, 16, ControllerVariant::kIndRnn, HeadKind::kLinear, 1),
                  ConfigError);
  CHECK_THROWS_AS(hra_param_count(8, 4, 16, ControllerVariant::kIndRnn, HeadKind::kLinear, 0),
                  ConfigError);
}

TEST_CASE("count equals element enumeration and is independent of L") {
  for (ControllerVariant v : kVariants) {
    for (HeadKind head : {HeadKind::kLinear, HeadKind::kFfn}) {
      for (std::size_t n : {1, 3, 8}) {
        AdapterSpec spec;
        spec.variant = v;
        spec.head = head;
        spec.recurrent_dim = 3;
        spec.head_hidden = 7;
        const ParamCount c = hra_param_count(5, 3, 7, v, head, n);
        for (std::size_t L : {1, 2, 4}) {
          const HraAdapter adapter(spec, L, 5, n, 1);
          CHECK(adapter.element_count() == c.total);
        }
      }
    }
  }
}

TEST_CASE("adapter checkpoint round trip and strict loading") {
  AdapterSpec spec;
  spec.variant = ControllerVariant::kLightGru;
  spec.head = HeadKind::kFfn;
  HraAdapter a(spec, 2, 4, 3, 1);
  HraAdapter b(spec, 2, 4, 3, 2);
  const json doc = json::parse(a.checkpoint().dump());
  CHECK(doc.at("tensors").contains("controller/gate_bias"));
  CHECK(doc.at("tensors").contains("heads/2/hidden"));
  CHECK(doc.at("meta").at("variant") == "lightgru");
  auto tensors = parse_checkpoint(doc).first;
  b.load(tensors);
  CHECK(b.controller_sha256() == a.controller_sha256());
  CHECK(b.checkpoint() == a.checkpoint());
  tensors.erase("heads/1/output");
  CHECK_THROWS_AS(b.load(tensors), ConfigError);
}

}  // namespace
}  // namespace hra_lab
