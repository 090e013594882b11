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
#include "hra_lab/backbone.hpp"
#include "hra_lab/errors.hpp"
#include "hra_lab/hra.hpp"

namespace hra_lab {
namespace {

using testing::random_tensor;

TEST_CASE("same seed gives bit-identical weights") {
  const BackboneDims dims{2, 4, 8, 3, 2, 7};
  const FrozenBackbone a(dims), b(dims);
  const auto wa = a.named_weights(), wb = b.named_weights();
  REQUIRE(wa.size() == wb.size());
  for (std::size_t i = 0; i < wa.size(); ++i) CHECK(bit_equal(*wa[i].second, *wb[i].second));
  CHECK(a.weights_sha256() == b.weights_sha256());
  BackboneDims other = dims;
  other.seed = 8;
  CHECK(FrozenBackbone(other).weights_sha256() != a.weights_sha256());
}

// d·d_in + L·2·d·d_ff + (V+1)·d = 1 + 2 + 2 scalars.
TEST_CASE("unit dims give five scalars inside (-1, 1)") {
  const FrozenBackbone bb(BackboneDims{1, 1, 1, 1, 1, 0});
  std::size_t count = 0;
  for (const auto& [name, t] : bb.named_weights()) {
    for (double v : t->data()) {
      CHECK(std::abs(v) < 1.0);
      ++count;
    }
  }
  CHECK(count == 5);
}

TEST_CASE("parameter count equals stored elements") {
  for (std::size_t L : {1, 2, 3}) {
    const BackboneDims dims{L, 8, 16, 5, 3, 1};
    const FrozenBackbone bb(dims);
    std::size_t enumerated = 0;
    for (const auto& [name, t] : bb.named_weights()) enumerated += t->size();
    CHECK(enumerated == 8 * 5 + L * 2 * 8 * 16 + 4 * 8);
    CHECK(bb.parameter_count() == enumerated);
    CHECK(FrozenBackbone::parameter_count(dims) == enumerated);
  }
}

TEST_CASE("invalid dims are config errors") {
  CHECK_THROWS_AS(FrozenBackbone(BackboneDims{0, 4, 8, 3, 2, 0}), ConfigError);
  CHECK_THROWS_AS(FrozenBackbone(BackboneDims{1, 4, 8, 3, 0, 0}), ConfigError);
}

TEST_CASE("forward keeps T frames and normalized rows") {
  const FrozenBackbone bb(BackboneDims{3, 6, 12, 4, 3, 2});
  SplitMix64 rng(1);
  for (std::size_t T : {1, 5, 17}) {
    const ForwardTrace tr = backbone_forward(bb, random_tensor({T, 4}, rng, -2, 2));
    CHECK(tr.log_probs.shape() == Shape{T, 4});
    for (std::size_t t = 0; t < T; ++t) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += std::exp(tr.log_probs.at(t, k));
      CHECK(std::abs(s - 1.0) <= 1e-12);
    }
    REQUIRE(tr.block_outputs.size() == 3);
    for (std::size_t l = 0; l < 3; ++l) CHECK(bit_equal(tr.block_outputs[l], tr.adapted[l]));
  }
}

TEST_CASE("block is z + V2 relu(V1 z)") {
  const FrozenBackbone bb(BackboneDims{2, 3, 5, 2, 2, 4});
  const Tensor x = Tensor::matrix({{0.3, -0.7}, {1.1, 0.2}});
  const ForwardTrace tr = backbone_forward(bb, x);
  Tensor z = linear(x, bb.input_projection());
  for (std::size_t l = 0; l < 2; ++l) {
    z = add(z, linear(relu(linear(z, bb.ffn_in(l))), bb.ffn_out(l)));
    CHECK(max_abs_diff(z, tr.block_outputs[l]) == 0.0);
  }
}

TEST_CASE("input errors") {
  const FrozenBackbone bb(BackboneDims{});
  CHECK_THROWS_AS(frames_to_tensor({}), EmptyInputError);
  CHECK_THROWS_AS(backbone_forward(bb, Tensor::zeros({3, 5})), DimensionError);
  const auto adapter = make_adapter(AdapterSpec{}, bb, 2, 0);
  CHECK_THROWS_AS(backbone_forward(bb, Tensor::zeros({3, 4}), adapter.get()), RoutingError);
  CHECK_THROWS_AS(backbone_forward(bb, Tensor::zeros({3, 4}), adapter.get(), TaskId{2}),
                  RoutingError);
  CHECK(frames_to_tensor({{1, 2}, {3, 4}}).shape() == Shape{2, 2});
}

TEST_CASE("zero-weight HRA head leaves the trace identical to the bare backbone") {
  const FrozenBackbone bb(BackboneDims{3, 4, 8, 4, 2, 3});
  AdapterSpec spec;
  spec.zero_init_head = true;
  spec.recurrent_dim = 3;
  for (HeadKind head : {HeadKind::kLinear, HeadKind::kFfn}) {
    spec.head = head;
    const auto adapter = make_adapter(spec, bb, 2, 9);
    SplitMix64 rng(4);
    const Tensor x = random_tensor({5, 4}, rng);
    const ForwardTrace bare = backbone_forward(bb, x);
    const ForwardTrace adapted = backbone_forward(bb, x, adapter.get(), TaskId{1});
    CHECK(bit_equal(bare.log_probs, adapted.log_probs));
    for (std::size_t l = 0; l < 3; ++l) CHECK(bit_equal(adapted.adapted[l], bare.adapted[l]));
  }
}

TEST_CASE("two-layer hand-set HRA trace") {
  const BackboneDims dims{2, 2, 2, 2, 1, 0};
  const Tensor id = Tensor::identity(2);
  const Tensor swap = Tensor::matrix({{1, -1}, {-1, 1}});
  const FrozenBackbone bb = testing::backbone_with(
      dims, {{"input_projection", id},
             {"layers/0/ffn_in", swap},
             {"layers/0/ffn_out", id},
             {"layers/1/ffn_in", swap},
             {"layers/1/ffn_out", id},
             {"output_projection", id}});
  AdapterSpec spec;
  spec.recurrent_dim = 2;
  HraAdapter adapter(spec, 2, 2, 1, 0);
  adapter.controller().input_weight = id;
  adapter.controller().bias = Tensor::zeros({2});
  adapter.controller().recurrent_scale = Tensor::vector({0.5, 1});
  adapter.heads().at(TaskId{0}) = TaskHead::linear(Tensor::matrix({{1, 0}, {0, -1}}));

  const ForwardTrace tr = hra_forward(bb, adapter, TaskId{0}, Tensor::matrix({{1, 2}}));
  // Layer 1: z = [1,2]; V1 z = [-1,1] -> [0,1]; block [1,3]; h = [1,3];
  // o = [1,-3]; x' = [2,0].
  CHECK(bit_equal(tr.block_outputs[0], Tensor::matrix({{1, 3}})));
  CHECK(bit_equal(tr.controller_states[0], Tensor::matrix({{1, 3}})));
  CHECK(bit_equal(tr.adapted[0], Tensor::matrix({{2, 0}})));
  // Layer 2: V1 x' = [2,-2] -> [2,0]; block [4,0]; h = [4 + 0.5, 0 + 3];
  // o = [4.5,-3]; x' = [8.5,-3].
  CHECK(bit_equal(tr.block_outputs[1], Tensor::matrix({{4, 0}})));
  CHECK(bit_equal(tr.controller_states[1], Tensor::matrix({{4.5, 3}})));
  CHECK(bit_equal(tr.adapted[1], Tensor::matrix({{8.5, -3}})));
  const double tail = std::log1p(std::exp(-11.5));
  CHECK(std::abs(tr.log_probs.at(0, 0) + tail) <= 1e-15);
  CHECK(std::abs(tr.log_probs.at(0, 1) + 11.5 + tail) <= 1e-12);
}

TEST_CASE("backbone checkpoint round trip") {
  const FrozenBackbone bb(BackboneDims{2, 3, 4, 2, 2, 77});
  const FrozenBackbone back = FrozenBackbone::from_checkpoint(json::parse(bb.checkpoint().dump()));
  CHECK(back.weights_sha256() == bb.weights_sha256());
  CHECK(back.dims().seed == 77);
}

}  // namespace
}  // namespace hra_lab
