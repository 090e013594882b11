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

#include "hra_lab/adapter.hpp"
#include "hra_lab/adapter_spec.hpp"
#include "hra_lab/backbone.hpp"

namespace hra_lab {

// Throws ConfigError for invalid combinations (rank above the matrix dims,
// zero sizes, mask length mismatch, ...).
void validate(const AdapterSpec& spec, const BackboneDims& dims);

std::unique_ptr<Adapter> make_adapter(const AdapterSpec& spec, const FrozenBackbone& bb,
                                      std::size_t num_tasks, std::uint64_t seed);

// Closed-form count for any method. Unshared HRA holds one controller and
// one head per layer, so both parts scale by L.
ParamCount adapter_param_count(const AdapterSpec& spec, const BackboneDims& dims,
                               std::size_t num_tasks);

}  // namespace hra_lab
