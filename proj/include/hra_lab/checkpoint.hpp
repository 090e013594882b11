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

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hra_lab/tensor.hpp"

namespace hra_lab {

using json = nlohmann::json;
using TensorMap = std::map<std::string, Tensor>;
using NamedTensors = std::vector<std::pair<std::string, const Tensor*>>;

inline constexpr std::string_view kCheckpointFormat = "hra-lab-ckpt-v1";

// 17 significant digits: exact round trip for every finite double.
std::string format_double(double value);
double parse_double(const std::string& text);

json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const json& j);

// { "format": "hra-lab-ckpt-v1", "tensors": { name: {shape, data} }, "meta": meta }
json make_checkpoint(const NamedTensors& tensors, json meta);
// Throws ConfigError on a malformed container.
std::pair<TensorMap, json> parse_checkpoint(const json& doc);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);
// Pretty-printed with a trailing newline; object keys are sorted.
void write_json_file(const std::filesystem::path& path, const json& doc);
json read_json_file(const std::filesystem::path& path);

std::string sha256_hex(std::string_view bytes);
// Hash of the serialized tensor container (no meta) for the given tensors.
std::string tensors_sha256(const NamedTensors& tensors);

}  // namespace hra_lab
