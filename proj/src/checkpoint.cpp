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

#include "hra_lab/checkpoint.hpp"

#include <openssl/evp.h>

#include <array>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>

#include "hra_lab/errors.hpp"

namespace hra_lab {

std::string format_double(double value) {
  std::array<char, 40> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", value);
  return buf.data();
}

double parse_double(const std::string& text) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw ConfigError("malformed decimal '" + text + "'");
  }
  return v;
}

json tensor_to_json(const Tensor& t) {
  json data = json::array();
  for (double v : t.data()) data.push_back(format_double(v));
  return json{{"shape", t.shape()}, {"data", std::move(data)}};
}

Tensor tensor_from_json(const json& j) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("data")) {
    throw ConfigError("tensor entry needs 'shape' and 'data'");
  }
  Shape shape = j.at("shape").get<Shape>();
  std::vector<double> data;
  data.reserve(j.at("data").size());
  for (const auto& v : j.at("data")) {
    data.push_back(v.is_string() ? parse_double(v.get<std::string>()) : v.get<double>());
  }
  try {
    return Tensor(std::move(shape), std::move(data));
  } catch (const DimensionError& e) {
    throw ConfigError(std::string("bad tensor entry: ") + e.what());
  }
}

json make_checkpoint(const NamedTensors& tensors, json meta) {
  json entries = json::object();
  for (const auto& [name, t] : tensors) entries[name] = tensor_to_json(*t);
  return json{{"format", kCheckpointFormat}, {"tensors", std::move(entries)}, {"meta", std::move(meta)}};
}

std::pair<TensorMap, json> parse_checkpoint(const json& doc) {
  if (!doc.is_object() || doc.value("format", std::string{}) != kCheckpointFormat) {
    throw ConfigError("not a " + std::string(kCheckpointFormat) + " checkpoint");
  }
  TensorMap out;
  for (const auto& [name, entry] : doc.at("tensors").items()) {
    out.emplace(name, tensor_from_json(entry));
  }
  return {std::move(out), doc.value("meta", json::object())};
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json_file(const std::filesystem::path& path, const json& doc) {
  write_text_file(path, doc.dump(2) + "\n");
}

json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
    throw Error("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string tensors_sha256(const NamedTensors& tensors) {
  json entries = json::object();
  for (const auto& [name, t] : tensors) entries[name] = tensor_to_json(*t);
  return sha256_hex(entries.dump());
}

}  // namespace hra_lab
