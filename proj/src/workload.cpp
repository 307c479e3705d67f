/*
 * Copyright 2026 The secmap Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "secmap/workload.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace secmap {

using nlohmann::json;

std::string_view role_name(TensorRole r) {
  switch (r) {
    case TensorRole::kIfmap:
      return "ifmap";
    case TensorRole::kWeight:
      return "weight";
    case TensorRole::kOfmap:
      return "ofmap";
  }
  return "?";
}

TensorRole role_from_name(std::string_view s) {
  if (s == "ifmap") return TensorRole::kIfmap;
  if (s == "weight") return TensorRole::kWeight;
  if (s == "ofmap") return TensorRole::kOfmap;
  throw ParseError("unknown tensor role '" + std::string(s) + "'");
}

char dim_symbol(Dim d) { return "KCRSNXY"[dim_index(d)]; }

Dim dim_from_symbol(char c) {
  switch (c) {
    case 'K':
      return Dim::K;
    case 'C':
      return Dim::C;
    case 'R':
      return Dim::R;
    case 'S':
      return Dim::S;
    case 'N':
      return Dim::N;
    case 'X':
      return Dim::X;
    case 'Y':
      return Dim::Y;
    default:
      throw ParseError(std::string("unknown loop dimension '") + c + "'");
  }
}

int64_t LayerSpec::extent(Dim d) const {
  switch (d) {
    case Dim::K:
      return K;
    case Dim::C:
      return C;
    case Dim::R:
      return R;
    case Dim::S:
      return S;
    case Dim::N:
      return N;
    case Dim::X:
      return out_x();
    case Dim::Y:
      return out_y();
  }
  return 1;
}

std::pair<int64_t, int64_t> output_dims(const LayerSpec& layer) {
  return {layer.out_x(), layer.out_y()};
}

GemmShape derive_gemm(const LayerSpec& layer) {
  auto [ox, oy] = output_dims(layer);
  return GemmShape{ox * oy * layer.N, layer.C * layer.R * layer.S, layer.K};
}

void validate_layer(const LayerSpec& l) {
  auto fail = [&](const std::string& what) {
    throw ValidationError("layer '" + l.name + "': " + what);
  };
  const std::pair<const char*, int64_t> dims[] = {{"K", l.K}, {"C", l.C}, {"R", l.R},
                                                  {"S", l.S}, {"X", l.X}, {"Y", l.Y},
                                                  {"N", l.N}};
  for (const auto& [name, v] : dims) {
    if (v < 1) fail(std::string(name) + " must be >= 1 (got " + std::to_string(v) + ")");
  }
  if (l.stride < 1) fail("stride must be >= 1 (got " + std::to_string(l.stride) + ")");
  if (l.element_size < 1) fail("element_size must be >= 1");
  if (l.R > l.X) fail("R must not exceed X");
  if (l.S > l.Y) fail("S must not exceed Y");
}

void validate_model(const ModelSpec& m) {
  if (m.layers.empty()) throw ValidationError("model has no layers");
  if (m.depends_on.size() != m.layers.size())
    throw ValidationError("depends_on must have one entry per layer");
  for (const auto& l : m.layers) validate_layer(l);
  if (m.depends_on[0] != kExternalInput)
    throw ValidationError("first layer must take an external input");
  for (std::size_t i = 1; i < m.layers.size(); ++i) {
    int p = m.depends_on[i];
    if (p == kExternalInput) continue;
    if (p < 0 || static_cast<std::size_t>(p) >= i)
      throw ValidationError("layer '" + m.layers[i].name +
                            "': depends_on must reference an earlier layer");
    const auto& prod = m.layers[static_cast<std::size_t>(p)];
    const auto& cons = m.layers[i];
    // The producer's ofmap is reinterpreted as the consumer's ifmap, row-major per batch.
    if (prod.N != cons.N || prod.K * prod.out_x() * prod.out_y() != cons.C * cons.X * cons.Y)
      throw ValidationError("layer '" + cons.name + "': ifmap shape does not match ofmap of '" +
                            prod.name + "'");
    if (prod.element_size != cons.element_size)
      throw ValidationError("layer '" + cons.name + "': element_size differs from producer");
  }
}

namespace {

int64_t get_int(const json& obj, const char* key, const std::string& where, bool required,
                int64_t fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) throw ParseError(where + "." + key + ": missing required field");
    return fallback;
  }
  if (!it->is_number_integer())
    throw ParseError(where + "." + key + ": expected an integer");
  return it->get<int64_t>();
}

}  // namespace

ModelSpec parse_model_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model: malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("model: top level must be an object");
  auto it = doc.find("layers");
  if (it == doc.end()) throw ParseError("model.layers: missing required field");
  if (!it->is_array()) throw ParseError("model.layers: expected a list");

  ModelSpec m;
  for (std::size_t i = 0; i < it->size(); ++i) {
    const json& lj = (*it)[i];
    std::string where = "layers[" + std::to_string(i) + "]";
    if (!lj.is_object()) throw ParseError(where + ": expected an object");
    LayerSpec l;
    if (auto n = lj.find("name"); n != lj.end()) {
      if (!n->is_string()) throw ParseError(where + ".name: expected a string");
      l.name = n->get<std::string>();
    } else {
      l.name = "layer" + std::to_string(i);
    }
    l.K = get_int(lj, "K", where, true, 1);
    l.C = get_int(lj, "C", where, true, 1);
    l.R = get_int(lj, "R", where, true, 1);
    l.S = get_int(lj, "S", where, true, 1);
    l.X = get_int(lj, "X", where, true, 1);
    l.Y = get_int(lj, "Y", where, true, 1);
    l.N = get_int(lj, "N", where, false, 1);
    l.stride = get_int(lj, "stride", where, false, 1);
    l.element_size = get_int(lj, "element_size", where, false, 4);
    int dep = i == 0 ? kExternalInput : static_cast<int>(i) - 1;
    if (auto d = lj.find("depends_on"); d != lj.end()) {
      if (d->is_null()) {
        dep = kExternalInput;
      } else if (d->is_number_integer()) {
        dep = d->get<int>();
        if (dep < 0) dep = kExternalInput;
      } else {
        throw ParseError(where + ".depends_on: expected an integer or null");
      }
    }
    m.layers.push_back(std::move(l));
    m.depends_on.push_back(dep);
  }
  validate_model(m);
  return m;
}

ModelSpec parse_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("model: cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model_text(ss.str());
}

std::string serialize_model(const ModelSpec& m) {
  json layers = json::array();
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const auto& l = m.layers[i];
    json lj = {{"name", l.name}, {"K", l.K}, {"C", l.C}, {"R", l.R},
               {"S", l.S},       {"X", l.X}, {"Y", l.Y}, {"N", l.N},
               {"stride", l.stride}, {"element_size", l.element_size}};
    lj["depends_on"] = m.depends_on[i] == kExternalInput ? json(nullptr) : json(m.depends_on[i]);
    layers.push_back(std::move(lj));
  }
  return json{{"layers", layers}}.dump(2);
}

}  // namespace secmap
