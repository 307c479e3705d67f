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

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "secmap/common.hpp"

namespace secmap {

// One convolution layer. Fully-connected layers are encoded with R=S=X=Y=1.
// Padding is not modelled; layers are expected to be pre-padded.
struct LayerSpec {
  std::string name;
  int64_t K = 1;  // filters
  int64_t C = 1;  // input channels
  int64_t R = 1;  // filter height
  int64_t S = 1;  // filter width
  int64_t X = 1;  // ifmap height
  int64_t Y = 1;  // ifmap width
  int64_t N = 1;  // batch
  int64_t stride = 1;
  int64_t element_size = 4;  // bytes

  int64_t out_x() const { return (X - R) / stride + 1; }
  int64_t out_y() const { return (Y - S) / stride + 1; }

  // Extent of a tiling dimension; X/Y are measured in output coordinates.
  int64_t extent(Dim d) const;

  int64_t ifmap_elements() const { return N * C * X * Y; }
  int64_t weight_elements() const { return K * C * R * S; }
  int64_t ofmap_elements() const { return N * K * out_x() * out_y(); }
  int64_t macs() const { return ofmap_elements() * C * R * S; }

  bool operator==(const LayerSpec&) const = default;
};

inline constexpr int kExternalInput = -1;

struct ModelSpec {
  std::vector<LayerSpec> layers;
  // depends_on[i] is the layer whose ofmap is layer i's ifmap, or kExternalInput.
  std::vector<int> depends_on;

  std::size_t size() const { return layers.size(); }
  bool operator==(const ModelSpec&) const = default;
};

struct GemmShape {
  int64_t M = 1;      // output rows: X'*Y'*N
  int64_t Kdim = 1;   // reduction length: C*R*S
  int64_t Ncols = 1;  // output columns: K

  bool operator==(const GemmShape&) const = default;
};

std::pair<int64_t, int64_t> output_dims(const LayerSpec& layer);
GemmShape derive_gemm(const LayerSpec& layer);

// Throws ValidationError naming the layer and field.
void validate_layer(const LayerSpec& layer);
void validate_model(const ModelSpec& model);

ModelSpec parse_model(const std::filesystem::path& path);
ModelSpec parse_model_text(const std::string& text);
std::string serialize_model(const ModelSpec& model);

}  // namespace secmap
