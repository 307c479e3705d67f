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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "secmap/common.hpp"
#include "secmap/workload.hpp"

namespace secmap {

// A (tile sizes, loop order) choice for one layer.
struct Mapping {
  std::array<int64_t, kNumDims> tile{1, 1, 1, 1, 1, 1, 1};  // indexed by Dim
  std::array<Dim, kNumDims> loop_order = kAllDims;           // outer -> inner

  int64_t& tile_of(Dim d) { return tile[dim_index(d)]; }
  int64_t tile_of(Dim d) const { return tile[dim_index(d)]; }

  std::string order_string() const;
  bool operator==(const Mapping&) const = default;
  auto operator<=>(const Mapping&) const = default;
};

Mapping unit_mapping();
Mapping parse_loop_order(Mapping m, const std::string& order);

// Throws ValidationError when a tile is out of range or the order is not a permutation.
void validate_mapping(const LayerSpec& layer, const Mapping& m);

// The walk actually executed. The dataflow is output stationary, so the
// reduction dimensions (C,R,S) always run innermost; within each group the
// relative order of the mapping's loop_order is kept.
std::array<Dim, kNumDims> effective_order(const Mapping& m);

// Half-open index range per dimension. X/Y are output coordinates.
struct TileBox {
  std::array<int64_t, kNumDims> lo{};
  std::array<int64_t, kNumDims> hi{};

  int64_t lo_of(Dim d) const { return lo[dim_index(d)]; }
  int64_t hi_of(Dim d) const { return hi[dim_index(d)]; }
  int64_t len(Dim d) const { return hi[dim_index(d)] - lo[dim_index(d)]; }

  bool operator==(const TileBox&) const = default;
};

// Packed scratchpad extents of each role for one tile box.
int64_t ifmap_window_rows(const LayerSpec& layer, const TileBox& b);
int64_t ifmap_window_cols(const LayerSpec& layer, const TileBox& b);
int64_t packed_elements(const LayerSpec& layer, const TileBox& b, TensorRole role);

// One step of the tile walk.
struct TileStep {
  int64_t index = 0;
  TileBox box;
  bool ifmap_changed = true;
  bool weight_changed = true;
  bool first_reduction = true;  // first reduction tile of its output tile
  bool last_reduction = true;   // last reduction tile of its output tile
  int64_t output_tile = 0;      // running count of output tiles
};

class TileWalk {
 public:
  TileWalk(const LayerSpec& layer, const Mapping& m);

  int64_t size() const { return total_; }
  int64_t count(Dim d) const { return counts_[dim_index(d)]; }

  // Advances to the next step; returns false after the last one.
  bool next();
  const TileStep& step() const { return step_; }

  // Collects every step (tests and small layers).
  std::vector<TileStep> all();

 private:
  void fill_box();

  const LayerSpec& layer_;
  std::array<int64_t, kNumDims> tile_{};
  std::array<int64_t, kNumDims> counts_{};
  std::array<Dim, kNumDims> order_{};
  std::array<int64_t, kNumDims> idx_{};  // indexed by position in order_
  int64_t total_ = 0;
  bool started_ = false;
  TileStep step_;
};

}  // namespace secmap
