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
#include <functional>
#include <iosfwd>
#include <vector>

#include "secmap/common.hpp"
#include "secmap/tiling.hpp"
#include "secmap/workload.hpp"

namespace secmap {

inline constexpr std::array<int64_t, 7> kAuthBlockSizes = {64, 128, 256, 512, 1024, 2048, 4096};
bool is_valid_authblock(int64_t h);

enum class Label : uint8_t { kDemand = 0, kRedundant = 1, kIntegrity = 2 };
const char* label_name(Label l);

struct MemTraceEntry {
  int64_t addr = 0;
  TensorRole role = TensorRole::kIfmap;
  Label label = Label::kDemand;
  int64_t seq = 0;

  bool operator==(const MemTraceEntry&) const = default;
};

struct TraceCounts {
  int64_t n_demand = 0;
  int64_t n_redundant = 0;
  int64_t n_integrity = 0;

  int64_t total() const { return n_demand + n_redundant + n_integrity; }
  bool operator==(const TraceCounts&) const = default;
};

// Byte address of a tensor region. Regions are 4 KiB aligned so no AuthBlock
// ever spans two tensors.
struct Region {
  int64_t base = 0;
  int64_t bytes = 0;
  TensorRole role = TensorRole::kIfmap;
  int layer = 0;  // owning layer (producer for ofmaps)
};

struct AddressMap {
  std::vector<PerRole<int64_t>> layer_base;  // per layer, per role
  std::vector<Region> regions;
  int64_t metadata_base = 0;
  int64_t counter_base = 0;

  int64_t base(int layer, TensorRole role) const {
    return layer_base[static_cast<std::size_t>(layer)][role];
  }
  // Region containing addr, or nullptr.
  const Region* find(int64_t addr) const;
};

AddressMap build_address_map(const ModelSpec& model);

struct TraceOptions {
  bool ro_weights = true;        // weights carry no replay counter
  bool replay_counters = false;  // emit counter lines for non-read-only tensors
};

// Visits every element a tile reads (ifmap, weight) or writes (ofmap), in
// packed scratchpad order: fn(packed_index, byte_address).
void for_each_element(const LayerSpec& layer, const TileBox& box, TensorRole role, int64_t base,
                      const std::function<void(int64_t, int64_t)>& fn);

// Sorted, distinct 64B line addresses touched by one tile of one role.
std::vector<int64_t> tile_lines(const LayerSpec& layer, const TileBox& box, TensorRole role,
                                int64_t base);

// Number of distinct 64B lines a tile touches. Regions are line aligned, so
// the count does not depend on the base address. Walks contiguous runs
// rather than elements.
int64_t tile_line_count(const LayerSpec& layer, const TileBox& box, TensorRole role);

// One AuthBlock fetch: the demanded lines, the lines pulled in only to
// complete the block, and the metadata lines.
struct BlockFetch {
  int64_t block_addr = 0;
  std::vector<int64_t> demand;
  std::vector<int64_t> redundant;
  std::vector<int64_t> integrity;
};

std::vector<BlockFetch> tile_fetches(const LayerSpec& layer, const TileBox& box, TensorRole role,
                                     int64_t h, const AddressMap& amap, int layer_index,
                                     const TraceOptions& opts);

// Appends the labelled entries of a set of fetches in trace order.
void append_fetches(const std::vector<BlockFetch>& fetches, TensorRole role,
                    std::vector<MemTraceEntry>& out);

std::vector<MemTraceEntry> generate_trace(const LayerSpec& layer, const Mapping& mapping,
                                          int64_t h, const AddressMap& amap, int layer_index,
                                          const TraceOptions& opts = {});

TraceCounts counts(const std::vector<MemTraceEntry>& trace);

void write_trace_csv(std::ostream& os, const std::vector<MemTraceEntry>& trace);

}  // namespace secmap
