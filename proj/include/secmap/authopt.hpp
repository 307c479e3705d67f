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
#include <utility>
#include <vector>

#include "secmap/hardware.hpp"
#include "secmap/tracegen.hpp"

namespace secmap {

struct ReuseResult {
  std::vector<MemTraceEntry> trace;  // promoted trace, removed entries dropped
  TraceCounts counts;
  int64_t promotions = 0;
  std::vector<MemTraceEntry> removed;  // later accesses made unnecessary
};

// Single forward pass: a REDUNDANT line whose next access (same address and
// role) is a DEMAND within the role's scratchpad capacity becomes the demand,
// and that later access is dropped. Distance counts 64B per live same-role
// entry strictly between the two.
ReuseResult data_reuse(const std::vector<MemTraceEntry>& trace, const PerRole<int64_t>& spad_bytes);

struct AuthChoice {
  int64_t h_opt = 64;
  int64_t mem_traffic = 0;
  std::vector<std::pair<int64_t, int64_t>> per_h;  // (h, traffic) ascending h
  std::vector<TraceCounts> per_h_counts;           // counts after reuse, same order
  TraceCounts counts;                              // at h_opt

  bool operator==(const AuthChoice&) const = default;
};

// Traffic after reuse for one AuthBlock size.
TraceCounts traffic_at(const LayerSpec& layer, const Mapping& mapping, const HardwareConfig& hw,
                       const AddressMap& amap, int layer_index, int64_t h);

AuthChoice optimal_authblock(const LayerSpec& layer, const Mapping& mapping,
                             const HardwareConfig& hw, const AddressMap& amap, int layer_index,
                             bool parallel = true);

TraceOptions trace_options(const HardwareConfig& hw);

}  // namespace secmap
