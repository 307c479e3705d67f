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

#include "secmap/hardware.hpp"
#include "secmap/tiling.hpp"
#include "secmap/workload.hpp"

namespace secmap {

enum class BoundClass : uint8_t { kCB, kMB };

const char* bound_name(BoundClass c);

// Raw activity counts; energy is always derived from these through the
// hardware's unit-cost table.
struct Activity {
  int64_t macs = 0;
  int64_t spad_reads = 0;   // elements
  int64_t spad_writes = 0;  // elements
  int64_t dram_read_bursts = 0;
  int64_t dram_write_bursts = 0;
  int64_t crypto_blocks = 0;
  int64_t fake_bursts = 0;

  bool operator==(const Activity&) const = default;
};

double energy_of(const Activity& a, const EnergyTable& e);

struct CostReport {
  int64_t latency = 0;  // cycles
  double energy = 0.0;
  Activity activity;
  int64_t n_demand = 0;
  int64_t n_redundant = 0;
  int64_t n_integrity = 0;
  PerRole<int64_t> peak_util_bits{};
  BoundClass bound = BoundClass::kCB;
  int64_t tile_count = 0;
  int64_t compute_cycles = 0;  // sum over tiles
  int64_t memory_cycles = 0;   // sum of per-tile load and store cycles
  int64_t write_bursts = 0;

  bool operator==(const CostReport&) const = default;
};

// Bytes of one full tile per role, before the double-buffer check.
PerRole<int64_t> tile_bytes(const LayerSpec& layer, const Mapping& m);

// Same as tile_bytes but throws InfeasibleMapping when any role exceeds half
// of its scratchpad.
PerRole<int64_t> tile_footprint(const LayerSpec& layer, const Mapping& m, const HardwareConfig& hw);
bool mapping_fits(const LayerSpec& layer, const Mapping& m, const HardwareConfig& hw);

// Output-stationary systolic estimate: fill + stream + drain per fold.
int64_t compute_cycles(const GemmShape& tile, const HardwareConfig& hw);

// Cycles to move `bytes` at `bw` bytes/cycle, rounded up.
int64_t transfer_cycles(int64_t bytes, const Rational& bw);

CostReport estimate_layer(const LayerSpec& layer, const Mapping& m, const HardwareConfig& hw,
                          const Rational& effective_bw);

int64_t zeroize_cost(const PerRole<int64_t>& peak_util_bits, const HardwareConfig& hw);

}  // namespace secmap
