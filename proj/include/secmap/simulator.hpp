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
#include <iosfwd>
#include <string>
#include <vector>

#include "secmap/costmodel.hpp"
#include "secmap/hardware.hpp"
#include "secmap/program.hpp"

namespace secmap {

// Functional inputs: ifmaps for layers fed externally (empty for chained
// layers) and weights for every layer, all int32 in DRAM layout order.
struct ModelData {
  std::vector<std::vector<int32_t>> ifmaps;
  std::vector<std::vector<int32_t>> weights;
};

// Deterministic small-valued data for a model.
ModelData random_model_data(const ModelSpec& model, uint64_t seed);

// Direct convolution reference, one ofmap per layer. Products and sums are
// formed in 64-bit and truncated to int32.
std::vector<std::vector<int32_t>> golden_execute(const ModelSpec& model, const ModelData& data);
std::vector<std::vector<int32_t>> golden_execute_serial(const ModelSpec& model,
                                                        const ModelData& data);

// Shaper dispatch log: tick j happens at cycle j * interval; each entry is 1
// for a real burst and 0 for a fake one.
struct BandwidthLog {
  int64_t interval = 1;
  std::vector<uint8_t> read;
  std::vector<uint8_t> write;

  bool operator==(const BandwidthLog&) const = default;
};

struct ContextSwitchRecord {
  int64_t cycle = 0;
  int layer = 0;
  int64_t zeroized_bytes = 0;     // SECRET bytes cleared at the switch
  int64_t residual_secret = 0;    // bytes still nonzero afterwards

  bool operator==(const ContextSwitchRecord&) const = default;
};

struct SimStats {
  int64_t total_cycles = 0;
  std::vector<int64_t> layer_end_cycles;
  std::vector<int64_t> layer_cycles;
  int64_t real_read_bursts = 0;
  int64_t real_write_bursts = 0;
  int64_t fake_read_bursts = 0;
  int64_t fake_write_bursts = 0;
  int64_t data_read_bursts = 0;       // DEMAND and REDUNDANT lines
  int64_t integrity_read_bursts = 0;  // metadata lines
  int64_t stall_shaper_throttle = 0;
  int64_t stall_crypto = 0;
  int64_t stall_dependency = 0;
  int64_t zeroize_instr_bytes = 0;  // bytes cleared by ZEROIZE instructions
  std::vector<ContextSwitchRecord> context_switches;
  Activity activity;
  double energy = 0.0;
  BandwidthLog bandwidth;

  bool operator==(const SimStats&) const = default;
};

struct SimResult {
  SimStats stats;
  std::vector<std::vector<int32_t>> ofmaps;
};

// Cycle-level run of a validated program with a constant shaper rate of
// `bw` bursts per cycle per direction. Throws SimulationError on an invalid
// program or a deadlock.
SimResult simulate(const Program& program, const HardwareConfig& hw, const Rational& bw,
                   const ModelData& data);

struct BandwidthTick {
  int64_t cycle = 0;
  char direction = 'R';  // 'R' or 'W'
  bool real = false;
};

std::vector<BandwidthTick> bandwidth_trace(const SimStats& stats);

// True when every tick carries exactly one burst per direction at a constant
// interval, covering the whole run.
bool bandwidth_is_constant(const SimStats& stats);

// The bandwidth log is summarised by its interval; bandwidth_trace or the CSV
// writer carry the per-tick entries.
std::string stats_to_json(const SimStats& stats, int indent = 2);
SimStats stats_from_json(const std::string& text);
void write_bandwidth_csv(std::ostream& os, const SimStats& stats);
void write_blob(std::ostream& os, const std::vector<int32_t>& values);
std::vector<int32_t> read_blob(std::istream& is);

}  // namespace secmap
