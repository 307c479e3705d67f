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

#include <boost/rational.hpp>

#include "secmap/common.hpp"

namespace secmap {

using Rational = boost::rational<int64_t>;

inline double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

// Abstract energy units per activity.
struct EnergyTable {
  double mac = 1.0;
  double spad_read = 2.0;
  double spad_write = 2.0;
  double dram_read_burst = 100.0;
  double dram_write_burst = 100.0;
  double crypto_block = 50.0;
  double fake_burst = 100.0;

  bool operator==(const EnergyTable&) const = default;
};

struct HardwareConfig {
  std::string name = "custom";
  int64_t pe_rows = 32;
  int64_t pe_cols = 32;
  PerRole<int64_t> spad_bytes{{512 * 1024, 512 * 1024, 192 * 1024}};
  Rational crypto_bw{8};  // bytes per cycle
  int64_t crypto_pipeline_depth = 2;
  int64_t burst_bytes = 64;
  int64_t dram_latency = 5;
  int64_t freq_mhz = 100;
  int64_t zeroize_row_bits = 2048;   // a: bits written per zeroize access
  int64_t zeroize_row_cycles = 1;    // C: cycles per zeroize access
  int64_t zeroize_bytes_per_cycle = 256;
  int64_t zeroize_queue_depth = 64;
  int64_t demand_queue_depth = 16;
  // Emit replay-counter lines for non-read-only tensors (models non-MGX baselines).
  bool replay_counters = false;
  EnergyTable energy;

  // Crypto throughput expressed in bursts per cycle.
  Rational crypto_bursts_per_cycle() const { return crypto_bw / Rational(burst_bytes); }

  bool operator==(const HardwareConfig&) const = default;
};

void validate_hardware(const HardwareConfig& hw);

// Reads a hardware JSON file. `preset_or_path` may also be "cloud" or "edge",
// which resolve to the shipped presets.
HardwareConfig load_hardware(const std::filesystem::path& path);
HardwareConfig hardware_from_json_text(const std::string& text);
std::string hardware_to_json_text(const HardwareConfig& hw);

// Built-in copies of the shipped presets.
HardwareConfig cloud_preset();
HardwareConfig edge_preset();

}  // namespace secmap
