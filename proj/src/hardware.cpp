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

#include "secmap/hardware.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace secmap {

using nlohmann::json;

void validate_hardware(const HardwareConfig& hw) {
  auto positive = [&](int64_t v, const char* name) {
    if (v <= 0) throw ValidationError(std::string("hardware.") + name + " must be > 0");
  };
  positive(hw.pe_rows, "pe_rows");
  positive(hw.pe_cols, "pe_cols");
  positive(hw.crypto_pipeline_depth, "crypto_pipeline_depth");
  positive(hw.burst_bytes, "burst_bytes");
  positive(hw.dram_latency, "dram_latency");
  positive(hw.freq_mhz, "freq_mhz");
  positive(hw.zeroize_row_bits, "zeroize_row_bits");
  positive(hw.zeroize_row_cycles, "zeroize_row_cycles");
  positive(hw.zeroize_bytes_per_cycle, "zeroize_bytes_per_cycle");
  positive(hw.zeroize_queue_depth, "zeroize_queue_depth");
  positive(hw.demand_queue_depth, "demand_queue_depth");
  if (hw.crypto_bw <= 0) throw ValidationError("hardware.crypto_bw must be > 0");
  if (hw.burst_bytes != kLineBytes)
    throw ValidationError("hardware.burst_bytes must equal the 64B line size");
  for (TensorRole r : kAllRoles) {
    int64_t b = hw.spad_bytes[r];
    if (b <= 0 || b % hw.burst_bytes != 0 || (b / 2) % 4 != 0)
      throw ValidationError("hardware.spad_bytes." + std::string(role_name(r)) +
                            " must be a positive multiple of burst_bytes");
  }
  const double costs[] = {hw.energy.mac,         hw.energy.spad_read,        hw.energy.spad_write,
                          hw.energy.dram_read_burst, hw.energy.dram_write_burst,
                          hw.energy.crypto_block, hw.energy.fake_burst};
  for (double c : costs)
    if (!(c > 0)) throw ValidationError("hardware.energy entries must be > 0");
}

namespace {

int64_t req_int(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("hardware.") + key + ": missing required field");
  if (!it->is_number_integer())
    throw ParseError(std::string("hardware.") + key + ": expected an integer");
  return it->get<int64_t>();
}

int64_t opt_int(const json& j, const char* key, int64_t fallback) {
  return j.contains(key) ? req_int(j, key) : fallback;
}

}  // namespace

HardwareConfig hardware_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("hardware: malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("hardware: top level must be an object");
  HardwareConfig hw;
  hw.name = j.value("name", std::string("custom"));
  hw.pe_rows = req_int(j, "pe_rows");
  hw.pe_cols = req_int(j, "pe_cols");
  hw.freq_mhz = req_int(j, "freq_mhz");
  if (!j.contains("spad_kb") || !j["spad_kb"].is_object())
    throw ParseError("hardware.spad_kb: missing required object");
  for (TensorRole r : kAllRoles) {
    const auto& s = j["spad_kb"];
    std::string key(role_name(r));
    if (!s.contains(key) || !s[key].is_number_integer())
      throw ParseError("hardware.spad_kb." + key + ": expected an integer");
    hw.spad_bytes[r] = s[key].get<int64_t>() * 1024;
  }
  if (j.contains("crypto_bw_bytes_per_cycle")) {
    hw.crypto_bw = Rational(req_int(j, "crypto_bw_bytes_per_cycle"));
  } else {
    // MB/s divided by MHz gives bytes per cycle.
    hw.crypto_bw = Rational(req_int(j, "crypto_throughput_MBps"), hw.freq_mhz);
  }
  hw.crypto_pipeline_depth = opt_int(j, "crypto_pipeline_depth", hw.crypto_pipeline_depth);
  hw.burst_bytes = opt_int(j, "burst_bytes", hw.burst_bytes);
  hw.dram_latency = opt_int(j, "dram_latency", hw.dram_latency);
  hw.zeroize_row_bits = opt_int(j, "zeroize_row_bits", hw.zeroize_row_bits);
  hw.zeroize_row_cycles = opt_int(j, "zeroize_row_cycles", hw.zeroize_row_cycles);
  hw.zeroize_bytes_per_cycle = opt_int(j, "zeroize_bytes_per_cycle", hw.zeroize_bytes_per_cycle);
  hw.zeroize_queue_depth = opt_int(j, "zeroize_queue_depth", hw.zeroize_queue_depth);
  hw.demand_queue_depth = opt_int(j, "demand_queue_depth", hw.demand_queue_depth);
  hw.replay_counters = j.value("replay_counters", false);
  if (j.contains("energy")) {
    const auto& e = j["energy"];
    hw.energy.mac = e.value("mac", hw.energy.mac);
    hw.energy.spad_read = e.value("spad_read", hw.energy.spad_read);
    hw.energy.spad_write = e.value("spad_write", hw.energy.spad_write);
    hw.energy.dram_read_burst = e.value("dram_read_burst", hw.energy.dram_read_burst);
    hw.energy.dram_write_burst = e.value("dram_write_burst", hw.energy.dram_write_burst);
    hw.energy.crypto_block = e.value("crypto_block", hw.energy.crypto_block);
    hw.energy.fake_burst = e.value("fake_burst", hw.energy.fake_burst);
  }
  validate_hardware(hw);
  return hw;
}

HardwareConfig load_hardware(const std::filesystem::path& path) {
  if (path == "cloud") return cloud_preset();
  if (path == "edge") return edge_preset();
  std::ifstream in(path);
  if (!in) throw ParseError("hardware: cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return hardware_from_json_text(ss.str());
}

std::string hardware_to_json_text(const HardwareConfig& hw) {
  json j;
  j["name"] = hw.name;
  j["pe_rows"] = hw.pe_rows;
  j["pe_cols"] = hw.pe_cols;
  j["freq_mhz"] = hw.freq_mhz;
  for (TensorRole r : kAllRoles) j["spad_kb"][std::string(role_name(r))] = hw.spad_bytes[r] / 1024;
  if (hw.crypto_bw.denominator() == 1) {
    j["crypto_bw_bytes_per_cycle"] = hw.crypto_bw.numerator();
  } else {
    Rational mbps = hw.crypto_bw * Rational(hw.freq_mhz);
    j["crypto_throughput_MBps"] = mbps.numerator() / mbps.denominator();
  }
  j["crypto_pipeline_depth"] = hw.crypto_pipeline_depth;
  j["burst_bytes"] = hw.burst_bytes;
  j["dram_latency"] = hw.dram_latency;
  j["zeroize_row_bits"] = hw.zeroize_row_bits;
  j["zeroize_row_cycles"] = hw.zeroize_row_cycles;
  j["zeroize_bytes_per_cycle"] = hw.zeroize_bytes_per_cycle;
  j["zeroize_queue_depth"] = hw.zeroize_queue_depth;
  j["demand_queue_depth"] = hw.demand_queue_depth;
  j["replay_counters"] = hw.replay_counters;
  j["energy"] = {{"mac", hw.energy.mac},
                 {"spad_read", hw.energy.spad_read},
                 {"spad_write", hw.energy.spad_write},
                 {"dram_read_burst", hw.energy.dram_read_burst},
                 {"dram_write_burst", hw.energy.dram_write_burst},
                 {"crypto_block", hw.energy.crypto_block},
                 {"fake_burst", hw.energy.fake_burst}};
  return j.dump(2);
}

HardwareConfig cloud_preset() {
  HardwareConfig hw;
  hw.name = "cloud";
  hw.pe_rows = 256;
  hw.pe_cols = 256;
  hw.freq_mhz = 800;
  hw.spad_bytes = PerRole<int64_t>{{6144 * 1024, 6144 * 1024, 2048 * 1024}};
  hw.crypto_bw = Rational(6400, 800);  // 6.4 GB/s at 800 MHz
  hw.dram_latency = 36;
  return hw;
}

HardwareConfig edge_preset() {
  HardwareConfig hw;
  hw.name = "edge";
  hw.pe_rows = 32;
  hw.pe_cols = 32;
  hw.freq_mhz = 100;
  hw.spad_bytes = PerRole<int64_t>{{512 * 1024, 512 * 1024, 192 * 1024}};
  hw.crypto_bw = Rational(800, 100);  // 800 MB/s at 100 MHz
  hw.dram_latency = 5;
  return hw;
}

}  // namespace secmap
