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

#include "secmap/costmodel.hpp"

#include "secmap/tracegen.hpp"

#include <algorithm>

namespace secmap {

const char* bound_name(BoundClass c) { return c == BoundClass::kCB ? "CB" : "MB"; }

double energy_of(const Activity& a, const EnergyTable& e) {
  return static_cast<double>(a.macs) * e.mac + static_cast<double>(a.spad_reads) * e.spad_read +
         static_cast<double>(a.spad_writes) * e.spad_write +
         static_cast<double>(a.dram_read_bursts) * e.dram_read_burst +
         static_cast<double>(a.dram_write_bursts) * e.dram_write_burst +
         static_cast<double>(a.crypto_blocks) * e.crypto_block +
         static_cast<double>(a.fake_bursts) * e.fake_burst;
}

PerRole<int64_t> tile_bytes(const LayerSpec& layer, const Mapping& m) {
  TileBox b;
  for (Dim d : kAllDims) {
    b.lo[dim_index(d)] = 0;
    b.hi[dim_index(d)] = m.tile_of(d);
  }
  PerRole<int64_t> out;
  for (TensorRole r : kAllRoles) out[r] = packed_elements(layer, b, r) * layer.element_size;
  return out;
}

bool mapping_fits(const LayerSpec& layer, const Mapping& m, const HardwareConfig& hw) {
  auto bytes = tile_bytes(layer, m);
  for (TensorRole r : kAllRoles)
    if (bytes[r] > hw.spad_bytes[r] / 2) return false;
  return true;
}

PerRole<int64_t> tile_footprint(const LayerSpec& layer, const Mapping& m,
                                const HardwareConfig& hw) {
  validate_mapping(layer, m);
  auto bytes = tile_bytes(layer, m);
  for (TensorRole r : kAllRoles) {
    if (bytes[r] > hw.spad_bytes[r] / 2)
      throw InfeasibleMapping("layer '" + layer.name + "': " + std::string(role_name(r)) +
                              " tile of " + std::to_string(bytes[r]) +
                              " bytes exceeds half of the scratchpad (" +
                              std::to_string(hw.spad_bytes[r] / 2) + ")");
  }
  return bytes;
}

int64_t compute_cycles(const GemmShape& t, const HardwareConfig& hw) {
  return ceil_div(t.M, hw.pe_rows) * ceil_div(t.Ncols, hw.pe_cols) *
         (hw.pe_rows + hw.pe_cols + t.Kdim - 2);
}

int64_t transfer_cycles(int64_t bytes, const Rational& bw) {
  if (bytes <= 0) return 0;
  // bytes / (p/q) = bytes*q/p, rounded up.
  return ceil_div(bytes * bw.denominator(), bw.numerator());
}

CostReport estimate_layer(const LayerSpec& layer, const Mapping& m, const HardwareConfig& hw,
                          const Rational& effective_bw) {
  if (effective_bw <= 0) throw ValidationError("effective bandwidth must be > 0");
  tile_footprint(layer, m, hw);

  const int64_t esz = layer.element_size;
  CostReport rep;
  Activity& act = rep.activity;

  TileWalk walk(layer, m);
  rep.tile_count = walk.size();

  // Transfers are charged by the 64B lines they move.
  // latency = load(1) + sum_i max(compute(i), load(i+1) + store(i-1)) + store(T)
  int64_t latency = 0;
  int64_t pending_compute = -1;  // compute of the previous tile, not yet charged
  int64_t pending_store = 0;     // store of the tile before that
  int64_t last_store = 0;
  while (walk.next()) {
    const TileStep& st = walk.step();
    const TileBox& b = st.box;
    int64_t load_bytes = 0;
    if (st.ifmap_changed) {
      int64_t bytes = packed_elements(layer, b, TensorRole::kIfmap) * esz;
      int64_t lines = tile_line_count(layer, b, TensorRole::kIfmap);
      load_bytes += lines * kLineBytes;
      act.spad_writes += bytes / esz;
      act.dram_read_bursts += lines;
      rep.peak_util_bits[TensorRole::kIfmap] =
          std::max(rep.peak_util_bits[TensorRole::kIfmap], bytes * 8);
    }
    if (st.weight_changed) {
      int64_t bytes = packed_elements(layer, b, TensorRole::kWeight) * esz;
      int64_t lines = tile_line_count(layer, b, TensorRole::kWeight);
      load_bytes += lines * kLineBytes;
      act.spad_writes += bytes / esz;
      act.dram_read_bursts += lines;
      rep.peak_util_bits[TensorRole::kWeight] =
          std::max(rep.peak_util_bits[TensorRole::kWeight], bytes * 8);
    }
    int64_t load_cyc = transfer_cycles(load_bytes, effective_bw);

    GemmShape g{b.len(Dim::N) * b.len(Dim::X) * b.len(Dim::Y),
                b.len(Dim::C) * b.len(Dim::R) * b.len(Dim::S), b.len(Dim::K)};
    int64_t comp = compute_cycles(g, hw);
    act.macs += g.M * g.Kdim * g.Ncols;
    act.spad_reads += g.M * g.Kdim + g.Kdim * g.Ncols;
    act.spad_writes += g.M * g.Ncols;

    int64_t store_cyc = 0;
    if (st.last_reduction) {
      int64_t bytes = packed_elements(layer, b, TensorRole::kOfmap) * esz;
      int64_t bursts = tile_line_count(layer, b, TensorRole::kOfmap);
      store_cyc = transfer_cycles(bursts * kLineBytes, effective_bw);
      act.spad_reads += bytes / esz;
      act.dram_write_bursts += bursts;
      rep.write_bursts += bursts;
      rep.peak_util_bits[TensorRole::kOfmap] =
          std::max(rep.peak_util_bits[TensorRole::kOfmap], bytes * 8);
    }

    if (pending_compute < 0) {
      latency += load_cyc;
    } else {
      latency += std::max(pending_compute, load_cyc + pending_store);
      pending_store = last_store;
    }
    // A tile's store overlaps the compute two steps later.
    last_store = store_cyc;
    pending_compute = comp;

    rep.compute_cycles += comp;
    rep.memory_cycles += load_cyc + store_cyc;
  }
  latency += std::max(pending_compute, pending_store);
  latency += last_store;

  act.crypto_blocks = act.dram_read_bursts + act.dram_write_bursts;
  rep.latency = latency;
  rep.energy = energy_of(act, hw.energy);
  rep.n_demand = act.dram_read_bursts;
  rep.bound = rep.memory_cycles > rep.compute_cycles ? BoundClass::kMB : BoundClass::kCB;
  return rep;
}

int64_t zeroize_cost(const PerRole<int64_t>& util, const HardwareConfig& hw) {
  int64_t total = 0;
  for (TensorRole r : kAllRoles) total += ceil_div(util[r], hw.zeroize_row_bits);
  return total * hw.zeroize_row_cycles;
}

}  // namespace secmap
