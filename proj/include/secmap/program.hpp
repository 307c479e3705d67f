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
#include <optional>
#include <string>
#include <vector>

#include "secmap/hardware.hpp"
#include "secmap/tiling.hpp"
#include "secmap/tracegen.hpp"
#include "secmap/workload.hpp"

namespace secmap {

// Instruction queue depths of the execution units. LOAD and FORWARD share
// the load queue.
inline constexpr int64_t kLoadQueueDepth = 16;
inline constexpr int64_t kGemmQueueDepth = 4;
inline constexpr int64_t kStoreQueueDepth = 8;

enum class Op : uint8_t { kLoad, kStore, kGemm, kZeroize, kForward, kCtxSwitch };

const char* op_name(Op op);
Op op_from_name(const std::string& s);

// One accelerator instruction. Scratchpad locations are byte offsets into the
// role's scratchpad; DRAM locations are derived from the tile box.
struct Instruction {
  int64_t id = 0;
  Op op = Op::kLoad;
  int layer = 0;
  int64_t tile = -1;  // Program::tiles index (LOAD, STORE, GEMM, FORWARD)
  TensorRole role = TensorRole::kIfmap;
  int64_t slot = 0;   // LOAD/FORWARD destination, STORE source, ZEROIZE start
  int64_t bytes = 0;  // LOAD/STORE/FORWARD/ZEROIZE length
  int64_t addr = 0;   // LOAD/STORE: DRAM region base of the tensor
  bool ro = false;    // LOAD of read-only data (weights)

  // GEMM: read offsets (ifmap, weight) and write offset (ofmap).
  PerRole<int64_t> slots{{0, 0, 0}};
  // Instruction ids defining the data an instruction consumes:
  // GEMM (ifmap, weight, ofmap when accumulating), STORE and FORWARD (ofmap).
  PerRole<int64_t> deps{{-1, -1, -1}};
  bool accumulate = false;  // GEMM adds into the existing ofmap tile
  int64_t src = -1;         // FORWARD: id of the STORE whose data is forwarded

  bool operator==(const Instruction&) const = default;
};

struct TileRef {
  int layer = 0;
  TileBox box;
  bool operator==(const TileRef&) const = default;
};

struct Program {
  ModelSpec model;
  std::vector<int64_t> h;  // AuthBlock size per layer
  PerRole<int64_t> spad_bytes{};
  std::vector<TileRef> tiles;
  std::vector<Instruction> instrs;  // program order
  AddressMap amap;                  // derived from model

  int64_t next_id() const;
  const Instruction* find(int64_t id) const;
  bool operator==(const Program& o) const {
    return model == o.model && h == o.h && spad_bytes == o.spad_bytes && tiles == o.tiles &&
           instrs == o.instrs;
  }
};

// Packed bytes a tile occupies for a role.
int64_t tile_role_bytes(const Program& p, int64_t tile, TensorRole role);

// Parity counters carried across layers so consecutive layers alternate
// scratchpad halves.
struct LowerState {
  PerRole<int64_t> parity{{0, 0, 0}};
};

// Appends one layer to `program` (software pipelined: the next tile's loads
// precede the current GEMM). Throws InfeasibleMapping on slot overflow.
void lower_layer(Program& program, int layer_index, const Mapping& mapping, int64_t h,
                 LowerState& state);

// Whole model; `context_switches` appends a CTXSWITCH after every layer.
Program lower(const ModelSpec& model, const std::vector<Mapping>& mappings,
              const std::vector<int64_t>& h, const HardwareConfig& hw,
              bool context_switches = false);

// True when every ifmap element of the consumer tile was written by the
// producer STORE of `store_tile`.
bool tile_within_store(const Program& p, int64_t consumer_tile, int64_t store_tile);

struct Violation {
  int64_t instruction = -1;  // offending instruction id
  int64_t culprit = -1;      // instruction that destroyed or never produced the data
  std::string message;
};

// Returns the first violation in program order, or nullopt when the program is
// consistent.
std::optional<Violation> validate_program(const Program& program);

// JSON lines: a header line, then one instruction per line.
void write_program(std::ostream& os, const Program& program);
Program read_program(std::istream& is);

struct ProgramStats {
  int64_t loads = 0;
  int64_t stores = 0;
  int64_t gemms = 0;
  int64_t zeroizes = 0;
  int64_t forwards = 0;
  int64_t ctx_switches = 0;
};
ProgramStats program_stats(const Program& program);

}  // namespace secmap
