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
#include <vector>

#include "secmap/program.hpp"

namespace secmap {

enum class LivenessMode : uint8_t { kPromote, kProactiveZeroize };

// A scratchpad range released after its datum's last use.
struct FreeEntry {
  int64_t position = 0;  // program position after which the range is free
  TensorRole role = TensorRole::kIfmap;
  int64_t slot = 0;
  int64_t bytes = 0;
};

struct PassReport {
  int64_t promoted_loads = 0;
  int64_t zeroizes_inserted = 0;
  int64_t forwards = 0;
  std::vector<FreeEntry> free_list;
};

// Promote: every LOAD moves to the earliest point of its own layer where a
// free range exists until its first consumer, without overtaking earlier
// LOADs. Proactive: a ZEROIZE follows every datum's last consumer (the STORE
// for ofmap tiles).
Program liveness_pass(const Program& program, LivenessMode mode, PassReport* report = nullptr);

struct DependencyOptions {
  bool promote = true;     // cross-layer load promotion
  bool forwarding = true;  // store-to-load forwarding
};

// Cross-layer promotion (weights freely, ifmaps after the STOREs producing
// them, never across a CTXSWITCH) followed by store-to-load forwarding.
Program dependency_pass(const Program& program, const DependencyOptions& opts,
                        PassReport* report = nullptr);

struct PassFlags {
  bool multi_tenant = false;
  bool proactive_zeroize = false;  // multi-tenant only; excludes promotion
  bool promote_loads = true;
  bool forwarding = true;
};

// Throws ValidationError for proactive zeroization without multi-tenancy or
// combined with load promotion.
void validate_pass_flags(const PassFlags& flags);

// The pass pipeline used by the tools: liveness then dependency.
Program apply_passes(const Program& program, const PassFlags& flags, PassReport* report = nullptr);

}  // namespace secmap
