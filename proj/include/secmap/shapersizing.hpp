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

#include "secmap/costmodel.hpp"
#include "secmap/hardware.hpp"

namespace secmap {

struct BandwidthPlan {
  Rational bw{1};  // bursts per cycle
  BoundClass bound = BoundClass::kCB;
  int64_t n_d = 0;
  int64_t n_r = 0;
  int64_t n_i = 0;
  int64_t runtime = 0;  // R_i, cycles
  int64_t interval = 1;
  double quantization_error = 0.0;  // |1/interval - bw| / bw

  bool operator==(const BandwidthPlan&) const = default;
};

// Uses report.n_demand / n_redundant / n_integrity, which the caller fills with
// the post-reuse counts at the chosen AuthBlock size.
BandwidthPlan size_bandwidth(const CostReport& report, const HardwareConfig& hw);

// Integer dispatch interval realising bw: max(1, round(1/bw)).
int64_t dispatch_interval(const Rational& bw);

// bursts/cycle -> bytes/s
double bandwidth_bytes_per_second(const Rational& bw, const HardwareConfig& hw);

}  // namespace secmap
