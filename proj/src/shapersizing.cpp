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

#include "secmap/shapersizing.hpp"

#include <algorithm>
#include <cmath>

namespace secmap {

int64_t dispatch_interval(const Rational& bw) {
  if (bw <= 0) throw ValidationError("shaper bandwidth must be > 0");
  // round(q/p) with halves rounded up
  const int64_t p = bw.numerator();
  const int64_t q = bw.denominator();
  return std::max<int64_t>(1, (2 * q + p) / (2 * p));
}

BandwidthPlan size_bandwidth(const CostReport& report, const HardwareConfig& hw) {
  if (report.latency <= 0)
    throw ValidationError("layer runtime is zero; cannot size the shaper bandwidth");
  BandwidthPlan plan;
  plan.bound = report.bound;
  plan.n_d = report.n_demand;
  plan.n_r = report.n_redundant;
  plan.n_i = report.n_integrity;
  plan.runtime = report.latency;
  if (plan.bound == BoundClass::kMB) {
    plan.bw = hw.crypto_bursts_per_cycle() + Rational(plan.n_r + plan.n_i, plan.runtime);
  } else {
    plan.bw = Rational(plan.n_d + plan.n_r + plan.n_i, plan.runtime);
  }
  if (plan.bw <= 0) plan.bw = Rational(1, plan.runtime);
  plan.interval = dispatch_interval(plan.bw);
  const double bw = to_double(plan.bw);
  plan.quantization_error = std::abs(1.0 / static_cast<double>(plan.interval) - bw) / bw;
  return plan;
}

double bandwidth_bytes_per_second(const Rational& bw, const HardwareConfig& hw) {
  return to_double(bw) * static_cast<double>(hw.burst_bytes) * static_cast<double>(hw.freq_mhz) *
         1e6;
}

}  // namespace secmap
