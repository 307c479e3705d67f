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
#include <random>
#include <vector>

#include "secmap/authopt.hpp"
#include "secmap/costmodel.hpp"
#include "secmap/hardware.hpp"
#include "secmap/mapper.hpp"
#include "secmap/shapersizing.hpp"

namespace secmap {

// One resolved choice for one layer: a top-k mapping with its AuthBlock and
// bandwidth plan.
struct LayerOption {
  Mapping mapping;
  CostReport cost;  // counts filled at h_opt
  int64_t h_opt = 64;
  BandwidthPlan plan;
};

// options[layer][choice]
using OptionTable = std::vector<std::vector<LayerOption>>;

struct ModelMapping {
  std::vector<int> choices;
  Rational model_bw{0};
  double edp = 0.0;

  bool operator==(const ModelMapping&) const = default;
};

struct SaParams {
  int iterations = 1000;
  double t_init = 0.0;   // <= 0 selects 0.1 * |EDP(initial)|
  double t_final = 0.0;  // <= 0 selects 1e-4 * t_init
  uint64_t seed = 1;
  int m = 40;
};

struct LayerEval {
  int64_t latency = 0;
  double energy = 0.0;
  int64_t fake_read = 0;
  int64_t fake_write = 0;
};

// Layer latency and energy when the whole model runs at `bw` bursts/cycle.
LayerEval evaluate_layer(const LayerOption& opt, const HardwareConfig& hw, const Rational& bw,
                         bool multi_tenant);

double energy_delay_cost(const std::vector<int>& choices, const OptionTable& table,
                         const HardwareConfig& hw, const Rational& bw, bool multi_tenant = false);

struct SweepPoint {
  Rational bw;
  double edp = 0.0;
};

struct Equalized {
  Rational bw;
  double edp = 0.0;
  std::vector<SweepPoint> sweep;  // from max plan bw down to min, 17 points
};

// j-th of 17 evenly spaced bandwidths from hi (j=0) down to lo (j=16).
Rational sweep_point(const Rational& hi, const Rational& lo, int j);

Equalized equalize_bandwidth(const std::vector<int>& choices, const OptionTable& table,
                             const HardwareConfig& hw, bool multi_tenant = false);

std::vector<int> get_neighbor(const std::vector<int>& choices, const std::vector<int>& ks,
                              std::mt19937_64& rng);

bool metropolis_accept(double cost, double new_cost, double temperature, double u);

double temperature_at(double t_init, double t_final, int n, int iterations);

struct AnnealTrace {
  double initial_edp = 0.0;
  std::vector<int> initial;
  int accepted_worse = 0;
  int proposed_worse = 0;
};

ModelMapping anneal(const OptionTable& table, const HardwareConfig& hw, const SaParams& params,
                    bool multi_tenant = false, AnnealTrace* trace = nullptr);

std::vector<ModelMapping> top_m(const OptionTable& table, const HardwareConfig& hw,
                                const SaParams& params, bool multi_tenant = false,
                                bool parallel = true);

}  // namespace secmap
