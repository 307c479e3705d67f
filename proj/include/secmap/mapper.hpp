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

#include "secmap/costmodel.hpp"
#include "secmap/hardware.hpp"
#include "secmap/tiling.hpp"
#include "secmap/workload.hpp"

namespace secmap {

struct GaParams {
  int population = 64;
  int max_generations = 200;
  double mutation_rate = 0.2;
  double crossover_rate = 0.8;
  uint64_t seed = 1;
  double convergence_pct = 0.05;
  int stagnant_generations = 2;
  int elites = 2;
};

void validate_ga_params(const GaParams& p);

struct Candidate {
  Mapping mapping;
  CostReport cost;
};

struct ExploreResult {
  std::vector<Candidate> candidates;  // final population, distinct, ascending latency
  Candidate first_generation_best;
  int generations = 0;
  std::vector<int64_t> best_history;  // best latency after each generation
};

// Candidate tile values for a dimension: its divisors, ascending.
std::vector<int64_t> tile_values(int64_t extent);

// Canonical form: loop order replaced by the executed order so that mappings
// with identical behaviour compare equal.
Mapping canonical(const Mapping& m);

// Shrinks tiles until every role fits in half its scratchpad. Throws
// InfeasibleLayer when even unit tiles do not fit.
Mapping repair(const LayerSpec& layer, Mapping m, const HardwareConfig& hw);

ExploreResult explore_layer(const LayerSpec& layer, const HardwareConfig& hw,
                            const GaParams& params);

// One exploration per layer, layer i seeded with params.seed + i.
std::vector<ExploreResult> explore_model(const ModelSpec& model, const HardwareConfig& hw,
                                         const GaParams& params, bool parallel = true);

struct TopK {
  int layer_index = 0;
  std::vector<Candidate> mappings;  // ascending latency
  int k = 0;
};

TopK select_k(const std::vector<Candidate>& candidates, double layer_runtime_share,
              int layer_index = 0);

// select_k for every layer with runtime shares taken from each layer's best latency.
std::vector<TopK> select_all(const std::vector<ExploreResult>& results);

}  // namespace secmap
