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

#include <benchmark/benchmark.h>

#include <string>

#include "secmap/authopt.hpp"
#include "secmap/hardware.hpp"
#include "secmap/mapper.hpp"
#include "secmap/simulator.hpp"
#include "secmap/tracegen.hpp"
#include "secmap/workload.hpp"

using namespace secmap;

namespace {

const ModelSpec& model() {
  static const ModelSpec m = parse_model(std::string(SECMAP_SOURCE_DIR) +
                                         "/benchmarks/resnet_small.json");
  return m;
}

const ModelData& data() {
  static const ModelData d = random_model_data(model(), 7);
  return d;
}

GaParams small_ga() {
  GaParams p;
  p.population = 32;
  p.max_generations = 20;
  return p;
}

void BM_GoldenSerial(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(golden_execute_serial(model(), data()));
}

void BM_GoldenParallel(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(golden_execute(model(), data()));
}

void run_authopt(benchmark::State& st, bool parallel) {
  const auto hw = edge_preset();
  const auto amap = build_address_map(model());
  const auto& layer = model().layers.front();
  const auto ex = explore_layer(layer, hw, small_ga());
  const auto& m = ex.candidates.front().mapping;
  for (auto _ : st)
    benchmark::DoNotOptimize(optimal_authblock(layer, m, hw, amap, 0, parallel));
}

void BM_AuthoptSerial(benchmark::State& st) { run_authopt(st, false); }
void BM_AuthoptParallel(benchmark::State& st) { run_authopt(st, true); }

void BM_ExploreSerial(benchmark::State& st) {
  const auto hw = edge_preset();
  for (auto _ : st) benchmark::DoNotOptimize(explore_model(model(), hw, small_ga(), false));
}

void BM_ExploreParallel(benchmark::State& st) {
  const auto hw = edge_preset();
  for (auto _ : st) benchmark::DoNotOptimize(explore_model(model(), hw, small_ga(), true));
}

}  // namespace

BENCHMARK(BM_GoldenSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GoldenParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AuthoptSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AuthoptParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExploreSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExploreParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
