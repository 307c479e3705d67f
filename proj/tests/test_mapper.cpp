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

#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "secmap/mapper.hpp"

using namespace secmap;

namespace {

HardwareConfig small_hw() {
  HardwareConfig hw;
  hw.pe_rows = hw.pe_cols = 4;
  hw.spad_bytes = PerRole<int64_t>{{4096, 4096, 4096}};
  return hw;
}

// Best latency over all divisor tilings and every loop order that is already
// in executed (reductions innermost) form.
int64_t exhaustive_best(const LayerSpec& l, const HardwareConfig& hw) {
  int64_t best = -1;
  std::array<std::vector<int64_t>, kNumDims> vals;
  for (Dim d : kAllDims) vals[dim_index(d)] = tile_values(l.extent(d));
  std::vector<std::array<Dim, kNumDims>> orders;
  std::array<Dim, kNumDims> o = kAllDims;
  std::sort(o.begin(), o.end());
  do {
    Mapping m;
    m.loop_order = o;
    if (canonical(m).loop_order == o) orders.push_back(o);
  } while (std::next_permutation(o.begin(), o.end()));
  std::array<std::size_t, kNumDims> idx{};
  for (;;) {
    Mapping m;
    for (std::size_t d = 0; d < kNumDims; ++d) m.tile[d] = vals[d][idx[d]];
    if (mapping_fits(l, m, hw)) {
      for (const auto& ord : orders) {
        m.loop_order = ord;
        int64_t lat = estimate_layer(l, m, hw, hw.crypto_bw).latency;
        if (best < 0 || lat < best) best = lat;
      }
    }
    std::size_t d = 0;
    while (d < kNumDims && ++idx[d] == vals[d].size()) idx[d++] = 0;
    if (d == kNumDims) break;
  }
  return best;
}

}  // namespace

TEST_CASE("tile_values are the divisors") {
  CHECK(tile_values(12) == std::vector<int64_t>{1, 2, 3, 4, 6, 12});
  CHECK(tile_values(1) == std::vector<int64_t>{1});
}

TEST_CASE("GA parameters are validated") {
  GaParams p;
  p.population = 1;
  CHECK_THROWS_AS(validate_ga_params(p), ValidationError);
  p = GaParams{};
  p.mutation_rate = 1.5;
  CHECK_THROWS_AS(validate_ga_params(p), ValidationError);
}

TEST_CASE("single point layer returns the unit mapping") {
  LayerSpec l;
  l.name = "one";
  auto r = explore_layer(l, small_hw(), GaParams{});
  REQUIRE_FALSE(r.candidates.empty());
  CHECK(r.candidates.front().mapping.tile == unit_mapping().tile);
}

TEST_CASE("exploration is deterministic and sorted") {
  LayerSpec l;
  l.name = "d";
  l.K = 8;
  l.C = 4;
  l.R = l.S = 3;
  l.X = l.Y = 6;
  GaParams p;
  p.population = 16;
  p.max_generations = 20;
  p.seed = 42;
  auto a = explore_layer(l, small_hw(), p);
  auto b = explore_layer(l, small_hw(), p);
  REQUIRE(a.candidates.size() == b.candidates.size());
  for (std::size_t i = 0; i < a.candidates.size(); ++i) {
    CHECK(a.candidates[i].mapping == b.candidates[i].mapping);
    CHECK(a.candidates[i].cost == b.candidates[i].cost);
    if (i > 0) CHECK(a.candidates[i - 1].cost.latency <= a.candidates[i].cost.latency);
    CHECK(mapping_fits(l, a.candidates[i].mapping, small_hw()));
  }
  for (std::size_t g = 1; g < a.best_history.size(); ++g)
    CHECK(a.best_history[g] <= a.best_history[g - 1]);
  CHECK(a.best_history.front() == a.first_generation_best.cost.latency);
}

TEST_CASE("GA finds the exhaustive optimum on small layers") {
  LayerSpec l;
  l.name = "s";
  l.K = 4;
  l.C = 4;
  l.R = l.S = 2;
  l.X = l.Y = 4;
  auto hw = small_hw();
  int64_t best = exhaustive_best(l, hw);
  int hits = 0;
  for (uint64_t s = 0; s < 20; ++s) {
    GaParams p;
    p.population = 32;
    p.max_generations = 60;
    p.seed = 100 + s;
    auto r = explore_layer(l, hw, p);
    CHECK(r.candidates.front().cost.latency >= best);
    if (r.candidates.front().cost.latency == best) ++hits;
  }
  CHECK(hits >= 18);
}

TEST_CASE("repair shrinks tiles until they fit") {
  LayerSpec l;
  l.K = 16;
  l.C = 16;
  l.R = l.S = 3;
  l.X = l.Y = 16;
  auto hw = small_hw();
  Mapping full;
  for (Dim d : kAllDims) full.tile_of(d) = l.extent(d);
  auto m = repair(l, full, hw);
  CHECK(mapping_fits(l, m, hw));
  hw.spad_bytes = PerRole<int64_t>{{4, 4, 4}};
  CHECK_THROWS_AS(repair(l, full, hw), InfeasibleLayer);
}

TEST_CASE("select_k") {
  std::vector<Candidate> c(4);
  int64_t lat[] = {100, 105, 109, 111};
  for (int i = 0; i < 4; ++i) c[static_cast<std::size_t>(i)].cost.latency = lat[i];
  CHECK(select_k(c, 0.0).k == 2);
  auto all = select_k(c, 1.0);
  CHECK(all.k == 3);  // 111 is above the 110 cutoff
  std::vector<Candidate> many(40);
  for (std::size_t i = 0; i < many.size(); ++i) many[i].cost.latency = 1000 + static_cast<int64_t>(i);
  CHECK(select_k(many, 1.0).k == 16);
  CHECK(select_k(many, 0.0).k == 2);
  for (const auto& m : select_k(many, 0.5).mappings) CHECK(m.cost.latency * 10 <= 1000 * 11);
}

TEST_CASE("explore_model seeds layers independently of thread count") {
  ModelSpec model;
  for (int i = 0; i < 3; ++i) {
    LayerSpec l;
    l.name = "l" + std::to_string(i);
    l.K = 4 + i;
    l.C = 3;
    l.R = l.S = 2;
    l.X = l.Y = 5;
    model.layers.push_back(l);
    model.depends_on.push_back(kExternalInput);
  }
  GaParams p;
  p.population = 8;
  p.max_generations = 10;
  auto a = explore_model(model, small_hw(), p, true);
  auto b = explore_model(model, small_hw(), p, false);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].candidates.front().mapping == b[i].candidates.front().mapping);
    GaParams pi = p;
    pi.seed = p.seed + i;
    CHECK(explore_layer(model.layers[i], small_hw(), pi).candidates.front().mapping ==
          a[i].candidates.front().mapping);
  }
}
