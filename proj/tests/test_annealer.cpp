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

#include <cmath>
#include <random>

#include "doctest.h"

#include "secmap/annealer.hpp"

using namespace secmap;

namespace {

LayerOption option(int64_t latency, int64_t reads, int64_t writes, int64_t macs, Rational bw) {
  LayerOption o;
  o.cost.latency = latency;
  o.cost.n_demand = reads;
  o.cost.write_bursts = writes;
  o.cost.activity.macs = macs;
  o.cost.peak_util_bits = PerRole<int64_t>{{4096, 2048, 1}};
  o.plan.bw = bw;
  return o;
}

OptionTable random_table(std::mt19937_64& rng, int layers, int k) {
  OptionTable t(static_cast<std::size_t>(layers));
  for (auto& l : t)
    for (int j = 0; j < k; ++j) {
      int64_t lat = 50 + static_cast<int64_t>(rng() % 2000);
      int64_t reads = static_cast<int64_t>(rng() % 400);
      int64_t writes = static_cast<int64_t>(rng() % 100);
      Rational bw(1 + static_cast<int64_t>(rng() % 8), 1 + static_cast<int64_t>(rng() % 8));
      l.push_back(option(lat, reads, writes, static_cast<int64_t>(rng() % 100000), bw));
    }
  return t;
}

// Layer EDP computed with exact rational timing.
double oracle_edp(const std::vector<int>& ch, const OptionTable& t, const HardwareConfig& hw,
                  const Rational& bw) {
  double total = 0;
  for (std::size_t l = 0; l < t.size(); ++l) {
    const auto& o = t[l][static_cast<std::size_t>(ch[l])];
    int64_t reads = o.cost.n_demand + o.cost.n_redundant + o.cost.n_integrity;
    int64_t writes = o.cost.write_bursts;
    auto need = [&](int64_t n) {
      Rational c = Rational(n) / bw;
      return boost::rational_cast<int64_t>(c) + (c.denominator() == 1 ? 0 : 1);
    };
    int64_t lat = std::max({o.cost.latency, need(reads), need(writes)});
    int64_t slots = boost::rational_cast<int64_t>(bw * Rational(lat));
    double fake = static_cast<double>(std::max<int64_t>(0, slots - reads) +
                                      std::max<int64_t>(0, slots - writes));
    double e = static_cast<double>(o.cost.activity.macs) * hw.energy.mac +
               static_cast<double>(reads) * hw.energy.dram_read_burst + fake * hw.energy.fake_burst;
    total += e * static_cast<double>(lat);
  }
  return total;
}

double exhaustive_min(const OptionTable& t, const HardwareConfig& hw) {
  const int l = static_cast<int>(t.size());
  double best = -1;
  for (int mask = 0; mask < (1 << l); ++mask) {
    std::vector<int> ch(static_cast<std::size_t>(l));
    for (int i = 0; i < l; ++i) ch[static_cast<std::size_t>(i)] = (mask >> i) & 1;
    double e = equalize_bandwidth(ch, t, hw).edp;
    if (best < 0 || e < best) best = e;
  }
  return best;
}

}  // namespace

TEST_CASE("two-layer EDP hand evaluation") {
  HardwareConfig hw;
  OptionTable t{{option(100, 50, 10, 1000, Rational(1))}, {option(10, 40, 0, 0, Rational(1))}};
  CHECK(energy_delay_cost({0, 0}, t, hw, Rational(1)) == doctest::Approx(2000000.0 + 320000.0));
  OptionTable one{{option(100, 50, 10, 1000, Rational(1))}};
  CHECK(energy_delay_cost({0}, one, hw, Rational(1)) == doctest::Approx(2000000.0));
  CHECK_THROWS_AS(energy_delay_cost({0}, one, hw, Rational(0)), ValidationError);
}

TEST_CASE("EDP matches the exact-arithmetic oracle") {
  HardwareConfig hw;
  std::mt19937_64 rng(12);
  for (int it = 0; it < 100; ++it) {
    auto t = random_table(rng, 3, 2);
    std::vector<int> ch{static_cast<int>(rng() % 2), static_cast<int>(rng() % 2),
                        static_cast<int>(rng() % 2)};
    Rational bw(1 + static_cast<int64_t>(rng() % 20), 1 + static_cast<int64_t>(rng() % 20));
    CHECK(energy_delay_cost(ch, t, hw, bw) == doctest::Approx(oracle_edp(ch, t, hw, bw)));
  }
}

TEST_CASE("fake energy raises the EDP of a padded layer") {
  HardwareConfig hw;
  OptionTable t{{option(100, 10, 10, 10, Rational(1))}};
  double a = energy_delay_cost({0}, t, hw, Rational(1));
  hw.energy.fake_burst *= 2;
  CHECK(energy_delay_cost({0}, t, hw, Rational(1)) > a);
}

TEST_CASE("multi-tenant mode adds the zeroize latency") {
  HardwareConfig hw;
  auto o = option(100, 0, 0, 10, Rational(1));
  auto a = evaluate_layer(o, hw, Rational(1), false);
  auto b = evaluate_layer(o, hw, Rational(1), true);
  CHECK(b.latency == a.latency + zeroize_cost(o.cost.peak_util_bits, hw));
}

TEST_CASE("equalize_bandwidth sweep") {
  HardwareConfig hw;
  std::mt19937_64 rng(1);
  auto t = random_table(rng, 4, 1);
  std::vector<int> ch(4, 0);
  auto eq = equalize_bandwidth(ch, t, hw);
  REQUIRE(eq.sweep.size() == 17);
  Rational hi = t[0][0].plan.bw, lo = hi;
  for (const auto& l : t) {
    hi = std::max(hi, l[0].plan.bw);
    lo = std::min(lo, l[0].plan.bw);
  }
  CHECK(eq.sweep.front().bw == hi);
  CHECK(eq.sweep.back().bw == lo);
  for (int j = 0; j <= 16; ++j) {
    const auto& p = eq.sweep[static_cast<std::size_t>(j)];
    double expect = to_double(hi) + (to_double(lo) - to_double(hi)) * j / 16.0;
    CHECK(to_double(p.bw) == doctest::Approx(expect).epsilon(1e-6));
    CHECK(p.edp == doctest::Approx(oracle_edp(ch, t, hw, p.bw)));
    CHECK(eq.edp <= p.edp);
  }
  OptionTable same{{option(10, 5, 5, 5, Rational(1, 2))}, {option(20, 5, 5, 5, Rational(1, 2))}};
  CHECK(equalize_bandwidth({0, 0}, same, hw).bw == Rational(1, 2));
}

TEST_CASE("get_neighbor changes exactly one layer, uniformly") {
  std::mt19937_64 rng(5);
  std::vector<int> ks{3, 3, 3};
  std::vector<int> ch{0, 1, 2};
  int hits[3] = {0, 0, 0};
  for (int i = 0; i < 10000; ++i) {
    auto n = get_neighbor(ch, ks, rng);
    int diff = 0;
    for (int l = 0; l < 3; ++l)
      if (n[static_cast<std::size_t>(l)] != ch[static_cast<std::size_t>(l)]) {
        ++diff;
        ++hits[l];
        CHECK(n[static_cast<std::size_t>(l)] < 3);
      }
    CHECK(diff == 1);
  }
  // Chi-square with 2 degrees of freedom; 13.8 is the 0.1% critical value.
  double chi = 0;
  for (int h : hits) chi += (h - 10000.0 / 3) * (h - 10000.0 / 3) / (10000.0 / 3);
  CHECK(chi < 13.8);
  CHECK(get_neighbor({0, 0}, {1, 1}, rng) == std::vector<int>{0, 0});
}

TEST_CASE("metropolis acceptance frequency follows exp(-delta/t)") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0, 1);
  for (double ratio : {0.25, 1.0, 2.0}) {
    int acc = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) acc += metropolis_accept(10.0, 10.0 + ratio, 1.0, u(rng));
    double expect = std::exp(-ratio);
    CHECK(std::abs(acc / static_cast<double>(n) - expect) <= 0.05 * expect);
  }
  CHECK(metropolis_accept(5, 4, 0.0, 0.99));
}

TEST_CASE("geometric temperature schedule") {
  CHECK(temperature_at(100, 1, 0, 10) == doctest::Approx(100));
  CHECK(temperature_at(100, 1, 10, 10) == doctest::Approx(1));
  CHECK(temperature_at(100, 1, 5, 10) == doctest::Approx(10));
}

TEST_CASE("zero iterations return the initial mapping") {
  HardwareConfig hw;
  std::mt19937_64 rng(3);
  auto t = random_table(rng, 4, 3);
  SaParams p;
  p.iterations = 0;
  AnnealTrace tr;
  auto r = anneal(t, hw, p, false, &tr);
  CHECK(r.choices == tr.initial);
  CHECK(r.edp == doctest::Approx(tr.initial_edp));
}

TEST_CASE("two-state space converges to the better state") {
  HardwareConfig hw;
  OptionTable t{{option(100, 10, 10, 1000, Rational(1)), option(100, 10, 10, 10, Rational(1))}};
  int good = 0;
  for (uint64_t s = 0; s < 100; ++s) {
    SaParams p;
    p.seed = s;
    p.iterations = 50;
    if (anneal(t, hw, p).choices[0] == 1) ++good;
  }
  CHECK(good >= 99);
}

TEST_CASE("anneal matches exhaustive search on small spaces") {
  HardwareConfig hw;
  std::mt19937_64 rng(99);
  auto t = random_table(rng, 8, 2);
  double best = exhaustive_min(t, hw);
  int hits = 0;
  for (uint64_t s = 0; s < 100; ++s) {
    SaParams p;
    p.seed = s;
    AnnealTrace tr;
    auto r = anneal(t, hw, p, false, &tr);
    CHECK(r.edp <= tr.initial_edp);
    CHECK(r.edp == doctest::Approx(equalize_bandwidth(r.choices, t, hw).edp));
    if (r.edp <= best * (1 + 1e-12)) ++hits;
  }
  CHECK(hits >= 95);
}

TEST_CASE("top_m is sorted, deduplicated and deterministic") {
  HardwareConfig hw;
  std::mt19937_64 rng(6);
  auto t = random_table(rng, 5, 3);
  SaParams p;
  p.m = 8;
  p.iterations = 100;
  auto a = top_m(t, hw, p);
  auto b = top_m(t, hw, p, false, false);
  CHECK(a == b);
  for (std::size_t i = 1; i < a.size(); ++i) {
    CHECK(a[i - 1].edp <= a[i].edp);
    CHECK_FALSE(a[i - 1].choices == a[i].choices);
  }
  p.m = 1;
  CHECK(top_m(t, hw, p).size() == 1);
  for (const auto& mm : a) CHECK(mm.model_bw > 0);
}
