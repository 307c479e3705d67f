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

#include "secmap/shapersizing.hpp"

using namespace secmap;

namespace {

CostReport report(BoundClass b, int64_t nd, int64_t nr, int64_t ni, int64_t runtime) {
  CostReport r;
  r.bound = b;
  r.n_demand = nd;
  r.n_redundant = nr;
  r.n_integrity = ni;
  r.latency = runtime;
  return r;
}

}  // namespace

TEST_CASE("memory-bound layer without metadata runs at crypto bandwidth") {
  HardwareConfig hw;
  auto p = size_bandwidth(report(BoundClass::kMB, 500, 0, 0, 1000), hw);
  CHECK(p.bw == hw.crypto_bursts_per_cycle());
}

TEST_CASE("compute-bound hand example") {
  HardwareConfig hw;
  auto p = size_bandwidth(report(BoundClass::kCB, 1000, 24, 40, 500), hw);
  CHECK(p.bw == Rational(2128, 1000));
  CHECK(p.interval == 1);
}

TEST_CASE("memory-bound hand example") {
  HardwareConfig hw;
  hw.crypto_bw = Rational(128);  // 2 bursts/cycle
  auto p = size_bandwidth(report(BoundClass::kMB, 0, 60, 40, 1000), hw);
  CHECK(p.bw == Rational(21, 10));
}

TEST_CASE("zero runtime is rejected") {
  HardwareConfig hw;
  CHECK_THROWS_AS(size_bandwidth(report(BoundClass::kCB, 1, 0, 0, 0), hw), ValidationError);
  CHECK_THROWS_AS(dispatch_interval(Rational(0)), ValidationError);
}

TEST_CASE("dispatch interval rounds 1/bw") {
  CHECK(dispatch_interval(Rational(1, 8)) == 8);
  CHECK(dispatch_interval(Rational(2, 5)) == 3);  // 2.5 rounds up
  CHECK(dispatch_interval(Rational(3, 10)) == 3);
  CHECK(dispatch_interval(Rational(3)) == 1);
}

TEST_CASE("bandwidth is non-increasing in runtime") {
  HardwareConfig hw;
  std::mt19937_64 rng(2);
  for (int it = 0; it < 100; ++it) {
    int64_t nd = static_cast<int64_t>(rng() % 1000), nr = static_cast<int64_t>(rng() % 100),
            ni = 1 + static_cast<int64_t>(rng() % 100);
    int64_t r = 1 + static_cast<int64_t>(rng() % 5000);
    for (auto b : {BoundClass::kCB, BoundClass::kMB}) {
      auto a = size_bandwidth(report(b, nd, nr, ni, r), hw);
      auto c = size_bandwidth(report(b, nd, nr, ni, r + 1 + static_cast<int64_t>(rng() % 100)), hw);
      CHECK(c.bw <= a.bw);
      if (b == BoundClass::kMB) CHECK(a.bw >= hw.crypto_bursts_per_cycle());
    }
  }
}

TEST_CASE("bytes per second conversion") {
  HardwareConfig hw;
  CHECK(bandwidth_bytes_per_second(Rational(1, 2), hw) == doctest::Approx(0.5 * 64 * 100e6));
}
