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

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the tile walker, trace generator or reuse pass.

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "secmap/authopt.hpp"
#include "secmap/costmodel.hpp"
#include "secmap/tracegen.hpp"
#include "secmap/workload.hpp"

namespace oracle {

using secmap::Dim;
using secmap::LayerSpec;
using secmap::Mapping;
using secmap::TensorRole;

struct Entry {
  int64_t addr;
  int role;
  int label;  // 0 demand, 1 redundant, 2 integrity
};

inline int64_t cdiv(int64_t a, int64_t b) { return (a + b - 1) / b; }

struct Box {
  int64_t lo[7];
  int64_t hi[7];
};

// Tile boxes in execution order: non-reduction dims outermost in loop_order
// sequence, then C,R,S in their loop_order sequence.
inline std::vector<Box> boxes(const LayerSpec& l, const Mapping& m) {
  std::vector<int> order;
  for (Dim d : m.loop_order)
    if (!(d == Dim::C || d == Dim::R || d == Dim::S)) order.push_back(static_cast<int>(d));
  for (Dim d : m.loop_order)
    if (d == Dim::C || d == Dim::R || d == Dim::S) order.push_back(static_cast<int>(d));
  int64_t ext[7] = {l.K, l.C, l.R, l.S, l.N, l.out_x(), l.out_y()};
  int64_t cnt[7];
  int64_t total = 1;
  for (int d = 0; d < 7; ++d) {
    cnt[d] = cdiv(ext[d], m.tile[static_cast<std::size_t>(d)]);
    total *= cnt[d];
  }
  std::vector<Box> out;
  for (int64_t t = 0; t < total; ++t) {
    int64_t rem = t;
    Box b{};
    for (int p = 6; p >= 0; --p) {
      int d = order[static_cast<std::size_t>(p)];
      int64_t i = rem % cnt[d];
      rem /= cnt[d];
      int64_t ts = m.tile[static_cast<std::size_t>(d)];
      b.lo[d] = i * ts;
      b.hi[d] = std::min(ext[d], b.lo[d] + ts);
    }
    out.push_back(b);
  }
  return out;
}

// Byte addresses of every element a tile reads, by brute force over the box.
inline std::set<int64_t> ifmap_bytes(const LayerSpec& l, const Box& b, int64_t base) {
  std::set<int64_t> s;
  for (int64_t n = b.lo[4]; n < b.hi[4]; ++n)
    for (int64_t c = b.lo[1]; c < b.hi[1]; ++c)
      for (int64_t x = b.lo[5]; x < b.hi[5]; ++x)
        for (int64_t y = b.lo[6]; y < b.hi[6]; ++y)
          for (int64_t r = b.lo[2]; r < b.hi[2]; ++r)
            for (int64_t q = b.lo[3]; q < b.hi[3]; ++q) {
              int64_t row = x * l.stride + r;
              int64_t col = y * l.stride + q;
              s.insert(base + (((n * l.C + c) * l.X + row) * l.Y + col) * l.element_size);
            }
  return s;
}

inline std::set<int64_t> weight_bytes(const LayerSpec& l, const Box& b, int64_t base) {
  std::set<int64_t> s;
  for (int64_t k = b.lo[0]; k < b.hi[0]; ++k)
    for (int64_t c = b.lo[1]; c < b.hi[1]; ++c)
      for (int64_t r = b.lo[2]; r < b.hi[2]; ++r)
        for (int64_t q = b.lo[3]; q < b.hi[3]; ++q)
          s.insert(base + (((k * l.C + c) * l.R + r) * l.S + q) * l.element_size);
  return s;
}

inline std::set<int64_t> ofmap_bytes(const LayerSpec& l, const Box& b, int64_t base) {
  std::set<int64_t> s;
  const int64_t ox = (l.X - l.R) / l.stride + 1;
  const int64_t oy = (l.Y - l.S) / l.stride + 1;
  for (int64_t n = b.lo[4]; n < b.hi[4]; ++n)
    for (int64_t k = b.lo[0]; k < b.hi[0]; ++k)
      for (int64_t x = b.lo[5]; x < b.hi[5]; ++x)
        for (int64_t y = b.lo[6]; y < b.hi[6]; ++y)
          s.insert(base + (((n * l.K + k) * ox + x) * oy + y) * l.element_size);
  return s;
}

inline std::set<int64_t> lines_of(const std::set<int64_t>& bytes, int64_t esz) {
  std::set<int64_t> lines;
  for (int64_t a : bytes)
    for (int64_t x = a; x < a + esz; ++x) lines.insert(x / 64 * 64);
  return lines;
}

inline bool same_range(const Box& a, const Box& b, std::initializer_list<int> dims) {
  for (int d : dims)
    if (a.lo[d] != b.lo[d]) return false;
  return true;
}

// Labelled read trace following the block-fetch convention: the block's first
// demand line, its missing lines, its MAC line, then its other demand lines.
inline std::vector<Entry> trace(const LayerSpec& l, const Mapping& m, int64_t h,
                                const secmap::AddressMap& amap, int li) {
  std::vector<Entry> out;
  auto emit = [&](const std::set<int64_t>& lines, int role) {
    std::map<int64_t, std::vector<int64_t>> blocks;
    for (int64_t a : lines) blocks[a / h * h].push_back(a);
    for (auto& [blk, dem] : blocks) {
      out.push_back({dem.front(), role, 0});
      std::set<int64_t> have(dem.begin(), dem.end());
      for (int64_t a = blk; a < blk + h; a += 64)
        if (!have.count(a)) out.push_back({a, role, 1});
      out.push_back({amap.metadata_base + blk / h * 64, role, 2});
      for (std::size_t i = 1; i < dem.size(); ++i) out.push_back({dem[i], role, 0});
    }
  };
  auto bs = boxes(l, m);
  const int64_t ib = amap.base(li, TensorRole::kIfmap);
  const int64_t wb = amap.base(li, TensorRole::kWeight);
  for (std::size_t t = 0; t < bs.size(); ++t) {
    bool ifm = t == 0 || !same_range(bs[t], bs[t - 1], {4, 1, 5, 6, 2, 3});
    bool wgt = t == 0 || !same_range(bs[t], bs[t - 1], {0, 1, 2, 3});
    if (ifm) emit(lines_of(ifmap_bytes(l, bs[t], ib), l.element_size), 0);
    if (wgt) emit(lines_of(weight_bytes(l, bs[t], wb), l.element_size), 1);
  }
  return out;
}

// Quadratic reuse pass: each live REDUNDANT entry looks for the next entry
// with the same address and role; if it is a DEMAND and the live same-role
// volume in between is below capacity, the redundant entry becomes the demand
// and the later one disappears.
inline secmap::TraceCounts reuse_counts(std::vector<Entry> t, const int64_t spad[3]) {
  std::vector<bool> alive(t.size(), true);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!alive[i] || t[i].label != 1) continue;
    std::size_t j = i + 1;
    while (j < t.size() && !(t[j].addr == t[i].addr && t[j].role == t[i].role)) ++j;
    if (j == t.size() || t[j].label != 0) continue;
    int64_t dist = 0;
    for (std::size_t k = i + 1; k < j; ++k)
      if (alive[k] && t[k].role == t[i].role) dist += 64;
    if (dist < spad[t[i].role]) {
      t[i].label = 0;
      alive[j] = false;
    }
  }
  secmap::TraceCounts c;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!alive[i]) continue;
    if (t[i].label == 0) ++c.n_demand;
    if (t[i].label == 1) ++c.n_redundant;
    if (t[i].label == 2) ++c.n_integrity;
  }
  return c;
}

// Pipelined latency from per-tile load, compute and store cycles.
inline int64_t pipeline_latency(const std::vector<int64_t>& L, const std::vector<int64_t>& C,
                                const std::vector<int64_t>& S) {
  const std::size_t T = L.size();
  int64_t lat = L[0];
  for (std::size_t i = 0; i < T; ++i) {
    int64_t next_load = i + 1 < T ? L[i + 1] : 0;
    int64_t prev_store = i >= 1 ? S[i - 1] : 0;
    lat += std::max(C[i], next_load + prev_store);
  }
  return lat + S[T - 1];
}

// A random toy layer with every dimension at most 8.
inline LayerSpec random_toy_layer(std::mt19937_64& rng, int idx) {
  auto pick = [&](int64_t lo, int64_t hi) {
    return std::uniform_int_distribution<int64_t>(lo, hi)(rng);
  };
  LayerSpec l;
  l.name = "toy" + std::to_string(idx);
  l.K = pick(1, 8);
  l.C = pick(1, 8);
  l.X = pick(1, 8);
  l.Y = pick(1, 8);
  l.R = pick(1, std::min<int64_t>(3, l.X));
  l.S = pick(1, std::min<int64_t>(3, l.Y));
  l.N = pick(1, 2);
  l.stride = pick(1, 2);
  return l;
}

inline Mapping random_toy_mapping(std::mt19937_64& rng, const LayerSpec& l) {
  Mapping m;
  for (Dim d : secmap::kAllDims) {
    int64_t e = l.extent(d);
    m.tile_of(d) = std::uniform_int_distribution<int64_t>(1, e)(rng);
  }
  std::shuffle(m.loop_order.begin(), m.loop_order.end(), rng);
  return m;
}

}  // namespace oracle
