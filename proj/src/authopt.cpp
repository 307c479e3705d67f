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

#include "secmap/authopt.hpp"

#include <unordered_map>

#include "secmap/parallel.hpp"

namespace secmap {

namespace {

// Fenwick tree over trace positions holding per-entry byte weights.
class Fenwick {
 public:
  explicit Fenwick(std::size_t n) : t_(n + 1, 0) {}
  void add(std::size_t i, int64_t v) {
    for (++i; i < t_.size(); i += i & (~i + 1)) t_[i] += v;
  }
  int64_t prefix(std::size_t i) const {  // sum of [0, i)
    int64_t s = 0;
    for (; i > 0; i -= i & (~i + 1)) s += t_[i];
    return s;
  }

 private:
  std::vector<int64_t> t_;
};

struct KeyHash {
  std::size_t operator()(const std::pair<int64_t, int>& k) const {
    return std::hash<int64_t>()(k.first * 4 + k.second);
  }
};

}  // namespace

ReuseResult data_reuse(const std::vector<MemTraceEntry>& trace,
                       const PerRole<int64_t>& spad_bytes) {
  const std::size_t n = trace.size();
  std::vector<int64_t> next(n, -1);
  {
    std::unordered_map<std::pair<int64_t, int>, int64_t, KeyHash> last;
    for (std::size_t i = n; i-- > 0;) {
      auto key = std::make_pair(trace[i].addr, static_cast<int>(role_index(trace[i].role)));
      auto it = last.find(key);
      if (it != last.end()) {
        next[i] = it->second;
        it->second = static_cast<int64_t>(i);
      } else {
        last.emplace(key, static_cast<int64_t>(i));
      }
    }
  }

  std::array<Fenwick, 3> live = {Fenwick(n), Fenwick(n), Fenwick(n)};
  for (std::size_t i = 0; i < n; ++i) live[role_index(trace[i].role)].add(i, kLineBytes);

  std::vector<Label> label(n);
  std::vector<bool> alive(n, true);
  for (std::size_t i = 0; i < n; ++i) label[i] = trace[i].label;

  ReuseResult res;
  for (std::size_t i = 0; i < n; ++i) {
    if (!alive[i] || label[i] != Label::kRedundant || next[i] < 0) continue;
    auto j = static_cast<std::size_t>(next[i]);
    if (label[j] != Label::kDemand) continue;
    const auto r = role_index(trace[i].role);
    int64_t dist = live[r].prefix(j) - live[r].prefix(i + 1);
    if (dist < spad_bytes[trace[i].role]) {
      label[i] = Label::kDemand;
      alive[j] = false;
      live[r].add(j, -kLineBytes);
      ++res.promotions;
    }
  }

  res.trace.reserve(n - static_cast<std::size_t>(res.promotions));
  for (std::size_t i = 0; i < n; ++i) {
    MemTraceEntry e = trace[i];
    e.label = label[i];
    if (alive[i]) {
      res.trace.push_back(e);
    } else {
      res.removed.push_back(e);
    }
  }
  res.counts = counts(res.trace);
  return res;
}

TraceOptions trace_options(const HardwareConfig& hw) {
  TraceOptions o;
  o.ro_weights = true;
  o.replay_counters = hw.replay_counters;
  return o;
}

TraceCounts traffic_at(const LayerSpec& layer, const Mapping& mapping, const HardwareConfig& hw,
                       const AddressMap& amap, int layer_index, int64_t h) {
  auto trace = generate_trace(layer, mapping, h, amap, layer_index, trace_options(hw));
  return data_reuse(trace, hw.spad_bytes).counts;
}

AuthChoice optimal_authblock(const LayerSpec& layer, const Mapping& mapping,
                             const HardwareConfig& hw, const AddressMap& amap, int layer_index,
                             bool parallel) {
  constexpr auto kN = static_cast<int>(kAuthBlockSizes.size());
  std::vector<TraceCounts> per(kAuthBlockSizes.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(worker_count()) if (parallel)
  for (int i = 0; i < kN; ++i) {
    auto ui = static_cast<std::size_t>(i);
    per[ui] = traffic_at(layer, mapping, hw, amap, layer_index, kAuthBlockSizes[ui]);
  }
  AuthChoice c;
  c.per_h_counts = per;
  for (std::size_t i = 0; i < per.size(); ++i) {
    int64_t traffic = per[i].total();
    c.per_h.emplace_back(kAuthBlockSizes[i], traffic);
    // Strict comparison keeps the smaller h on ties.
    if (i == 0 || traffic < c.mem_traffic) {
      c.mem_traffic = traffic;
      c.h_opt = kAuthBlockSizes[i];
      c.counts = per[i];
    }
  }
  return c;
}

}  // namespace secmap
