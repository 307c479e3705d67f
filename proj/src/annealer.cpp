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

#include "secmap/annealer.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "secmap/parallel.hpp"

namespace secmap {

namespace {

__extension__ using Wide = __int128;

// 128-bit intermediates: swept bandwidths can carry large denominators.
int64_t floor_mul(const Rational& bw, int64_t cycles) {
  return static_cast<int64_t>(static_cast<Wide>(cycles) * bw.numerator() / bw.denominator());
}

int64_t ceil_div_rational(int64_t bursts, const Rational& bw) {
  const Wide num = static_cast<Wide>(bursts) * bw.denominator();
  return static_cast<int64_t>((num + bw.numerator() - 1) / bw.numerator());
}

std::vector<int> ks_of(const OptionTable& table) {
  std::vector<int> ks;
  for (const auto& l : table) ks.push_back(static_cast<int>(l.size()));
  return ks;
}

}  // namespace

Rational sweep_point(const Rational& hi, const Rational& lo, int j) {
  if (j <= 0) return hi;
  if (j >= 16) return lo;
  // Interior points are snapped to a 2^-32 grid so that sums of layer plans
  // with unrelated denominators cannot overflow.
  constexpr int64_t kGrid = int64_t{1} << 32;
  long double x = (static_cast<long double>(hi.numerator()) / hi.denominator()) * (16 - j) / 16.0L +
                  (static_cast<long double>(lo.numerator()) / lo.denominator()) * j / 16.0L;
  return Rational(std::max<int64_t>(1, std::llround(x * kGrid)), kGrid);
}

LayerEval evaluate_layer(const LayerOption& opt, const HardwareConfig& hw, const Rational& bw,
                         bool multi_tenant) {
  if (bw <= 0) throw ValidationError("model bandwidth must be > 0");
  const CostReport& c = opt.cost;
  const int64_t reads = c.n_demand + c.n_redundant + c.n_integrity;
  const int64_t writes = c.write_bursts;
  LayerEval ev;
  ev.latency = std::max({c.latency, ceil_div_rational(reads, bw), ceil_div_rational(writes, bw)});
  ev.fake_read = std::max<int64_t>(0, floor_mul(bw, ev.latency) - reads);
  ev.fake_write = std::max<int64_t>(0, floor_mul(bw, ev.latency) - writes);
  if (multi_tenant) ev.latency += zeroize_cost(c.peak_util_bits, hw);
  Activity act = c.activity;
  act.dram_read_bursts = reads;
  act.fake_bursts = ev.fake_read + ev.fake_write;
  ev.energy = energy_of(act, hw.energy);
  return ev;
}

double energy_delay_cost(const std::vector<int>& choices, const OptionTable& table,
                         const HardwareConfig& hw, const Rational& bw, bool multi_tenant) {
  double edp = 0.0;
  for (std::size_t l = 0; l < table.size(); ++l) {
    auto ev = evaluate_layer(table[l][static_cast<std::size_t>(choices[l])], hw, bw, multi_tenant);
    edp += ev.energy * static_cast<double>(ev.latency);
  }
  return edp;
}

Equalized equalize_bandwidth(const std::vector<int>& choices, const OptionTable& table,
                             const HardwareConfig& hw, bool multi_tenant) {
  Rational hi = table[0][static_cast<std::size_t>(choices[0])].plan.bw;
  Rational lo = hi;
  for (std::size_t l = 1; l < table.size(); ++l) {
    const Rational& b = table[l][static_cast<std::size_t>(choices[l])].plan.bw;
    hi = std::max(hi, b);
    lo = std::min(lo, b);
  }
  Equalized eq;
  for (int j = 0; j <= 16; ++j) {
    Rational bw = sweep_point(hi, lo, j);
    double edp = energy_delay_cost(choices, table, hw, bw, multi_tenant);
    eq.sweep.push_back({bw, edp});
    if (j == 0 || edp < eq.edp) {
      eq.edp = edp;
      eq.bw = bw;
    }
  }
  return eq;
}

std::vector<int> get_neighbor(const std::vector<int>& choices, const std::vector<int>& ks,
                              std::mt19937_64& rng) {
  std::vector<std::size_t> movable;
  for (std::size_t l = 0; l < ks.size(); ++l)
    if (ks[l] >= 2) movable.push_back(l);
  if (movable.empty()) return choices;
  std::vector<int> out = choices;
  std::size_t l = movable[std::uniform_int_distribution<std::size_t>(0, movable.size() - 1)(rng)];
  int alt = std::uniform_int_distribution<int>(0, ks[l] - 2)(rng);
  out[l] = alt >= choices[l] ? alt + 1 : alt;
  return out;
}

bool metropolis_accept(double cost, double new_cost, double temperature, double u) {
  if (new_cost < cost) return true;
  if (temperature <= 0) return false;
  return std::exp((cost - new_cost) / temperature) > u;
}

double temperature_at(double t_init, double t_final, int n, int iterations) {
  if (iterations <= 0) return t_init;
  return t_init * std::pow(t_final / t_init, static_cast<double>(n) / iterations);
}

ModelMapping anneal(const OptionTable& table, const HardwareConfig& hw, const SaParams& params,
                    bool multi_tenant, AnnealTrace* trace) {
  if (table.empty()) throw ValidationError("annealing needs at least one layer");
  for (const auto& l : table)
    if (l.empty()) throw ValidationError("every layer needs at least one candidate mapping");
  const auto ks = ks_of(table);
  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::map<std::vector<int>, Equalized> memo;
  auto cost_of = [&](const std::vector<int>& c) -> const Equalized& {
    auto it = memo.find(c);
    if (it == memo.end()) it = memo.emplace(c, equalize_bandwidth(c, table, hw, multi_tenant)).first;
    return it->second;
  };

  std::vector<int> cur(table.size());
  for (std::size_t l = 0; l < table.size(); ++l)
    cur[l] = std::uniform_int_distribution<int>(0, ks[l] - 1)(rng);
  double cost = cost_of(cur).edp;
  if (trace) {
    trace->initial = cur;
    trace->initial_edp = cost;
  }
  double t_init = params.t_init > 0 ? params.t_init : 0.1 * std::abs(cost);
  if (t_init <= 0) t_init = 1e-12;
  double t_final = params.t_final > 0 ? params.t_final : 1e-4 * t_init;
  if (t_final > t_init) throw ValidationError("t_final must not exceed t_init");

  std::vector<int> best = cur;
  double best_cost = cost;
  for (int n = 0; n < params.iterations; ++n) {
    double t = temperature_at(t_init, t_final, n, params.iterations);
    auto cand = get_neighbor(cur, ks, rng);
    double new_cost = cost_of(cand).edp;
    double u = unit(rng);
    bool worse = new_cost >= cost;
    if (trace && worse) ++trace->proposed_worse;
    if (metropolis_accept(cost, new_cost, t, u)) {
      if (trace && worse) ++trace->accepted_worse;
      cur = std::move(cand);
      cost = new_cost;
      if (cost < best_cost || (cost == best_cost && cur < best)) {
        best = cur;
        best_cost = cost;
      }
    }
  }
  const Equalized& eq = cost_of(best);
  return ModelMapping{best, eq.bw, eq.edp};
}

std::vector<ModelMapping> top_m(const OptionTable& table, const HardwareConfig& hw,
                                const SaParams& params, bool multi_tenant, bool parallel) {
  if (params.m < 1) throw ValidationError("m must be >= 1");
  std::vector<ModelMapping> runs(static_cast<std::size_t>(params.m));
#pragma omp parallel for schedule(dynamic, 1) num_threads(worker_count()) if (parallel)
  for (int j = 0; j < params.m; ++j) {
    SaParams p = params;
    p.seed = params.seed + static_cast<uint64_t>(j);
    runs[static_cast<std::size_t>(j)] = anneal(table, hw, p, multi_tenant);
  }
  std::sort(runs.begin(), runs.end(), [](const ModelMapping& a, const ModelMapping& b) {
    if (a.edp != b.edp) return a.edp < b.edp;
    return a.choices < b.choices;
  });
  std::vector<ModelMapping> out;
  for (auto& r : runs)
    if (out.empty() || out.back().choices != r.choices) out.push_back(std::move(r));
  return out;
}

}  // namespace secmap
