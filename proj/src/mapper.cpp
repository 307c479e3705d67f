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

#include "secmap/mapper.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <random>

#include "secmap/parallel.hpp"

namespace secmap {

namespace {

constexpr std::array<Dim, 6> kIfmapDims = {Dim::N, Dim::C, Dim::X, Dim::Y, Dim::R, Dim::S};
constexpr std::array<Dim, 4> kWeightDims = {Dim::K, Dim::C, Dim::R, Dim::S};
constexpr std::array<Dim, 4> kOfmapDims = {Dim::N, Dim::K, Dim::X, Dim::Y};

bool better(const Candidate& a, const Candidate& b) {
  if (a.cost.latency != b.cost.latency) return a.cost.latency < b.cost.latency;
  return a.mapping < b.mapping;
}

class GaRun {
 public:
  GaRun(const LayerSpec& layer, const HardwareConfig& hw, const GaParams& p)
      : layer_(layer), hw_(hw), p_(p), rng_(p.seed) {
    for (Dim d : kAllDims) values_[dim_index(d)] = tile_values(layer.extent(d));
  }

  ExploreResult run() {
    ExploreResult res;
    std::vector<Candidate> pop;
    pop.reserve(static_cast<std::size_t>(p_.population));

    Mapping full;
    for (Dim d : kAllDims) full.tile_of(d) = layer_.extent(d);
    pop.push_back(evaluate(repair(layer_, full, hw_)));
    if (p_.population > 1) pop.push_back(evaluate(repair(layer_, unit_mapping(), hw_)));
    while (static_cast<int>(pop.size()) < p_.population) pop.push_back(evaluate(random_mapping()));
    std::sort(pop.begin(), pop.end(), better);

    res.first_generation_best = pop.front();
    res.best_history.push_back(pop.front().cost.latency);
    int gen = 1;
    const auto stagnant = static_cast<std::size_t>(std::max(1, p_.stagnant_generations));
    while (gen < p_.max_generations) {
      pop = next_generation(pop);
      ++gen;
      int64_t best = pop.front().cost.latency;
      res.best_history.push_back(best);
      if (res.best_history.size() > stagnant) {
        int64_t old = res.best_history[res.best_history.size() - 1 - stagnant];
        if (static_cast<double>(old - best) < p_.convergence_pct * static_cast<double>(old)) break;
      }
    }
    res.generations = gen;

    for (auto& c : pop) {
      if (res.candidates.empty() || !(res.candidates.back().mapping == c.mapping))
        res.candidates.push_back(c);
    }
    return res;
  }

 private:
  int64_t pick(std::size_t n) {
    return std::uniform_int_distribution<int64_t>(0, static_cast<int64_t>(n) - 1)(rng_);
  }
  bool chance(double prob) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < prob; }

  Mapping random_mapping() {
    Mapping m;
    for (Dim d : kAllDims) {
      const auto& v = values_[dim_index(d)];
      m.tile_of(d) = v[static_cast<std::size_t>(pick(v.size()))];
    }
    for (std::size_t i = kNumDims - 1; i > 0; --i)
      std::swap(m.loop_order[i], m.loop_order[static_cast<std::size_t>(pick(i + 1))]);
    return repair(layer_, m, hw_);
  }

  Candidate evaluate(const Mapping& m) {
    auto it = cache_.find(m);
    if (it == cache_.end())
      it = cache_.emplace(m, estimate_layer(layer_, m, hw_, hw_.crypto_bw)).first;
    return Candidate{m, it->second};
  }

  const Candidate& tournament(const std::vector<Candidate>& pop) {
    // Population is sorted, so the smaller index wins.
    auto a = static_cast<std::size_t>(pick(pop.size()));
    auto b = static_cast<std::size_t>(pick(pop.size()));
    return pop[std::min(a, b)];
  }

  std::vector<Candidate> next_generation(const std::vector<Candidate>& pop) {
    std::vector<Candidate> next;
    next.reserve(pop.size());
    auto elites = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, p_.elites)), pop.size());
    next.insert(next.end(), pop.begin(), pop.begin() + static_cast<std::ptrdiff_t>(elites));
    while (next.size() < pop.size()) {
      Mapping child = tournament(pop).mapping;
      if (chance(p_.crossover_rate)) {
        const Mapping& other = tournament(pop).mapping;
        auto point = static_cast<std::size_t>(1 + pick(kNumDims - 1));
        for (std::size_t i = point; i < kNumDims; ++i) child.tile[i] = other.tile[i];
      }
      if (chance(p_.mutation_rate)) {
        if (chance(0.5)) {
          auto d = static_cast<std::size_t>(pick(kNumDims));
          child.tile[d] = values_[d][static_cast<std::size_t>(pick(values_[d].size()))];
        } else {
          auto i = static_cast<std::size_t>(pick(kNumDims));
          auto j = static_cast<std::size_t>(pick(kNumDims));
          std::swap(child.loop_order[i], child.loop_order[j]);
        }
      }
      next.push_back(evaluate(repair(layer_, child, hw_)));
    }
    std::sort(next.begin(), next.end(), better);
    return next;
  }

  const LayerSpec& layer_;
  const HardwareConfig& hw_;
  GaParams p_;
  std::mt19937_64 rng_;
  std::array<std::vector<int64_t>, kNumDims> values_;
  std::map<Mapping, CostReport> cache_;
};

}  // namespace

void validate_ga_params(const GaParams& p) {
  if (p.population < 2) throw ValidationError("GA population must be >= 2");
  if (p.max_generations < 1) throw ValidationError("GA max_generations must be >= 1");
  if (p.mutation_rate < 0 || p.mutation_rate > 1 || p.crossover_rate < 0 || p.crossover_rate > 1)
    throw ValidationError("GA rates must lie in [0,1]");
  if (p.convergence_pct < 0) throw ValidationError("GA convergence_pct must be >= 0");
}

std::vector<int64_t> tile_values(int64_t extent) {
  std::vector<int64_t> v;
  for (int64_t d = 1; d <= extent; ++d)
    if (extent % d == 0) v.push_back(d);
  return v;
}

Mapping canonical(const Mapping& m) {
  Mapping c = m;
  c.loop_order = effective_order(m);
  return c;
}

Mapping repair(const LayerSpec& layer, Mapping m, const HardwareConfig& hw) {
  for (Dim d : kAllDims)
    m.tile_of(d) = std::clamp<int64_t>(m.tile_of(d), 1, layer.extent(d));
  for (;;) {
    auto bytes = tile_bytes(layer, m);
    double worst = 1.0;
    int worst_role = -1;
    for (TensorRole r : kAllRoles) {
      double ratio = static_cast<double>(bytes[r]) / static_cast<double>(hw.spad_bytes[r] / 2);
      if (ratio > worst) {
        worst = ratio;
        worst_role = static_cast<int>(role_index(r));
      }
    }
    if (worst_role < 0) break;
    const Dim* dims = nullptr;
    std::size_t ndims = 0;
    switch (static_cast<TensorRole>(worst_role)) {
      case TensorRole::kIfmap:
        dims = kIfmapDims.data();
        ndims = kIfmapDims.size();
        break;
      case TensorRole::kWeight:
        dims = kWeightDims.data();
        ndims = kWeightDims.size();
        break;
      case TensorRole::kOfmap:
        dims = kOfmapDims.data();
        ndims = kOfmapDims.size();
        break;
    }
    Dim target = Dim::K;
    int64_t largest = 1;
    for (std::size_t i = 0; i < ndims; ++i) {
      if (m.tile_of(dims[i]) > largest) {
        largest = m.tile_of(dims[i]);
        target = dims[i];
      }
    }
    if (largest == 1)
      throw InfeasibleLayer("layer '" + layer.name + "': " +
                            std::string(role_name(static_cast<TensorRole>(worst_role))) +
                            " scratchpad too small even for unit tiles");
    auto values = tile_values(layer.extent(target));
    auto it = std::lower_bound(values.begin(), values.end(), m.tile_of(target));
    m.tile_of(target) = it == values.begin() ? 1 : *std::prev(it);
  }
  return canonical(m);
}

ExploreResult explore_layer(const LayerSpec& layer, const HardwareConfig& hw,
                            const GaParams& params) {
  validate_ga_params(params);
  validate_layer(layer);
  return GaRun(layer, hw, params).run();
}

std::vector<ExploreResult> explore_model(const ModelSpec& model, const HardwareConfig& hw,
                                         const GaParams& params, bool parallel) {
  const auto n = static_cast<int64_t>(model.size());
  std::vector<ExploreResult> out(model.size());
  std::vector<std::exception_ptr> errors(model.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(worker_count()) if (parallel)
  for (int64_t i = 0; i < n; ++i) {
    auto ui = static_cast<std::size_t>(i);
    GaParams p = params;
    p.seed = params.seed + static_cast<uint64_t>(i);
    try {
      out[ui] = explore_layer(model.layers[ui], hw, p);
    } catch (...) {
      errors[ui] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

TopK select_k(const std::vector<Candidate>& candidates, double share, int layer_index) {
  TopK t;
  t.layer_index = layer_index;
  if (candidates.empty()) return t;
  const int64_t best = candidates.front().cost.latency;
  for (const auto& c : candidates) {
    // latency <= 1.10 * best, in integers
    if (c.cost.latency * 10 <= best * 11) t.mappings.push_back(c);
  }
  int k = static_cast<int>(std::lround(2.0 + 14.0 * share));
  k = std::clamp(k, 2, 16);
  k = std::min<int>(k, static_cast<int>(t.mappings.size()));
  t.mappings.resize(static_cast<std::size_t>(k));
  t.k = k;
  return t;
}

std::vector<TopK> select_all(const std::vector<ExploreResult>& results) {
  double total = 0;
  for (const auto& r : results) total += static_cast<double>(r.candidates.front().cost.latency);
  std::vector<TopK> out;
  for (std::size_t i = 0; i < results.size(); ++i) {
    double share =
        total > 0 ? static_cast<double>(results[i].candidates.front().cost.latency) / total : 0.0;
    out.push_back(select_k(results[i].candidates, share, static_cast<int>(i)));
  }
  return out;
}

}  // namespace secmap
