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

#include "secmap/tiling.hpp"

#include <algorithm>

namespace secmap {

std::string Mapping::order_string() const {
  std::string s;
  for (Dim d : loop_order) s.push_back(dim_symbol(d));
  return s;
}

Mapping unit_mapping() { return Mapping{}; }

Mapping parse_loop_order(Mapping m, const std::string& order) {
  if (order.size() != kNumDims) throw ParseError("loop_order must have 7 symbols: '" + order + "'");
  for (int i = 0; i < kNumDims; ++i) m.loop_order[static_cast<std::size_t>(i)] = dim_from_symbol(order[static_cast<std::size_t>(i)]);
  return m;
}

void validate_mapping(const LayerSpec& layer, const Mapping& m) {
  std::array<int, kNumDims> seen{};
  for (Dim d : m.loop_order) ++seen[dim_index(d)];
  for (int c : seen)
    if (c != 1) throw ValidationError("loop_order is not a permutation: " + m.order_string());
  for (Dim d : kAllDims) {
    int64_t t = m.tile_of(d);
    if (t < 1 || t > layer.extent(d))
      throw ValidationError(std::string("tile for ") + dim_symbol(d) + " out of range: " +
                            std::to_string(t));
  }
}

std::array<Dim, kNumDims> effective_order(const Mapping& m) {
  std::array<Dim, kNumDims> out{};
  std::size_t n = 0;
  for (Dim d : m.loop_order)
    if (!is_reduction(d)) out[n++] = d;
  for (Dim d : m.loop_order)
    if (is_reduction(d)) out[n++] = d;
  return out;
}

int64_t ifmap_window_rows(const LayerSpec& layer, const TileBox& b) {
  return (b.len(Dim::X) - 1) * layer.stride + b.len(Dim::R);
}

int64_t ifmap_window_cols(const LayerSpec& layer, const TileBox& b) {
  return (b.len(Dim::Y) - 1) * layer.stride + b.len(Dim::S);
}

int64_t packed_elements(const LayerSpec& layer, const TileBox& b, TensorRole role) {
  switch (role) {
    case TensorRole::kIfmap:
      return b.len(Dim::N) * b.len(Dim::C) * ifmap_window_rows(layer, b) *
             ifmap_window_cols(layer, b);
    case TensorRole::kWeight:
      return b.len(Dim::K) * b.len(Dim::C) * b.len(Dim::R) * b.len(Dim::S);
    case TensorRole::kOfmap:
      return b.len(Dim::N) * b.len(Dim::K) * b.len(Dim::X) * b.len(Dim::Y);
  }
  return 0;
}

TileWalk::TileWalk(const LayerSpec& layer, const Mapping& m) : layer_(layer) {
  validate_mapping(layer, m);
  order_ = effective_order(m);
  total_ = 1;
  for (Dim d : kAllDims) {
    tile_[dim_index(d)] = m.tile_of(d);
    counts_[dim_index(d)] = ceil_div(layer.extent(d), m.tile_of(d));
    total_ *= counts_[dim_index(d)];
  }
}

void TileWalk::fill_box() {
  for (std::size_t p = 0; p < kNumDims; ++p) {
    std::size_t d = dim_index(order_[p]);
    step_.box.lo[d] = idx_[p] * tile_[d];
    step_.box.hi[d] = std::min(layer_.extent(order_[p]), step_.box.lo[d] + tile_[d]);
  }
  bool first = true;
  bool last = true;
  for (std::size_t p = 0; p < kNumDims; ++p) {
    if (!is_reduction(order_[p])) continue;
    if (idx_[p] != 0) first = false;
    if (idx_[p] != counts_[dim_index(order_[p])] - 1) last = false;
  }
  step_.first_reduction = first;
  step_.last_reduction = last;
}

bool TileWalk::next() {
  if (!started_) {
    started_ = true;
    idx_.fill(0);
    step_ = TileStep{};
    fill_box();
    return total_ > 0;
  }
  if (step_.index + 1 >= total_) return false;
  TileBox prev = step_.box;
  bool prev_last = step_.last_reduction;
  for (int p = kNumDims - 1; p >= 0; --p) {
    auto up = static_cast<std::size_t>(p);
    if (++idx_[up] < counts_[dim_index(order_[up])]) break;
    idx_[up] = 0;
  }
  ++step_.index;
  fill_box();
  auto moved = [&](Dim d) { return prev.lo_of(d) != step_.box.lo_of(d); };
  step_.ifmap_changed = moved(Dim::N) || moved(Dim::C) || moved(Dim::X) || moved(Dim::Y) ||
                        moved(Dim::R) || moved(Dim::S);
  step_.weight_changed = moved(Dim::K) || moved(Dim::C) || moved(Dim::R) || moved(Dim::S);
  if (prev_last) ++step_.output_tile;
  return true;
}

std::vector<TileStep> TileWalk::all() {
  std::vector<TileStep> out;
  out.reserve(static_cast<std::size_t>(total_));
  while (next()) out.push_back(step_);
  return out;
}

}  // namespace secmap
