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

#include "secmap/tracegen.hpp"

#include <algorithm>
#include <ostream>

namespace secmap {

namespace {

constexpr int64_t kRegionAlign = 4096;

int64_t align_up(int64_t v, int64_t a) { return ceil_div(v, a) * a; }

// Input coordinates touched by output range [olo,ohi) and filter range [flo,fhi).
std::vector<int64_t> touched(int64_t olo, int64_t ohi, int64_t flo, int64_t fhi, int64_t stride) {
  std::vector<int64_t> v;
  if (stride <= fhi - flo) {
    for (int64_t i = olo * stride + flo; i <= (ohi - 1) * stride + fhi - 1; ++i) v.push_back(i);
    return v;
  }
  for (int64_t o = olo; o < ohi; ++o)
    for (int64_t f = flo; f < fhi; ++f) v.push_back(o * stride + f);
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

bool is_valid_authblock(int64_t h) {
  return std::find(kAuthBlockSizes.begin(), kAuthBlockSizes.end(), h) != kAuthBlockSizes.end();
}

const char* label_name(Label l) {
  switch (l) {
    case Label::kDemand:
      return "demand";
    case Label::kRedundant:
      return "redundant";
    case Label::kIntegrity:
      return "integrity";
  }
  return "?";
}

const Region* AddressMap::find(int64_t addr) const {
  auto it = std::upper_bound(regions.begin(), regions.end(), addr,
                             [](int64_t a, const Region& r) { return a < r.base; });
  if (it == regions.begin()) return nullptr;
  --it;
  return addr < it->base + it->bytes ? &*it : nullptr;
}

AddressMap build_address_map(const ModelSpec& model) {
  AddressMap amap;
  amap.layer_base.resize(model.size());
  int64_t cursor = kRegionAlign;  // keep address 0 unused
  auto place = [&](int64_t bytes, TensorRole role, int layer) {
    int64_t base = cursor;
    amap.regions.push_back(Region{base, bytes, role, layer});
    cursor = align_up(base + bytes, kRegionAlign);
    return base;
  };
  for (std::size_t i = 0; i < model.size(); ++i) {
    const auto& l = model.layers[i];
    int li = static_cast<int>(i);
    if (model.depends_on[i] == kExternalInput) {
      amap.layer_base[i][TensorRole::kIfmap] =
          place(l.ifmap_elements() * l.element_size, TensorRole::kIfmap, li);
    } else {
      amap.layer_base[i][TensorRole::kIfmap] =
          amap.layer_base[static_cast<std::size_t>(model.depends_on[i])][TensorRole::kOfmap];
    }
    amap.layer_base[i][TensorRole::kWeight] =
        place(l.weight_elements() * l.element_size, TensorRole::kWeight, li);
    amap.layer_base[i][TensorRole::kOfmap] =
        place(l.ofmap_elements() * l.element_size, TensorRole::kOfmap, li);
  }
  // One MAC line per 64B of data suffices for every h >= 64; counters follow.
  amap.metadata_base = cursor;
  amap.counter_base = align_up(cursor + cursor, kRegionAlign);
  return amap;
}

void for_each_element(const LayerSpec& l, const TileBox& b, TensorRole role, int64_t base,
                      const std::function<void(int64_t, int64_t)>& fn) {
  const int64_t esz = l.element_size;
  switch (role) {
    case TensorRole::kIfmap: {
      auto rows = touched(b.lo_of(Dim::X), b.hi_of(Dim::X), b.lo_of(Dim::R), b.hi_of(Dim::R),
                          l.stride);
      auto cols = touched(b.lo_of(Dim::Y), b.hi_of(Dim::Y), b.lo_of(Dim::S), b.hi_of(Dim::S),
                          l.stride);
      const int64_t wx = ifmap_window_rows(l, b);
      const int64_t wy = ifmap_window_cols(l, b);
      const int64_t rb = b.lo_of(Dim::X) * l.stride + b.lo_of(Dim::R);
      const int64_t cb = b.lo_of(Dim::Y) * l.stride + b.lo_of(Dim::S);
      for (int64_t n = b.lo_of(Dim::N); n < b.hi_of(Dim::N); ++n)
        for (int64_t c = b.lo_of(Dim::C); c < b.hi_of(Dim::C); ++c) {
          int64_t plane = (n - b.lo_of(Dim::N)) * b.len(Dim::C) + (c - b.lo_of(Dim::C));
          for (int64_t row : rows) {
            int64_t rowaddr = base + ((n * l.C + c) * l.X + row) * l.Y * esz;
            int64_t rowpack = (plane * wx + (row - rb)) * wy;
            for (int64_t col : cols) fn(rowpack + (col - cb), rowaddr + col * esz);
          }
        }
      break;
    }
    case TensorRole::kWeight: {
      int64_t p = 0;
      for (int64_t k = b.lo_of(Dim::K); k < b.hi_of(Dim::K); ++k)
        for (int64_t c = b.lo_of(Dim::C); c < b.hi_of(Dim::C); ++c)
          for (int64_t r = b.lo_of(Dim::R); r < b.hi_of(Dim::R); ++r)
            for (int64_t s = b.lo_of(Dim::S); s < b.hi_of(Dim::S); ++s)
              fn(p++, base + (((k * l.C + c) * l.R + r) * l.S + s) * esz);
      break;
    }
    case TensorRole::kOfmap: {
      const int64_t ox = l.out_x();
      const int64_t oy = l.out_y();
      int64_t p = 0;
      for (int64_t n = b.lo_of(Dim::N); n < b.hi_of(Dim::N); ++n)
        for (int64_t k = b.lo_of(Dim::K); k < b.hi_of(Dim::K); ++k)
          for (int64_t x = b.lo_of(Dim::X); x < b.hi_of(Dim::X); ++x)
            for (int64_t y = b.lo_of(Dim::Y); y < b.hi_of(Dim::Y); ++y)
              fn(p++, base + (((n * l.K + k) * ox + x) * oy + y) * esz);
      break;
    }
  }
}

std::vector<int64_t> tile_lines(const LayerSpec& l, const TileBox& b, TensorRole role,
                                int64_t base) {
  std::vector<int64_t> lines;
  int64_t last = -1;
  const int64_t esz = l.element_size;
  for_each_element(l, b, role, base, [&](int64_t, int64_t addr) {
    // Elements may straddle a line boundary when element_size does not divide 64.
    for (int64_t a = addr / kLineBytes * kLineBytes; a < addr + esz; a += kLineBytes) {
      if (a != last) {
        lines.push_back(a);
        last = a;
      }
    }
  });
  std::sort(lines.begin(), lines.end());
  lines.erase(std::unique(lines.begin(), lines.end()), lines.end());
  return lines;
}

namespace {

// Counts lines over byte ranges visited in ascending address order.
class LineCounter {
 public:
  void add(int64_t begin, int64_t end) {
    int64_t first = begin / kLineBytes;
    const int64_t last = (end - 1) / kLineBytes;
    first = std::max(first, last_ + 1);
    if (last >= first) count_ += last - first + 1;
    last_ = std::max(last_, last);
  }
  int64_t count() const { return count_; }

 private:
  int64_t last_ = -1;
  int64_t count_ = 0;
};

// Maximal runs of consecutive values in a sorted list, as [first, last].
std::vector<std::pair<int64_t, int64_t>> runs_of(const std::vector<int64_t>& v) {
  std::vector<std::pair<int64_t, int64_t>> out;
  for (int64_t x : v) {
    if (!out.empty() && out.back().second + 1 == x) {
      out.back().second = x;
    } else {
      out.emplace_back(x, x);
    }
  }
  return out;
}

}  // namespace

int64_t tile_line_count(const LayerSpec& l, const TileBox& b, TensorRole role) {
  const int64_t esz = l.element_size;
  LineCounter lc;
  switch (role) {
    case TensorRole::kIfmap: {
      auto rows = touched(b.lo_of(Dim::X), b.hi_of(Dim::X), b.lo_of(Dim::R), b.hi_of(Dim::R),
                          l.stride);
      auto cols = runs_of(touched(b.lo_of(Dim::Y), b.hi_of(Dim::Y), b.lo_of(Dim::S),
                                  b.hi_of(Dim::S), l.stride));
      for (int64_t n = b.lo_of(Dim::N); n < b.hi_of(Dim::N); ++n)
        for (int64_t c = b.lo_of(Dim::C); c < b.hi_of(Dim::C); ++c)
          for (int64_t row : rows) {
            int64_t rowaddr = ((n * l.C + c) * l.X + row) * l.Y * esz;
            for (auto [c0, c1] : cols) lc.add(rowaddr + c0 * esz, rowaddr + (c1 + 1) * esz);
          }
      break;
    }
    case TensorRole::kWeight:
      for (int64_t k = b.lo_of(Dim::K); k < b.hi_of(Dim::K); ++k)
        for (int64_t c = b.lo_of(Dim::C); c < b.hi_of(Dim::C); ++c)
          for (int64_t r = b.lo_of(Dim::R); r < b.hi_of(Dim::R); ++r) {
            int64_t at = ((k * l.C + c) * l.R + r) * l.S;
            lc.add((at + b.lo_of(Dim::S)) * esz, (at + b.hi_of(Dim::S)) * esz);
          }
      break;
    case TensorRole::kOfmap: {
      const int64_t ox = l.out_x();
      const int64_t oy = l.out_y();
      for (int64_t n = b.lo_of(Dim::N); n < b.hi_of(Dim::N); ++n)
        for (int64_t k = b.lo_of(Dim::K); k < b.hi_of(Dim::K); ++k)
          for (int64_t x = b.lo_of(Dim::X); x < b.hi_of(Dim::X); ++x) {
            int64_t at = ((n * l.K + k) * ox + x) * oy;
            lc.add((at + b.lo_of(Dim::Y)) * esz, (at + b.hi_of(Dim::Y)) * esz);
          }
      break;
    }
  }
  return lc.count();
}

std::vector<BlockFetch> tile_fetches(const LayerSpec& l, const TileBox& b, TensorRole role,
                                     int64_t h, const AddressMap& amap, int layer_index,
                                     const TraceOptions& opts) {
  if (!is_valid_authblock(h))
    throw ValidationError("invalid AuthBlock size " + std::to_string(h));
  auto lines = tile_lines(l, b, role, amap.base(layer_index, role));
  const bool counter = opts.replay_counters && !(role == TensorRole::kWeight && opts.ro_weights);
  std::vector<BlockFetch> out;
  std::size_t i = 0;
  while (i < lines.size()) {
    BlockFetch f;
    f.block_addr = lines[i] / h * h;
    std::size_t j = i;
    while (j < lines.size() && lines[j] < f.block_addr + h) f.demand.push_back(lines[j++]);
    std::size_t d = 0;
    for (int64_t a = f.block_addr; a < f.block_addr + h; a += kLineBytes) {
      if (d < f.demand.size() && f.demand[d] == a) {
        ++d;
      } else {
        f.redundant.push_back(a);
      }
    }
    int64_t block_no = f.block_addr / h;
    f.integrity.push_back(amap.metadata_base + block_no * kLineBytes);
    if (counter) f.integrity.push_back(amap.counter_base + block_no * kLineBytes);
    out.push_back(std::move(f));
    i = j;
  }
  return out;
}

void append_fetches(const std::vector<BlockFetch>& fetches, TensorRole role,
                    std::vector<MemTraceEntry>& out) {
  int64_t seq = out.empty() ? 0 : out.back().seq + 1;
  auto push = [&](int64_t addr, Label label) {
    out.push_back(MemTraceEntry{addr, role, label, seq++});
  };
  for (const auto& f : fetches) {
    // Completion lines and metadata sit right after the block's first demand line.
    push(f.demand.front(), Label::kDemand);
    for (int64_t a : f.redundant) push(a, Label::kRedundant);
    for (int64_t a : f.integrity) push(a, Label::kIntegrity);
    for (std::size_t k = 1; k < f.demand.size(); ++k) push(f.demand[k], Label::kDemand);
  }
}

std::vector<MemTraceEntry> generate_trace(const LayerSpec& layer, const Mapping& mapping,
                                          int64_t h, const AddressMap& amap, int layer_index,
                                          const TraceOptions& opts) {
  if (!is_valid_authblock(h))
    throw ValidationError("invalid AuthBlock size " + std::to_string(h));
  std::vector<MemTraceEntry> trace;
  TileWalk walk(layer, mapping);
  while (walk.next()) {
    const TileStep& st = walk.step();
    if (st.ifmap_changed)
      append_fetches(tile_fetches(layer, st.box, TensorRole::kIfmap, h, amap, layer_index, opts),
                     TensorRole::kIfmap, trace);
    if (st.weight_changed)
      append_fetches(tile_fetches(layer, st.box, TensorRole::kWeight, h, amap, layer_index, opts),
                     TensorRole::kWeight, trace);
  }
  return trace;
}

TraceCounts counts(const std::vector<MemTraceEntry>& trace) {
  TraceCounts c;
  for (const auto& e : trace) {
    switch (e.label) {
      case Label::kDemand:
        ++c.n_demand;
        break;
      case Label::kRedundant:
        ++c.n_redundant;
        break;
      case Label::kIntegrity:
        ++c.n_integrity;
        break;
    }
  }
  return c;
}

void write_trace_csv(std::ostream& os, const std::vector<MemTraceEntry>& trace) {
  os << "seq,addr,role,label\n";
  for (const auto& e : trace)
    os << e.seq << ',' << e.addr << ',' << role_name(e.role) << ',' << label_name(e.label) << '\n';
}

}  // namespace secmap
