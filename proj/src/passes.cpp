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

#include "secmap/passes.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

namespace secmap {

namespace {

// A scratchpad range occupied from `start` to `end` (program positions,
// inclusive).
struct Datum {
  int64_t id = 0;
  TensorRole role = TensorRole::kIfmap;
  int64_t slot = 0;
  int64_t bytes = 0;
  int64_t start = 0;
  int64_t end = 0;
  std::vector<std::size_t> readers;  // GEMM positions
};

struct DatumIndex {
  std::vector<Datum> datums;
  std::unordered_map<int64_t, std::size_t> by_id;
};

// Datums living in the ifmap and weight scratchpads, plus ZEROIZE ranges as
// single-position occupants.
DatumIndex collect_input_datums(const Program& p) {
  DatumIndex ix;
  for (std::size_t i = 0; i < p.instrs.size(); ++i) {
    const Instruction& in = p.instrs[i];
    const bool defines = (in.op == Op::kLoad || in.op == Op::kForward) &&
                         (in.role == TensorRole::kIfmap || in.role == TensorRole::kWeight);
    const bool zero = in.op == Op::kZeroize && in.role != TensorRole::kOfmap;
    if (!defines && !zero) continue;
    auto pos = static_cast<int64_t>(i);
    ix.by_id[in.id] = ix.datums.size();
    ix.datums.push_back(Datum{in.id, in.role, in.slot, in.bytes, pos, pos, {}});
  }
  for (std::size_t i = 0; i < p.instrs.size(); ++i) {
    const Instruction& in = p.instrs[i];
    if (in.op != Op::kGemm) continue;
    for (TensorRole r : {TensorRole::kIfmap, TensorRole::kWeight}) {
      auto it = ix.by_id.find(in.deps[r]);
      if (it == ix.by_id.end()) continue;
      Datum& d = ix.datums[it->second];
      d.end = std::max(d.end, static_cast<int64_t>(i));
      d.readers.push_back(i);
    }
  }
  return ix;
}

// Lowest offset where `bytes` fit in `role` over positions [from, to], or -1.
int64_t first_fit(const DatumIndex& ix, const PerRole<int64_t>& spad, TensorRole role,
                  int64_t bytes, int64_t from, int64_t to, std::size_t self) {
  std::vector<std::pair<int64_t, int64_t>> busy;
  for (std::size_t k = 0; k < ix.datums.size(); ++k) {
    const Datum& o = ix.datums[k];
    if (k == self || o.role != role) continue;
    if (o.start <= to && from <= o.end) busy.emplace_back(o.slot, o.slot + o.bytes);
  }
  std::sort(busy.begin(), busy.end());
  int64_t cursor = 0;
  for (const auto& [lo, hi] : busy) {
    if (lo - cursor >= bytes) return cursor;
    cursor = std::max(cursor, hi);
  }
  return spad[role] - cursor >= bytes ? cursor : -1;
}

// Position after which every element of the consumer ifmap tile has been
// stored by its producer, or 0 for external inputs.
class StoreFrontier {
 public:
  explicit StoreFrontier(const Program& p) : p_(p) {
    last_store_.resize(p.model.size());
    for (std::size_t l = 0; l < p.model.size(); ++l)
      last_store_[l].assign(static_cast<std::size_t>(p.model.layers[l].ofmap_elements()), -1);
    for (std::size_t i = 0; i < p.instrs.size(); ++i) {
      const Instruction& in = p.instrs[i];
      if (in.op != Op::kStore) continue;
      const TileRef& t = p.tiles[static_cast<std::size_t>(in.tile)];
      const LayerSpec& l = p.model.layers[static_cast<std::size_t>(t.layer)];
      const int64_t base = p.amap.base(t.layer, TensorRole::kOfmap);
      auto& ls = last_store_[static_cast<std::size_t>(t.layer)];
      for_each_element(l, t.box, TensorRole::kOfmap, base, [&](int64_t, int64_t addr) {
        ls[static_cast<std::size_t>((addr - base) / l.element_size)] = static_cast<int64_t>(i);
      });
    }
  }

  int64_t after(const Instruction& load) const {
    const TileRef& t = p_.tiles[static_cast<std::size_t>(load.tile)];
    int producer = p_.model.depends_on[static_cast<std::size_t>(t.layer)];
    if (load.role != TensorRole::kIfmap || producer == kExternalInput) return 0;
    const LayerSpec& l = p_.model.layers[static_cast<std::size_t>(t.layer)];
    const int64_t base = p_.amap.base(t.layer, TensorRole::kIfmap);
    const auto& ls = last_store_[static_cast<std::size_t>(producer)];
    int64_t last = -1;
    for_each_element(l, t.box, TensorRole::kIfmap, base, [&](int64_t, int64_t addr) {
      last = std::max(last, ls[static_cast<std::size_t>((addr - base) / l.element_size)]);
    });
    return last + 1;
  }

 private:
  const Program& p_;
  std::vector<std::vector<int64_t>> last_store_;
};

// Moves LOADs earlier in program order. Loads keep their relative order,
// except that a load held in place by an unfinished producer store may be
// overtaken by loads whose data is needed no later than its own. Each load
// lands at the earliest position allowed by its bounds where a free range
// exists until its last consumer.
int64_t promote_loads(Program& p, bool cross_layer) {
  const std::size_t n = p.instrs.size();
  DatumIndex ix = collect_input_datums(p);
  StoreFrontier frontier(p);

  std::vector<int64_t> layer_start(p.model.size(), -1);
  std::vector<int64_t> ctx_floor(n, 0);
  int64_t ctx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Instruction& in = p.instrs[i];
    auto li = static_cast<std::size_t>(in.layer);
    if (layer_start[li] < 0) layer_start[li] = static_cast<int64_t>(i);
    ctx_floor[i] = ctx;
    if (in.op == Op::kCtxSwitch) ctx = static_cast<int64_t>(i) + 1;
  }

  // queued_before[i]: LOAD/FORWARD instructions at original positions < i.
  std::vector<int64_t> queued_before(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const Op op = p.instrs[i].op;
    queued_before[i + 1] = queued_before[i] + (op == Op::kLoad || op == Op::kForward ? 1 : 0);
  }
  std::vector<int64_t> placed;  // anchors of processed LOAD/FORWARD, sorted
  std::vector<std::pair<int64_t, int64_t>> held;  // (position, first reader) of store-held loads
  std::vector<int64_t> hoisted(n, 0);  // loads moved from after position j to before it

  std::vector<int64_t> anchor(n);
  std::iota(anchor.begin(), anchor.end(), 0);
  std::vector<int> group(n, 1);
  int64_t promoted = 0;
  int64_t prev = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Instruction& in = p.instrs[i];
    if (in.op == Op::kForward) placed.push_back(static_cast<int64_t>(i));
    if (in.op == Op::kForward || in.op == Op::kZeroize) prev = static_cast<int64_t>(i) + 1;
    if (in.op != Op::kLoad) continue;
    const auto q = static_cast<int64_t>(i);
    const std::size_t self = ix.by_id.at(in.id);
    Datum& d = ix.datums[self];
    int64_t lb = std::max(prev, ctx_floor[i]);
    if (!cross_layer) lb = std::max(lb, layer_start[static_cast<std::size_t>(in.layer)]);
    const bool raw_held = lb < q && frontier.after(in) >= q;
    lb = std::max(lb, frontier.after(in));
    const auto first_reader =
        d.readers.empty() ? q + 1 : static_cast<int64_t>(*std::min_element(d.readers.begin(), d.readers.end()));
    for (const auto& [pos, reader] : held)
      if (reader < first_reader) lb = std::max(lb, pos + 1);
    // Keep at most one load queue's worth of loads between the new position
    // and the first consumer, or the in-order decoder stalls on a full queue.
    const int64_t room = kLoadQueueDepth - 1 - (queued_before[static_cast<std::size_t>(first_reader)] -
                                                 queued_before[i + 1]);
    const auto np = static_cast<int64_t>(placed.size());
    if (room < 0) {
      lb = q;
    } else if (np > room) {
      lb = std::max(lb, placed[static_cast<std::size_t>(np - 1 - room)] + 1);
    }
    // Nor may any instruction end up behind more than a queue's worth of
    // hoisted loads.
    for (int64_t j = q - 1; j >= lb; --j)
      if (hoisted[static_cast<std::size_t>(j)] >= kLoadQueueDepth - 1) {
        lb = j + 1;
        break;
      }
    if (lb >= q) {
      placed.insert(std::upper_bound(placed.begin(), placed.end(), q), q);
      if (raw_held) {
        held.emplace_back(q, first_reader);
      } else {
        prev = q + 1;
      }
      continue;
    }
    int64_t lo = lb;
    int64_t hi = q;  // staying put is always possible
    while (lo < hi) {
      int64_t mid = lo + (hi - lo) / 2;
      if (first_fit(ix, p.spad_bytes, d.role, d.bytes, mid, d.end, self) >= 0) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    if (lo < q) {
      int64_t slot = first_fit(ix, p.spad_bytes, d.role, d.bytes, lo, d.end, self);
      d.start = lo;
      d.slot = slot;
      in.slot = slot;
      for (std::size_t r : d.readers) p.instrs[r].slots[d.role] = slot;
      anchor[i] = lo;
      group[i] = 0;
      for (int64_t j = lo; j < q; ++j) ++hoisted[static_cast<std::size_t>(j)];
      ++promoted;
      prev = lo;
    } else {
      prev = q + 1;
    }
    placed.insert(std::upper_bound(placed.begin(), placed.end(), anchor[i]), anchor[i]);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (anchor[a] != anchor[b]) return anchor[a] < anchor[b];
    if (group[a] != group[b]) return group[a] < group[b];
    return a < b;
  });
  std::vector<Instruction> out;
  out.reserve(n);
  for (std::size_t k : order) out.push_back(p.instrs[k]);
  p.instrs = std::move(out);
  return promoted;
}

bool overlaps(int64_t a, int64_t alen, int64_t b, int64_t blen) {
  return a < b + blen && b < a + alen;
}

int64_t forward_loads(Program& p) {
  std::unordered_map<int64_t, std::size_t> store_pos;
  std::vector<std::vector<std::size_t>> stores_of(p.model.size());
  int64_t forwarded = 0;
  for (std::size_t i = 0; i < p.instrs.size(); ++i) {
    Instruction& in = p.instrs[i];
    if (in.op == Op::kStore) {
      stores_of[static_cast<std::size_t>(in.layer)].push_back(i);
      continue;
    }
    if (in.op != Op::kLoad || in.role != TensorRole::kIfmap) continue;
    int producer = p.model.depends_on[static_cast<std::size_t>(in.layer)];
    if (producer == kExternalInput) continue;
    const auto& stores = stores_of[static_cast<std::size_t>(producer)];
    for (auto it = stores.rbegin(); it != stores.rend(); ++it) {
      const Instruction& s = p.instrs[*it];
      if (!tile_within_store(p, in.tile, s.tile)) continue;
      bool intact = true;
      for (std::size_t j = *it + 1; j < i && intact; ++j) {
        const Instruction& x = p.instrs[j];
        if (x.op == Op::kCtxSwitch) intact = false;
        if (x.op == Op::kZeroize && x.role == TensorRole::kOfmap &&
            overlaps(x.slot, x.bytes, s.slot, s.bytes))
          intact = false;
        if (x.op == Op::kGemm &&
            overlaps(x.slots[TensorRole::kOfmap], tile_role_bytes(p, x.tile, TensorRole::kOfmap),
                     s.slot, s.bytes))
          intact = false;
      }
      if (intact) {
        in.op = Op::kForward;
        in.src = s.id;
        in.ro = false;
        ++forwarded;
      }
      break;
    }
  }
  return forwarded;
}

}  // namespace

Program liveness_pass(const Program& program, LivenessMode mode, PassReport* report) {
  Program p = program;
  DatumIndex ix = collect_input_datums(p);

  // Ofmap datums: defined by the first GEMM of an output tile, last read by
  // its STORE or by a FORWARD of that STORE.
  std::unordered_map<int64_t, int64_t> store_datum;  // store id -> ofmap datum
  std::unordered_map<int64_t, std::pair<int64_t, int64_t>> ofmap_last;  // datum -> (pos, store idx)
  for (std::size_t i = 0; i < p.instrs.size(); ++i) {
    const Instruction& in = p.instrs[i];
    if (in.op == Op::kStore) {
      store_datum[in.id] = in.deps[TensorRole::kOfmap];
      ofmap_last[in.deps[TensorRole::kOfmap]] = {static_cast<int64_t>(i), static_cast<int64_t>(i)};
    } else if (in.op == Op::kForward) {
      auto it = store_datum.find(in.src);
      if (it != store_datum.end()) ofmap_last[it->second].first = static_cast<int64_t>(i);
    }
  }

  PassReport rep;
  for (const auto& d : ix.datums)
    if (!d.readers.empty()) rep.free_list.push_back(FreeEntry{d.end, d.role, d.slot, d.bytes});
  for (const auto& [datum, last] : ofmap_last) {
    const Instruction& s = p.instrs[static_cast<std::size_t>(last.second)];
    rep.free_list.push_back(FreeEntry{last.first, TensorRole::kOfmap, s.slot, s.bytes});
  }
  std::sort(rep.free_list.begin(), rep.free_list.end(), [](const FreeEntry& a, const FreeEntry& b) {
    if (a.position != b.position) return a.position < b.position;
    if (a.role != b.role) return a.role < b.role;
    return a.slot < b.slot;
  });

  if (mode == LivenessMode::kPromote) {
    rep.promoted_loads = promote_loads(p, /*cross_layer=*/false);
  } else {
    std::vector<std::vector<Instruction>> after(p.instrs.size());
    int64_t id = p.next_id();
    for (const auto& f : rep.free_list) {
      Instruction z;
      z.id = id++;
      z.op = Op::kZeroize;
      z.layer = p.instrs[static_cast<std::size_t>(f.position)].layer;
      z.role = f.role;
      z.slot = f.slot;
      z.bytes = f.bytes;
      after[static_cast<std::size_t>(f.position)].push_back(z);
      ++rep.zeroizes_inserted;
    }
    std::vector<Instruction> out;
    out.reserve(p.instrs.size() + static_cast<std::size_t>(rep.zeroizes_inserted));
    for (std::size_t i = 0; i < p.instrs.size(); ++i) {
      out.push_back(p.instrs[i]);
      for (auto& z : after[i]) out.push_back(z);
    }
    p.instrs = std::move(out);
  }
  if (report) {
    report->promoted_loads += rep.promoted_loads;
    report->zeroizes_inserted += rep.zeroizes_inserted;
    report->free_list = std::move(rep.free_list);
  }
  return p;
}

Program dependency_pass(const Program& program, const DependencyOptions& opts, PassReport* report) {
  Program p = program;
  int64_t promoted = opts.promote ? promote_loads(p, /*cross_layer=*/true) : 0;
  int64_t forwarded = opts.forwarding ? forward_loads(p) : 0;
  if (report) {
    report->promoted_loads += promoted;
    report->forwards += forwarded;
  }
  return p;
}

void validate_pass_flags(const PassFlags& flags) {
  if (flags.proactive_zeroize && !flags.multi_tenant)
    throw ValidationError("proactive zeroization requires multi-tenant mode");
  if (flags.proactive_zeroize && flags.promote_loads)
    throw ValidationError("proactive zeroization and load promotion are mutually exclusive");
}

Program apply_passes(const Program& program, const PassFlags& flags, PassReport* report) {
  validate_pass_flags(flags);
  Program p = program;
  if (flags.proactive_zeroize) {
    p = liveness_pass(p, LivenessMode::kProactiveZeroize, report);
  } else if (flags.promote_loads) {
    p = liveness_pass(p, LivenessMode::kPromote, report);
  }
  DependencyOptions dep;
  dep.promote = flags.promote_loads;
  dep.forwarding = flags.forwarding;
  if (dep.promote || dep.forwarding) p = dependency_pass(p, dep, report);
  return p;
}

}  // namespace secmap
