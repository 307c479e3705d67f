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

#include "secmap/program.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>

#include "json.hpp"

namespace secmap {

using json = nlohmann::json;

const char* op_name(Op op) {
  switch (op) {
    case Op::kLoad:
      return "LOAD";
    case Op::kStore:
      return "STORE";
    case Op::kGemm:
      return "GEMM";
    case Op::kZeroize:
      return "ZEROIZE";
    case Op::kForward:
      return "FORWARD";
    case Op::kCtxSwitch:
      return "CTXSWITCH";
  }
  return "?";
}

Op op_from_name(const std::string& s) {
  for (Op op : {Op::kLoad, Op::kStore, Op::kGemm, Op::kZeroize, Op::kForward, Op::kCtxSwitch})
    if (s == op_name(op)) return op;
  throw ParseError("unknown instruction kind '" + s + "'");
}

int64_t Program::next_id() const {
  int64_t n = 0;
  for (const auto& i : instrs) n = std::max(n, i.id + 1);
  return n;
}

const Instruction* Program::find(int64_t id) const {
  for (const auto& i : instrs)
    if (i.id == id) return &i;
  return nullptr;
}

int64_t tile_role_bytes(const Program& p, int64_t tile, TensorRole role) {
  const TileRef& t = p.tiles[static_cast<std::size_t>(tile)];
  const LayerSpec& l = p.model.layers[static_cast<std::size_t>(t.layer)];
  return packed_elements(l, t.box, role) * l.element_size;
}

void lower_layer(Program& p, int li, const Mapping& mapping, int64_t h, LowerState& state) {
  const LayerSpec& layer = p.model.layers[static_cast<std::size_t>(li)];
  if (!is_valid_authblock(h)) throw ValidationError("invalid AuthBlock size " + std::to_string(h));
  if (p.h.size() <= static_cast<std::size_t>(li)) p.h.resize(static_cast<std::size_t>(li) + 1, 64);
  p.h[static_cast<std::size_t>(li)] = h;

  TileWalk walk(layer, mapping);
  const auto steps = walk.all();
  const int64_t first_tile = static_cast<int64_t>(p.tiles.size());
  for (const auto& st : steps) p.tiles.push_back(TileRef{li, st.box});

  int64_t id = p.next_id();
  auto half_slot = [&](TensorRole r, int64_t bytes) {
    const int64_t half = p.spad_bytes[r] / 2;
    if (bytes > half)
      throw InfeasibleMapping("layer '" + layer.name + "': " + std::string(role_name(r)) +
                              " tile does not fit half the scratchpad");
    return (state.parity[r]++ % 2) * half;
  };

  std::vector<PerRole<int64_t>> defs(steps.size(), PerRole<int64_t>{{-1, -1, -1}});
  std::vector<PerRole<int64_t>> def_slot(steps.size(), PerRole<int64_t>{{0, 0, 0}});
  auto emit_loads = [&](std::size_t i) {
    const TileStep& st = steps[i];
    for (TensorRole r : {TensorRole::kIfmap, TensorRole::kWeight}) {
      bool changed = r == TensorRole::kIfmap ? st.ifmap_changed : st.weight_changed;
      if (i > 0 && !changed) {
        defs[i][r] = defs[i - 1][r];
        def_slot[i][r] = def_slot[i - 1][r];
        continue;
      }
      Instruction in;
      in.id = id++;
      in.op = Op::kLoad;
      in.layer = li;
      in.tile = first_tile + static_cast<int64_t>(i);
      in.role = r;
      in.bytes = packed_elements(layer, st.box, r) * layer.element_size;
      in.slot = half_slot(r, in.bytes);
      in.addr = p.amap.base(li, r);
      in.ro = r == TensorRole::kWeight;
      defs[i][r] = in.id;
      def_slot[i][r] = in.slot;
      p.instrs.push_back(in);
    }
  };

  int64_t ofmap_slot = 0;
  int64_t ofmap_datum = -1;
  if (!steps.empty()) emit_loads(0);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i + 1 < steps.size()) emit_loads(i + 1);
    const TileStep& st = steps[i];
    const int64_t tile = first_tile + static_cast<int64_t>(i);
    Instruction g;
    g.id = id++;
    g.op = Op::kGemm;
    g.layer = li;
    g.tile = tile;
    g.deps[TensorRole::kIfmap] = defs[i][TensorRole::kIfmap];
    g.deps[TensorRole::kWeight] = defs[i][TensorRole::kWeight];
    g.slots[TensorRole::kIfmap] = def_slot[i][TensorRole::kIfmap];
    g.slots[TensorRole::kWeight] = def_slot[i][TensorRole::kWeight];
    if (st.first_reduction) {
      ofmap_slot = half_slot(TensorRole::kOfmap, tile_role_bytes(p, tile, TensorRole::kOfmap));
      ofmap_datum = g.id;
      g.accumulate = false;
    } else {
      g.accumulate = true;
      g.deps[TensorRole::kOfmap] = ofmap_datum;
    }
    g.slots[TensorRole::kOfmap] = ofmap_slot;
    p.instrs.push_back(g);

    if (st.last_reduction) {
      Instruction s;
      s.id = id++;
      s.op = Op::kStore;
      s.layer = li;
      s.tile = tile;
      s.role = TensorRole::kOfmap;
      s.slot = ofmap_slot;
      s.bytes = tile_role_bytes(p, tile, TensorRole::kOfmap);
      s.addr = p.amap.base(li, TensorRole::kOfmap);
      s.deps[TensorRole::kOfmap] = ofmap_datum;
      p.instrs.push_back(s);
    }
  }
}

Program lower(const ModelSpec& model, const std::vector<Mapping>& mappings,
              const std::vector<int64_t>& h, const HardwareConfig& hw, bool context_switches) {
  validate_model(model);
  if (mappings.size() != model.size() || h.size() != model.size())
    throw ValidationError("lower: need one mapping and one AuthBlock size per layer");
  Program p;
  p.model = model;
  p.spad_bytes = hw.spad_bytes;
  p.amap = build_address_map(model);
  p.h.assign(model.size(), 64);
  LowerState state;
  for (std::size_t i = 0; i < model.size(); ++i) {
    lower_layer(p, static_cast<int>(i), mappings[i], h[i], state);
    if (context_switches) {
      Instruction cs;
      cs.id = p.next_id();
      cs.op = Op::kCtxSwitch;
      cs.layer = static_cast<int>(i);
      p.instrs.push_back(cs);
    }
  }
  return p;
}

bool tile_within_store(const Program& p, int64_t consumer_tile, int64_t store_tile) {
  const TileRef& t = p.tiles[static_cast<std::size_t>(consumer_tile)];
  const TileRef& st = p.tiles[static_cast<std::size_t>(store_tile)];
  if (p.model.depends_on[static_cast<std::size_t>(t.layer)] != st.layer) return false;
  const LayerSpec& l = p.model.layers[static_cast<std::size_t>(t.layer)];
  const LayerSpec& pl = p.model.layers[static_cast<std::size_t>(st.layer)];
  const int64_t base = p.amap.base(t.layer, TensorRole::kIfmap);
  const int64_t ox = pl.out_x();
  const int64_t oy = pl.out_y();
  bool inside = true;
  for_each_element(l, t.box, TensorRole::kIfmap, base, [&](int64_t, int64_t addr) {
    // Consumer ifmap elements index the producer's ofmap in [n][k][x][y] order.
    int64_t e = (addr - base) / l.element_size;
    int64_t y = e % oy;
    int64_t x = (e / oy) % ox;
    int64_t k = (e / (oy * ox)) % pl.K;
    int64_t n = e / (oy * ox * pl.K);
    if (y < st.box.lo_of(Dim::Y) || y >= st.box.hi_of(Dim::Y) || x < st.box.lo_of(Dim::X) ||
        x >= st.box.hi_of(Dim::X) || k < st.box.lo_of(Dim::K) || k >= st.box.hi_of(Dim::K) ||
        n < st.box.lo_of(Dim::N) || n >= st.box.hi_of(Dim::N))
      inside = false;
  });
  return inside;
}

namespace {

// Byte-range ownership tags used by the validator. Values >= 0 name the
// defining instruction, -1 means never written, <= -2 encodes the id of the
// ZEROIZE or CTXSWITCH that cleared it.
class TagSpace {
 public:
  TagSpace(const PerRole<int64_t>& spad, int64_t grain) : grain_(grain) {
    for (TensorRole r : kAllRoles)
      tags_[role_index(r)].assign(static_cast<std::size_t>(spad[r] / grain), -1);
  }
  std::vector<int64_t>& of(TensorRole r) { return tags_[role_index(r)]; }
  int64_t grain() const { return grain_; }

 private:
  int64_t grain_;
  std::array<std::vector<int64_t>, 3> tags_;
};

std::string range_str(TensorRole r, int64_t lo, int64_t bytes) {
  return std::string(role_name(r)) + "[" + std::to_string(lo) + "," + std::to_string(lo + bytes) +
         ")";
}

}  // namespace

std::optional<Violation> validate_program(const Program& p) {
  int64_t grain = 0;
  for (const auto& l : p.model.layers) grain = std::gcd(grain, l.element_size);
  if (grain <= 0) grain = 1;
  TagSpace tags(p.spad_bytes, grain);

  std::vector<std::vector<bool>> stored(p.model.size());
  for (std::size_t i = 0; i < p.model.size(); ++i)
    stored[i].assign(static_cast<std::size_t>(p.model.layers[i].ofmap_elements()), false);

  auto fail = [](const Instruction& in, int64_t culprit, std::string msg) {
    return Violation{in.id, culprit,
                     std::string(op_name(in.op)) + " " + std::to_string(in.id) + ": " + msg};
  };
  auto in_bounds = [&](TensorRole r, int64_t lo, int64_t bytes) {
    return lo >= 0 && bytes >= 0 && lo % grain == 0 && bytes % grain == 0 &&
           lo + bytes <= p.spad_bytes[r];
  };
  auto check = [&](const Instruction& in, TensorRole r, int64_t lo, int64_t bytes,
                   int64_t expect) -> std::optional<Violation> {
    if (!in_bounds(r, lo, bytes))
      return fail(in, -1, range_str(r, lo, bytes) + " lies outside the scratchpad");
    auto& t = tags.of(r);
    for (int64_t b = lo / grain; b < (lo + bytes) / grain; ++b) {
      int64_t tag = t[static_cast<std::size_t>(b)];
      if (tag == expect) continue;
      std::string what = range_str(r, lo, bytes) + " expected data of instruction " +
                         std::to_string(expect);
      if (tag <= -2) {
        const Instruction* z = p.find(-tag - 2);
        return fail(in, -tag - 2,
                    what + " but it was cleared by " + (z ? op_name(z->op) : "?") + " " +
                        std::to_string(-tag - 2));
      }
      if (tag == -1) return fail(in, expect, what + " but it was never written");
      return fail(in, tag, what + " but it was overwritten by instruction " + std::to_string(tag));
    }
    return std::nullopt;
  };
  auto write = [&](TensorRole r, int64_t lo, int64_t bytes, int64_t value) {
    auto& t = tags.of(r);
    for (int64_t b = lo / grain; b < (lo + bytes) / grain; ++b) t[static_cast<std::size_t>(b)] = value;
  };

  std::vector<int64_t> ids;
  for (const auto& in : p.instrs) ids.push_back(in.id);
  std::sort(ids.begin(), ids.end());
  for (std::size_t i = 1; i < ids.size(); ++i)
    if (ids[i] == ids[i - 1]) return Violation{ids[i], -1, "duplicate instruction id " + std::to_string(ids[i])};

  for (const auto& in : p.instrs) {
    if (in.layer < 0 || static_cast<std::size_t>(in.layer) >= p.model.size())
      return fail(in, -1, "layer index out of range");
    const bool has_tile = in.op == Op::kLoad || in.op == Op::kStore || in.op == Op::kGemm ||
                          in.op == Op::kForward;
    if (has_tile && (in.tile < 0 || static_cast<std::size_t>(in.tile) >= p.tiles.size()))
      return fail(in, -1, "tile index out of range");
    switch (in.op) {
      case Op::kLoad: {
        if (!in_bounds(in.role, in.slot, in.bytes))
          return fail(in, -1, range_str(in.role, in.slot, in.bytes) + " lies outside the scratchpad");
        if (in.bytes != tile_role_bytes(p, in.tile, in.role))
          return fail(in, -1, "byte count does not match the tile");
        const TileRef& t = p.tiles[static_cast<std::size_t>(in.tile)];
        const LayerSpec& l = p.model.layers[static_cast<std::size_t>(t.layer)];
        int producer = p.model.depends_on[static_cast<std::size_t>(t.layer)];
        if (in.role == TensorRole::kIfmap && producer != kExternalInput) {
          const auto& st = stored[static_cast<std::size_t>(producer)];
          const int64_t base = p.amap.base(t.layer, TensorRole::kIfmap);
          bool ok = true;
          for_each_element(l, t.box, TensorRole::kIfmap, base, [&](int64_t, int64_t addr) {
            if (!st[static_cast<std::size_t>((addr - base) / l.element_size)]) ok = false;
          });
          if (!ok)
            return fail(in, -1,
                        "reads ofmap data of layer " + std::to_string(producer) +
                            " before it is stored");
        }
        write(in.role, in.slot, in.bytes, in.id);
        break;
      }
      case Op::kForward: {
        const Instruction* s = p.find(in.src);
        if (!s || s->op != Op::kStore) return fail(in, in.src, "source is not a STORE");
        if (auto v = check(in, TensorRole::kOfmap, s->slot, s->bytes, s->deps[TensorRole::kOfmap]))
          return v;
        const TileRef& t = p.tiles[static_cast<std::size_t>(in.tile)];
        const TileRef& st = p.tiles[static_cast<std::size_t>(s->tile)];
        if (p.model.depends_on[static_cast<std::size_t>(t.layer)] != st.layer)
          return fail(in, s->id, "forwards data from a layer that is not the producer");
        if (!in_bounds(TensorRole::kIfmap, in.slot, in.bytes) ||
            in.bytes != tile_role_bytes(p, in.tile, TensorRole::kIfmap))
          return fail(in, -1, "bad destination range");
        const bool inside = tile_within_store(p, in.tile, s->tile);
        if (!inside) return fail(in, s->id, "consumer tile is not contained in the stored tile");
        write(TensorRole::kIfmap, in.slot, in.bytes, in.id);
        break;
      }
      case Op::kGemm: {
        for (TensorRole r : {TensorRole::kIfmap, TensorRole::kWeight}) {
          if (auto v = check(in, r, in.slots[r], tile_role_bytes(p, in.tile, r), in.deps[r])) return v;
        }
        const int64_t ob = tile_role_bytes(p, in.tile, TensorRole::kOfmap);
        if (in.accumulate) {
          if (auto v = check(in, TensorRole::kOfmap, in.slots[TensorRole::kOfmap], ob,
                             in.deps[TensorRole::kOfmap]))
            return v;
        } else {
          if (!in_bounds(TensorRole::kOfmap, in.slots[TensorRole::kOfmap], ob))
            return fail(in, -1, "ofmap range outside the scratchpad");
          write(TensorRole::kOfmap, in.slots[TensorRole::kOfmap], ob, in.id);
        }
        break;
      }
      case Op::kStore: {
        if (in.bytes != tile_role_bytes(p, in.tile, TensorRole::kOfmap))
          return fail(in, -1, "byte count does not match the tile");
        if (auto v = check(in, TensorRole::kOfmap, in.slot, in.bytes, in.deps[TensorRole::kOfmap]))
          return v;
        const TileRef& t = p.tiles[static_cast<std::size_t>(in.tile)];
        const LayerSpec& l = p.model.layers[static_cast<std::size_t>(t.layer)];
        const int64_t base = p.amap.base(t.layer, TensorRole::kOfmap);
        auto& st = stored[static_cast<std::size_t>(t.layer)];
        for_each_element(l, t.box, TensorRole::kOfmap, base, [&](int64_t, int64_t addr) {
          st[static_cast<std::size_t>((addr - base) / l.element_size)] = true;
        });
        break;
      }
      case Op::kZeroize: {
        if (!in_bounds(in.role, in.slot, in.bytes))
          return fail(in, -1, range_str(in.role, in.slot, in.bytes) + " lies outside the scratchpad");
        write(in.role, in.slot, in.bytes, -in.id - 2);
        break;
      }
      case Op::kCtxSwitch: {
        for (TensorRole r : kAllRoles) write(r, 0, p.spad_bytes[r] / grain * grain, -in.id - 2);
        break;
      }
    }
  }
  return std::nullopt;
}

void write_program(std::ostream& os, const Program& p) {
  json head;
  head["format"] = "secmap-program";
  head["version"] = 1;
  head["model"] = json::parse(serialize_model(p.model));
  head["h"] = p.h;
  for (TensorRole r : kAllRoles) head["spad_bytes"][std::string(role_name(r))] = p.spad_bytes[r];
  json tiles = json::array();
  for (const auto& t : p.tiles) tiles.push_back({t.layer, t.box.lo, t.box.hi});
  head["tiles"] = tiles;
  os << head.dump() << '\n';
  for (const auto& in : p.instrs) {
    json j;
    j["id"] = in.id;
    j["op"] = op_name(in.op);
    j["layer"] = in.layer;
    switch (in.op) {
      case Op::kLoad:
        j["tile"] = in.tile;
        j["role"] = role_name(in.role);
        j["slot"] = in.slot;
        j["bytes"] = in.bytes;
        j["addr"] = in.addr;
        j["ro"] = in.ro;
        break;
      case Op::kStore:
        j["tile"] = in.tile;
        j["slot"] = in.slot;
        j["bytes"] = in.bytes;
        j["addr"] = in.addr;
        j["dep"] = in.deps[TensorRole::kOfmap];
        break;
      case Op::kGemm:
        j["tile"] = in.tile;
        j["reads"] = {in.slots[TensorRole::kIfmap], in.slots[TensorRole::kWeight]};
        j["writes"] = in.slots[TensorRole::kOfmap];
        j["deps"] = in.deps.v;
        j["accumulate"] = in.accumulate;
        break;
      case Op::kZeroize:
        j["role"] = role_name(in.role);
        j["slot"] = in.slot;
        j["bytes"] = in.bytes;
        break;
      case Op::kForward:
        j["tile"] = in.tile;
        j["slot"] = in.slot;
        j["bytes"] = in.bytes;
        j["src"] = in.src;
        break;
      case Op::kCtxSwitch:
        break;
    }
    os << j.dump() << '\n';
  }
}

Program read_program(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError("program: empty input");
  Program p;
  try {
    json head = json::parse(line);
    if (head.value("format", "") != "secmap-program")
      throw ParseError("program: missing secmap-program header");
    p.model = parse_model_text(head.at("model").dump());
    p.h = head.at("h").get<std::vector<int64_t>>();
    for (TensorRole r : kAllRoles)
      p.spad_bytes[r] = head.at("spad_bytes").at(std::string(role_name(r))).get<int64_t>();
    for (const auto& t : head.at("tiles")) {
      TileRef ref;
      ref.layer = t.at(0).get<int>();
      ref.box.lo = t.at(1).get<std::array<int64_t, kNumDims>>();
      ref.box.hi = t.at(2).get<std::array<int64_t, kNumDims>>();
      p.tiles.push_back(ref);
    }
    p.amap = build_address_map(p.model);
    int64_t lineno = 1;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty()) continue;
      json j = json::parse(line);
      Instruction in;
      in.id = j.at("id").get<int64_t>();
      in.op = op_from_name(j.at("op").get<std::string>());
      in.layer = j.at("layer").get<int>();
      in.tile = j.value("tile", int64_t{-1});
      if (j.contains("role")) in.role = role_from_name(j.at("role").get<std::string>());
      in.slot = j.value("slot", int64_t{0});
      in.bytes = j.value("bytes", int64_t{0});
      in.addr = j.value("addr", int64_t{0});
      in.ro = j.value("ro", false);
      in.src = j.value("src", int64_t{-1});
      switch (in.op) {
        case Op::kStore:
          in.role = TensorRole::kOfmap;
          in.deps[TensorRole::kOfmap] = j.at("dep").get<int64_t>();
          break;
        case Op::kGemm:
          in.slots[TensorRole::kIfmap] = j.at("reads").at(0).get<int64_t>();
          in.slots[TensorRole::kWeight] = j.at("reads").at(1).get<int64_t>();
          in.slots[TensorRole::kOfmap] = j.at("writes").get<int64_t>();
          in.deps.v = j.at("deps").get<std::array<int64_t, 3>>();
          in.accumulate = j.at("accumulate").get<bool>();
          break;
        case Op::kForward:
          in.role = TensorRole::kIfmap;
          break;
        default:
          break;
      }
      p.instrs.push_back(in);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("program: ") + e.what());
  }
  return p;
}

ProgramStats program_stats(const Program& p) {
  ProgramStats s;
  for (const auto& in : p.instrs) {
    switch (in.op) {
      case Op::kLoad:
        ++s.loads;
        break;
      case Op::kStore:
        ++s.stores;
        break;
      case Op::kGemm:
        ++s.gemms;
        break;
      case Op::kZeroize:
        ++s.zeroizes;
        break;
      case Op::kForward:
        ++s.forwards;
        break;
      case Op::kCtxSwitch:
        ++s.ctx_switches;
        break;
    }
  }
  return s;
}

}  // namespace secmap
