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

#include "secmap/simulator.hpp"

#include <algorithm>
#include <deque>
#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <sstream>

#include "json.hpp"
#include "secmap/authopt.hpp"
#include "secmap/shapersizing.hpp"

namespace secmap {

namespace {

constexpr int kDram = 3;
constexpr int64_t kNever = std::numeric_limits<int64_t>::max();
constexpr int64_t kDeadlockEpoch = 1'000'000;

struct Res {
  int space = 0;  // scratchpad role index, or kDram
  int64_t lo = 0;
  int64_t hi = 0;
  bool write = false;
};

enum class St : uint8_t { kPending, kQueued, kStarted, kDone };

struct ReadBurst {
  int64_t load = 0;
  int64_t block = 0;
  bool integrity = false;
  bool redundant = false;
};

// Demand lines are decrypted at the crypto throughput. Redundant and metadata
// lines only complete the block for verification, so they do not occupy it.
struct BlockState {
  int64_t pending = 0;
  Rational data_done{0};
  int64_t integrity_at = 0;  // latest redundant or metadata arrival
};

struct LoadState {
  std::size_t instr = 0;
  std::vector<BlockState> blocks;
  int64_t remaining = 0;
  std::vector<ReadBurst> bursts;
  std::size_t pushed = 0;
};

struct StoreState {
  std::size_t instr = 0;
  std::vector<int32_t> values;
  std::vector<int64_t> ready_at;  // per write burst, non-decreasing
  int64_t bursts = 0;
  int64_t pushed = 0;
  int64_t written = 0;
};

enum class Ev : uint8_t { kReadArrival, kBlockRelease, kGemmDone, kWriteDone, kForwardDone, kCtxDone };

struct Event {
  int64_t time = 0;
  int64_t seq = 0;
  Ev kind = Ev::kReadArrival;
  int64_t a = 0;
  int64_t b = 0;
  bool flag = false;
  bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
};

int64_t ceil_rational(const Rational& r) {
  return ceil_div(r.numerator(), r.denominator());
}

class Simulator {
 public:
  Simulator(const Program& p, const HardwareConfig& hw, const Rational& bw, const ModelData& data)
      : p_(p), hw_(hw), n_(p.instrs.size()) {
    interval_ = dispatch_interval(bw);
    if (hw.crypto_bw <= 0) throw SimulationError("crypto bandwidth must be > 0");
    for (const auto& l : p.model.layers)
      if (l.element_size != 4)
        throw SimulationError("layer '" + l.name + "': functional simulation needs 4-byte elements");
    mem_.assign(static_cast<std::size_t>(p.amap.metadata_base / 4), 0);
    for (std::size_t i = 0; i < p.model.size(); ++i) {
      if (p.model.depends_on[i] == kExternalInput) {
        int64_t base = p.amap.base(static_cast<int>(i), TensorRole::kIfmap) / 4;
        std::copy(data.ifmaps[i].begin(), data.ifmaps[i].end(), mem_.begin() + base);
      }
      int64_t wbase = p.amap.base(static_cast<int>(i), TensorRole::kWeight) / 4;
      std::copy(data.weights[i].begin(), data.weights[i].end(), mem_.begin() + wbase);
    }
    for (TensorRole r : kAllRoles) {
      auto sz = static_cast<std::size_t>(p.spad_bytes[r] / 4);
      spad_[role_index(r)].assign(sz, 0);
      secret_[role_index(r)].assign(sz, 0);
      ever_[role_index(r)].assign(sz, 0);
    }
    state_.assign(n_, St::kPending);
    res_.resize(n_);
    stats_.layer_end_cycles.assign(p.model.size(), 0);
    stats_.bandwidth.interval = interval_;
  }

  SimResult run() {
    int64_t t = 0;
    int64_t last_progress = 0;
    for (;;) {
      dirty_ = false;
      port_busy_ = {false, false, false};
      while (!events_.empty() && events_.top().time <= t) {
        Event e = events_.top();
        events_.pop();
        handle(e, t);
      }
      if (gemm_running_ >= 0) port_busy_[role_index(TensorRole::kOfmap)] = true;
      if (forward_running_ >= 0) port_busy_[role_index(TensorRole::kIfmap)] = true;
      if (t % interval_ == 0) shaper_tick(t);
      run_units(t);
      decode(t);
      if (dirty_) last_progress = t;
      if (finished()) {
        stats_.total_cycles = t + 1;
        break;
      }
      int64_t next = t + 1;
      if (!dirty_) {
        next = next_interesting(t);
        if (next == kNever || next - last_progress > kDeadlockEpoch)
          throw SimulationError("deadlock at cycle " + std::to_string(t) + ": " + dump());
      }
      account_stalls(t, next);
      fill_fake_ticks(t, next);
      t = next;
    }
    finish();
    SimResult out;
    out.stats = std::move(stats_);
    for (std::size_t i = 0; i < p_.model.size(); ++i) {
      const auto& l = p_.model.layers[i];
      int64_t base = p_.amap.base(static_cast<int>(i), TensorRole::kOfmap) / 4;
      out.ofmaps.emplace_back(mem_.begin() + base, mem_.begin() + base + l.ofmap_elements());
    }
    return out;
  }

 private:
  const Instruction& ins(std::size_t k) const { return p_.instrs[k]; }
  const TileRef& tile_of(const Instruction& in) const {
    return p_.tiles[static_cast<std::size_t>(in.tile)];
  }
  const LayerSpec& layer_of(const TileRef& t) const {
    return p_.model.layers[static_cast<std::size_t>(t.layer)];
  }

  void push_event(Event e) {
    e.seq = seq_++;
    events_.push(e);
  }

  // ---- resources and hazards -------------------------------------------

  std::pair<int64_t, int64_t> dram_span(const Instruction& in, TensorRole role) const {
    const TileRef& t = tile_of(in);
    const LayerSpec& l = layer_of(t);
    int64_t lo = kNever;
    int64_t hi = 0;
    for_each_element(l, t.box, role, p_.amap.base(t.layer, role), [&](int64_t, int64_t a) {
      lo = std::min(lo, a);
      hi = std::max(hi, a + l.element_size);
    });
    return {lo, hi};
  }

  std::vector<Res> resources(const Instruction& in) const {
    std::vector<Res> r;
    auto sp = [](TensorRole role) { return static_cast<int>(role_index(role)); };
    switch (in.op) {
      case Op::kLoad: {
        r.push_back({sp(in.role), in.slot, in.slot + in.bytes, true});
        auto [lo, hi] = dram_span(in, in.role);
        r.push_back({kDram, lo, hi, false});
        break;
      }
      case Op::kForward: {
        const Instruction* s = p_.find(in.src);
        r.push_back({sp(TensorRole::kOfmap), s->slot, s->slot + s->bytes, false});
        r.push_back({sp(TensorRole::kIfmap), in.slot, in.slot + in.bytes, true});
        break;
      }
      case Op::kGemm:
        for (TensorRole role : {TensorRole::kIfmap, TensorRole::kWeight})
          r.push_back({sp(role), in.slots[role], in.slots[role] + tile_role_bytes(p_, in.tile, role),
                       false});
        r.push_back({sp(TensorRole::kOfmap), in.slots[TensorRole::kOfmap],
                     in.slots[TensorRole::kOfmap] + tile_role_bytes(p_, in.tile, TensorRole::kOfmap),
                     true});
        break;
      case Op::kStore: {
        r.push_back({sp(TensorRole::kOfmap), in.slot, in.slot + in.bytes, false});
        auto [lo, hi] = dram_span(in, TensorRole::kOfmap);
        r.push_back({kDram, lo, hi, true});
        break;
      }
      case Op::kZeroize:
        r.push_back({sp(in.role), in.slot, in.slot + in.bytes, true});
        break;
      case Op::kCtxSwitch:
        break;
    }
    return r;
  }

  bool conflicts(std::size_t older, std::size_t newer) const {
    const bool store_started = ins(older).op == Op::kStore && state_[older] == St::kStarted;
    for (const Res& a : res_[older]) {
      // A started STORE has already copied its scratchpad data out.
      if (store_started && a.space != kDram) continue;
      for (const Res& b : res_[newer]) {
        if (a.space != b.space || !(a.write || b.write)) continue;
        if (a.lo < b.hi && b.lo < a.hi) return true;
      }
    }
    return false;
  }

  bool can_start(std::size_t k) const {
    for (std::size_t a : active_) {
      if (a >= k) break;
      if (conflicts(a, k)) return false;
    }
    return true;
  }

  // ---- functional helpers ----------------------------------------------

  void mark(TensorRole role, int64_t slot, int64_t count) {
    auto ri = role_index(role);
    auto lo = static_cast<std::size_t>(slot / 4);
    for (std::size_t e = lo; e < lo + static_cast<std::size_t>(count); ++e) {
      secret_[ri][e] = 1;
      ever_[ri][e] = 1;
    }
  }

  void complete_load(std::size_t k) {
    const Instruction& in = ins(k);
    const TileRef& t = tile_of(in);
    const LayerSpec& l = layer_of(t);
    auto& sp = spad_[role_index(in.role)];
    const int64_t base = in.slot / 4;
    for_each_element(l, t.box, in.role, p_.amap.base(t.layer, in.role), [&](int64_t pk, int64_t a) {
      sp[static_cast<std::size_t>(base + pk)] = mem_[static_cast<std::size_t>(a / 4)];
    });
    mark(in.role, in.slot, in.bytes / 4);
    stats_.activity.spad_writes += in.bytes / 4;
    retire(k);
  }

  void complete_forward(std::size_t k) {
    const Instruction& in = ins(k);
    const Instruction* s = p_.find(in.src);
    const TileRef& t = tile_of(in);
    const TileRef& st = tile_of(*s);
    const LayerSpec& l = layer_of(t);
    const LayerSpec& pl = layer_of(st);
    const int64_t base = p_.amap.base(t.layer, TensorRole::kIfmap);
    const int64_t ox = pl.out_x();
    const int64_t oy = pl.out_y();
    auto& dst = spad_[role_index(TensorRole::kIfmap)];
    const auto& src = spad_[role_index(TensorRole::kOfmap)];
    for_each_element(l, t.box, TensorRole::kIfmap, base, [&](int64_t pk, int64_t a) {
      int64_t e = (a - base) / 4;
      int64_t y = e % oy;
      int64_t x = (e / oy) % ox;
      int64_t kk = (e / (oy * ox)) % pl.K;
      int64_t n = e / (oy * ox * pl.K);
      const TileBox& b = st.box;
      int64_t idx = (((n - b.lo_of(Dim::N)) * b.len(Dim::K) + (kk - b.lo_of(Dim::K))) *
                         b.len(Dim::X) +
                     (x - b.lo_of(Dim::X))) *
                        b.len(Dim::Y) +
                    (y - b.lo_of(Dim::Y));
      dst[static_cast<std::size_t>(in.slot / 4 + pk)] = src[static_cast<std::size_t>(s->slot / 4 + idx)];
    });
    mark(TensorRole::kIfmap, in.slot, in.bytes / 4);
    stats_.activity.spad_reads += in.bytes / 4;
    stats_.activity.spad_writes += in.bytes / 4;
    forward_running_ = -1;
    retire(k);
  }

  void complete_gemm(std::size_t k) {
    const Instruction& in = ins(k);
    const TileRef& t = tile_of(in);
    const LayerSpec& l = layer_of(t);
    const TileBox& b = t.box;
    const auto& ifm = spad_[role_index(TensorRole::kIfmap)];
    const auto& wgt = spad_[role_index(TensorRole::kWeight)];
    auto& ofm = spad_[role_index(TensorRole::kOfmap)];
    const int64_t ib = in.slots[TensorRole::kIfmap] / 4;
    const int64_t wb = in.slots[TensorRole::kWeight] / 4;
    const int64_t ob = in.slots[TensorRole::kOfmap] / 4;
    const int64_t nt = b.len(Dim::N), kt = b.len(Dim::K), ct = b.len(Dim::C);
    const int64_t rt = b.len(Dim::R), st = b.len(Dim::S), xt = b.len(Dim::X), yt = b.len(Dim::Y);
    const int64_t wx = ifmap_window_rows(l, b);
    const int64_t wy = ifmap_window_cols(l, b);
    for (int64_t n = 0; n < nt; ++n)
      for (int64_t kk = 0; kk < kt; ++kk)
        for (int64_t x = 0; x < xt; ++x)
          for (int64_t y = 0; y < yt; ++y) {
            auto oi = static_cast<std::size_t>(ob + ((n * kt + kk) * xt + x) * yt + y);
            uint32_t acc = in.accumulate ? static_cast<uint32_t>(ofm[oi]) : 0u;
            for (int64_t c = 0; c < ct; ++c)
              for (int64_t r = 0; r < rt; ++r)
                for (int64_t s = 0; s < st; ++s) {
                  auto a = ifm[static_cast<std::size_t>(
                      ib + ((n * ct + c) * wx + x * l.stride + r) * wy + y * l.stride + s)];
                  auto w = wgt[static_cast<std::size_t>(wb + ((kk * ct + c) * rt + r) * st + s)];
                  acc += static_cast<uint32_t>(a) * static_cast<uint32_t>(w);
                }
            ofm[oi] = static_cast<int32_t>(acc);
          }
    const int64_t m = nt * xt * yt;
    const int64_t kd = ct * rt * st;
    stats_.activity.macs += m * kd * kt;
    stats_.activity.spad_reads += m * kd + kd * kt;
    stats_.activity.spad_writes += m * kt;
    mark(TensorRole::kOfmap, in.slots[TensorRole::kOfmap], m * kt);
    gemm_running_ = -1;
    retire(k);
  }

  void complete_store(std::size_t si) {
    StoreState& s = stores_[si];
    const Instruction& in = ins(s.instr);
    const TileRef& t = tile_of(in);
    const LayerSpec& l = layer_of(t);
    for_each_element(l, t.box, TensorRole::kOfmap, p_.amap.base(t.layer, TensorRole::kOfmap),
                     [&](int64_t pk, int64_t a) {
                       mem_[static_cast<std::size_t>(a / 4)] = s.values[static_cast<std::size_t>(pk)];
                     });
    s.values.clear();
    s.values.shrink_to_fit();
    retire(s.instr);
  }

  void zero_range(TensorRole role, int64_t slot, int64_t bytes) {
    auto ri = role_index(role);
    auto lo = static_cast<std::size_t>(slot / 4);
    auto hi = static_cast<std::size_t>((slot + bytes) / 4);
    std::fill(spad_[ri].begin() + static_cast<std::ptrdiff_t>(lo),
              spad_[ri].begin() + static_cast<std::ptrdiff_t>(hi), 0);
    std::fill(secret_[ri].begin() + static_cast<std::ptrdiff_t>(lo),
              secret_[ri].begin() + static_cast<std::ptrdiff_t>(hi), 0);
  }

  void retire(std::size_t k) {
    state_[k] = St::kDone;
    active_.erase(std::lower_bound(active_.begin(), active_.end(), k));
    auto& end = stats_.layer_end_cycles[static_cast<std::size_t>(ins(k).layer)];
    end = std::max(end, now_ + 1);
    dirty_ = true;
  }

  // ---- event handling ---------------------------------------------------

  void handle(const Event& e, int64_t t) {
    now_ = t;
    dirty_ = true;
    switch (e.kind) {
      case Ev::kReadArrival: {
        LoadState& ld = loads_[static_cast<std::size_t>(e.a)];
        BlockState& blk = ld.blocks[static_cast<std::size_t>(e.b)];
        if (e.flag) {
          blk.integrity_at = std::max(blk.integrity_at, t);
        } else {
          Rational start = std::max(Rational(t), crypto_free_);
          Rational done = start + Rational(hw_.burst_bytes) / hw_.crypto_bw;
          crypto_free_ = done;
          blk.data_done = std::max(blk.data_done, done);
        }
        if (--blk.pending == 0) {
          int64_t verified = std::max(ceil_rational(blk.data_done), blk.integrity_at) +
                             hw_.crypto_pipeline_depth;
          push_event(Event{std::max(verified, t + 1), 0, Ev::kBlockRelease, e.a, e.b, false});
        }
        break;
      }
      case Ev::kBlockRelease: {
        LoadState& ld = loads_[static_cast<std::size_t>(e.a)];
        port_busy_[role_index(ins(ld.instr).role)] = true;
        if (--ld.remaining == 0) complete_load(ld.instr);
        break;
      }
      case Ev::kGemmDone:
        complete_gemm(static_cast<std::size_t>(e.a));
        break;
      case Ev::kForwardDone:
        complete_forward(static_cast<std::size_t>(e.a));
        break;
      case Ev::kWriteDone: {
        StoreState& s = stores_[static_cast<std::size_t>(e.a)];
        if (++s.written == s.bursts) complete_store(static_cast<std::size_t>(e.a));
        break;
      }
      case Ev::kCtxDone:
        ctx_busy_ = false;
        retire(static_cast<std::size_t>(e.a));
        ++next_;
        break;
    }
  }

  // ---- shaper -----------------------------------------------------------

  void shaper_tick(int64_t t) {
    now_ = t;
    if (!read_q_.empty()) {
      ReadBurst b = read_q_.front();
      read_q_.pop_front();
      stats_.bandwidth.read.push_back(1);
      ++stats_.real_read_bursts;
      if (b.integrity) {
        ++stats_.integrity_read_bursts;
      } else {
        ++stats_.data_read_bursts;
      }
      push_event(Event{t + hw_.dram_latency, 0, Ev::kReadArrival, b.load, b.block,
                       b.integrity || b.redundant});
      dirty_ = true;
    } else {
      stats_.bandwidth.read.push_back(0);
      ++stats_.fake_read_bursts;
    }
    if (!write_q_.empty()) {
      int64_t s = write_q_.front();
      write_q_.pop_front();
      stats_.bandwidth.write.push_back(1);
      ++stats_.real_write_bursts;
      push_event(Event{t + hw_.dram_latency, 0, Ev::kWriteDone, s, 0, false});
      dirty_ = true;
    } else {
      stats_.bandwidth.write.push_back(0);
      ++stats_.fake_write_bursts;
    }
  }

  void fill_fake_ticks(int64_t t, int64_t next) {
    // Ticks strictly between t and next see empty demand queues.
    for (int64_t tick = (t / interval_ + 1) * interval_; tick < next; tick += interval_) {
      stats_.bandwidth.read.push_back(0);
      stats_.bandwidth.write.push_back(0);
      ++stats_.fake_read_bursts;
      ++stats_.fake_write_bursts;
    }
  }

  // ---- units ------------------------------------------------------------

  void start(std::size_t k) {
    state_[k] = St::kStarted;
    dirty_ = true;
  }

  void run_units(int64_t t) {
    now_ = t;
    const auto depth = static_cast<std::size_t>(hw_.demand_queue_depth);

    // Load unit: one instruction in its issue stage at a time.
    if (issuing_ < 0 && forward_running_ < 0 && !load_q_.empty() && can_start(load_q_.front())) {
      std::size_t k = load_q_.front();
      load_q_.pop_front();
      start(k);
      const Instruction& in = ins(k);
      if (in.op == Op::kForward) {
        forward_running_ = static_cast<int64_t>(k);
        push_event(Event{t + std::max<int64_t>(1, ceil_div(in.bytes, kLineBytes)), 0,
                         Ev::kForwardDone, static_cast<int64_t>(k), 0, false});
      } else {
        const TileRef& tr = tile_of(in);
        auto fetches = tile_fetches(layer_of(tr), tr.box, in.role,
                                    p_.h[static_cast<std::size_t>(tr.layer)], p_.amap, tr.layer,
                                    trace_options(hw_));
        std::vector<MemTraceEntry> order;
        LoadState ld;
        ld.instr = k;
        const auto li = static_cast<int64_t>(loads_.size());
        for (std::size_t b = 0; b < fetches.size(); ++b) {
          const auto& f = fetches[b];
          BlockState bs;
          bs.pending = static_cast<int64_t>(f.demand.size() + f.redundant.size() + f.integrity.size());
          ld.blocks.push_back(bs);
          auto bi = static_cast<int64_t>(b);
          ld.bursts.push_back({li, bi, false, false});
          for (std::size_t r = 0; r < f.redundant.size(); ++r) ld.bursts.push_back({li, bi, false, true});
          for (std::size_t r = 0; r < f.integrity.size(); ++r) ld.bursts.push_back({li, bi, true, false});
          for (std::size_t r = 1; r < f.demand.size(); ++r) ld.bursts.push_back({li, bi, false, false});
        }
        ld.remaining = static_cast<int64_t>(ld.blocks.size());
        loads_.push_back(std::move(ld));
        issuing_ = li;
        if (loads_.back().remaining == 0) {
          issuing_ = -1;
          complete_load(k);
        }
      }
    }
    throttled_ = false;
    if (issuing_ >= 0) {
      LoadState& ld = loads_[static_cast<std::size_t>(issuing_)];
      while (ld.pushed < ld.bursts.size() && read_q_.size() < depth) {
        read_q_.push_back(ld.bursts[ld.pushed++]);
        dirty_ = true;
      }
      if (ld.pushed == ld.bursts.size()) {
        issuing_ = -1;
      } else {
        throttled_ = true;
      }
    }

    // PE array.
    if (gemm_running_ < 0 && !gemm_q_.empty() && can_start(gemm_q_.front())) {
      std::size_t k = gemm_q_.front();
      gemm_q_.pop_front();
      start(k);
      gemm_running_ = static_cast<int64_t>(k);
      const TileBox& b = tile_of(ins(k)).box;
      GemmShape g{b.len(Dim::N) * b.len(Dim::X) * b.len(Dim::Y),
                  b.len(Dim::C) * b.len(Dim::R) * b.len(Dim::S), b.len(Dim::K)};
      push_event(Event{t + std::max<int64_t>(1, compute_cycles(g, hw_)), 0, Ev::kGemmDone,
                       static_cast<int64_t>(k), 0, false});
      port_busy_[role_index(TensorRole::kOfmap)] = true;
    }

    // Store unit: encrypt, then hand bursts to the write shaper.
    if (store_stage_ < 0 && !store_q_.empty() && can_start(store_q_.front())) {
      std::size_t k = store_q_.front();
      store_q_.pop_front();
      start(k);
      const Instruction& in = ins(k);
      const TileRef& tr = tile_of(in);
      const LayerSpec& l = layer_of(tr);
      StoreState s;
      s.instr = k;
      const auto& of = spad_[role_index(TensorRole::kOfmap)];
      s.values.assign(of.begin() + in.slot / 4, of.begin() + (in.slot + in.bytes) / 4);
      const int64_t h = p_.h[static_cast<std::size_t>(tr.layer)];
      auto lines = tile_lines(l, tr.box, TensorRole::kOfmap, p_.amap.base(tr.layer, TensorRole::kOfmap));
      // Lines are encrypted one after another on the shared crypto unit and
      // become sendable as they leave its pipeline; a block's MAC follows its
      // last line.
      const Rational per_line = Rational(hw_.burst_bytes) / hw_.crypto_bw;
      for (std::size_t i = 0; i < lines.size(); ++i) {
        Rational done = std::max(Rational(t), crypto_free_) + per_line;
        crypto_free_ = done;
        int64_t ready = ceil_rational(done) + hw_.crypto_pipeline_depth;
        s.ready_at.push_back(ready);
        if (i + 1 == lines.size() || lines[i + 1] / h != lines[i] / h) s.ready_at.push_back(ready);
      }
      s.bursts = static_cast<int64_t>(s.ready_at.size());
      stats_.activity.spad_reads += in.bytes / 4;
      stats_.activity.crypto_blocks += static_cast<int64_t>(lines.size());
      stores_.push_back(std::move(s));
      store_stage_ = static_cast<int64_t>(stores_.size()) - 1;
    }
    if (store_stage_ >= 0) {
      StoreState& s = stores_[static_cast<std::size_t>(store_stage_)];
      while (s.pushed < s.bursts && t >= s.ready_at[static_cast<std::size_t>(s.pushed)] &&
             write_q_.size() < depth) {
        write_q_.push_back(store_stage_);
        ++s.pushed;
        dirty_ = true;
      }
      if (s.pushed == s.bursts) {
        store_stage_ = -1;
      } else if (t >= s.ready_at[static_cast<std::size_t>(s.pushed)]) {
        throttled_ = true;
      }
    }

    // Zeroizer: uses the role's write port only when the datapath leaves it idle.
    if (zero_active_ < 0 && !zero_q_.empty() && can_start(zero_q_.front())) {
      std::size_t k = zero_q_.front();
      zero_q_.pop_front();
      start(k);
      zero_active_ = static_cast<int64_t>(k);
      zero_left_ = ins(k).bytes;
    }
    if (zero_active_ >= 0) {
      const Instruction& z = ins(static_cast<std::size_t>(zero_active_));
      if (!port_busy_[role_index(z.role)]) {
        zero_left_ -= hw_.zeroize_bytes_per_cycle;
        dirty_ = true;
        if (zero_left_ <= 0) {
          zero_range(z.role, z.slot, z.bytes);
          stats_.zeroize_instr_bytes += z.bytes;
          auto k = static_cast<std::size_t>(zero_active_);
          zero_active_ = -1;
          retire(k);
        }
      }
    }
  }

  // ---- decoder ----------------------------------------------------------

  void decode(int64_t t) {
    now_ = t;
    if (next_ >= n_ || ctx_busy_) return;
    const Instruction& in = ins(next_);
    if (in.op == Op::kCtxSwitch) {
      if (!active_.empty()) return;
      context_switch(t);
      return;
    }
    std::deque<std::size_t>* q = nullptr;
    int64_t cap = 0;
    switch (in.op) {
      case Op::kLoad:
      case Op::kForward:
        q = &load_q_;
        cap = kLoadQueueDepth;
        break;
      case Op::kGemm:
        q = &gemm_q_;
        cap = kGemmQueueDepth;
        break;
      case Op::kStore:
        q = &store_q_;
        cap = kStoreQueueDepth;
        break;
      case Op::kZeroize:
        q = &zero_q_;
        cap = static_cast<std::size_t>(hw_.zeroize_queue_depth);
        break;
      case Op::kCtxSwitch:
        break;
    }
    if (static_cast<int64_t>(q->size()) >= cap) {
      decode_blocked_ = true;
      return;
    }
    decode_blocked_ = false;
    res_[next_] = resources(in);
    state_[next_] = St::kQueued;
    q->push_back(next_);
    active_.push_back(next_);
    ++next_;
    dirty_ = true;
  }

  void context_switch(int64_t t) {
    ContextSwitchRecord rec;
    rec.cycle = t;
    rec.layer = ins(next_).layer;
    for (TensorRole r : kAllRoles) {
      auto ri = role_index(r);
      for (uint8_t s : secret_[ri]) rec.zeroized_bytes += s ? 4 : 0;
      zero_range(r, 0, p_.spad_bytes[r] / 4 * 4);
      for (std::size_t e = 0; e < spad_[ri].size(); ++e)
        if (ever_[ri][e] && spad_[ri][e] != 0) rec.residual_secret += 4;
    }
    stats_.context_switches.push_back(rec);
    state_[next_] = St::kStarted;
    active_.push_back(next_);
    ctx_busy_ = true;
    int64_t cycles = std::max<int64_t>(1, ceil_div(rec.zeroized_bytes, hw_.zeroize_bytes_per_cycle));
    push_event(Event{t + cycles, 0, Ev::kCtxDone, static_cast<int64_t>(next_), 0, false});
    dirty_ = true;
  }

  // ---- bookkeeping --------------------------------------------------------

  bool finished() const { return next_ >= n_ && active_.empty() && events_.empty(); }

  int64_t next_interesting(int64_t t) const {
    int64_t next = kNever;
    if (!events_.empty()) next = std::min(next, events_.top().time);
    if (!read_q_.empty() || !write_q_.empty()) next = std::min(next, (t / interval_ + 1) * interval_);
    if (zero_active_ >= 0) next = std::min(next, t + 1);
    if (store_stage_ >= 0) {
      const StoreState& s = stores_[static_cast<std::size_t>(store_stage_)];
      int64_t ready = s.ready_at[static_cast<std::size_t>(s.pushed)];
      if (ready > t) next = std::min(next, ready);
    }
    return next;
  }

  void account_stalls(int64_t t, int64_t next) {
    const int64_t span = next - t;
    if (throttled_) stats_.stall_shaper_throttle += span;
    if (crypto_free_ > Rational(t)) stats_.stall_crypto += span;
    bool blocked = false;
    for (const auto* q : {&load_q_, &gemm_q_, &store_q_, &zero_q_})
      if (!q->empty() && state_[q->front()] == St::kQueued && !can_start(q->front())) blocked = true;
    if (blocked) stats_.stall_dependency += span;
  }

  std::string dump() const {
    std::ostringstream os;
    os << "next instruction " << next_ << "/" << n_ << "; active:";
    for (std::size_t a : active_) os << ' ' << op_name(ins(a).op) << '#' << ins(a).id;
    os << "; queues load=" << load_q_.size() << " gemm=" << gemm_q_.size()
       << " store=" << store_q_.size() << " zeroize=" << zero_q_.size()
       << "; read_q=" << read_q_.size() << " write_q=" << write_q_.size();
    return os.str();
  }

  void finish() {
    const auto& ends = stats_.layer_end_cycles;
    stats_.layer_cycles.resize(ends.size());
    int64_t prev = 0;
    for (std::size_t i = 0; i < ends.size(); ++i) {
      stats_.layer_cycles[i] = std::max<int64_t>(0, ends[i] - prev);
      prev = std::max(prev, ends[i]);
    }
    Activity& a = stats_.activity;
    a.dram_read_bursts = stats_.real_read_bursts;
    a.dram_write_bursts = stats_.real_write_bursts;
    a.crypto_blocks += stats_.data_read_bursts;
    a.fake_bursts = stats_.fake_read_bursts + stats_.fake_write_bursts;
    stats_.energy = energy_of(a, hw_.energy);
  }

  const Program& p_;
  const HardwareConfig& hw_;
  std::size_t n_;
  int64_t interval_ = 1;

  std::vector<int32_t> mem_;
  std::array<std::vector<int32_t>, 3> spad_;
  std::array<std::vector<uint8_t>, 3> secret_;
  std::array<std::vector<uint8_t>, 3> ever_;

  std::vector<St> state_;
  std::vector<std::vector<Res>> res_;
  std::vector<std::size_t> active_;  // dispatched, not retired; ascending
  std::size_t next_ = 0;
  bool ctx_busy_ = false;
  bool decode_blocked_ = false;

  std::deque<std::size_t> load_q_, gemm_q_, store_q_, zero_q_;
  std::deque<ReadBurst> read_q_;
  std::deque<int64_t> write_q_;

  std::vector<LoadState> loads_;
  std::vector<StoreState> stores_;
  int64_t issuing_ = -1;
  int64_t forward_running_ = -1;
  int64_t gemm_running_ = -1;
  int64_t store_stage_ = -1;
  int64_t zero_active_ = -1;
  int64_t zero_left_ = 0;
  bool throttled_ = false;
  Rational crypto_free_{0};

  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> events_;
  int64_t seq_ = 0;
  int64_t now_ = 0;
  bool dirty_ = false;
  std::array<bool, 3> port_busy_{};

  SimStats stats_;
};

}  // namespace

SimResult simulate(const Program& program, const HardwareConfig& hw, const Rational& bw,
                   const ModelData& data) {
  if (bw <= 0) throw SimulationError("shaper bandwidth must be > 0");
  if (auto v = validate_program(program)) throw SimulationError("invalid program: " + v->message);
  if (data.weights.size() != program.model.size() || data.ifmaps.size() != program.model.size())
    throw SimulationError("model data does not match the program's model");
  return Simulator(program, hw, bw, data).run();
}

std::vector<BandwidthTick> bandwidth_trace(const SimStats& s) {
  std::vector<BandwidthTick> out;
  const auto& b = s.bandwidth;
  out.reserve(b.read.size() + b.write.size());
  for (std::size_t j = 0; j < b.read.size(); ++j) {
    int64_t cycle = static_cast<int64_t>(j) * b.interval;
    out.push_back({cycle, 'R', b.read[j] != 0});
    if (j < b.write.size()) out.push_back({cycle, 'W', b.write[j] != 0});
  }
  return out;
}

bool bandwidth_is_constant(const SimStats& s) {
  const auto& b = s.bandwidth;
  if (b.interval < 1 || b.read.size() != b.write.size()) return false;
  const auto expected = static_cast<std::size_t>(ceil_div(s.total_cycles, b.interval));
  if (b.read.size() != expected) return false;
  int64_t real_r = 0;
  int64_t real_w = 0;
  for (std::size_t j = 0; j < b.read.size(); ++j) {
    if (b.read[j] > 1 || b.write[j] > 1) return false;
    real_r += b.read[j];
    real_w += b.write[j];
  }
  return real_r == s.real_read_bursts && real_w == s.real_write_bursts &&
         static_cast<int64_t>(b.read.size()) - real_r == s.fake_read_bursts &&
         static_cast<int64_t>(b.write.size()) - real_w == s.fake_write_bursts;
}

std::string stats_to_json(const SimStats& s, int indent) {
  nlohmann::ordered_json j;
  j["total_cycles"] = s.total_cycles;
  j["layer_cycles"] = s.layer_cycles;
  j["layer_end_cycles"] = s.layer_end_cycles;
  j["shaper_interval"] = s.bandwidth.interval;
  j["real_read_bursts"] = s.real_read_bursts;
  j["real_write_bursts"] = s.real_write_bursts;
  j["fake_read_bursts"] = s.fake_read_bursts;
  j["fake_write_bursts"] = s.fake_write_bursts;
  j["data_read_bursts"] = s.data_read_bursts;
  j["integrity_read_bursts"] = s.integrity_read_bursts;
  j["stall_cycles"] = {{"shaper_throttle", s.stall_shaper_throttle},
                       {"crypto", s.stall_crypto},
                       {"dependency", s.stall_dependency}};
  j["zeroize_instr_bytes"] = s.zeroize_instr_bytes;
  auto cs = nlohmann::ordered_json::array();
  for (const auto& c : s.context_switches)
    cs.push_back({{"cycle", c.cycle},
                  {"layer", c.layer},
                  {"zeroized_bytes", c.zeroized_bytes},
                  {"residual_secret_bytes", c.residual_secret}});
  j["context_switches"] = cs;
  const Activity& a = s.activity;
  j["activity"] = {{"macs", a.macs},
                   {"spad_reads", a.spad_reads},
                   {"spad_writes", a.spad_writes},
                   {"dram_read_bursts", a.dram_read_bursts},
                   {"dram_write_bursts", a.dram_write_bursts},
                   {"crypto_blocks", a.crypto_blocks},
                   {"fake_bursts", a.fake_bursts}};
  j["energy"] = s.energy;
  return j.dump(indent);
}

SimStats stats_from_json(const std::string& text) {
  SimStats s;
  try {
    auto j = nlohmann::json::parse(text);
    s.total_cycles = j.at("total_cycles").get<int64_t>();
    s.layer_cycles = j.at("layer_cycles").get<std::vector<int64_t>>();
    s.layer_end_cycles = j.at("layer_end_cycles").get<std::vector<int64_t>>();
    s.bandwidth.interval = j.at("shaper_interval").get<int64_t>();
    s.real_read_bursts = j.at("real_read_bursts").get<int64_t>();
    s.real_write_bursts = j.at("real_write_bursts").get<int64_t>();
    s.fake_read_bursts = j.at("fake_read_bursts").get<int64_t>();
    s.fake_write_bursts = j.at("fake_write_bursts").get<int64_t>();
    s.data_read_bursts = j.at("data_read_bursts").get<int64_t>();
    s.integrity_read_bursts = j.at("integrity_read_bursts").get<int64_t>();
    const auto& st = j.at("stall_cycles");
    s.stall_shaper_throttle = st.at("shaper_throttle").get<int64_t>();
    s.stall_crypto = st.at("crypto").get<int64_t>();
    s.stall_dependency = st.at("dependency").get<int64_t>();
    s.zeroize_instr_bytes = j.at("zeroize_instr_bytes").get<int64_t>();
    for (const auto& c : j.at("context_switches"))
      s.context_switches.push_back({c.at("cycle").get<int64_t>(), c.at("layer").get<int>(),
                                    c.at("zeroized_bytes").get<int64_t>(),
                                    c.at("residual_secret_bytes").get<int64_t>()});
    const auto& a = j.at("activity");
    s.activity.macs = a.at("macs").get<int64_t>();
    s.activity.spad_reads = a.at("spad_reads").get<int64_t>();
    s.activity.spad_writes = a.at("spad_writes").get<int64_t>();
    s.activity.dram_read_bursts = a.at("dram_read_bursts").get<int64_t>();
    s.activity.dram_write_bursts = a.at("dram_write_bursts").get<int64_t>();
    s.activity.crypto_blocks = a.at("crypto_blocks").get<int64_t>();
    s.activity.fake_bursts = a.at("fake_bursts").get<int64_t>();
    s.energy = j.at("energy").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("simulation stats: ") + e.what());
  }
  return s;
}

void write_bandwidth_csv(std::ostream& os, const SimStats& s) {
  os << "tick,direction,kind\n";
  for (const auto& t : bandwidth_trace(s))
    os << t.cycle << ',' << (t.direction == 'R' ? "read" : "write") << ','
       << (t.real ? "real" : "fake") << '\n';
}

void write_blob(std::ostream& os, const std::vector<int32_t>& values) {
  for (int32_t v : values) {
    auto u = static_cast<uint32_t>(v);
    const char b[4] = {static_cast<char>(u & 0xff), static_cast<char>((u >> 8) & 0xff),
                       static_cast<char>((u >> 16) & 0xff), static_cast<char>((u >> 24) & 0xff)};
    os.write(b, 4);
  }
}

std::vector<int32_t> read_blob(std::istream& is) {
  std::vector<int32_t> out;
  unsigned char b[4];
  while (is.read(reinterpret_cast<char*>(b), 4)) {
    uint32_t u = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
                 (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    out.push_back(static_cast<int32_t>(u));
  }
  return out;
}

}  // namespace secmap
