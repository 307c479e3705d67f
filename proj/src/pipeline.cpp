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

#include "secmap/pipeline.hpp"

#include <exception>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "secmap/parallel.hpp"

namespace secmap {

using json = nlohmann::ordered_json;

namespace {

constexpr int kArtifactVersion = 1;

json rational_json(const Rational& r) { return {{"num", r.numerator()}, {"den", r.denominator()}}; }

Rational rational_from(const json& j) {
  int64_t den = j.at("den").get<int64_t>();
  if (den <= 0) throw ParseError("rational with non-positive denominator");
  return Rational(j.at("num").get<int64_t>(), den);
}

json mapping_json(const Mapping& m) {
  json tiles = json::object();
  for (Dim d : kAllDims) tiles[std::string(1, dim_symbol(d))] = m.tile_of(d);
  return {{"tiles", tiles}, {"loop_order", m.order_string()}};
}

Mapping mapping_from(const json& j) {
  Mapping m;
  const auto& tiles = j.at("tiles");
  for (Dim d : kAllDims) m.tile_of(d) = tiles.at(std::string(1, dim_symbol(d))).get<int64_t>();
  return parse_loop_order(m, j.at("loop_order").get<std::string>());
}

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": malformed JSON: " + e.what());
  }
}

void check_format(const json& j, const char* format) {
  if (!j.is_object() || j.value("format", std::string()) != format)
    throw ParseError(std::string("expected a '") + format + "' artifact");
  if (j.value("version", 0) != kArtifactVersion)
    throw ParseError(std::string(format) + ": unsupported version");
}

// Runs body(i) for i in [0, n) across workers and rethrows the first error in
// index order.
template <typename F>
void parallel_for(int64_t n, bool parallel, F&& body) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic) num_threads(worker_count()) if (parallel)
  for (int64_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<Mapping> chosen_mappings(const OptionTable& table, const std::vector<int>& choices,
                                     std::vector<int64_t>& h) {
  std::vector<Mapping> maps;
  h.clear();
  for (std::size_t l = 0; l < table.size(); ++l) {
    const LayerOption& o = table[l][static_cast<std::size_t>(choices[l])];
    maps.push_back(o.mapping);
    h.push_back(o.h_opt);
  }
  return maps;
}

json pass_report_json(const PassReport& r) {
  return {{"promoted_loads", r.promoted_loads},
          {"zeroizes_inserted", r.zeroizes_inserted},
          {"forwards", r.forwards}};
}

json program_stats_json(const ProgramStats& s) {
  return {{"loads", s.loads},     {"stores", s.stores},     {"gemms", s.gemms},
          {"zeroizes", s.zeroizes}, {"forwards", s.forwards}, {"ctx_switches", s.ctx_switches}};
}

int64_t ctx_zeroize_bytes(const SimStats& s) {
  int64_t total = 0;
  for (const auto& c : s.context_switches) total += c.zeroized_bytes;
  return total;
}

std::string csv_number(double v) { return json(v).dump(); }

}  // namespace

void finalize_config(RunConfig& cfg) {
  validate_model(cfg.model);
  validate_hardware(cfg.hw);
  cfg.ga.seed = cfg.seed;
  cfg.sa.seed = cfg.seed;
  validate_ga_params(cfg.ga);
  if (cfg.sa.iterations < 1) throw ValidationError("iterations must be >= 1");
  if (cfg.sa.m < 1) throw ValidationError("m must be >= 1");
  validate_pass_flags(cfg.flags);
}

LayerOption make_option(const ModelSpec& model, int layer_index, const Mapping& mapping,
                        const HardwareConfig& hw, const AddressMap& amap, int64_t h,
                        AuthChoice* auth) {
  const LayerSpec& layer = model.layers[static_cast<std::size_t>(layer_index)];
  validate_mapping(layer, mapping);
  LayerOption o;
  o.mapping = mapping;
  o.cost = estimate_layer(layer, mapping, hw, hw.crypto_bw);
  TraceCounts counts;
  if (h > 0) {
    if (!is_valid_authblock(h)) throw ValidationError("invalid AuthBlock size " + std::to_string(h));
    counts = traffic_at(layer, mapping, hw, amap, layer_index, h);
    o.h_opt = h;
  } else {
    AuthChoice a = optimal_authblock(layer, mapping, hw, amap, layer_index, false);
    counts = a.counts;
    o.h_opt = a.h_opt;
    if (auth) *auth = std::move(a);
  }
  o.cost.n_demand = counts.n_demand;
  o.cost.n_redundant = counts.n_redundant;
  o.cost.n_integrity = counts.n_integrity;
  o.plan = size_bandwidth(o.cost, hw);
  return o;
}

ExploreArtifact run_explore(const RunConfig& cfg) {
  const ModelSpec& model = cfg.model;
  std::vector<ExploreResult> results = explore_model(model, cfg.hw, cfg.ga, true);
  std::vector<TopK> topk = select_all(results);
  const AddressMap amap = build_address_map(model);

  ExploreArtifact out;
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t l = 0; l < model.size(); ++l) {
    ExploreLayer el;
    el.name = model.layers[l].name;
    el.generations = results[l].generations;
    el.first_generation_best = results[l].first_generation_best.mapping;
    el.options.resize(topk[l].mappings.size());
    el.auth.resize(topk[l].mappings.size());
    for (std::size_t j = 0; j < el.options.size(); ++j) jobs.emplace_back(l, j);
    out.layers.push_back(std::move(el));
  }
  parallel_for(static_cast<int64_t>(jobs.size()), true, [&](int64_t i) {
    auto [l, j] = jobs[static_cast<std::size_t>(i)];
    out.layers[l].options[j] =
        make_option(model, static_cast<int>(l), topk[l].mappings[j].mapping, cfg.hw, amap, 0,
                    &out.layers[l].auth[j]);
  });
  return out;
}

OptionTable option_table(const ExploreArtifact& explore) {
  OptionTable t;
  for (const auto& l : explore.layers) t.push_back(l.options);
  return t;
}

std::vector<ModelMapping> run_anneal(const RunConfig& cfg, const ExploreArtifact& explore) {
  return top_m(option_table(explore), cfg.hw, cfg.sa, cfg.flags.multi_tenant, true);
}

CandidateProfile profile_mapping(const RunConfig& cfg, const std::vector<Mapping>& mappings,
                                 const std::vector<int64_t>& h, const Rational& bw,
                                 const PassFlags& flags, const std::string& label,
                                 const ModelData& data,
                                 const std::vector<std::vector<int32_t>>& golden) {
  Program base = lower(cfg.model, mappings, h, cfg.hw, flags.multi_tenant);
  CandidateProfile cp;
  Program prog = apply_passes(base, flags, &cp.passes);
  cp.passes.free_list.clear();
  cp.program = program_stats(prog);
  SimResult r = simulate(prog, cfg.hw, bw, data);
  for (std::size_t l = 0; l < golden.size(); ++l)
    if (r.ofmaps[l] != golden[l])
      throw SimulationError(label + ": layer '" + cfg.model.layers[l].name +
                            "' ofmap differs from the reference convolution");
  if (!bandwidth_is_constant(r.stats))
    throw SimulationError(label + ": shaper bandwidth was not constant");
  cp.stats = std::move(r.stats);
  return cp;
}

ProfileArtifact run_profile(const RunConfig& cfg, const ExploreArtifact& explore,
                            const std::vector<ModelMapping>& topm) {
  if (topm.empty()) throw ValidationError("no candidates to profile");
  const OptionTable table = option_table(explore);
  const ModelData data = random_model_data(cfg.model, cfg.seed);
  const auto golden = golden_execute(cfg.model, data);
  ProfileArtifact out;
  out.candidates.resize(topm.size());
  parallel_for(static_cast<int64_t>(topm.size()), true, [&](int64_t j) {
    std::vector<int64_t> h;
    auto maps = chosen_mappings(table, topm[static_cast<std::size_t>(j)].choices, h);
    CandidateProfile cp =
        profile_mapping(cfg, maps, h, topm[static_cast<std::size_t>(j)].model_bw, cfg.flags,
                        "candidate " + std::to_string(j), data, golden);
    cp.index = static_cast<int>(j);
    cp.mapping = topm[static_cast<std::size_t>(j)];
    out.candidates[static_cast<std::size_t>(j)] = std::move(cp);
  });
  for (std::size_t j = 1; j < out.candidates.size(); ++j) {
    const SimStats& a = out.candidates[j].stats;
    const SimStats& b = out.candidates[static_cast<std::size_t>(out.optimal)].stats;
    if (a.total_cycles < b.total_cycles || (a.total_cycles == b.total_cycles && a.energy < b.energy))
      out.optimal = static_cast<int>(j);
  }
  return out;
}

ReportRow report_row(const std::string& name, const SimStats& s) {
  ReportRow r;
  r.name = name;
  r.latency = s.total_cycles;
  r.energy = s.energy;
  r.real_bursts = s.real_read_bursts + s.real_write_bursts;
  r.fake_bursts = s.fake_read_bursts + s.fake_write_bursts;
  const int64_t all = r.real_bursts + r.fake_bursts;
  r.fake_fraction = all > 0 ? static_cast<double>(r.fake_bursts) / static_cast<double>(all) : 0.0;
  r.ctx_zeroize_bytes = ctx_zeroize_bytes(s);
  r.zeroize_instr_bytes = s.zeroize_instr_bytes;
  return r;
}

std::vector<ReportRow> run_report(const RunConfig& cfg, const ExploreArtifact& explore,
                                  const std::vector<ModelMapping>& topm,
                                  const ProfileArtifact& profile) {
  if (topm.empty() || profile.candidates.empty())
    throw ValidationError("report needs annealed and profiled candidates");
  const OptionTable table = option_table(explore);
  const ModelData data = random_model_data(cfg.model, cfg.seed);
  const auto golden = golden_execute(cfg.model, data);

  PassFlags none;
  none.multi_tenant = cfg.flags.multi_tenant;
  none.promote_loads = false;
  none.forwarding = false;

  std::vector<Mapping> base_maps;
  for (const auto& l : explore.layers) base_maps.push_back(l.first_generation_best);
  const std::vector<int64_t> h64(explore.layers.size(), 64);
  std::vector<int64_t> h_opt;
  const auto am_maps = chosen_mappings(table, topm.front().choices, h_opt);

  std::vector<SimStats> stats(2);
  parallel_for(2, true, [&](int64_t i) {
    stats[static_cast<std::size_t>(i)] =
        i == 0 ? profile_mapping(cfg, base_maps, h64, cfg.hw.crypto_bursts_per_cycle(), none,
                                 "base_map", data, golden)
                     .stats
               : profile_mapping(cfg, am_maps, h_opt, topm.front().model_bw, none, "AmOpt", data,
                                 golden)
                     .stats;
  });
  std::vector<ReportRow> rows = {
      report_row("base_map", stats[0]), report_row("AmOpt", stats[1]),
      report_row("Obsidian",
                 profile.candidates[static_cast<std::size_t>(profile.optimal)].stats)};
  for (auto& r : rows) {
    r.latency_ratio = static_cast<double>(r.latency) / static_cast<double>(rows[0].latency);
    r.energy_ratio = rows[0].energy > 0 ? r.energy / rows[0].energy : 1.0;
  }
  return rows;
}

std::string mapping_to_string(const Mapping& m) {
  std::string s;
  for (Dim d : kAllDims) {
    if (!s.empty()) s += ',';
    s += dim_symbol(d);
    s += '=' + std::to_string(m.tile_of(d));
  }
  return s + " order=" + m.order_string();
}

std::string explore_to_json(const ExploreArtifact& a) {
  json layers = json::array();
  for (const auto& l : a.layers) {
    json opts = json::array();
    for (const auto& o : l.options)
      opts.push_back({{"mapping", mapping_json(o.mapping)},
                      {"h_opt", o.h_opt},
                      {"latency", o.cost.latency},
                      {"energy", o.cost.energy},
                      {"bound", bound_name(o.plan.bound)},
                      {"n_demand", o.plan.n_d},
                      {"n_redundant", o.plan.n_r},
                      {"n_integrity", o.plan.n_i},
                      {"bw", rational_json(o.plan.bw)},
                      {"interval", o.plan.interval}});
    layers.push_back({{"name", l.name},
                      {"generations", l.generations},
                      {"k", l.options.size()},
                      {"first_generation_best", mapping_json(l.first_generation_best)},
                      {"options", opts}});
  }
  json j = {{"format", "secmap-topk"}, {"version", kArtifactVersion}, {"layers", layers}};
  return j.dump(2) + "\n";
}

std::string authopt_to_json(const ExploreArtifact& a) {
  json layers = json::array();
  for (const auto& l : a.layers) {
    json opts = json::array();
    for (std::size_t j = 0; j < l.auth.size(); ++j) {
      const AuthChoice& c = l.auth[j];
      json table = json::array();
      for (std::size_t i = 0; i < c.per_h.size(); ++i) {
        const TraceCounts& t = c.per_h_counts[i];
        table.push_back({{"h", c.per_h[i].first},
                         {"traffic", c.per_h[i].second},
                         {"n_demand", t.n_demand},
                         {"n_redundant", t.n_redundant},
                         {"n_integrity", t.n_integrity}});
      }
      opts.push_back({{"mapping", mapping_json(l.options[j].mapping)},
                      {"h_opt", c.h_opt},
                      {"mem_traffic", c.mem_traffic},
                      {"per_h", table}});
    }
    layers.push_back({{"name", l.name}, {"options", opts}});
  }
  json j = {{"format", "secmap-authopt"}, {"version", kArtifactVersion}, {"layers", layers}};
  return j.dump(2) + "\n";
}

ExploreArtifact explore_from_json(const std::string& text, const RunConfig& cfg) {
  json j = parse_json(text, "topk");
  check_format(j, "secmap-topk");
  ExploreArtifact a;
  try {
    const auto& layers = j.at("layers");
    if (layers.size() != cfg.model.size())
      throw ParseError("topk: layer count does not match the model; rerun explore");
    const AddressMap amap = build_address_map(cfg.model);
    std::vector<std::pair<std::size_t, std::size_t>> jobs;
    std::vector<std::vector<std::pair<Mapping, int64_t>>> raw(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& lj = layers[l];
      ExploreLayer el;
      el.name = lj.at("name").get<std::string>();
      if (el.name != cfg.model.layers[l].name)
        throw ParseError("topk: layer '" + el.name + "' does not match the model; rerun explore");
      el.generations = lj.at("generations").get<int>();
      el.first_generation_best = mapping_from(lj.at("first_generation_best"));
      for (const auto& oj : lj.at("options")) {
        raw[l].emplace_back(mapping_from(oj.at("mapping")), oj.at("h_opt").get<int64_t>());
        jobs.emplace_back(l, raw[l].size() - 1);
      }
      if (raw[l].empty()) throw ParseError("topk: layer '" + el.name + "' has no options");
      el.options.resize(raw[l].size());
      a.layers.push_back(std::move(el));
    }
    parallel_for(static_cast<int64_t>(jobs.size()), true, [&](int64_t i) {
      auto [l, k] = jobs[static_cast<std::size_t>(i)];
      a.layers[l].options[k] = make_option(cfg.model, static_cast<int>(l), raw[l][k].first, cfg.hw,
                                           amap, raw[l][k].second);
    });
  } catch (const json::exception& e) {
    throw ParseError(std::string("topk: ") + e.what());
  }
  return a;
}

std::string topm_to_json(const std::vector<ModelMapping>& topm) {
  json cands = json::array();
  for (std::size_t r = 0; r < topm.size(); ++r)
    cands.push_back({{"rank", r},
                     {"choices", topm[r].choices},
                     {"model_bw", rational_json(topm[r].model_bw)},
                     {"interval", dispatch_interval(topm[r].model_bw)},
                     {"edp", topm[r].edp}});
  json j = {{"format", "secmap-topm"}, {"version", kArtifactVersion}, {"candidates", cands}};
  return j.dump(2) + "\n";
}

std::vector<ModelMapping> topm_from_json(const std::string& text, const ExploreArtifact& explore) {
  json j = parse_json(text, "topm");
  check_format(j, "secmap-topm");
  std::vector<ModelMapping> out;
  try {
    for (const auto& c : j.at("candidates")) {
      ModelMapping m;
      m.choices = c.at("choices").get<std::vector<int>>();
      m.model_bw = rational_from(c.at("model_bw"));
      m.edp = c.at("edp").get<double>();
      if (m.choices.size() != explore.layers.size())
        throw ParseError("topm: candidate does not match the explored model; rerun anneal");
      for (std::size_t l = 0; l < m.choices.size(); ++l)
        if (m.choices[l] < 0 || m.choices[l] >= static_cast<int>(explore.layers[l].options.size()))
          throw ParseError("topm: choice out of range; rerun anneal");
      if (m.model_bw <= 0) throw ParseError("topm: model bandwidth must be > 0");
      out.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("topm: ") + e.what());
  }
  return out;
}

std::string optimal_to_json(const ProfileArtifact& p) {
  json cands = json::array();
  for (const auto& c : p.candidates) {
    const SimStats& s = c.stats;
    cands.push_back({{"index", c.index},
                     {"choices", c.mapping.choices},
                     {"model_bw", rational_json(c.mapping.model_bw)},
                     {"edp", c.mapping.edp},
                     {"latency", s.total_cycles},
                     {"energy", s.energy},
                     {"passes", pass_report_json(c.passes)},
                     {"program", program_stats_json(c.program)},
                     {"fake_reciprocation",
                      {{"real_read", s.real_read_bursts},
                       {"fake_read", s.fake_read_bursts},
                       {"real_write", s.real_write_bursts},
                       {"fake_write", s.fake_write_bursts}}},
                     {"ctx_zeroize_bytes", ctx_zeroize_bytes(s)},
                     {"zeroize_instr_bytes", s.zeroize_instr_bytes},
                     {"stats", json::parse(stats_to_json(s, -1))}});
  }
  json j = {{"format", "secmap-profile"},
            {"version", kArtifactVersion},
            {"optimal", p.optimal},
            {"candidates", cands}};
  return j.dump(2) + "\n";
}

ProfileArtifact profile_from_json(const std::string& text) {
  json j = parse_json(text, "optimal");
  check_format(j, "secmap-profile");
  ProfileArtifact p;
  try {
    p.optimal = j.at("optimal").get<int>();
    for (const auto& c : j.at("candidates")) {
      CandidateProfile cp;
      cp.index = c.at("index").get<int>();
      cp.mapping.choices = c.at("choices").get<std::vector<int>>();
      cp.mapping.model_bw = rational_from(c.at("model_bw"));
      cp.mapping.edp = c.at("edp").get<double>();
      const auto& pr = c.at("passes");
      cp.passes.promoted_loads = pr.at("promoted_loads").get<int64_t>();
      cp.passes.zeroizes_inserted = pr.at("zeroizes_inserted").get<int64_t>();
      cp.passes.forwards = pr.at("forwards").get<int64_t>();
      const auto& ps = c.at("program");
      cp.program = {ps.at("loads").get<int64_t>(),    ps.at("stores").get<int64_t>(),
                    ps.at("gemms").get<int64_t>(),    ps.at("zeroizes").get<int64_t>(),
                    ps.at("forwards").get<int64_t>(), ps.at("ctx_switches").get<int64_t>()};
      cp.stats = stats_from_json(c.at("stats").dump());
      p.candidates.push_back(std::move(cp));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("optimal: ") + e.what());
  }
  if (p.optimal < 0 || p.optimal >= static_cast<int>(p.candidates.size()))
    throw ParseError("optimal: index out of range");
  return p;
}

std::string report_to_json(const std::vector<ReportRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows)
    arr.push_back({{"name", r.name},
                   {"latency", r.latency},
                   {"energy", r.energy},
                   {"real_bursts", r.real_bursts},
                   {"fake_bursts", r.fake_bursts},
                   {"fake_fraction", r.fake_fraction},
                   {"ctx_zeroize_bytes", r.ctx_zeroize_bytes},
                   {"zeroize_instr_bytes", r.zeroize_instr_bytes},
                   {"latency_ratio", r.latency_ratio},
                   {"energy_ratio", r.energy_ratio}});
  json j = {{"format", "secmap-report"}, {"version", kArtifactVersion}, {"rows", arr}};
  return j.dump(2) + "\n";
}

std::string report_to_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream os;
  os << "name,latency,energy,real_bursts,fake_bursts,fake_fraction,ctx_zeroize_bytes,"
        "zeroize_instr_bytes,latency_ratio,energy_ratio\n";
  for (const auto& r : rows)
    os << r.name << ',' << r.latency << ',' << csv_number(r.energy) << ',' << r.real_bursts << ','
       << r.fake_bursts << ',' << csv_number(r.fake_fraction) << ',' << r.ctx_zeroize_bytes << ','
       << r.zeroize_instr_bytes << ',' << csv_number(r.latency_ratio) << ','
       << csv_number(r.energy_ratio) << '\n';
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace secmap
