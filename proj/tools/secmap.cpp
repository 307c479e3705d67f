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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "secmap/pipeline.hpp"

namespace fs = std::filesystem;
using namespace secmap;

namespace {

// Exit codes.
constexpr int kExitInput = 2;        // malformed or invalid input
constexpr int kExitInfeasible = 3;   // no mapping fits the hardware
constexpr int kExitSimulation = 4;   // functional mismatch, deadlock
constexpr int kExitMissing = 5;      // an earlier stage has not been run

class MissingArtifact : public Error {
 public:
  using Error::Error;
};

struct Options {
  std::string model;
  std::string hw = "edge";
  uint64_t seed = 1;
  std::string out = "out";
  bool multi_tenant = false;
  bool proactive = false;
  bool no_promote = false;
  bool no_forwarding = false;
  int m = 40;
  int iterations = 1000;
  double t_init = 0.0;
  double t_final = 0.0;
  int population = 64;
  int generations = 200;

  // simulate
  std::string program;
  std::string bw = "1/8";
  std::string inputs;
};

void add_run_options(CLI::App* sub, Options& o) {
  sub->add_option("--model", o.model, "Model description JSON")->required()->check(CLI::ExistingFile);
  sub->add_option("--hw", o.hw, "Hardware preset (cloud, edge) or JSON path")->capture_default_str();
  sub->add_option("--seed", o.seed, "Global seed")->capture_default_str();
  sub->add_option("--out", o.out, "Artifact directory")->capture_default_str();
  sub->add_flag("--multi-tenant", o.multi_tenant, "Context switch at every layer boundary");
  sub->add_flag("--proactive-zeroize", o.proactive,
                "Zeroize data after its last use (multi-tenant only; disables promotion)");
  sub->add_flag("--no-promote", o.no_promote, "Disable load promotion");
  sub->add_flag("--no-forwarding", o.no_forwarding, "Disable store-to-load forwarding");
  sub->add_option("--m", o.m, "Annealed candidates kept")->capture_default_str();
  sub->add_option("--iterations", o.iterations, "Annealing iterations")->capture_default_str();
  sub->add_option("--t-init", o.t_init, "Initial temperature (0 = automatic)");
  sub->add_option("--t-final", o.t_final, "Final temperature (0 = automatic)");
  sub->add_option("--population", o.population, "GA population")->capture_default_str();
  sub->add_option("--generations", o.generations, "GA generation cap")->capture_default_str();
}

RunConfig make_config(const Options& o) {
  RunConfig cfg;
  cfg.model = parse_model(o.model);
  cfg.hw = load_hardware(o.hw);
  cfg.seed = o.seed;
  cfg.ga.population = o.population;
  cfg.ga.max_generations = o.generations;
  cfg.sa.m = o.m;
  cfg.sa.iterations = o.iterations;
  cfg.sa.t_init = o.t_init;
  cfg.sa.t_final = o.t_final;
  cfg.flags.multi_tenant = o.multi_tenant;
  cfg.flags.proactive_zeroize = o.proactive;
  cfg.flags.promote_loads = !o.no_promote && !o.proactive;
  cfg.flags.forwarding = !o.no_forwarding;
  finalize_config(cfg);
  return cfg;
}

std::string need(const fs::path& path, const char* stage) {
  if (!fs::exists(path))
    throw MissingArtifact("missing " + path.string() + "; run 'secmap " + stage + "' first");
  return read_text(path);
}

ExploreArtifact do_explore(const RunConfig& cfg, const fs::path& out) {
  ExploreArtifact a = run_explore(cfg);
  write_text(out / "topk.json", explore_to_json(a));
  write_text(out / "authopt.json", authopt_to_json(a));
  for (const auto& l : a.layers) {
    const LayerOption& best = l.options.front();
    std::printf("%-16s k=%-2zu latency=%lld h=%lld %s bw=%lld/%lld\n", l.name.c_str(),
                l.options.size(), static_cast<long long>(best.cost.latency),
                static_cast<long long>(best.h_opt), bound_name(best.plan.bound),
                static_cast<long long>(best.plan.bw.numerator()),
                static_cast<long long>(best.plan.bw.denominator()));
  }
  return a;
}

std::vector<ModelMapping> do_anneal(const RunConfig& cfg, const ExploreArtifact& a,
                                    const fs::path& out) {
  auto topm = run_anneal(cfg, a);
  write_text(out / "topm.json", topm_to_json(topm));
  std::printf("kept %zu candidates, best EDP %.6g at bw %lld/%lld\n", topm.size(), topm.front().edp,
              static_cast<long long>(topm.front().model_bw.numerator()),
              static_cast<long long>(topm.front().model_bw.denominator()));
  return topm;
}

ProfileArtifact do_profile(const RunConfig& cfg, const ExploreArtifact& a,
                           const std::vector<ModelMapping>& topm, const fs::path& out) {
  ProfileArtifact p = run_profile(cfg, a, topm);
  for (const auto& c : p.candidates)
    write_text(out / "profile" / ("candidate_" + std::to_string(c.index) + ".json"),
               stats_to_json(c.stats) + "\n");
  write_text(out / "optimal.json", optimal_to_json(p));

  // The optimal program, for standalone re-simulation.
  const auto& best = p.candidates[static_cast<std::size_t>(p.optimal)];
  OptionTable table = option_table(a);
  std::vector<Mapping> maps;
  std::vector<int64_t> h;
  for (std::size_t l = 0; l < table.size(); ++l) {
    const auto& o = table[l][static_cast<std::size_t>(best.mapping.choices[l])];
    maps.push_back(o.mapping);
    h.push_back(o.h_opt);
  }
  Program prog = apply_passes(lower(cfg.model, maps, h, cfg.hw, cfg.flags.multi_tenant), cfg.flags);
  std::ostringstream os;
  write_program(os, prog);
  write_text(out / "optimal_program.jsonl", os.str());

  std::printf("profiled %zu candidates, optimal #%d: %lld cycles, energy %.6g\n",
              p.candidates.size(), p.optimal, static_cast<long long>(best.stats.total_cycles),
              best.stats.energy);
  return p;
}

void do_report(const RunConfig& cfg, const ExploreArtifact& a, const std::vector<ModelMapping>& topm,
               const ProfileArtifact& p, const fs::path& out) {
  auto rows = run_report(cfg, a, topm, p);
  write_text(out / "report.json", report_to_json(rows));
  write_text(out / "report.csv", report_to_csv(rows));
  std::printf("%-10s %12s %14s %10s %12s %8s\n", "row", "latency", "energy", "fake_frac",
              "ctx_zero_B", "lat_x");
  for (const auto& r : rows)
    std::printf("%-10s %12lld %14.6g %10.4f %12lld %8.4f\n", r.name.c_str(),
                static_cast<long long>(r.latency), r.energy, r.fake_fraction,
                static_cast<long long>(r.ctx_zeroize_bytes), r.latency_ratio);
}

Rational parse_rational(const std::string& s) {
  try {
    auto slash = s.find('/');
    int64_t num = std::stoll(s.substr(0, slash));
    int64_t den = slash == std::string::npos ? 1 : std::stoll(s.substr(slash + 1));
    if (den <= 0 || num <= 0) throw ValidationError("bandwidth must be a positive fraction: " + s);
    return Rational(num, den);
  } catch (const std::logic_error&) {
    throw ParseError("bandwidth must look like 'num/den': " + s);
  }
}

int do_golden_check(const RunConfig& cfg, const fs::path& out) {
  std::vector<Mapping> maps;
  std::vector<int64_t> h;
  if (fs::exists(out / "topk.json")) {
    ExploreArtifact a = explore_from_json(read_text(out / "topk.json"), cfg);
    for (const auto& l : a.layers) {
      maps.push_back(l.options.front().mapping);
      h.push_back(l.options.front().h_opt);
    }
  } else {
    for (const auto& l : cfg.model.layers) {
      Mapping m;
      for (Dim d : kAllDims) m.tile_of(d) = l.extent(d);
      maps.push_back(repair(l, m, cfg.hw));
      h.push_back(64);
    }
  }
  const ModelData data = random_model_data(cfg.model, cfg.seed);
  const auto golden = golden_execute(cfg.model, data);
  const Rational bw = cfg.hw.crypto_bursts_per_cycle();
  int failures = 0;
  for (int mask = 0; mask < 16; ++mask) {
    PassFlags f;
    f.multi_tenant = (mask & 1) != 0;
    f.proactive_zeroize = (mask & 2) != 0;
    f.promote_loads = (mask & 4) != 0;
    f.forwarding = (mask & 8) != 0;
    try {
      validate_pass_flags(f);
    } catch (const ValidationError&) {
      continue;
    }
    auto bit = [](bool b) { return b ? "1" : "0"; };
    std::string label = std::string("multi_tenant=") + bit(f.multi_tenant) +
                        " proactive=" + bit(f.proactive_zeroize) +
                        " promote=" + bit(f.promote_loads) + " forwarding=" + bit(f.forwarding);
    try {
      auto cp = profile_mapping(cfg, maps, h, bw, f, label, data, golden);
      std::printf("PASS %s cycles=%lld\n", label.c_str(),
                  static_cast<long long>(cp.stats.total_cycles));
    } catch (const SimulationError& e) {
      std::printf("FAIL %s: %s\n", label.c_str(), e.what());
      ++failures;
    }
  }
  return failures == 0 ? 0 : kExitSimulation;
}

int do_simulate(const Options& o) {
  std::ifstream in(o.program);
  if (!in) throw ParseError("cannot open program '" + o.program + "'");
  Program prog = read_program(in);
  HardwareConfig hw = load_hardware(o.hw);
  Rational bw = parse_rational(o.bw);
  ModelData data;
  if (o.inputs.empty()) {
    data = random_model_data(prog.model, o.seed);
  } else {
    data.ifmaps.resize(prog.model.size());
    data.weights.resize(prog.model.size());
    for (std::size_t i = 0; i < prog.model.size(); ++i) {
      auto load = [&](const std::string& name) {
        std::ifstream f(fs::path(o.inputs) / name, std::ios::binary);
        if (!f) throw ParseError("missing input blob " + name);
        return read_blob(f);
      };
      if (prog.model.depends_on[i] == kExternalInput)
        data.ifmaps[i] = load("ifmap_" + std::to_string(i) + ".bin");
      data.weights[i] = load("weight_" + std::to_string(i) + ".bin");
    }
  }
  SimResult r = simulate(prog, hw, bw, data);
  fs::path out(o.out);
  write_text(out / "stats.json", stats_to_json(r.stats) + "\n");
  std::ostringstream csv;
  write_bandwidth_csv(csv, r.stats);
  write_text(out / "bandwidth.csv", csv.str());
  for (std::size_t i = 0; i < r.ofmaps.size(); ++i) {
    std::ostringstream blob;
    write_blob(blob, r.ofmaps[i]);
    write_text(out / ("ofmap_" + std::to_string(i) + ".bin"), blob.str());
  }
  std::printf("%lld cycles, %lld fake bursts\n", static_cast<long long>(r.stats.total_cycles),
              static_cast<long long>(r.stats.fake_read_bursts + r.stats.fake_write_bursts));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"secmap: secure accelerator mapping, compilation and simulation"};
  app.require_subcommand(1);
  Options o;
  auto* explore = app.add_subcommand("explore", "Search mappings and write topk.json");
  auto* anneal = app.add_subcommand("anneal", "Anneal model mappings and write topm.json");
  auto* profile = app.add_subcommand("profile", "Compile and simulate the top-m candidates");
  auto* report = app.add_subcommand("report", "Compare base_map, AmOpt and Obsidian rows");
  auto* run = app.add_subcommand("run", "explore, anneal, profile and report in sequence");
  auto* golden = app.add_subcommand("golden-check",
                                    "Check simulated ofmaps under every pass combination");
  for (auto* s : {explore, anneal, profile, report, run, golden}) add_run_options(s, o);

  auto* sim = app.add_subcommand("simulate", "Simulate a program file");
  sim->add_option("--program", o.program, "Program JSON lines")->required()->check(CLI::ExistingFile);
  sim->add_option("--hw", o.hw, "Hardware preset or JSON path")->capture_default_str();
  sim->add_option("--bw", o.bw, "Shaper rate in bursts/cycle, as num/den")->capture_default_str();
  sim->add_option("--inputs", o.inputs, "Directory with ifmap_<i>.bin and weight_<i>.bin");
  sim->add_option("--seed", o.seed, "Seed for random inputs when --inputs is absent");
  sim->add_option("--out", o.out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (sim->parsed()) return do_simulate(o);
    RunConfig cfg = make_config(o);
    const fs::path out(o.out);
    if (golden->parsed()) return do_golden_check(cfg, out);
    if (run->parsed()) {
      auto a = do_explore(cfg, out);
      auto topm = do_anneal(cfg, a, out);
      auto p = do_profile(cfg, a, topm, out);
      do_report(cfg, a, topm, p, out);
      return 0;
    }
    if (explore->parsed()) {
      do_explore(cfg, out);
      return 0;
    }
    ExploreArtifact a = explore_from_json(need(out / "topk.json", "explore"), cfg);
    if (anneal->parsed()) {
      do_anneal(cfg, a, out);
      return 0;
    }
    auto topm = topm_from_json(need(out / "topm.json", "anneal"), a);
    if (profile->parsed()) {
      do_profile(cfg, a, topm, out);
      return 0;
    }
    ProfileArtifact p = profile_from_json(need(out / "optimal.json", "profile"));
    do_report(cfg, a, topm, p, out);
    return 0;
  } catch (const MissingArtifact& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitMissing;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitInput;
  } catch (const InfeasibleLayer& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const InfeasibleMapping& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const SimulationError& e) {
    std::cerr << "simulation failed: " << e.what() << '\n';
    return kExitSimulation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
