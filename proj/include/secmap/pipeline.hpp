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

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "secmap/annealer.hpp"
#include "secmap/mapper.hpp"
#include "secmap/passes.hpp"
#include "secmap/program.hpp"
#include "secmap/simulator.hpp"

namespace secmap {

struct RunConfig {
  ModelSpec model;
  HardwareConfig hw;
  uint64_t seed = 1;
  GaParams ga;
  SaParams sa;
  PassFlags flags;
};

// Propagates the global seed into the stage parameters and checks them.
void finalize_config(RunConfig& cfg);

// Costs a mapping, picks its AuthBlock size (or uses `h` when > 0) and sizes
// its bandwidth. `auth` receives the AuthBlock sweep when one is run.
LayerOption make_option(const ModelSpec& model, int layer_index, const Mapping& mapping,
                        const HardwareConfig& hw, const AddressMap& amap, int64_t h = 0,
                        AuthChoice* auth = nullptr);

struct ExploreLayer {
  std::string name;
  int generations = 0;
  Mapping first_generation_best;
  std::vector<LayerOption> options;  // top-k, ascending latency
  std::vector<AuthChoice> auth;      // per option; empty when loaded from disk
};

struct ExploreArtifact {
  std::vector<ExploreLayer> layers;
};

ExploreArtifact run_explore(const RunConfig& cfg);
OptionTable option_table(const ExploreArtifact& explore);

std::vector<ModelMapping> run_anneal(const RunConfig& cfg, const ExploreArtifact& explore);

struct CandidateProfile {
  int index = 0;
  ModelMapping mapping;
  PassReport passes;
  ProgramStats program;
  SimStats stats;
};

struct ProfileArtifact {
  std::vector<CandidateProfile> candidates;
  int optimal = 0;
};

// Lowers a model mapping, applies the configured passes and simulates it,
// failing with SimulationError when the ofmaps differ from the reference.
CandidateProfile profile_mapping(const RunConfig& cfg, const std::vector<Mapping>& mappings,
                                 const std::vector<int64_t>& h, const Rational& bw,
                                 const PassFlags& flags, const std::string& label,
                                 const ModelData& data,
                                 const std::vector<std::vector<int32_t>>& golden);

ProfileArtifact run_profile(const RunConfig& cfg, const ExploreArtifact& explore,
                            const std::vector<ModelMapping>& topm);

struct ReportRow {
  std::string name;
  int64_t latency = 0;
  double energy = 0.0;
  int64_t real_bursts = 0;
  int64_t fake_bursts = 0;
  double fake_fraction = 0.0;
  int64_t ctx_zeroize_bytes = 0;
  int64_t zeroize_instr_bytes = 0;
  double latency_ratio = 1.0;  // relative to the first row
  double energy_ratio = 1.0;
};

ReportRow report_row(const std::string& name, const SimStats& stats);

// Rows base_map, AmOpt and Obsidian.
std::vector<ReportRow> run_report(const RunConfig& cfg, const ExploreArtifact& explore,
                                  const std::vector<ModelMapping>& topm,
                                  const ProfileArtifact& profile);

// Artifact files.
std::string explore_to_json(const ExploreArtifact& a);
std::string authopt_to_json(const ExploreArtifact& a);
ExploreArtifact explore_from_json(const std::string& text, const RunConfig& cfg);
std::string topm_to_json(const std::vector<ModelMapping>& topm);
std::vector<ModelMapping> topm_from_json(const std::string& text, const ExploreArtifact& explore);
std::string optimal_to_json(const ProfileArtifact& p);
ProfileArtifact profile_from_json(const std::string& text);
std::string report_to_json(const std::vector<ReportRow>& rows);
std::string report_to_csv(const std::vector<ReportRow>& rows);

std::string mapping_to_string(const Mapping& m);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace secmap
