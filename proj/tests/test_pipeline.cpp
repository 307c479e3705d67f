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

#include "doctest.h"

#include "secmap/pipeline.hpp"

using namespace secmap;

namespace {

RunConfig tiny_config() {
  RunConfig cfg;
  cfg.model = parse_model_text(R"({"layers":[
    {"name":"a","K":4,"C":2,"R":3,"S":3,"X":8,"Y":8},
    {"name":"b","K":4,"C":4,"R":1,"S":1,"X":6,"Y":6}]})");
  cfg.hw = edge_preset();
  cfg.hw.pe_rows = cfg.hw.pe_cols = 4;
  cfg.seed = 3;
  cfg.ga.population = 12;
  cfg.ga.max_generations = 8;
  cfg.sa.iterations = 50;
  cfg.sa.m = 4;
  finalize_config(cfg);
  return cfg;
}

struct Artifacts {
  std::string topk, authopt, topm, optimal, report_json, report_csv;
};

Artifacts run_all(const RunConfig& cfg) {
  auto ex = run_explore(cfg);
  auto topm = run_anneal(cfg, ex);
  auto prof = run_profile(cfg, ex, topm);
  auto rows = run_report(cfg, ex, topm, prof);
  return {explore_to_json(ex), authopt_to_json(ex),  topm_to_json(topm),
          optimal_to_json(prof), report_to_json(rows), report_to_csv(rows)};
}

}  // namespace

TEST_CASE("pipeline artifacts are deterministic") {
  auto cfg = tiny_config();
  auto a = run_all(cfg);
  auto b = run_all(cfg);
  CHECK(a.topk == b.topk);
  CHECK(a.authopt == b.authopt);
  CHECK(a.topm == b.topm);
  CHECK(a.optimal == b.optimal);
  CHECK(a.report_json == b.report_json);
  CHECK(a.report_csv == b.report_csv);
}

TEST_CASE("artifacts reload to the same content") {
  auto cfg = tiny_config();
  auto ex = run_explore(cfg);
  auto text = explore_to_json(ex);
  auto ex2 = explore_from_json(text, cfg);
  CHECK(explore_to_json(ex2) == text);
  auto topm = run_anneal(cfg, ex);
  CHECK(topm_to_json(topm_from_json(topm_to_json(topm), ex2)) == topm_to_json(topm));
  auto prof = run_profile(cfg, ex, topm);
  CHECK(optimal_to_json(profile_from_json(optimal_to_json(prof))) == optimal_to_json(prof));
  CHECK_THROWS_AS(explore_from_json("{}", cfg), Error);
}

TEST_CASE("every layer keeps between 2 and 16 options or all survivors") {
  auto cfg = tiny_config();
  auto ex = run_explore(cfg);
  REQUIRE(ex.layers.size() == 2);
  for (const auto& l : ex.layers) {
    CHECK(!l.options.empty());
    CHECK(l.options.size() <= 16);
    for (const auto& o : l.options) {
      CHECK(o.plan.bw > 0);
      CHECK(is_valid_authblock(o.h_opt));
      CHECK(o.cost.latency * 10 <= l.options.front().cost.latency * 11);
    }
  }
}

TEST_CASE("report rows compare against the baseline") {
  auto cfg = tiny_config();
  auto ex = run_explore(cfg);
  auto topm = run_anneal(cfg, ex);
  auto prof = run_profile(cfg, ex, topm);
  auto rows = run_report(cfg, ex, topm, prof);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].name == "base_map");
  CHECK(rows[0].latency_ratio == doctest::Approx(1.0));
  for (const auto& r : rows) {
    CHECK(r.latency > 0);
    CHECK(r.fake_fraction >= 0);
    CHECK(r.fake_fraction <= 1);
  }
  const auto& best = prof.candidates[static_cast<std::size_t>(prof.optimal)];
  for (const auto& c : prof.candidates) CHECK(best.stats.total_cycles <= c.stats.total_cycles);
}

TEST_CASE("pass flag conflicts are rejected up front") {
  auto cfg = tiny_config();
  cfg.flags.proactive_zeroize = true;
  CHECK_THROWS_AS(finalize_config(cfg), ValidationError);
}
