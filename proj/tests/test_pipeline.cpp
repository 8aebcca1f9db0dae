// Copyright 2026 The graphleak Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <chrono>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "graphleak/errors.hpp"
#include "graphleak/pipeline.hpp"
#include "test_util.hpp"

namespace graphleak {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json SbmDoc() {
  return json::parse(R"({
    "dataset": {"format": "sbm", "blocks": 3, "block_size": 60, "num_features": 16},
    "seed": 3,
    "explainer": {"id": "grad"},
    "attack": {"variant": "explain_sim"},
    "fidelity": {"samples": 20}
  })");
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string ConfigErrorOf(const json& doc) {
  try {
    CheckDependencies(ParseConfig(doc));
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(ParseConfig, ErrorsNameTheOffendingKey) {
  json typo = SbmDoc();
  typo["attack"]["epoch"] = 5;
  EXPECT_NE(ConfigErrorOf(typo).find("attack.epoch"), std::string::npos);
  json bad = SbmDoc();
  bad["attack"]["epochs"] = "many";
  EXPECT_NE(ConfigErrorOf(bad).find("attack.epochs"), std::string::npos);
  json variant = SbmDoc();
  variant["attack"]["variant"] = "gsx";
  EXPECT_NE(ConfigErrorOf(variant).find("attack.variant"), std::string::npos);
  json sweep = SbmDoc();
  sweep["sweep"] = json::object();
  EXPECT_NE(ConfigErrorOf(sweep).find("sweep"), std::string::npos);
}

TEST(ParseConfig, GseWithoutExplainerNamesTheMissingStage) {
  json doc = SbmDoc();
  doc.erase("explainer");
  doc.erase("fidelity");
  doc["attack"] = {{"variant", "gse"}};
  const std::string msg = ConfigErrorOf(doc);
  EXPECT_NE(msg.find("explain"), std::string::npos) << msg;
}

TEST(ParseConfig, ResolvedFormRoundTrips) {
  json doc = SbmDoc();
  doc["defense"] = {{"epsilon", "inf"}};
  doc["attack"] = {{"variant", "gsef"}, {"epochs", 7}, {"hidden", 16}};
  doc["advantage"] = {{"slaps", true}};
  const json resolved = ToJson(ParseConfig(doc));
  EXPECT_EQ(ToJson(ParseConfig(resolved)), resolved);
  EXPECT_EQ(resolved["attack"]["epochs"], 7);
}

TEST(SetPath, CreatesIntermediateObjects) {
  json doc = json::object();
  SetPath(doc, "defense.epsilon", 0.5);
  SetPath(doc, "seed", 4);
  EXPECT_EQ(doc["defense"]["epsilon"], 0.5);
  EXPECT_EQ(doc["seed"], 4);
}

TEST(ParseSweep, FirstKeyVariesSlowest) {
  const SweepGrid g = ParseSweep(json::parse(R"({"a": [1, 2], "b": [10, 20, 30]})"));
  ASSERT_EQ(g.size(), 6u);
  EXPECT_EQ(g.Cell(0), (std::vector<json>{1, 10}));
  EXPECT_EQ(g.Cell(1), (std::vector<json>{1, 20}));
  EXPECT_EQ(g.Cell(3), (std::vector<json>{2, 10}));
  EXPECT_THROW(ParseSweep(json::parse(R"({"a": []})")), ConfigError);
}

TEST(RunStage, SbmSmokeRunIsFastAndReproducible) {
  const fs::path dir = testutil::TempDir("smoke");
  const ExperimentConfig c = ParseConfig(SbmDoc());
  const auto t0 = std::chrono::steady_clock::now();
  const PipelineResult first = RunStage(c, Stage::kAll, {.out_dir = dir / "a"});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(secs, 60.0);
  ASSERT_TRUE(first.attack.has_value());
  ASSERT_TRUE(first.fidelity.has_value());
  EXPECT_EQ(first.attack->runs.size(), 10u);
  for (const char* f : {"attack_report.json", "attack_report.csv", "fidelity_report.json",
                        "quality.csv", "config.json"}) {
    EXPECT_TRUE(fs::exists(dir / "a" / f)) << f;
  }

  const PipelineResult again =
      RunStage(c, Stage::kAll, {.out_dir = dir / "b", .cache_dir = dir / "a" / "cache"});
  EXPECT_GT(again.cache_hits, 0);
  EXPECT_EQ(Slurp(dir / "a" / "attack_report.json"), Slurp(dir / "b" / "attack_report.json"));
  EXPECT_EQ(Slurp(dir / "a" / "fidelity_report.json"),
            Slurp(dir / "b" / "fidelity_report.json"));
  EXPECT_NE(Report(dir / "a").find("explain_sim"), std::string::npos);
}

TEST(RunStage, SingleStagesNeedTheirInputsCached) {
  const fs::path dir = testutil::TempDir("stages");
  json doc = SbmDoc();
  doc["defense"] = {{"epsilon", 1.0}};
  doc["explainer"] = {{"id", "zorro"}, {"zorro_samples", 10}};
  const ExperimentConfig c = ParseConfig(doc);
  const PipelineOptions o{.out_dir = dir};
  try {
    RunStage(c, Stage::kAttack, o);
    FAIL() << "attack ran without explanations";
  } catch (const MissingStageError& e) {
    EXPECT_EQ(e.needed(), "explain");
    EXPECT_NE(std::string(e.what()).find("run stage explain first"), std::string::npos);
  }
  RunStage(c, Stage::kExplain, o);
  try {
    RunStage(c, Stage::kAttack, o);
    FAIL() << "attack ran without the defended explanations";
  } catch (const MissingStageError& e) {
    EXPECT_EQ(e.needed(), "defend");
  }
  RunStage(c, Stage::kDefend, o);
  const PipelineResult r = RunStage(c, Stage::kAttack, o);
  ASSERT_TRUE(r.attack.has_value());
}

TEST(RunSweep, GridProducesOneRowPerCell) {
  const fs::path dir = testutil::TempDir("sweep");
  json base = SbmDoc();
  base["protocol"] = {{"seeds", {0, 1, 2}}};
  const SweepGrid grid = ParseSweep(json::parse(R"({"seed": [1, 2], "defense.epsilon": [1e-4, "inf"]})"));
  base["explainer"] = {{"id", "zorro"}, {"zorro_samples", 10}};
  const SweepOutcome so = RunSweep(base, grid, {.out_dir = dir}, 2);
  EXPECT_EQ(so.cells, 4u);
  EXPECT_EQ(so.failed, 0u);
  std::ifstream in(so.merged_csv);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("cell,", 0) == 0) continue;
    ++rows;
    EXPECT_NE(line.find(",ok,"), std::string::npos) << line;
  }
  EXPECT_EQ(rows, 4);
  EXPECT_FALSE(fs::exists(dir / "failures.json"));
}

TEST(RunSweep, SinglePointMatchesRun) {
  const fs::path dir = testutil::TempDir("sweep1");
  const json base = SbmDoc();
  const SweepOutcome so = RunSweep(base, ParseSweep(json::parse(R"({"seed": [3]})")),
                                   {.out_dir = dir / "sweep"});
  ASSERT_EQ(so.failed, 0u);
  const PipelineResult r = RunStage(ParseConfig(base), Stage::kAll, {.out_dir = dir / "run"});
  const json cell = json::parse(Slurp(dir / "sweep" / "cells" / "cell-0" / "attack_report.json"));
  EXPECT_EQ(cell["mean_auc"], r.attack->mean_auc);
  EXPECT_EQ(cell["runs"], json::parse(Slurp(dir / "run" / "attack_report.json"))["runs"]);
}

TEST(RunSweep, FailedCellsAreRecorded) {
  const fs::path dir = testutil::TempDir("sweepfail");
  json base = SbmDoc();
  base["protocol"] = {{"seeds", {0}}};
  const SweepOutcome so =
      RunSweep(base, ParseSweep(json::parse(R"({"protocol.probe_fraction": [0.1, 7]})")),
               {.out_dir = dir});
  EXPECT_EQ(so.failed, 1u);
  EXPECT_TRUE(fs::exists(dir / "failures.json"));
}

}  // namespace
}  // namespace graphleak
