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

// graphleak: command-line harness over the pipeline.
//
//   graphleak run --config exp.json --out results/
//   graphleak sweep --config grid.json --out sweep/ --jobs 2
//   graphleak report --out results/

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "graphleak/errors.hpp"
#include "graphleak/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitFailed = 1;
constexpr int kExitConfig = 2;

struct CommonFlags {
  std::string config;
  std::string out;
  std::string cache_dir;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::optional<double> partial_nodes;
  bool black_box_labels = false;
  bool quiet = false;
};

void AddCommon(CLI::App* cmd, CommonFlags& f, bool needs_config) {
  auto* c = cmd->add_option("--config", f.config, "experiment config (JSON)");
  if (needs_config) c->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "output directory (default: config \"output\" or ./out)");
  cmd->add_option("--cache-dir", f.cache_dir,
                  "artifact cache (default: $GRAPHLEAK_CACHE, then <out>/cache)");
  cmd->add_option("--seed", f.seed, "experiment seed");
  cmd->add_option("--mode", f.mode, "evaluation protocol")
      ->check(CLI::IsMember({"runs10", "runs100"}));
  cmd->add_option("--partial-nodes", f.partial_nodes,
                  "fraction of nodes known to the attacker")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_flag("--black-box-labels", f.black_box_labels,
                "train attacks on target predictions instead of true labels");
  cmd->add_flag("-q,--quiet", f.quiet, "no progress output");
}

// Reads the config and folds the command-line overrides into it, so the
// resolved config written with every report reflects them.
json LoadDoc(const CommonFlags& f, fs::path& out_dir) {
  json doc = graphleak::ReadJsonFile(f.config);
  if (!doc.is_object()) throw graphleak::ConfigError(f.config + ": expected a JSON object");
  out_dir = "out";
  if (auto it = doc.find("output"); it != doc.end()) {
    if (!it->is_string()) throw graphleak::ConfigError("output: expected a string");
    out_dir = it->get<std::string>();
    doc.erase(it);
  }
  if (!f.out.empty()) out_dir = f.out;
  if (f.seed) graphleak::SetPath(doc, "seed", *f.seed);
  if (!f.mode.empty()) graphleak::SetPath(doc, "protocol.mode", f.mode);
  if (f.partial_nodes) graphleak::SetPath(doc, "attack.partial_nodes", *f.partial_nodes);
  if (f.black_box_labels) graphleak::SetPath(doc, "attack.black_box_labels", true);
  return doc;
}

graphleak::PipelineOptions Options(const CommonFlags& f, const fs::path& out_dir) {
  graphleak::PipelineOptions o;
  o.out_dir = out_dir;
  if (!f.cache_dir.empty()) {
    o.cache_dir = f.cache_dir;
  } else if (const char* env = std::getenv("GRAPHLEAK_CACHE"); env != nullptr && *env != '\0') {
    o.cache_dir = env;
  }
  if (!f.quiet) o.log = [](const std::string& s) { std::cerr << "[graphleak] " << s << '\n'; };
  return o;
}

int RunOne(const CommonFlags& f, graphleak::Stage stage) {
  fs::path out_dir;
  json doc = LoadDoc(f, out_dir);
  const graphleak::ExperimentConfig cfg = graphleak::ParseConfig(doc);
  const graphleak::PipelineResult r = graphleak::RunStage(cfg, stage, Options(f, out_dir));
  if (!f.quiet && r.cache_hits > 0) {
    std::cerr << "[graphleak] cache hits: " << r.cache_hits << '\n';
  }
  for (const auto& file : r.files) std::cout << file << '\n';
  return 0;
}

int RunSweepCmd(const CommonFlags& f, int jobs) {
  fs::path out_dir;
  json doc = LoadDoc(f, out_dir);
  auto it = doc.find("sweep");
  if (it == doc.end()) throw graphleak::ConfigError("sweep: missing grid");
  const graphleak::SweepGrid grid = graphleak::ParseSweep(*it);
  doc.erase(it);
  const graphleak::SweepOutcome so = graphleak::RunSweep(doc, grid, Options(f, out_dir), jobs);
  std::cout << so.merged_csv.string() << '\n';
  if (so.failed > 0) {
    std::cerr << so.failed << " of " << so.cells << " cells failed; see "
              << (out_dir / "failures.json").string() << '\n';
    return kExitFailed;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph reconstruction attacks from feature explanations"};
  app.require_subcommand(1);

  CommonFlags f;
  int jobs = 1;
  struct Cmd {
    const char* name;
    const char* help;
    graphleak::Stage stage;
  };
  const Cmd stages[] = {
      {"run", "run every configured stage", graphleak::Stage::kAll},
      {"explain", "train the target model and explain its predictions",
       graphleak::Stage::kExplain},
      {"defend", "perturb cached explanations", graphleak::Stage::kDefend},
      {"attack", "run and evaluate the attack", graphleak::Stage::kAttack},
      {"advantage", "downstream accuracy on the reconstructed graph",
       graphleak::Stage::kAdvantage},
  };
  std::optional<graphleak::Stage> chosen;
  for (const Cmd& c : stages) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    AddCommon(sub, f, true);
    const graphleak::Stage st = c.stage;
    sub->callback([&chosen, st] { chosen = st; });
  }
  CLI::App* sweep = app.add_subcommand("sweep", "run the pipeline over a parameter grid");
  AddCommon(sweep, f, true);
  sweep->add_option("--jobs", jobs, "grid cells run concurrently")->check(CLI::PositiveNumber);
  CLI::App* report = app.add_subcommand("report", "summarize the reports in an output directory");
  std::string report_dir = "out";
  report->add_option("--out", report_dir, "output directory")->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) {
      std::cout << graphleak::Report(report_dir);
      return 0;
    }
    if (sweep->parsed()) return RunSweepCmd(f, jobs);
    return RunOne(f, *chosen);
  } catch (const graphleak::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << '\n';
    return kExitFailed;
  }
}
