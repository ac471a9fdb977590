// Copyright 2026 The poisonring Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// poisonring: run data-poisoning scenarios on the K-state token ring.
//
//   poisonring run --config scenario.json [--seed N] [--trace out.jsonl] [--quiet]
//   poisonring check
//   poisonring sweep --config scenario.json --param rate --values 0.1,0.5 --reps 20

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "poisonring/commands.h"

namespace {

std::vector<std::string> SplitCsv(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace poisonring;

  CLI::App app{"Data-poisoning fault injection on Dijkstra's K-state token ring"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> trace_path;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "Run a scenario and print its snapshot lines");
  run->add_option("--config", config_path, "Scenario JSON file")->required();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--trace", trace_path, "Write a JSONL trace to this path");
  run->add_flag("--quiet", quiet, "Do not print the run summary");

  app.add_subcommand("check", "Verify the fault-free reference run");

  std::string param;
  std::string values_csv;
  std::int64_t reps = 1;
  auto* sweep = app.add_subcommand("sweep", "Sweep a poison parameter over several values");
  sweep->add_option("--config", config_path, "Scenario JSON file")->required();
  sweep->add_option("--param", param, "rate | transient_uses")->required();
  sweep->add_option("--values", values_csv, "Comma-separated values")->required();
  sweep->add_option("--reps", reps, "Repetitions per value")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (app.got_subcommand("check")) return CmdCheck(std::cout, std::cerr);

  Scenario scenario;
  try {
    scenario = LoadScenario(config_path);
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  if (app.got_subcommand("run")) {
    return CmdRun(scenario, RunOptions{seed, trace_path, quiet}, std::cout, std::cerr);
  }

  const auto sweep_param = ParseSweepParam(param);
  if (!sweep_param) {
    std::cerr << "error: --param: unknown parameter \"" << param
              << "\" (expected rate or transient_uses)\n";
    return kExitConfig;
  }
  return CmdSweep(scenario, *sweep_param, SplitCsv(values_csv), reps, std::cout, std::cerr);
}
