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

#pragma once

// Command implementations behind the poisonring CLI. Snapshot lines go to
// `out`; diagnostics and summaries go to `err`.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "poisonring/scenario.h"
#include "poisonring/trace.h"

namespace poisonring {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitRuntime = 2,
  kExitMismatch = 3,
};

// The 5-node, 10-round fault-free run and the first seven lines it must print.
Scenario ReferenceScenario();
inline constexpr std::array<std::string_view, 7> kReferencePrefix = {
    "1,0,0,0,0", "0,1,0,0,0", "0,0,1,0,0", "0,0,0,1,0", "0,0,0,0,1", "1,0,0,0,0", "0,1,0,0,0",
};

// Runs the scenario, recording every operator event and snapshot.
RunRecord ExecuteScenario(const Scenario& scenario);

struct GoldenMismatch {
  std::size_t line = 0;  // 1-based
  std::string expected;
  std::string actual;  // empty when the run printed fewer lines
};

std::optional<GoldenMismatch> CompareToReferencePrefix(const std::vector<std::string>& lines);

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> trace_path;  // overrides the scenario's
  bool quiet = false;                     // no summary on `err`
};

int CmdRun(const Scenario& scenario, const RunOptions& options, std::ostream& out,
           std::ostream& err);
int CmdCheck(std::ostream& out, std::ostream& err);

enum class SweepParam { kRate, kTransientUses };

std::optional<SweepParam> ParseSweepParam(std::string_view name);

struct SweepRow {
  std::string value;
  std::size_t runs = 0;
  std::size_t converged = 0;
  std::optional<double> mean_convergence;
  std::optional<std::size_t> max_convergence;
  double mean_deviation_rate = 0.0;
};

// One row per value, each aggregated over `repetitions` runs seeded
// base_seed + repetition. Throws ScenarioError if the parameter or a value
// does not apply to the scenario.
std::vector<SweepRow> Sweep(const Scenario& base, SweepParam param,
                            const std::vector<std::string>& values, std::int64_t repetitions,
                            unsigned threads = 0);

int CmdSweep(const Scenario& base, SweepParam param, const std::vector<std::string>& values,
             std::int64_t repetitions, std::ostream& out, std::ostream& err);

}  // namespace poisonring
