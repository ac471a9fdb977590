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

// Scenario files.
//
//   {
//     "ring": {"node_count": 5, "k_states": 5, "rounds": 10},
//     "seed": 42,
//     "trace_path": "run.jsonl",
//     "injections": [
//       {"node": 0, "at_round": 0,
//        "poison": {"effect": "deterministic", "lifetime": "always",
//                   "infectious": true,
//                   "deviation": {"kind": "offset", "magnitude": 1}}},
//       {"node": 2, "at_round": 0, "perturb": 3}
//     ]
//   }
//
// "effect" is "deterministic" or {"intermittent": rate}; "lifetime" is
// "always" or {"transient": uses}. "k_states" defaults to "node_count",
// "seed" to 0, "at_round" to 0. A scale magnitude may be written as a decimal
// number or as an exact "num/den" string. Unknown keys are rejected.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "poisonring/ring.h"

namespace poisonring {

// Names the source, the 1-based line (0 when unknown) and the field.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::string source, std::size_t line, std::string field,
                const std::string& message);
  const std::string& source() const { return source_; }
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::string source_;
  std::size_t line_;
  std::string field_;
};

struct Scenario {
  RingConfig ring;
  std::vector<Injection> injections;
  std::uint64_t seed = 0;
  std::optional<std::string> trace_path;

  void set_seed(std::uint64_t s) {
    seed = s;
    ring.seed = s;
  }
};

Scenario ParseScenario(std::string_view text, const std::string& source = "<memory>");
Scenario LoadScenario(const std::string& path);

nlohmann::ordered_json PolicyToJson(const PoisonPolicy& policy);
nlohmann::ordered_json ScenarioToJson(const Scenario& scenario);

// Stable hex digest of the ring and injections (seed and trace path
// excluded).
std::string ScenarioDigest(const Scenario& scenario);

}  // namespace poisonring
