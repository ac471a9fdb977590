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

// Run records and the analytics computed over them.
//
// A trace file is newline-delimited JSON. Every line is an object with a
// "type" field: one "run" header, all "event" records in step order, all
// "snapshot" records in emission order, then one "final" record with the end
// statuses.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "poisonring/poison.h"

namespace poisonring {

class TraceParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One privilege line, emitted by a node just before it fires.
struct SnapshotEvent {
  std::int64_t round = 0;
  std::int64_t firing_node = 0;
  std::string line;

  friend bool operator==(const SnapshotEvent&, const SnapshotEvent&) = default;
};

struct RunRecord {
  std::string scenario_digest;
  std::uint64_t seed = 0;
  std::vector<OperatorEvent> events;
  std::vector<SnapshotEvent> snapshots;
  std::vector<std::int64_t> final_statuses;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

// Number of "1" fields in a privilege line such as "1,0,0,0,0". Throws
// TraceParseError unless the line matches ^[01](,[01])*$.
std::size_t TokenCount(std::string_view line);

// Exactly one privileged node.
bool IsLegitimate(std::string_view line);

// Smallest snapshot index from which every snapshot is legitimate, or nullopt
// when the last snapshot is illegitimate or there are none.
std::optional<std::size_t> ConvergencePoint(const RunRecord& record);

struct DeviationStats {
  std::size_t uses = 0;
  std::size_t deviations = 0;
  double rate = 0.0;
};

// Counts over unsuppressed events that have at least one poisoned operand.
DeviationStats ComputeDeviationStats(const std::vector<OperatorEvent>& events);
inline DeviationStats ComputeDeviationStats(const RunRecord& record) {
  return ComputeDeviationStats(record.events);
}

std::string EventToJsonLine(const OperatorEvent& event);
std::string SnapshotToJsonLine(const SnapshotEvent& snapshot);

void WriteTrace(const RunRecord& record, std::ostream& out);
RunRecord ReadTrace(std::istream& in);

}  // namespace poisonring
