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

#include "poisonring/trace.h"

#include <istream>
#include <ostream>

#include "json.hpp"

namespace poisonring {

using nlohmann::ordered_json;

namespace {

ordered_json ValueToJson(const OperatorEvent::Value& v) {
  if (const bool* b = std::get_if<bool>(&v)) return *b;
  return std::get<std::int64_t>(v);
}

OperatorEvent::Value ValueFromJson(const ordered_json& j) {
  if (j.is_boolean()) return j.get<bool>();
  return j.get<std::int64_t>();
}

template <typename T>
ordered_json OptionalToJson(const std::optional<T>& v) {
  if (!v) return nullptr;
  return *v;
}

template <typename T>
std::optional<T> OptionalFromJson(const ordered_json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

ordered_json EventToJson(const OperatorEvent& e) {
  ordered_json j;
  j["type"] = "event";
  j["step"] = e.step;
  j["op"] = OpName(e.op);
  j["lhs_clean"] = e.lhs_clean;
  j["rhs_clean"] = OptionalToJson(e.rhs_clean);
  j["lhs_poisoned"] = e.lhs_poisoned;
  j["rhs_poisoned"] = e.rhs_poisoned;
  j["deviated"] = e.deviated;
  j["clean_result"] = ValueToJson(e.clean_result);
  j["emitted_result"] = ValueToJson(e.emitted_result);
  j["suppressed"] = e.suppressed;
  j["origin_id"] = OptionalToJson(e.origin_id);
  j["lifetime_after"] = OptionalToJson(e.lifetime_after);
  return j;
}

OperatorEvent EventFromJson(const ordered_json& j) {
  OperatorEvent e;
  e.step = j.at("step").get<std::uint64_t>();
  const auto name = j.at("op").get<std::string>();
  auto op = ParseOpName(name);
  if (!op) throw TraceParseError("unknown op \"" + name + "\"");
  e.op = *op;
  e.lhs_clean = j.at("lhs_clean").get<std::int64_t>();
  e.rhs_clean = OptionalFromJson<std::int64_t>(j.at("rhs_clean"));
  e.lhs_poisoned = j.at("lhs_poisoned").get<bool>();
  e.rhs_poisoned = j.at("rhs_poisoned").get<bool>();
  e.deviated = j.at("deviated").get<bool>();
  e.clean_result = ValueFromJson(j.at("clean_result"));
  e.emitted_result = ValueFromJson(j.at("emitted_result"));
  e.suppressed = j.at("suppressed").get<bool>();
  e.origin_id = OptionalFromJson<std::int64_t>(j.at("origin_id"));
  e.lifetime_after = OptionalFromJson<std::int64_t>(j.at("lifetime_after"));
  return e;
}

ordered_json SnapshotToJson(const SnapshotEvent& s) {
  ordered_json j;
  j["type"] = "snapshot";
  j["round"] = s.round;
  j["firing_node"] = s.firing_node;
  j["line"] = s.line;
  return j;
}

}  // namespace

std::size_t TokenCount(std::string_view line) {
  if (line.empty() || line.size() % 2 == 0) {
    throw TraceParseError("malformed privilege line \"" + std::string(line) + "\"");
  }
  std::size_t tokens = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    const bool ok = (i % 2 == 0) ? (c == '0' || c == '1') : (c == ',');
    if (!ok) throw TraceParseError("malformed privilege line \"" + std::string(line) + "\"");
    if (c == '1') ++tokens;
  }
  return tokens;
}

bool IsLegitimate(std::string_view line) { return TokenCount(line) == 1; }

std::optional<std::size_t> ConvergencePoint(const RunRecord& record) {
  const auto& snaps = record.snapshots;
  std::size_t i = snaps.size();
  while (i > 0 && IsLegitimate(snaps[i - 1].line)) --i;
  if (i == snaps.size()) return std::nullopt;
  return i;
}

DeviationStats ComputeDeviationStats(const std::vector<OperatorEvent>& events) {
  DeviationStats stats;
  for (const auto& e : events) {
    if (e.suppressed || !(e.lhs_poisoned || e.rhs_poisoned)) continue;
    ++stats.uses;
    if (e.deviated) ++stats.deviations;
  }
  if (stats.uses > 0) {
    stats.rate = static_cast<double>(stats.deviations) / static_cast<double>(stats.uses);
  }
  return stats;
}

std::string EventToJsonLine(const OperatorEvent& event) { return EventToJson(event).dump(); }

std::string SnapshotToJsonLine(const SnapshotEvent& snapshot) {
  return SnapshotToJson(snapshot).dump();
}

void WriteTrace(const RunRecord& record, std::ostream& out) {
  ordered_json header;
  header["type"] = "run";
  header["scenario_digest"] = record.scenario_digest;
  header["seed"] = record.seed;
  out << header.dump() << '\n';

  for (const auto& e : record.events) out << EventToJson(e).dump() << '\n';
  for (const auto& s : record.snapshots) out << SnapshotToJson(s).dump() << '\n';

  ordered_json fin;
  fin["type"] = "final";
  fin["final_statuses"] = record.final_statuses;
  out << fin.dump() << '\n';
}

RunRecord ReadTrace(std::istream& in) {
  RunRecord record;
  std::string line;
  std::size_t lineno = 0;
  bool saw_header = false;
  bool saw_final = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = ordered_json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "run") {
        record.scenario_digest = j.at("scenario_digest").get<std::string>();
        record.seed = j.at("seed").get<std::uint64_t>();
        saw_header = true;
      } else if (type == "event") {
        OperatorEvent e = EventFromJson(j);
        if (!record.events.empty() && e.step <= record.events.back().step) {
          throw TraceParseError("event step " + std::to_string(e.step) + " is not increasing");
        }
        record.events.push_back(std::move(e));
      } else if (type == "snapshot") {
        SnapshotEvent s;
        s.round = j.at("round").get<std::int64_t>();
        s.firing_node = j.at("firing_node").get<std::int64_t>();
        s.line = j.at("line").get<std::string>();
        TokenCount(s.line);
        record.snapshots.push_back(std::move(s));
      } else if (type == "final") {
        record.final_statuses = j.at("final_statuses").get<std::vector<std::int64_t>>();
        saw_final = true;
      } else {
        throw TraceParseError("unknown record type \"" + type + "\"");
      }
    } catch (const nlohmann::json::exception& ex) {
      throw TraceParseError("trace line " + std::to_string(lineno) + ": " + ex.what());
    } catch (const TraceParseError& ex) {
      throw TraceParseError("trace line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  if (!saw_header) throw TraceParseError("trace has no \"run\" header record");
  if (!saw_final) throw TraceParseError("trace has no \"final\" record");
  return record;
}

}  // namespace poisonring
