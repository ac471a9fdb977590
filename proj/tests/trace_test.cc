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

#include <gtest/gtest.h>

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "poisonring/ring.h"

namespace poisonring {
namespace {

RunRecord WithLines(const std::vector<std::string>& lines) {
  RunRecord r;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    r.snapshots.push_back(SnapshotEvent{0, static_cast<std::int64_t>(i % 5), lines[i]});
  }
  return r;
}

TEST(TokenCountTest, Examples) {
  EXPECT_EQ(TokenCount("1,0,0,0,0"), 1u);
  EXPECT_EQ(TokenCount("0,0,0,0,0"), 0u);
  EXPECT_EQ(TokenCount("1,1,0,1,0"), 3u);
  EXPECT_EQ(TokenCount("1"), 1u);
}

TEST(TokenCountTest, RejectsMalformed) {
  for (const char* bad : {"", "1,0,", ",1", "1,2,0", "10,0", "1, 0", "a"}) {
    EXPECT_THROW(TokenCount(bad), TraceParseError) << bad;
  }
}

TEST(IsLegitimateTest, ExactlyOneToken) {
  EXPECT_TRUE(IsLegitimate("0,0,1,0,0"));
  EXPECT_FALSE(IsLegitimate("0,0,0,0,0"));
  EXPECT_FALSE(IsLegitimate("1,0,0,1,0"));
}

TEST(ConvergencePointTest, FaultFreeRunIsZero) {
  EvalContext ctx;
  const auto result = poisonring::Run(RingConfig{5, 5, 10, 0}, {}, ctx);
  RunRecord r;
  r.snapshots = result.snapshots;
  EXPECT_EQ(ConvergencePoint(r), 0u);
}

TEST(ConvergencePointTest, Cases) {
  EXPECT_EQ(ConvergencePoint(WithLines({})), std::nullopt);
  EXPECT_EQ(ConvergencePoint(WithLines({"1,0,0", "1,1,0"})), std::nullopt);
  EXPECT_EQ(ConvergencePoint(WithLines({"1,1,0", "0,1,1", "0,1,0", "0,0,1"})), 2u);
  EXPECT_EQ(ConvergencePoint(WithLines({"1,0,0", "1,1,0", "0,1,0"})), 2u);
}

TEST(DeviationStatsTest, NoPoisonMeansNoUses) {
  EvalContext ctx;
  std::vector<OperatorEvent> events;
  ctx.set_sink([&](const OperatorEvent& e) { events.push_back(e); });
  poisonring::Run(RingConfig{5, 5, 10, 0}, {}, ctx);
  ASSERT_FALSE(events.empty());
  const auto stats = ComputeDeviationStats(events);
  EXPECT_EQ(stats.uses, 0u);
  EXPECT_EQ(stats.deviations, 0u);
  EXPECT_EQ(stats.rate, 0.0);
}

TEST(DeviationStatsTest, DeterministicRateIsOne) {
  EvalContext ctx;
  std::vector<OperatorEvent> events;
  ctx.set_sink([&](const OperatorEvent& e) { events.push_back(e); });
  PoisonedScalar x = MakePoisoned(
      5,
      PoisonPolicy::Make(Effect::Deterministic(), Lifetime::Always(), false,
                         DeviationModel::Offset(1)),
      0, 0);
  for (int i = 0; i < 40; ++i) Add(x, 1, ctx);
  const auto stats = ComputeDeviationStats(events);
  EXPECT_EQ(stats.uses, 40u);
  EXPECT_EQ(stats.deviations, 40u);
  EXPECT_EQ(stats.rate, 1.0);
}

TEST(DeviationStatsTest, IgnoresSuppressedAndCleanEvents) {
  std::vector<OperatorEvent> events(3);
  events[0].lhs_poisoned = true;
  events[0].deviated = true;
  events[1].lhs_poisoned = true;
  events[1].suppressed = true;
  events[2].deviated = false;
  const auto stats = ComputeDeviationStats(events);
  EXPECT_EQ(stats.uses, 1u);
  EXPECT_EQ(stats.deviations, 1u);
}

OperatorEvent RandomEvent(std::mt19937_64& rng, std::uint64_t step) {
  std::uniform_int_distribution<std::int64_t> value(-1000000, 1000000);
  std::bernoulli_distribution coin(0.5);
  OperatorEvent e;
  e.step = step;
  const int pick = static_cast<int>(rng() % 8);
  const OpKind kinds[] = {OpKind::kAdd, OpKind::kSub, OpKind::kMul, OpKind::kMod,
                          OpKind::kEq,  OpKind::kNeq, OpKind::kLt,  OpKind::kNeg};
  e.op = kinds[pick];
  e.lhs_clean = value(rng);
  if (e.op != OpKind::kNeg) e.rhs_clean = value(rng);
  e.lhs_poisoned = coin(rng);
  e.rhs_poisoned = e.rhs_clean.has_value() && coin(rng);
  e.suppressed = coin(rng);
  e.deviated = (e.lhs_poisoned || e.rhs_poisoned) && !e.suppressed && coin(rng);
  if (IsComparison(e.op)) {
    e.clean_result = coin(rng);
    e.emitted_result = e.deviated ? !std::get<bool>(e.clean_result) : e.clean_result;
  } else {
    e.clean_result = value(rng);
    e.emitted_result = e.deviated ? OperatorEvent::Value(value(rng)) : e.clean_result;
  }
  if (e.lhs_poisoned || e.rhs_poisoned) {
    e.origin_id = static_cast<std::int64_t>(rng() % 4);
    if (coin(rng)) e.lifetime_after = static_cast<std::int64_t>(rng() % 10);
  }
  return e;
}

TEST(TraceRoundTripTest, RandomRecordsSurvive) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    RunRecord r;
    r.scenario_digest = "00ff" + std::to_string(trial);
    r.seed = rng();
    std::uint64_t step = 0;
    const int n_events = static_cast<int>(rng() % 30);
    for (int i = 0; i < n_events; ++i) {
      step += 1 + rng() % 3;
      r.events.push_back(RandomEvent(rng, step));
    }
    const int n_snaps = static_cast<int>(rng() % 10);
    const std::size_t width = 1 + rng() % 6;
    for (int i = 0; i < n_snaps; ++i) {
      std::string line;
      for (std::size_t j = 0; j < width; ++j) {
        if (j) line += ',';
        line += (rng() & 1) ? '1' : '0';
      }
      r.snapshots.push_back(SnapshotEvent{static_cast<std::int64_t>(i / 3),
                                          static_cast<std::int64_t>(rng() % width), line});
    }
    for (std::size_t j = 0; j < width; ++j) {
      r.final_statuses.push_back(static_cast<std::int64_t>(rng() % 7));
    }

    std::stringstream buf;
    WriteTrace(r, buf);
    const RunRecord back = ReadTrace(buf);
    ASSERT_EQ(back, r) << "trial " << trial;

    const auto stats = ComputeDeviationStats(back);
    EXPECT_LE(stats.deviations, stats.uses);
  }
}

TEST(TraceRoundTripTest, RecordOrder) {
  RunRecord r;
  r.scenario_digest = "abc";
  OperatorEvent e;
  e.step = 3;
  e.clean_result = std::int64_t{1};
  e.emitted_result = std::int64_t{1};
  r.events.push_back(e);
  r.snapshots.push_back(SnapshotEvent{0, 0, "1,0"});
  r.final_statuses = {1, 0};
  std::stringstream buf;
  WriteTrace(r, buf);
  std::vector<std::string> types;
  for (std::string line; std::getline(buf, line);) {
    const auto at = line.find("\"type\":\"");
    ASSERT_NE(at, std::string::npos) << line;
    types.push_back(line.substr(at + 8, line.find('"', at + 8) - at - 8));
  }
  EXPECT_EQ(types, (std::vector<std::string>{"run", "event", "snapshot", "final"}));
}

TEST(ReadTraceTest, RejectsBrokenFiles) {
  auto read = [](const std::string& text) {
    std::istringstream in(text);
    return ReadTrace(in);
  };
  EXPECT_THROW(read(""), TraceParseError);
  EXPECT_THROW(read("{\"type\":\"run\",\"scenario_digest\":\"a\",\"seed\":0}\n"),
               TraceParseError);
  EXPECT_THROW(read("not json\n"), TraceParseError);
  EXPECT_THROW(read("{\"type\":\"mystery\"}\n"), TraceParseError);
}

}  // namespace
}  // namespace poisonring
