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

// Acceptance suite. Prints one line per criterion and exits nonzero if any
// fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "oracle/bernoulli_oracle.h"
#include "oracle/ring_oracle.h"
#include "poisonring/commands.h"
#include "poisonring/ring.h"
#include "poisonring/trace.h"

namespace poisonring {
namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;

  void Require(bool cond, const std::string& what) {
    if (!cond && pass) {
      pass = false;
      detail = what;
    }
  }
};

double SecondsSince(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::string> Lines(const std::vector<SnapshotEvent>& snaps) {
  std::vector<std::string> out;
  for (const auto& s : snaps) out.push_back(s.line);
  return out;
}

PoisonPolicy Policy(Effect effect, Lifetime lifetime, bool infectious) {
  return PoisonPolicy::Make(effect, lifetime, infectious, DeviationModel::Offset(1));
}

// Counts poisoned uses and deviations of `x` over `n` additions.
DeviationStats Exercise(PoisonedScalar x, int n) {
  std::vector<OperatorEvent> events;
  EvalContext ctx([&](const OperatorEvent& e) { events.push_back(e); });
  for (int i = 0; i < n; ++i) Add(x, 1, ctx);
  return ComputeDeviationStats(events);
}

Outcome ReferenceTrace() {
  Outcome o;
  const auto start = Clock::now();
  std::ostringstream out, err;
  const int code = CmdRun(ReferenceScenario(), {}, out, err);
  const double secs = SecondsSince(start);
  std::vector<std::string> lines;
  std::istringstream in(out.str());
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  o.Require(code == kExitOk, "run exited " + std::to_string(code));
  if (auto m = CompareToReferencePrefix(lines)) {
    o.Require(false, "line " + std::to_string(m->line) + " is \"" + m->actual + "\"");
  }
  o.Require(lines.size() == 50, std::to_string(lines.size()) + " lines, expected 50");
  for (const auto& l : lines) o.Require(IsLegitimate(l), "illegitimate line " + l);
  o.Require(secs < 1.0, "took " + std::to_string(secs) + " s");
  if (o.pass) o.detail = "50 lines, prefix matches, " + std::to_string(secs) + " s";
  return o;
}

Outcome DeterministicManifestation() {
  Outcome o;
  const auto stats = Exercise(
      MakePoisoned(3, Policy(Effect::Deterministic(), Lifetime::Always(), false), 0, 1), 40);
  o.Require(stats.uses >= 40, std::to_string(stats.uses) + " uses");
  o.Require(stats.rate == 1.0, "rate " + std::to_string(stats.rate));
  if (o.pass) o.detail = "rate 1 over " + std::to_string(stats.uses) + " uses";
  return o;
}

Outcome IntermittentRate() {
  Outcome o;
  const auto start = Clock::now();
  const std::uint64_t seed = 2026;
  std::vector<OperatorEvent> events;
  EvalContext ctx([&](const OperatorEvent& e) { events.push_back(e); });
  PoisonedScalar x =
      MakePoisoned(3, Policy(Effect::Intermittent(0.25), Lifetime::Always(), false), 0, seed);
  for (int i = 0; i < 10000; ++i) Add(x, 1, ctx);
  const auto stats = ComputeDeviationStats(events);
  const double secs = SecondsSince(start);

  const auto expected = oracle::BernoulliSchedule(seed, 0, 0.25, 10000);
  bool same = events.size() == expected.size();
  for (std::size_t i = 0; same && i < events.size(); ++i) same = events[i].deviated == expected[i];
  o.Require(stats.uses == 10000, std::to_string(stats.uses) + " uses");
  o.Require(std::abs(stats.rate - 0.25) <= 0.02, "rate " + std::to_string(stats.rate));
  o.Require(same, "draws differ from the Bernoulli reference");
  o.Require(secs < 5.0, "took " + std::to_string(secs) + " s");
  if (o.pass) o.detail = "rate " + std::to_string(stats.rate) + " over 10000 uses";
  return o;
}

Outcome AsymptoticManifestation() {
  Outcome o;
  const auto stats = Exercise(
      MakePoisoned(3, Policy(Effect::Intermittent(0.05), Lifetime::Always(), false), 0, 0), 1000);
  o.Require(stats.deviations >= 1, "no deviation in 1000 uses");
  if (o.pass) o.detail = std::to_string(stats.deviations) + " deviations in 1000 uses";
  return o;
}

Outcome Lifetimes() {
  Outcome o;
  EvalContext ctx;
  PoisonedScalar always =
      MakePoisoned(1, Policy(Effect::Deterministic(), Lifetime::Always(), false), 0, 0);
  for (int i = 0; i < 100; ++i) Add(always, 1, ctx);
  o.Require(IsPoisoned(always), "always-poisoned value expired");

  PoisonedScalar once =
      MakePoisoned(1, Policy(Effect::Deterministic(), Lifetime::Transient(1), false), 0, 0);
  Add(once, 1, ctx);
  o.Require(!IsPoisoned(once), "transient(1) value still poisoned after one use");

  PoisonedScalar guarded =
      MakePoisoned(1, Policy(Effect::Deterministic(), Lifetime::Transient(1), false), 0, 0);
  WithSuppression(ctx, [&] {
    for (int i = 0; i < 10; ++i) Add(guarded, 1, ctx);
  });
  o.Require(IsPoisoned(guarded) && guarded.uses_remaining() == 1,
            "suppressed uses consumed lifetime");
  if (o.pass) o.detail = "always survives 100 uses, transient(1) expires, suppression is free";
  return o;
}

Outcome Infection() {
  Outcome o;
  EvalContext ctx;
  PoisonedScalar a =
      MakePoisoned(2, Policy(Effect::Deterministic(), Lifetime::Always(), true), 0, 0);
  PoisonedScalar x = Add(a, 1, ctx);
  PoisonedScalar y = Mul(x, 3, ctx);
  o.Require(IsPoisoned(x) && IsPoisoned(y), "infection did not propagate");

  PoisonedScalar b =
      MakePoisoned(2, Policy(Effect::Deterministic(), Lifetime::Always(), false), 0, 0);
  PoisonedScalar z = Add(b, 1, ctx);
  o.Require(!IsPoisoned(z), "non-infectious poison propagated");
  if (o.pass) o.detail = "poi(x), poi(y); non-infectious result clean";
  return o;
}

Outcome ExhaustiveConvergence() {
  Outcome o;
  const auto start = Clock::now();
  constexpr int kN = 5;
  constexpr int kK = 5;
  constexpr int kRounds = 10;
  std::size_t states = 1;
  for (int i = 0; i < kN; ++i) states *= kK;
  std::size_t worst = 0;
  for (std::size_t index = 0; index < states && o.pass; ++index) {
    const auto init = oracle::Decode(index, kN, kK);
    std::vector<Injection> inj;
    for (int i = 0; i < kN; ++i) inj.push_back(Injection{i, Perturbation{init[i]}, 0});
    EvalContext ctx;
    const auto result = Run(RingConfig{kN, kK, kRounds, 0}, inj, ctx);
    const auto lines = Lines(result.snapshots);
    const auto ref = oracle::Simulate(init, kK, kRounds);
    RunRecord record;
    record.snapshots = result.snapshots;
    const auto cp = ConvergencePoint(record);
    o.Require(lines == ref.lines, "state " + std::to_string(index) + " differs from reference");
    o.Require(cp.has_value(), "state " + std::to_string(index) + " did not converge");
    o.Require(cp == oracle::Convergence(ref.lines),
              "state " + std::to_string(index) + " convergence point differs");
    if (cp) {
      for (std::size_t i = *cp; i < lines.size(); ++i) {
        o.Require(IsLegitimate(lines[i]), "closure broken in state " + std::to_string(index));
      }
      worst = std::max(worst, *cp);
    }
  }
  const double secs = SecondsSince(start);
  o.Require(secs < 30.0, "took " + std::to_string(secs) + " s");
  if (o.pass) {
    o.detail = std::to_string(states) + " states converge, worst index " + std::to_string(worst) +
               ", " + std::to_string(secs) + " s";
  }
  return o;
}

Outcome MonitoringNeutrality() {
  Outcome o;
  const std::vector<Injection> inj = {
      Injection{0, Policy(Effect::Intermittent(0.3), Lifetime::Always(), true), 0},
      Injection{3, Policy(Effect::Deterministic(), Lifetime::Transient(5), true), 1}};
  const RingConfig config{5, 5, 12, 99};

  std::vector<OperatorEvent> plain_events;
  EvalContext plain_ctx([&](const OperatorEvent& e) { plain_events.push_back(e); });
  const auto plain = Run(config, inj, plain_ctx);

  std::vector<OperatorEvent> events;
  EvalContext ctx([&](const OperatorEvent& e) { events.push_back(e); });
  RingState state(config);
  std::vector<std::string> lines;
  auto sink = [&](const SnapshotEvent& s) { lines.push_back(s.line); };
  for (std::int64_t round = 0; round < config.rounds; ++round) {
    for (std::size_t i = 0; i < inj.size(); ++i) {
      if (inj[i].at_round != round) continue;
      auto& slot = state.statuses[static_cast<std::size_t>(inj[i].node)];
      slot = MakePoisoned(slot.clean_value(), std::get<PoisonPolicy>(inj[i].kind),
                          static_cast<std::int64_t>(i), config.seed);
    }
    state.round = round;
    for (std::int64_t node = 0; node < config.node_count; ++node) {
      Out(state, ctx);
      Update(state, node, ctx, sink);
      Out(state, ctx);
    }
  }

  auto active = [](const std::vector<OperatorEvent>& all) {
    std::vector<OperatorEvent> out;
    for (auto e : all) {
      if (e.suppressed) continue;
      e.step = 0;
      out.push_back(e);
    }
    return out;
  };
  o.Require(lines == Lines(plain.snapshots), "snapshot lines differ with monitoring");
  for (std::size_t i = 0; i < state.statuses.size(); ++i) {
    o.Require(state.statuses[i].clean_value() == plain.final_state.statuses[i].clean_value(),
              "final statuses differ with monitoring");
  }
  o.Require(active(events) == active(plain_events), "poisoned uses differ with monitoring");
  bool suppressed_clean = true;
  for (const auto& e : events) suppressed_clean = suppressed_clean && !(e.suppressed && e.deviated);
  o.Require(suppressed_clean, "a suppressed use deviated");
  o.Require(ComputeDeviationStats(events).deviations > 0, "scenario produced no deviations");
  if (o.pass) o.detail = "observed run identical to unobserved run";
  return o;
}

Outcome Reproducibility() {
  Outcome o;
  Scenario sc = ReferenceScenario();
  sc.injections.push_back(
      Injection{1, Policy(Effect::Intermittent(0.5), Lifetime::Transient(6), true), 0});
  sc.injections.push_back(Injection{3, Perturbation{2}, 2});
  const auto dir = std::filesystem::temp_directory_path() / "poisonring_acceptance";
  std::filesystem::create_directories(dir);
  auto run = [&](const std::string& name) {
    RunOptions opts;
    opts.seed = 1234;
    opts.trace_path = (dir / name).string();
    opts.quiet = true;
    std::ostringstream out, err;
    o.Require(CmdRun(sc, opts, out, err) == kExitOk, "run failed: " + err.str());
    std::ifstream in(dir / name, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return out.str() + "\n--\n" + buf.str();
  };
  const std::string a = run("first.jsonl");
  const std::string b = run("second.jsonl");
  std::filesystem::remove_all(dir);
  o.Require(a == b, "outputs differ between identical runs");
  o.Require(a.find("\"type\":\"event\"") != std::string::npos, "trace has no events");
  if (o.pass) o.detail = "stdout and trace byte-identical (" + std::to_string(a.size()) + " bytes)";
  return o;
}

}  // namespace
}  // namespace poisonring

int main() {
  using poisonring::Outcome;
  struct Criterion {
    const char* name;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria = {
      {"reference trace", poisonring::ReferenceTrace},
      {"deterministic manifestation", poisonring::DeterministicManifestation},
      {"intermittent rate", poisonring::IntermittentRate},
      {"asymptotic manifestation", poisonring::AsymptoticManifestation},
      {"lifetimes", poisonring::Lifetimes},
      {"infection", poisonring::Infection},
      {"exhaustive convergence", poisonring::ExhaustiveConvergence},
      {"monitoring neutrality", poisonring::MonitoringNeutrality},
      {"reproducibility", poisonring::Reproducibility},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += o.pass ? 0 : 1;
    std::printf("[%s] %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name,
                o.detail.c_str());
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
