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

#include "poisonring/commands.h"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

namespace poisonring {

Scenario ReferenceScenario() {
  Scenario sc;
  sc.ring = RingConfig{5, 5, 10, 0};
  sc.set_seed(0);
  return sc;
}

RunRecord ExecuteScenario(const Scenario& scenario) {
  RunRecord record;
  record.scenario_digest = ScenarioDigest(scenario);
  record.seed = scenario.seed;
  EvalContext ctx([&](const OperatorEvent& e) { record.events.push_back(e); });
  RingConfig ring = scenario.ring;
  ring.seed = scenario.seed;
  RunResult result = Run(ring, scenario.injections, ctx);
  record.snapshots = std::move(result.snapshots);
  for (const auto& s : result.final_state.statuses) record.final_statuses.push_back(s.clean_value());
  return record;
}

std::optional<GoldenMismatch> CompareToReferencePrefix(const std::vector<std::string>& lines) {
  for (std::size_t i = 0; i < kReferencePrefix.size(); ++i) {
    if (i >= lines.size()) return GoldenMismatch{i + 1, std::string(kReferencePrefix[i]), ""};
    if (lines[i] != kReferencePrefix[i]) {
      return GoldenMismatch{i + 1, std::string(kReferencePrefix[i]), lines[i]};
    }
  }
  return std::nullopt;
}

namespace {

std::string FormatRate(double rate) {
  std::ostringstream os;
  os << std::setprecision(6) << rate;
  return os.str();
}

void WriteSummary(const RunRecord& record, std::ostream& err) {
  std::map<std::size_t, std::size_t> histogram;
  for (const auto& s : record.snapshots) ++histogram[TokenCount(s.line)];
  err << "snapshots: " << record.snapshots.size() << '\n';
  err << "token histogram:";
  if (histogram.empty()) err << " (none)";
  for (const auto& [tokens, count] : histogram) err << ' ' << tokens << ':' << count;
  err << '\n';
  const auto cp = ConvergencePoint(record);
  err << "convergence point: " << (cp ? std::to_string(*cp) : std::string("none")) << '\n';
  const auto stats = ComputeDeviationStats(record);
  err << "deviation stats: uses=" << stats.uses << " deviations=" << stats.deviations
      << " rate=" << FormatRate(stats.rate) << '\n';
}

}  // namespace

int CmdRun(const Scenario& scenario, const RunOptions& options, std::ostream& out,
           std::ostream& err) {
  Scenario sc = scenario;
  if (options.seed) sc.set_seed(*options.seed);
  const auto trace_path = options.trace_path ? options.trace_path : sc.trace_path;

  RunRecord record;
  try {
    record = ExecuteScenario(sc);
  } catch (const RingConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ArithmeticError& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }

  for (const auto& s : record.snapshots) out << s.line << '\n';

  if (trace_path) {
    std::ofstream trace(*trace_path, std::ios::binary | std::ios::trunc);
    if (!trace) {
      err << "error: " << *trace_path << ": cannot open trace file for writing\n";
      return kExitRuntime;
    }
    WriteTrace(record, trace);
    if (!trace) {
      err << "error: " << *trace_path << ": write failed\n";
      return kExitRuntime;
    }
  }
  if (!options.quiet) WriteSummary(record, err);
  return kExitOk;
}

int CmdCheck(std::ostream& out, std::ostream& err) {
  const RunRecord record = ExecuteScenario(ReferenceScenario());
  std::vector<std::string> lines;
  for (const auto& s : record.snapshots) lines.push_back(s.line);
  for (std::size_t i = 0; i < std::min(lines.size(), kReferencePrefix.size()); ++i) {
    out << lines[i] << '\n';
  }
  if (auto mismatch = CompareToReferencePrefix(lines)) {
    err << "check: mismatch at line " << mismatch->line << ": expected \"" << mismatch->expected
        << "\", got \"" << mismatch->actual << "\"\n";
    return kExitMismatch;
  }
  err << "check: ok (" << kReferencePrefix.size() << " reference lines matched)\n";
  return kExitOk;
}

std::optional<SweepParam> ParseSweepParam(std::string_view name) {
  if (name == "rate") return SweepParam::kRate;
  if (name == "transient_uses") return SweepParam::kTransientUses;
  return std::nullopt;
}

namespace {

const std::string kSweepSource = "<sweep>";

Scenario ApplySweepValue(const Scenario& base, SweepParam param, const std::string& value) {
  Scenario sc = base;
  const char* b = value.data();
  const char* e = value.data() + value.size();
  for (auto& inj : sc.injections) {
    auto* policy = std::get_if<PoisonPolicy>(&inj.kind);
    if (policy == nullptr) continue;
    try {
      if (param == SweepParam::kRate) {
        double rate = 0;
        if (std::from_chars(b, e, rate).ptr != e) {
          throw ScenarioError(kSweepSource, 0, "--values", "\"" + value + "\" is not a number");
        }
        policy->effect = Effect::Intermittent(rate);
      } else {
        std::int64_t uses = 0;
        if (std::from_chars(b, e, uses).ptr != e) {
          throw ScenarioError(kSweepSource, 0, "--values", "\"" + value + "\" is not an integer");
        }
        policy->lifetime = Lifetime::Transient(uses);
      }
    } catch (const PolicyError& ex) {
      throw ScenarioError(kSweepSource, 0, "--values", ex.what());
    }
  }
  return sc;
}

}  // namespace

std::vector<SweepRow> Sweep(const Scenario& base, SweepParam param,
                            const std::vector<std::string>& values, std::int64_t repetitions,
                            unsigned threads) {
  if (values.empty()) throw ScenarioError(kSweepSource, 0, "--values", "no values");
  if (repetitions < 1) {
    throw ScenarioError(kSweepSource, 0, "--reps", "repetitions must be at least 1");
  }
  const bool has_poison = std::any_of(base.injections.begin(), base.injections.end(),
                                      [](const Injection& i) {
                                        return std::holds_alternative<PoisonPolicy>(i.kind);
                                      });
  if (!has_poison) {
    throw ScenarioError(kSweepSource, 0, "--param",
                        "parameter does not apply: the scenario has no poison injection");
  }

  std::vector<Scenario> variants;
  for (const auto& v : values) variants.push_back(ApplySweepValue(base, param, v));

  struct Outcome {
    std::optional<std::size_t> convergence;
    double deviation_rate = 0.0;
  };
  const std::size_t reps = static_cast<std::size_t>(repetitions);
  const std::size_t jobs = variants.size() * reps;
  std::vector<Outcome> outcomes(jobs);
  std::vector<std::exception_ptr> errors(jobs);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t job = next++; job < jobs; job = next++) {
      try {
        Scenario sc = variants[job / reps];
        sc.set_seed(base.seed + job % reps);
        const RunRecord record = ExecuteScenario(sc);
        outcomes[job] = Outcome{ConvergencePoint(record), ComputeDeviationStats(record).rate};
      } catch (...) {
        errors[job] = std::current_exception();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, jobs));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& ex : errors) {
    if (ex) std::rethrow_exception(ex);
  }

  std::vector<SweepRow> rows;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    SweepRow row;
    row.value = values[v];
    row.runs = reps;
    double conv_sum = 0;
    double rate_sum = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      const Outcome& o = outcomes[v * reps + r];
      rate_sum += o.deviation_rate;
      if (o.convergence) {
        ++row.converged;
        conv_sum += static_cast<double>(*o.convergence);
        row.max_convergence = std::max(row.max_convergence.value_or(0), *o.convergence);
      }
    }
    if (row.converged > 0) row.mean_convergence = conv_sum / static_cast<double>(row.converged);
    row.mean_deviation_rate = rate_sum / static_cast<double>(reps);
    rows.push_back(std::move(row));
  }
  return rows;
}

int CmdSweep(const Scenario& base, SweepParam param, const std::vector<std::string>& values,
             std::int64_t repetitions, std::ostream& out, std::ostream& err) {
  std::vector<SweepRow> rows;
  try {
    rows = Sweep(base, param, values, repetitions);
  } catch (const ScenarioError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ArithmeticError& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  out << "value\truns\tconverged\tmean_convergence\tmax_convergence\tmean_deviation_rate\n";
  for (const auto& row : rows) {
    out << row.value << '\t' << row.runs << '\t' << row.converged << '\t'
        << (row.mean_convergence ? FormatRate(*row.mean_convergence) : "-") << '\t'
        << (row.max_convergence ? std::to_string(*row.max_convergence) : "-") << '\t'
        << FormatRate(row.mean_deviation_rate) << '\n';
  }
  return kExitOk;
}

}  // namespace poisonring
