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

#include "poisonring/ring.h"

#include <map>
#include <utility>

namespace poisonring {

RingConfigError::RingConfigError(std::string field, const std::string& message)
    : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

RingArithmeticError::RingArithmeticError(const ArithmeticError& cause, std::int64_t node,
                                         std::int64_t round)
    : ArithmeticError(cause.step(), "node " + std::to_string(node) + ", round " +
                                        std::to_string(round) + ": " + cause.what()),
      node_(node),
      round_(round) {}

void RingConfig::Validate() const {
  if (node_count < 1) {
    throw RingConfigError("ring.node_count",
                          "node_count must be at least 1, got " + std::to_string(node_count));
  }
  if (k_states <= node_count - 1) {
    throw RingConfigError("ring.k_states", "K must exceed N, the highest node index; got K=" +
                                               std::to_string(k_states) + " with node_count=" +
                                               std::to_string(node_count));
  }
  if (rounds < 0) {
    throw RingConfigError("ring.rounds", "rounds must be non-negative, got " + std::to_string(rounds));
  }
}

void ValidateInjections(const RingConfig& config, const std::vector<Injection>& injections) {
  std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> seen;
  for (std::size_t i = 0; i < injections.size(); ++i) {
    const Injection& inj = injections[i];
    const std::string where = "injections[" + std::to_string(i) + "]";
    if (inj.node < 0 || inj.node >= config.node_count) {
      throw RingConfigError(where + ".node", "node " + std::to_string(inj.node) +
                                                 " outside 0.." +
                                                 std::to_string(config.node_count - 1));
    }
    if (inj.at_round < 0 || inj.at_round > config.rounds) {
      throw RingConfigError(where + ".at_round", "at_round " + std::to_string(inj.at_round) +
                                                     " outside 0.." + std::to_string(config.rounds));
    }
    if (const auto* p = std::get_if<Perturbation>(&inj.kind)) {
      if (p->new_status < 0 || p->new_status >= config.k_states) {
        throw RingConfigError(where + ".perturb", "status " + std::to_string(p->new_status) +
                                                      " outside [0, " +
                                                      std::to_string(config.k_states) + ")");
      }
    }
    auto [it, inserted] = seen.emplace(std::make_pair(inj.node, inj.at_round), i);
    if (!inserted) {
      throw RingConfigError(where, "conflicts with injections[" + std::to_string(it->second) +
                                       "] on node " + std::to_string(inj.node) + " at round " +
                                       std::to_string(inj.at_round));
    }
  }
}

RingState::RingState(const RingConfig& config)
    : k_states(config.k_states),
      statuses(static_cast<std::size_t>(config.node_count), PoisonedScalar(0)),
      privilege(static_cast<std::size_t>(config.node_count), false) {}

bool HasPrivilege(const RingState& state, std::int64_t node, EvalContext& ctx) {
  return WithSuppression(ctx, [&] {
    PoisonedScalar left = state.statuses[static_cast<std::size_t>(state.Left(node))];
    PoisonedScalar self = state.statuses[static_cast<std::size_t>(node)];
    return node == 0 ? Eq(left, self, ctx) : Neq(left, self, ctx);
  });
}

namespace {

std::vector<bool> PrivilegeVector(const RingState& state, EvalContext& ctx) {
  std::vector<bool> out(static_cast<std::size_t>(state.size()));
  for (std::int64_t i = 0; i < state.size(); ++i) {
    out[static_cast<std::size_t>(i)] = HasPrivilege(state, i, ctx);
  }
  return out;
}

std::string FormatPrivilege(const std::vector<bool>& privilege) {
  std::string line;
  line.reserve(privilege.size() * 2);
  for (std::size_t i = 0; i < privilege.size(); ++i) {
    if (i > 0) line.push_back(',');
    line.push_back(privilege[i] ? '1' : '0');
  }
  return line;
}

}  // namespace

std::string Out(const RingState& state, EvalContext& ctx) {
  return FormatPrivilege(PrivilegeVector(state, ctx));
}

bool Update(RingState& state, std::int64_t node, EvalContext& ctx, const SnapshotSink& sink) {
  auto& self = state.statuses[static_cast<std::size_t>(node)];
  auto& left = state.statuses[static_cast<std::size_t>(state.Left(node))];

  auto snapshot = [&] {
    state.privilege = PrivilegeVector(state, ctx);
    if (sink) sink(SnapshotEvent{state.round, node, FormatPrivilege(state.privilege)});
  };

  try {
    if (node == 0) {
      if (!Eq(left, self, ctx)) return false;
      snapshot();
      PoisonedScalar next = Add(self, 1, ctx);
      self = Mod(next, state.k_states, ctx);
      return true;
    }
    if (!Neq(left, self, ctx)) return false;
    snapshot();
    self = left;
    return true;
  } catch (const ArithmeticError& e) {
    throw RingArithmeticError(e, node, state.round);
  }
}

void Perturb(RingState& state, std::int64_t node, std::int64_t new_status) {
  if (node < 0 || node >= state.size()) {
    throw RingConfigError("node", "node " + std::to_string(node) + " outside the ring");
  }
  if (new_status < 0 || new_status >= state.k_states) {
    throw RingConfigError("perturb", "status " + std::to_string(new_status) + " outside [0, " +
                                         std::to_string(state.k_states) + ")");
  }
  state.statuses[static_cast<std::size_t>(node)] = PoisonedScalar(new_status);
}

RunResult Run(const RingConfig& config, const std::vector<Injection>& injections,
              EvalContext& ctx, const SnapshotSink& on_snapshot) {
  config.Validate();
  ValidateInjections(config, injections);

  RunResult result{RingState(config), {}};
  RingState& state = result.final_state;
  SnapshotSink sink = [&](const SnapshotEvent& s) {
    result.snapshots.push_back(s);
    if (on_snapshot) on_snapshot(s);
  };

  auto apply_injections = [&](std::int64_t round) {
    for (std::size_t i = 0; i < injections.size(); ++i) {
      const Injection& inj = injections[i];
      if (inj.at_round != round) continue;
      if (const auto* p = std::get_if<Perturbation>(&inj.kind)) {
        Perturb(state, inj.node, p->new_status);
      } else {
        auto& slot = state.statuses[static_cast<std::size_t>(inj.node)];
        slot = MakePoisoned(slot.clean_value(), std::get<PoisonPolicy>(inj.kind),
                            static_cast<std::int64_t>(i), config.seed);
      }
    }
  };

  for (std::int64_t round = 0; round < config.rounds; ++round) {
    state.round = round;
    apply_injections(round);
    for (std::int64_t node = 0; node < state.size(); ++node) Update(state, node, ctx, sink);
  }
  state.round = config.rounds;
  apply_injections(config.rounds);
  return result;
}

}  // namespace poisonring
