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

// Dijkstra's K-state self-stabilizing token ring over poisoned statuses.
//
// Nodes 0..n-1 form a ring; the left neighbour of node i is node (i-1) mod n.
// Node 0 is privileged when its left neighbour's status equals its own and
// then advances to (S+1) mod K. Every other node is privileged when its left
// neighbour's status differs from its own and then copies it. A round updates
// the nodes in order 0..n-1; each firing node first emits a snapshot of the
// privilege vector.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "poisonring/poison.h"
#include "poisonring/trace.h"

namespace poisonring {

// Invalid ring configuration or injection list. field() names the config
// field, e.g. "ring.k_states" or "injections[2].at_round".
class RingConfigError : public std::runtime_error {
 public:
  RingConfigError(std::string field, const std::string& message);
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// An arithmetic error raised while a node was updating.
class RingArithmeticError : public ArithmeticError {
 public:
  RingArithmeticError(const ArithmeticError& cause, std::int64_t node, std::int64_t round);
  std::int64_t node() const { return node_; }
  std::int64_t round() const { return round_; }

 private:
  std::int64_t node_;
  std::int64_t round_;
};

struct RingConfig {
  std::int64_t node_count = 5;
  std::int64_t k_states = 5;
  std::int64_t rounds = 10;
  std::uint64_t seed = 0;

  // Throws RingConfigError unless node_count >= 1, k_states > node_count - 1
  // and rounds >= 0.
  void Validate() const;
};

struct Perturbation {
  std::int64_t new_status = 0;
  friend bool operator==(const Perturbation&, const Perturbation&) = default;
};

struct Injection {
  std::int64_t node = 0;
  std::variant<PoisonPolicy, Perturbation> kind;
  // Applied before this round runs; == rounds means after the last round.
  std::int64_t at_round = 0;

  friend bool operator==(const Injection&, const Injection&) = default;
};

// Throws RingConfigError for out-of-range nodes, rounds or statuses and for
// two injections on the same node in the same round.
void ValidateInjections(const RingConfig& config, const std::vector<Injection>& injections);

struct RingState {
  explicit RingState(const RingConfig& config);

  std::int64_t size() const { return static_cast<std::int64_t>(statuses.size()); }
  std::int64_t Left(std::int64_t node) const { return (node + size() - 1) % size(); }

  std::int64_t k_states;
  std::int64_t round = 0;
  std::vector<PoisonedScalar> statuses;
  // Privilege vector of the most recent snapshot.
  std::vector<bool> privilege;
};

using SnapshotSink = std::function<void(const SnapshotEvent&)>;

// Monitoring predicate; always evaluated with poisoning suppressed.
bool HasPrivilege(const RingState& state, std::int64_t node, EvalContext& ctx);

// Privilege vector as "1,0,0,0,0"; evaluated with poisoning suppressed.
std::string Out(const RingState& state, EvalContext& ctx);

// Runs node's guarded rule with poisoning active. Returns whether the guard
// fired; only then is a snapshot emitted to `sink`.
bool Update(RingState& state, std::int64_t node, EvalContext& ctx, const SnapshotSink& sink);

// Overwrites a node's status and clears any poison on it.
void Perturb(RingState& state, std::int64_t node, std::int64_t new_status);

struct RunResult {
  RingState final_state;
  std::vector<SnapshotEvent> snapshots;
};

// Statuses start at 0. Injections apply at the start of their round in list
// order; poison injection i wraps the slot's current value with origin id i.
// `on_snapshot`, when set, additionally sees each snapshot as it is emitted.
RunResult Run(const RingConfig& config, const std::vector<Injection>& injections,
              EvalContext& ctx, const SnapshotSink& on_snapshot = nullptr);

}  // namespace poisonring
