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

// Data poisoning over 64-bit signed integers.
//
// A PoisonedScalar is a proxy for an integer. Every operator applied to it is
// routed through an EvalContext, which decides (from the operand's policy)
// whether the operator emits a deviated result, whether the operand's poison
// expires, and whether the result inherits the poison. Each scalar carries a
// clean shadow value that is always computed exactly; deviations only change
// the value the operator emits.
//
//   PoisonPolicy policy = PoisonPolicy::Make(Effect::Deterministic(),
//                                            Lifetime::Always(), true,
//                                            DeviationModel::Offset(1));
//   PoisonedScalar s = MakePoisoned(0, policy, /*origin_id=*/0, /*seed=*/42);
//   EvalContext ctx;
//   PoisonedScalar x = Add(s, PoisonedScalar(1), ctx);  // x.emitted() == 2
//
// Inside a SuppressionScope (or WithSuppression) every operator behaves as on
// clean values and poison lifetimes are left untouched.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

namespace poisonring {

class PoisonError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An invalid policy or deviation model. field() names the offending field
// using the canonical config spelling, e.g. "effect.rate".
class PolicyError : public PoisonError {
 public:
  PolicyError(std::string field, const std::string& message);
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Division by zero or a result outside the int64 range.
class ArithmeticError : public PoisonError {
 public:
  ArithmeticError(std::uint64_t step, const std::string& message);
  std::uint64_t step() const { return step_; }

 private:
  std::uint64_t step_;
};

// Exact rational number with a positive denominator, kept in lowest terms.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Rational Of(std::int64_t num, std::int64_t den = 1);
  // Exact value of the shortest decimal that round-trips `value`, so 1.01
  // becomes 101/100 rather than the nearest binary fraction.
  static Rational FromDouble(double value);
  double ToDouble() const { return static_cast<double>(num) / static_cast<double>(den); }
  std::string ToString() const;

  friend bool operator==(const Rational&, const Rational&) = default;
};

enum class DeviationKind { kOffset, kScale, kStuckAt, kBitflip };

std::string_view DeviationKindName(DeviationKind kind);
std::optional<DeviationKind> ParseDeviationKind(std::string_view name);

class DeviationModel {
 public:
  static DeviationModel Offset(Rational delta);
  static DeviationModel Offset(std::int64_t delta) { return Offset(Rational::Of(delta)); }
  static DeviationModel Scale(Rational factor);
  static DeviationModel StuckAt(std::int64_t value);
  static DeviationModel Bitflip(int bit);

  DeviationKind kind() const { return kind_; }
  // Offset delta or scale factor. For stuck_at and bitflip, the integer
  // constant or bit index as a whole number.
  const Rational& magnitude() const { return magnitude_; }

  friend bool operator==(const DeviationModel&, const DeviationModel&) = default;

 private:
  DeviationModel(DeviationKind kind, Rational magnitude) : kind_(kind), magnitude_(magnitude) {}

  DeviationKind kind_;
  Rational magnitude_;
};

// Applies `model` to a clean operator result. Offset and scale round the exact
// rational result half-to-even. Throws ArithmeticError (with `step`) if the
// result does not fit in int64.
std::int64_t Deviate(const DeviationModel& model, std::int64_t clean, std::uint64_t step = 0);

class Effect {
 public:
  static Effect Deterministic() { return Effect(std::nullopt); }
  static Effect Intermittent(double rate);

  bool deterministic() const { return !rate_.has_value(); }
  // Probability of deviating per use; 1.0 when deterministic.
  double rate() const { return rate_.value_or(1.0); }

  friend bool operator==(const Effect&, const Effect&) = default;

 private:
  explicit Effect(std::optional<double> rate) : rate_(rate) {}
  std::optional<double> rate_;
};

class Lifetime {
 public:
  static Lifetime Always() { return Lifetime(std::nullopt); }
  static Lifetime Transient(std::int64_t uses);

  bool always() const { return !uses_.has_value(); }
  const std::optional<std::int64_t>& uses() const { return uses_; }

  friend bool operator==(const Lifetime&, const Lifetime&) = default;

 private:
  explicit Lifetime(std::optional<std::int64_t> uses) : uses_(uses) {}
  std::optional<std::int64_t> uses_;
};

struct PoisonPolicy {
  Effect effect = Effect::Deterministic();
  Lifetime lifetime = Lifetime::Always();
  bool infectious = false;
  DeviationModel deviation = DeviationModel::Offset(1);

  // Validated construction; the parts validate themselves on creation, so
  // this only exists to read well at call sites.
  static PoisonPolicy Make(Effect effect, Lifetime lifetime, bool infectious,
                           DeviationModel deviation) {
    return PoisonPolicy{effect, lifetime, infectious, deviation};
  }

  friend bool operator==(const PoisonPolicy&, const PoisonPolicy&) = default;
};

// Per-injection-site random stream. Seeded from (scenario seed, origin id);
// only advanced by effect draws.
class PoisonRng {
 public:
  PoisonRng(std::uint64_t seed, std::int64_t origin_id, std::uint64_t derivation = 0);

  // Bernoulli(rate) draw from the top 53 bits of one engine output.
  bool Draw(double rate);
  // Independent stream for a value infected by the `key`-th poisoned use;
  // does not advance this stream.
  PoisonRng Fork(std::uint64_t key) const;

  friend bool operator==(const PoisonRng&, const PoisonRng&) = default;

 private:
  std::uint64_t seed_;
  std::int64_t origin_id_;
  std::uint64_t derivation_;
  std::mt19937_64 engine_;
};

// The active poison on a scalar.
struct PoisonState {
  PoisonPolicy policy;
  std::optional<std::int64_t> uses_remaining;  // set iff the lifetime is transient
  std::int64_t origin_id = 0;
  PoisonRng rng;
};

class PoisonedScalar {
 public:
  // A clean value. Implicit so literals can appear as operands.
  PoisonedScalar(std::int64_t value = 0) : clean_(value), emitted_(value) {}  // NOLINT

  std::int64_t clean_value() const { return clean_; }
  // What the operator that produced this value emitted. Equal to
  // clean_value() unless that operator deviated.
  std::int64_t emitted() const { return emitted_; }

  bool poisoned() const { return poison_.has_value(); }
  const std::optional<PoisonState>& poison() const { return poison_; }
  std::optional<std::int64_t> uses_remaining() const;
  std::optional<std::int64_t> origin_id() const;

  // Drops any poison; the value itself is unchanged.
  void Clear() { poison_.reset(); }

 private:
  friend PoisonedScalar MakePoisoned(std::int64_t, const PoisonPolicy&, std::int64_t,
                                     std::uint64_t);
  friend class EvalContext;

  std::int64_t clean_;
  std::int64_t emitted_;
  std::optional<PoisonState> poison_;
};

// Wraps `value` in the given policy. No event is emitted.
PoisonedScalar MakePoisoned(std::int64_t value, const PoisonPolicy& policy,
                            std::int64_t origin_id, std::uint64_t seed);

inline bool IsPoisoned(const PoisonedScalar& v) { return v.poisoned(); }

enum class OpKind { kAdd, kSub, kMul, kMod, kEq, kNeq, kLt, kNeg };

std::string_view OpName(OpKind op);
std::optional<OpKind> ParseOpName(std::string_view name);
bool IsComparison(OpKind op);

// One intercepted operator application.
struct OperatorEvent {
  using Value = std::variant<std::int64_t, bool>;

  std::uint64_t step = 0;
  OpKind op = OpKind::kAdd;
  std::int64_t lhs_clean = 0;
  std::optional<std::int64_t> rhs_clean;  // absent for unary ops
  bool lhs_poisoned = false;
  bool rhs_poisoned = false;
  bool deviated = false;
  Value clean_result;
  Value emitted_result;
  bool suppressed = false;
  std::optional<std::int64_t> origin_id;
  std::optional<std::int64_t> lifetime_after;

  friend bool operator==(const OperatorEvent&, const OperatorEvent&) = default;
};

using EventSink = std::function<void(const OperatorEvent&)>;

// Evaluation context shared by all operators of one run. Not thread-safe; use
// one context per thread of execution.
class EvalContext {
 public:
  EvalContext() = default;
  explicit EvalContext(EventSink sink) : sink_(std::move(sink)) {}

  bool suppressed() const { return suppression_depth_ > 0; }
  int suppression_depth() const { return suppression_depth_; }
  // Number of operations intercepted so far; the next one gets this index.
  std::uint64_t step_counter() const { return step_counter_; }

  void set_sink(EventSink sink) { sink_ = std::move(sink); }

  PoisonedScalar Arith(OpKind op, PoisonedScalar& lhs, PoisonedScalar& rhs);
  bool Compare(OpKind op, PoisonedScalar& lhs, PoisonedScalar& rhs);
  PoisonedScalar Unary(OpKind op, PoisonedScalar& operand);

 private:
  friend class SuppressionScope;

  struct UseOutcome;
  UseOutcome Use(PoisonedScalar* lhs, PoisonedScalar* rhs,
                 std::optional<std::int64_t> clean_arith, std::uint64_t step);
  void Emit(const OperatorEvent& event) const {
    if (sink_) sink_(event);
  }

  int suppression_depth_ = 0;
  std::uint64_t step_counter_ = 0;
  // Unsuppressed operations that touched a poisoned operand; keys child
  // streams so that suppressed operations leave them unchanged.
  std::uint64_t poisoned_uses_ = 0;
  EventSink sink_;
};

// Disables poisoning for its lifetime. Nestable.
class SuppressionScope {
 public:
  explicit SuppressionScope(EvalContext& ctx) : ctx_(ctx) { ++ctx_.suppression_depth_; }
  ~SuppressionScope() { --ctx_.suppression_depth_; }
  SuppressionScope(const SuppressionScope&) = delete;
  SuppressionScope& operator=(const SuppressionScope&) = delete;

 private:
  EvalContext& ctx_;
};

template <typename Body>
decltype(auto) WithSuppression(EvalContext& ctx, Body&& body) {
  SuppressionScope scope(ctx);
  return std::forward<Body>(body)();
}

// Generic entry point: arithmetic ops yield a scalar, comparisons a bool.
using BinopResult = std::variant<PoisonedScalar, bool>;
BinopResult Binop(OpKind op, PoisonedScalar& lhs, PoisonedScalar& rhs, EvalContext& ctx);

// Operand lifetimes are consumed in place, so operands are taken by reference.
// The rvalue overloads take a temporary right operand, typically a literal.
inline PoisonedScalar Add(PoisonedScalar& a, PoisonedScalar&& b, EvalContext& ctx) {
  return ctx.Arith(OpKind::kAdd, a, b);
}
inline PoisonedScalar Add(PoisonedScalar& a, PoisonedScalar& b, EvalContext& ctx) {
  return ctx.Arith(OpKind::kAdd, a, b);
}
inline PoisonedScalar Sub(PoisonedScalar& a, PoisonedScalar& b, EvalContext& ctx) {
  return ctx.Arith(OpKind::kSub, a, b);
}
inline PoisonedScalar Sub(PoisonedScalar& a, PoisonedScalar&& b, EvalContext& ctx) {
  return ctx.Arith(OpKind::kSub, a, b);
}
inline PoisonedScalar Mul(PoisonedScalar& a, PoisonedScalar& b, EvalContext& ctx) {
  return ctx.Arith(OpKind::kMul, a, b);
}
inline PoisonedScalar Mul(PoisonedScalar& a, PoisonedScalar&& b, EvalContext& ctx) {
  return ctx.Arith(OpKind::kMul, a, b);
}
inline PoisonedScalar Mod(PoisonedScalar& a, PoisonedScalar& b, EvalContext& ctx) {
  return ctx.Arith(OpKind::kMod, a, b);
}
inline PoisonedScalar Mod(PoisonedScalar& a, PoisonedScalar&& b, EvalContext& ctx) {
  return ctx.Arith(OpKind::kMod, a, b);
}
inline bool Eq(PoisonedScalar& a, PoisonedScalar& b, EvalContext& ctx) {
  return ctx.Compare(OpKind::kEq, a, b);
}
inline bool Eq(PoisonedScalar& a, PoisonedScalar&& b, EvalContext& ctx) {
  return ctx.Compare(OpKind::kEq, a, b);
}
inline bool Neq(PoisonedScalar& a, PoisonedScalar& b, EvalContext& ctx) {
  return ctx.Compare(OpKind::kNeq, a, b);
}
inline bool Neq(PoisonedScalar& a, PoisonedScalar&& b, EvalContext& ctx) {
  return ctx.Compare(OpKind::kNeq, a, b);
}
inline bool Lt(PoisonedScalar& a, PoisonedScalar& b, EvalContext& ctx) {
  return ctx.Compare(OpKind::kLt, a, b);
}
inline bool Lt(PoisonedScalar& a, PoisonedScalar&& b, EvalContext& ctx) {
  return ctx.Compare(OpKind::kLt, a, b);
}
inline PoisonedScalar Neg(PoisonedScalar& a, EvalContext& ctx) {
  return ctx.Unary(OpKind::kNeg, a);
}

}  // namespace poisonring
