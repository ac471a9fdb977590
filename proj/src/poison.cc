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

#include "poisonring/poison.h"

#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace poisonring {

namespace {

using Int128 = __int128;

constexpr Int128 kInt64Min = std::numeric_limits<std::int64_t>::min();
constexpr Int128 kInt64Max = std::numeric_limits<std::int64_t>::max();

std::int64_t Narrow(Int128 v, std::uint64_t step, const char* what) {
  if (v < kInt64Min || v > kInt64Max) {
    throw ArithmeticError(step, std::string(what) + " overflows int64");
  }
  return static_cast<std::int64_t>(v);
}

Int128 FloorDiv(Int128 p, Int128 q) {
  Int128 d = p / q;
  if ((p % q != 0) && ((p < 0) != (q < 0))) --d;
  return d;
}

// p / q rounded half-to-even, q > 0.
Int128 RoundHalfEven(Int128 p, Int128 q) {
  Int128 fl = FloorDiv(p, q);
  Int128 twice_rem = 2 * (p - fl * q);
  if (twice_rem > q || (twice_rem == q && (fl % 2 != 0))) ++fl;
  return fl;
}

std::int64_t CleanArith(OpKind op, std::int64_t a, std::int64_t b, std::uint64_t step) {
  std::int64_t out = 0;
  switch (op) {
    case OpKind::kAdd:
      if (__builtin_add_overflow(a, b, &out)) throw ArithmeticError(step, "add overflows int64");
      return out;
    case OpKind::kSub:
      if (__builtin_sub_overflow(a, b, &out)) throw ArithmeticError(step, "sub overflows int64");
      return out;
    case OpKind::kMul:
      if (__builtin_mul_overflow(a, b, &out)) throw ArithmeticError(step, "mul overflows int64");
      return out;
    case OpKind::kMod: {
      if (b == 0) throw ArithmeticError(step, "modulo by zero");
      // Floored modulo: the result takes the sign of the divisor.
      Int128 r = static_cast<Int128>(a) - FloorDiv(a, b) * static_cast<Int128>(b);
      return static_cast<std::int64_t>(r);
    }
    default:
      break;
  }
  throw std::logic_error("not an arithmetic op");
}

bool CleanCompare(OpKind op, std::int64_t a, std::int64_t b) {
  switch (op) {
    case OpKind::kEq:
      return a == b;
    case OpKind::kNeq:
      return a != b;
    case OpKind::kLt:
      return a < b;
    default:
      break;
  }
  throw std::logic_error("not a comparison op");
}

}  // namespace

PolicyError::PolicyError(std::string field, const std::string& message)
    : PoisonError(field + ": " + message), field_(std::move(field)) {}

ArithmeticError::ArithmeticError(std::uint64_t step, const std::string& message)
    : PoisonError("step " + std::to_string(step) + ": " + message), step_(step) {}

Rational Rational::Of(std::int64_t num, std::int64_t den) {
  if (den == 0) throw PoisonError("rational with zero denominator");
  if (den < 0) {
    if (num == std::numeric_limits<std::int64_t>::min() ||
        den == std::numeric_limits<std::int64_t>::min()) {
      throw PoisonError("rational out of range");
    }
    num = -num;
    den = -den;
  }
  std::int64_t g = std::gcd(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  return Rational{num, den};
}

Rational Rational::FromDouble(double value) {
  if (!std::isfinite(value)) throw PoisonError("magnitude must be finite");
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::scientific);
  if (ec != std::errc()) throw PoisonError("cannot format magnitude");
  std::string_view text(buf, static_cast<std::size_t>(end - buf));

  // text looks like "-1.01e+00": collect mantissa digits and the exponent.
  bool negative = false;
  std::size_t i = 0;
  if (text[i] == '-') {
    negative = true;
    ++i;
  }
  Int128 mantissa = 0;
  int frac_digits = 0;
  bool after_point = false;
  for (; i < text.size() && text[i] != 'e'; ++i) {
    if (text[i] == '.') {
      after_point = true;
      continue;
    }
    mantissa = mantissa * 10 + (text[i] - '0');
    if (after_point) ++frac_digits;
  }
  int exponent = 0;
  std::from_chars(text.data() + i + 1 + (text[i + 1] == '+' ? 1 : 0), text.data() + text.size(),
                  exponent);
  int scale = exponent - frac_digits;
  Int128 num = mantissa;
  Int128 den = 1;
  for (; scale > 0; --scale) {
    num *= 10;
    if (num > kInt64Max) throw PoisonError("magnitude out of range");
  }
  for (; scale < 0; ++scale) {
    den *= 10;
    if (den > kInt64Max) throw PoisonError("magnitude has too many decimal places");
  }
  if (num > kInt64Max) throw PoisonError("magnitude out of range");
  return Of(static_cast<std::int64_t>(negative ? -num : num), static_cast<std::int64_t>(den));
}

std::string Rational::ToString() const {
  if (den == 1) return std::to_string(num);
  return std::to_string(num) + "/" + std::to_string(den);
}

std::string_view DeviationKindName(DeviationKind kind) {
  switch (kind) {
    case DeviationKind::kOffset:
      return "offset";
    case DeviationKind::kScale:
      return "scale";
    case DeviationKind::kStuckAt:
      return "stuck_at";
    case DeviationKind::kBitflip:
      return "bitflip";
  }
  return "?";
}

std::optional<DeviationKind> ParseDeviationKind(std::string_view name) {
  for (auto k : {DeviationKind::kOffset, DeviationKind::kScale, DeviationKind::kStuckAt,
                 DeviationKind::kBitflip}) {
    if (DeviationKindName(k) == name) return k;
  }
  return std::nullopt;
}

DeviationModel DeviationModel::Offset(Rational delta) {
  // |delta| < 1/2 rounds back to the clean value for every input.
  if (2 * static_cast<Int128>(delta.num) < delta.den &&
      -2 * static_cast<Int128>(delta.num) < delta.den) {
    throw PolicyError("deviation.magnitude",
                      "offset magnitude " + delta.ToString() +
                          " never changes a result; its absolute value must be at least 1/2");
  }
  return DeviationModel(DeviationKind::kOffset, delta);
}

DeviationModel DeviationModel::Scale(Rational factor) {
  if (factor.num == factor.den) {
    throw PolicyError("deviation.magnitude", "scale magnitude must differ from 1");
  }
  return DeviationModel(DeviationKind::kScale, factor);
}

DeviationModel DeviationModel::StuckAt(std::int64_t value) {
  return DeviationModel(DeviationKind::kStuckAt, Rational::Of(value));
}

DeviationModel DeviationModel::Bitflip(int bit) {
  if (bit < 0 || bit >= 64) {
    throw PolicyError("deviation.magnitude",
                      "bit index " + std::to_string(bit) + " outside 0..63");
  }
  return DeviationModel(DeviationKind::kBitflip, Rational::Of(bit));
}

std::int64_t Deviate(const DeviationModel& model, std::int64_t clean, std::uint64_t step) {
  const Rational& m = model.magnitude();
  switch (model.kind()) {
    case DeviationKind::kOffset:
      return Narrow(RoundHalfEven(static_cast<Int128>(clean) * m.den + m.num, m.den), step,
                    "offset deviation");
    case DeviationKind::kScale:
      return Narrow(RoundHalfEven(static_cast<Int128>(clean) * m.num, m.den), step,
                    "scale deviation");
    case DeviationKind::kStuckAt:
      return m.num;
    case DeviationKind::kBitflip:
      return static_cast<std::int64_t>(static_cast<std::uint64_t>(clean) ^
                                       (std::uint64_t{1} << m.num));
  }
  return clean;
}

Effect Effect::Intermittent(double rate) {
  if (!(rate > 0.0 && rate < 1.0)) {
    std::ostringstream msg;
    msg << "rate must lie in (0,1), got " << rate;
    if (rate == 1.0) msg << "; use \"deterministic\" for rate 1";
    throw PolicyError("effect.rate", msg.str());
  }
  return Effect(rate);
}

Lifetime Lifetime::Transient(std::int64_t uses) {
  if (uses < 1) {
    throw PolicyError("lifetime.transient",
                      "transient uses must be at least 1, got " + std::to_string(uses));
  }
  return Lifetime(uses);
}

PoisonRng::PoisonRng(std::uint64_t seed, std::int64_t origin_id, std::uint64_t derivation)
    : seed_(seed), origin_id_(origin_id), derivation_(derivation) {
  const auto origin = static_cast<std::uint64_t>(origin_id);
  std::seed_seq seq{static_cast<std::uint32_t>(seed),       static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(origin),     static_cast<std::uint32_t>(origin >> 32),
                    static_cast<std::uint32_t>(derivation), static_cast<std::uint32_t>(derivation >> 32)};
  engine_.seed(seq);
}

bool PoisonRng::Draw(double rate) {
  const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  return u < rate;
}

PoisonRng PoisonRng::Fork(std::uint64_t key) const {
  return PoisonRng(seed_, origin_id_, (derivation_ * 0x9E3779B97F4A7C15ULL) ^ (key + 1));
}

std::optional<std::int64_t> PoisonedScalar::uses_remaining() const {
  if (!poison_) return std::nullopt;
  return poison_->uses_remaining;
}

std::optional<std::int64_t> PoisonedScalar::origin_id() const {
  if (!poison_) return std::nullopt;
  return poison_->origin_id;
}

PoisonedScalar MakePoisoned(std::int64_t value, const PoisonPolicy& policy,
                            std::int64_t origin_id, std::uint64_t seed) {
  PoisonedScalar out(value);
  out.poison_ = PoisonState{policy, policy.lifetime.uses(), origin_id, PoisonRng(seed, origin_id)};
  return out;
}

std::string_view OpName(OpKind op) {
  switch (op) {
    case OpKind::kAdd:
      return "add";
    case OpKind::kSub:
      return "sub";
    case OpKind::kMul:
      return "mul";
    case OpKind::kMod:
      return "mod";
    case OpKind::kEq:
      return "eq";
    case OpKind::kNeq:
      return "neq";
    case OpKind::kLt:
      return "lt";
    case OpKind::kNeg:
      return "neg";
  }
  return "?";
}

std::optional<OpKind> ParseOpName(std::string_view name) {
  for (auto op : {OpKind::kAdd, OpKind::kSub, OpKind::kMul, OpKind::kMod, OpKind::kEq,
                  OpKind::kNeq, OpKind::kLt, OpKind::kNeg}) {
    if (OpName(op) == name) return op;
  }
  return std::nullopt;
}

bool IsComparison(OpKind op) {
  return op == OpKind::kEq || op == OpKind::kNeq || op == OpKind::kLt;
}

// Result of one unsuppressed use of the poisoned operand(s).
struct EvalContext::UseOutcome {
  bool deviated = false;
  // Deviated arithmetic result, when the op is arithmetic and deviation fired.
  std::optional<std::int64_t> deviated_value;
  // Poison the result inherits, if the governing operand is infectious.
  std::optional<PoisonState> infection;
  std::optional<std::int64_t> origin_id;
  std::optional<std::int64_t> lifetime_after;
};

namespace {

void ConsumeLifetime(std::optional<PoisonState>& poison) {
  if (!poison || !poison->uses_remaining) return;
  if (--*poison->uses_remaining <= 0) poison.reset();
}

}  // namespace

EvalContext::UseOutcome EvalContext::Use(PoisonedScalar* lhs, PoisonedScalar* rhs,
                                         std::optional<std::int64_t> clean_arith,
                                         std::uint64_t step) {
  // The left operand governs when both are poisoned.
  PoisonedScalar* gov = lhs->poisoned() ? lhs : rhs;
  PoisonState& state = *gov->poison_;
  const PoisonPolicy policy = state.policy;

  const std::uint64_t use_key = poisoned_uses_++;
  UseOutcome out;
  out.origin_id = state.origin_id;
  out.deviated = policy.effect.deterministic() || state.rng.Draw(policy.effect.rate());
  // May throw; operand lifetimes are still intact at this point.
  if (out.deviated && clean_arith) out.deviated_value = Deviate(policy.deviation, *clean_arith, step);
  if (policy.infectious) {
    out.infection = PoisonState{policy, policy.lifetime.uses(), state.origin_id, state.rng.Fork(use_key)};
  }

  ConsumeLifetime(lhs->poison_);
  if (rhs != nullptr && rhs != lhs) ConsumeLifetime(rhs->poison_);

  if (!policy.lifetime.always()) {
    out.lifetime_after = gov->poison_ ? *gov->poison_->uses_remaining : 0;
  }
  return out;
}

PoisonedScalar EvalContext::Arith(OpKind op, PoisonedScalar& lhs, PoisonedScalar& rhs) {
  const std::uint64_t step = step_counter_++;
  OperatorEvent ev;
  ev.step = step;
  ev.op = op;
  ev.lhs_clean = lhs.clean_;
  ev.rhs_clean = rhs.clean_;
  ev.lhs_poisoned = lhs.poisoned();
  ev.rhs_poisoned = rhs.poisoned();
  ev.suppressed = suppressed();

  const std::int64_t clean = CleanArith(op, lhs.clean_, rhs.clean_, step);
  PoisonedScalar result(clean);

  if (ev.suppressed || (!ev.lhs_poisoned && !ev.rhs_poisoned)) {
    if (ev.lhs_poisoned || ev.rhs_poisoned) {
      const PoisonedScalar& gov = ev.lhs_poisoned ? lhs : rhs;
      ev.origin_id = gov.origin_id();
      ev.lifetime_after = gov.uses_remaining();
    }
  } else {
    UseOutcome use = Use(&lhs, &rhs, clean, step);
    ev.deviated = use.deviated;
    ev.origin_id = use.origin_id;
    ev.lifetime_after = use.lifetime_after;
    if (use.deviated_value) result.emitted_ = *use.deviated_value;
    result.poison_ = std::move(use.infection);
  }
  ev.clean_result = result.clean_;
  ev.emitted_result = result.emitted_;
  Emit(ev);
  return result;
}

bool EvalContext::Compare(OpKind op, PoisonedScalar& lhs, PoisonedScalar& rhs) {
  const std::uint64_t step = step_counter_++;
  OperatorEvent ev;
  ev.step = step;
  ev.op = op;
  ev.lhs_clean = lhs.clean_;
  ev.rhs_clean = rhs.clean_;
  ev.lhs_poisoned = lhs.poisoned();
  ev.rhs_poisoned = rhs.poisoned();
  ev.suppressed = suppressed();

  const bool clean = CleanCompare(op, lhs.clean_, rhs.clean_);
  bool emitted = clean;
  if (ev.suppressed || (!ev.lhs_poisoned && !ev.rhs_poisoned)) {
    if (ev.lhs_poisoned || ev.rhs_poisoned) {
      const PoisonedScalar& gov = ev.lhs_poisoned ? lhs : rhs;
      ev.origin_id = gov.origin_id();
      ev.lifetime_after = gov.uses_remaining();
    }
  } else {
    UseOutcome use = Use(&lhs, &rhs, std::nullopt, step);
    ev.deviated = use.deviated;
    ev.origin_id = use.origin_id;
    ev.lifetime_after = use.lifetime_after;
    if (use.deviated) emitted = !clean;
  }
  ev.clean_result = clean;
  ev.emitted_result = emitted;
  Emit(ev);
  return emitted;
}

PoisonedScalar EvalContext::Unary(OpKind op, PoisonedScalar& operand) {
  if (op != OpKind::kNeg) throw std::logic_error("not a unary op");
  const std::uint64_t step = step_counter_++;
  OperatorEvent ev;
  ev.step = step;
  ev.op = op;
  ev.lhs_clean = operand.clean_;
  ev.lhs_poisoned = operand.poisoned();
  ev.suppressed = suppressed();

  const std::int64_t clean = CleanArith(OpKind::kSub, 0, operand.clean_, step);
  PoisonedScalar result(clean);
  if (ev.suppressed || !ev.lhs_poisoned) {
    ev.origin_id = operand.origin_id();
    ev.lifetime_after = operand.uses_remaining();
  } else {
    UseOutcome use = Use(&operand, nullptr, clean, step);
    ev.deviated = use.deviated;
    ev.origin_id = use.origin_id;
    ev.lifetime_after = use.lifetime_after;
    if (use.deviated_value) result.emitted_ = *use.deviated_value;
    result.poison_ = std::move(use.infection);
  }
  ev.clean_result = result.clean_;
  ev.emitted_result = result.emitted_;
  Emit(ev);
  return result;
}

BinopResult Binop(OpKind op, PoisonedScalar& lhs, PoisonedScalar& rhs, EvalContext& ctx) {
  if (IsComparison(op)) return ctx.Compare(op, lhs, rhs);
  return ctx.Arith(op, lhs, rhs);
}

}  // namespace poisonring
