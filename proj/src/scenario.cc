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

#include "poisonring/scenario.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

namespace poisonring {

using nlohmann::json;
using nlohmann::ordered_json;

ScenarioError::ScenarioError(std::string source, std::size_t line, std::string field,
                             const std::string& message)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " +
                         (field.empty() ? "" : field + ": ") + message),
      source_(std::move(source)),
      line_(line),
      field_(std::move(field)) {}

namespace {

// Forward iterator over a char buffer that publishes how far the JSON lexer
// has read, so the parser callback can tell which line a key sits on.
class TrackingIterator {
 public:
  using iterator_category = std::forward_iterator_tag;
  using value_type = char;
  using difference_type = std::ptrdiff_t;
  using pointer = const char*;
  using reference = const char&;

  TrackingIterator() = default;
  TrackingIterator(const char* p, const char** furthest) : p_(p), furthest_(furthest) {}

  reference operator*() const { return *p_; }
  TrackingIterator& operator++() {
    ++p_;
    if (furthest_ != nullptr && p_ > *furthest_) *furthest_ = p_;
    return *this;
  }
  TrackingIterator operator++(int) {
    TrackingIterator old = *this;
    ++*this;
    return old;
  }
  bool operator==(const TrackingIterator& o) const { return p_ == o.p_; }
  bool operator!=(const TrackingIterator& o) const { return p_ != o.p_; }

 private:
  const char* p_ = nullptr;
  const char** furthest_ = nullptr;
};

// Message of a field-carrying error without its "field: " prefix.
template <typename E>
std::string Detail(const E& e) {
  return std::string(e.what()).substr(e.field().size() + 2);
}

// Field path ("injections[0].poison.effect") -> 1-based line.
using LineMap = std::map<std::string, std::size_t>;

struct Frame {
  bool is_array;
  std::string path;
  std::string key;      // current member, objects only
  std::int64_t index;   // current element, arrays only
};

std::string JoinPath(const Frame& f) {
  if (f.is_array) return f.path + "[" + std::to_string(f.index) + "]";
  return f.path.empty() ? f.key : f.path + "." + f.key;
}

json ParseWithLines(std::string_view text, const std::string& source, LineMap& lines) {
  const char* begin = text.data();
  const char* furthest = begin;
  auto line_at = [&](const char* p) {
    return static_cast<std::size_t>(std::count(begin, p, '\n')) + 1;
  };

  std::vector<Frame> stack;
  auto enter_value = [&]() -> std::string {
    if (stack.empty()) return "";
    Frame& top = stack.back();
    if (top.is_array) {
      ++top.index;
      const std::string path = JoinPath(top);
      lines.emplace(path, line_at(furthest));
      return path;
    }
    return JoinPath(top);
  };

  json::parser_callback_t cb = [&](int /*depth*/, json::parse_event_t event, json& parsed) {
    switch (event) {
      case json::parse_event_t::object_start:
        stack.push_back(Frame{false, enter_value(), "", -1});
        break;
      case json::parse_event_t::array_start:
        stack.push_back(Frame{true, enter_value(), "", -1});
        break;
      case json::parse_event_t::object_end:
      case json::parse_event_t::array_end:
        stack.pop_back();
        break;
      case json::parse_event_t::key:
        stack.back().key = parsed.get<std::string>();
        lines.emplace(JoinPath(stack.back()), line_at(furthest));
        break;
      case json::parse_event_t::value:
        enter_value();
        break;
    }
    return true;
  };

  try {
    return json::parse(TrackingIterator(begin, &furthest),
                       TrackingIterator(begin + text.size(), nullptr), cb);
  } catch (const json::parse_error& e) {
    const auto offset = std::min<std::size_t>(e.byte, text.size());
    throw ScenarioError(source, line_at(begin + (offset > 0 ? offset - 1 : 0)), "",
                        std::string("malformed JSON: ") + e.what());
  }
}

class Reader {
 public:
  Reader(const std::string& source, const LineMap& lines) : source_(source), lines_(lines) {}

  [[noreturn]] void Fail(const std::string& field, const std::string& message) const {
    // Fall back to the nearest enclosing field that has a recorded line.
    std::string probe = field;
    std::size_t line = 0;
    while (true) {
      auto it = lines_.find(probe);
      if (it != lines_.end()) {
        line = it->second;
        break;
      }
      const auto cut = probe.find_last_of(".[");
      if (cut == std::string::npos) break;
      probe.resize(cut);
    }
    throw ScenarioError(source_, line, field, message);
  }

  void ExpectObject(const json& j, const std::string& field,
                    std::initializer_list<std::string_view> allowed) const {
    if (!j.is_object()) Fail(field, "expected an object");
    for (const auto& [key, value] : j.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        Fail(Sub(field, key), "unknown field \"" + key + "\"");
      }
    }
  }

  std::int64_t Int(const json& j, const std::string& field) const {
    if (!j.is_number_integer()) Fail(field, "expected an integer");
    if (j.is_number_unsigned() && j.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
      Fail(field, "integer out of range");
    }
    return j.get<std::int64_t>();
  }

  std::uint64_t Uint(const json& j, const std::string& field) const {
    if (!j.is_number_unsigned()) Fail(field, "expected a non-negative integer");
    return j.get<std::uint64_t>();
  }

  double Number(const json& j, const std::string& field) const {
    if (!j.is_number()) Fail(field, "expected a number");
    return j.get<double>();
  }

  static std::string Sub(const std::string& parent, std::string_view key) {
    return parent.empty() ? std::string(key) : parent + "." + std::string(key);
  }

  RingConfig Ring(const json& j) const {
    ExpectObject(j, "ring", {"node_count", "k_states", "rounds"});
    RingConfig cfg;
    if (!j.contains("node_count")) Fail("ring.node_count", "missing");
    if (!j.contains("rounds")) Fail("ring.rounds", "missing");
    cfg.node_count = Int(j["node_count"], "ring.node_count");
    cfg.k_states = j.contains("k_states") ? Int(j["k_states"], "ring.k_states") : cfg.node_count;
    cfg.rounds = Int(j["rounds"], "ring.rounds");
    try {
      cfg.Validate();
    } catch (const RingConfigError& e) {
      Fail(e.field(), Detail(e));
    }
    return cfg;
  }

  Rational Magnitude(const json& j, const std::string& field) const {
    if (j.is_number_integer()) return Rational::Of(Int(j, field));
    if (j.is_number_float()) {
      try {
        return Rational::FromDouble(j.get<double>());
      } catch (const PoisonError& e) {
        Fail(field, e.what());
      }
    }
    if (j.is_string()) {
      const auto s = j.get<std::string>();
      const auto slash = s.find('/');
      std::int64_t num = 0;
      std::int64_t den = 0;
      const char* b = s.data();
      const char* e = s.data() + s.size();
      if (slash != std::string::npos &&
          std::from_chars(b, b + slash, num).ptr == b + slash &&
          std::from_chars(b + slash + 1, e, den).ptr == e && den != 0) {
        return Rational::Of(num, den);
      }
      Fail(field, "expected \"num/den\", got \"" + s + "\"");
    }
    Fail(field, "expected a number or \"num/den\" string");
  }

  DeviationModel Deviation(const json& j, const std::string& field) const {
    ExpectObject(j, field, {"kind", "magnitude"});
    if (!j.contains("kind") || !j["kind"].is_string()) Fail(Sub(field, "kind"), "expected a string");
    if (!j.contains("magnitude")) Fail(Sub(field, "magnitude"), "missing");
    const auto name = j["kind"].get<std::string>();
    const auto kind = ParseDeviationKind(name);
    if (!kind) {
      Fail(Sub(field, "kind"),
           "unknown deviation kind \"" + name + "\" (offset, scale, stuck_at, bitflip)");
    }
    const std::string mfield = Sub(field, "magnitude");
    try {
      switch (*kind) {
        case DeviationKind::kOffset:
          return DeviationModel::Offset(Magnitude(j["magnitude"], mfield));
        case DeviationKind::kScale:
          return DeviationModel::Scale(Magnitude(j["magnitude"], mfield));
        case DeviationKind::kStuckAt:
          return DeviationModel::StuckAt(Int(j["magnitude"], mfield));
        case DeviationKind::kBitflip: {
          const auto bit = Int(j["magnitude"], mfield);
          if (bit < 0 || bit >= 64) {
            Fail(mfield, "bit index " + std::to_string(bit) + " outside 0..63");
          }
          return DeviationModel::Bitflip(static_cast<int>(bit));
        }
      }
    } catch (const PolicyError& e) {
      Fail(mfield, Detail(e));
    }
    Fail(field, "unreachable");
  }

  PoisonPolicy Policy(const json& j, const std::string& field) const {
    ExpectObject(j, field, {"effect", "lifetime", "infectious", "deviation"});
    PoisonPolicy policy;
    const std::string efield = Sub(field, "effect");
    if (!j.contains("effect")) Fail(efield, "missing");
    const json& eff = j["effect"];
    if (eff.is_string() && eff.get<std::string>() == "deterministic") {
      policy.effect = Effect::Deterministic();
    } else if (eff.is_object() && eff.size() == 1 && eff.contains("intermittent")) {
      const std::string rfield = Sub(efield, "intermittent");
      try {
        policy.effect = Effect::Intermittent(Number(eff["intermittent"], rfield));
      } catch (const PolicyError& e) {
        Fail(rfield, Detail(e));
      }
    } else {
      Fail(efield, "expected \"deterministic\" or {\"intermittent\": rate}");
    }

    const std::string lfield = Sub(field, "lifetime");
    if (!j.contains("lifetime")) Fail(lfield, "missing");
    const json& life = j["lifetime"];
    if (life.is_string() && life.get<std::string>() == "always") {
      policy.lifetime = Lifetime::Always();
    } else if (life.is_object() && life.size() == 1 && life.contains("transient")) {
      const std::string tfield = Sub(lfield, "transient");
      try {
        policy.lifetime = Lifetime::Transient(Int(life["transient"], tfield));
      } catch (const PolicyError& e) {
        Fail(tfield, Detail(e));
      }
    } else {
      Fail(lfield, "expected \"always\" or {\"transient\": uses}");
    }

    const std::string ifield = Sub(field, "infectious");
    if (!j.contains("infectious") || !j["infectious"].is_boolean()) {
      Fail(ifield, "expected a boolean");
    }
    policy.infectious = j["infectious"].get<bool>();

    if (!j.contains("deviation")) Fail(Sub(field, "deviation"), "missing");
    policy.deviation = Deviation(j["deviation"], Sub(field, "deviation"));
    return policy;
  }

  Injection Inject(const json& j, const std::string& field) const {
    ExpectObject(j, field, {"node", "at_round", "poison", "perturb"});
    Injection inj;
    if (!j.contains("node")) Fail(Sub(field, "node"), "missing");
    inj.node = Int(j["node"], Sub(field, "node"));
    inj.at_round = j.contains("at_round") ? Int(j["at_round"], Sub(field, "at_round")) : 0;
    const bool poison = j.contains("poison");
    const bool perturb = j.contains("perturb");
    if (poison == perturb) Fail(field, "exactly one of \"poison\" or \"perturb\" is required");
    if (poison) {
      inj.kind = Policy(j["poison"], Sub(field, "poison"));
    } else {
      inj.kind = Perturbation{Int(j["perturb"], Sub(field, "perturb"))};
    }
    return inj;
  }

  Scenario Read(const json& j) const {
    ExpectObject(j, "", {"ring", "injections", "seed", "trace_path"});
    if (!j.contains("ring")) Fail("ring", "missing");
    Scenario sc;
    sc.ring = Ring(j["ring"]);
    if (j.contains("seed")) sc.set_seed(Uint(j["seed"], "seed"));
    if (j.contains("trace_path")) {
      if (!j["trace_path"].is_string()) Fail("trace_path", "expected a string");
      sc.trace_path = j["trace_path"].get<std::string>();
    }
    if (j.contains("injections")) {
      const json& arr = j["injections"];
      if (!arr.is_array()) Fail("injections", "expected an array");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        sc.injections.push_back(Inject(arr[i], "injections[" + std::to_string(i) + "]"));
      }
    }
    try {
      ValidateInjections(sc.ring, sc.injections);
    } catch (const RingConfigError& e) {
      Fail(e.field(), Detail(e));
    }
    return sc;
  }

 private:
  const std::string& source_;
  const LineMap& lines_;
};

ordered_json MagnitudeToJson(const Rational& r) {
  if (r.den == 1) return r.num;
  return r.ToString();
}

}  // namespace

Scenario ParseScenario(std::string_view text, const std::string& source) {
  LineMap lines;
  const json j = ParseWithLines(text, source, lines);
  return Reader(source, lines).Read(j);
}

Scenario LoadScenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError(path, 0, "", "cannot open scenario file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseScenario(buf.str(), path);
}

ordered_json PolicyToJson(const PoisonPolicy& policy) {
  ordered_json p;
  if (policy.effect.deterministic()) {
    p["effect"] = "deterministic";
  } else {
    p["effect"] = {{"intermittent", policy.effect.rate()}};
  }
  if (policy.lifetime.always()) {
    p["lifetime"] = "always";
  } else {
    p["lifetime"] = {{"transient", *policy.lifetime.uses()}};
  }
  p["infectious"] = policy.infectious;
  p["deviation"] = {{"kind", DeviationKindName(policy.deviation.kind())},
                    {"magnitude", MagnitudeToJson(policy.deviation.magnitude())}};
  return p;
}

ordered_json ScenarioToJson(const Scenario& scenario) {
  ordered_json j;
  j["ring"] = {{"node_count", scenario.ring.node_count},
               {"k_states", scenario.ring.k_states},
               {"rounds", scenario.ring.rounds}};
  j["seed"] = scenario.seed;
  if (scenario.trace_path) j["trace_path"] = *scenario.trace_path;
  ordered_json injections = ordered_json::array();
  for (const auto& inj : scenario.injections) {
    ordered_json i;
    i["node"] = inj.node;
    i["at_round"] = inj.at_round;
    if (const auto* p = std::get_if<Perturbation>(&inj.kind)) {
      i["perturb"] = p->new_status;
    } else {
      i["poison"] = PolicyToJson(std::get<PoisonPolicy>(inj.kind));
    }
    injections.push_back(std::move(i));
  }
  j["injections"] = std::move(injections);
  return j;
}

std::string ScenarioDigest(const Scenario& scenario) {
  ordered_json j = ScenarioToJson(scenario);
  j.erase("seed");
  j.erase("trace_path");
  // FNV-1a, 64-bit.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace poisonring
