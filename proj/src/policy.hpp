#pragma once

// Versioned policy: role -> allowed (device class, operation, parameter
// envelope). Text format, one rule per line:
//
//   role device_class operation [param=lo..hi | param={a,b,c} | param=*]...
//
// '#' starts a comment. `param=*` declares an explicitly open parameter;
// a command parameter with no declaration at all is rejected, so
// envelope containment stays decidable.

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "common.hpp"
#include "wire.hpp"

namespace hearth {

using ManagerRole = std::string;
using Params = std::map<std::string, Json>;  // scalar values only

struct ParamConstraint {
  enum class Kind { range, value_set, open };
  Kind kind = Kind::open;
  int64_t lo = 0, hi = 0;              // range
  std::vector<std::string> values;     // value_set, sorted

  bool admits(const Json& value) const;

  Json to_json() const;
  static ParamConstraint from_json(const Json& j);
  bool operator==(const ParamConstraint&) const = default;
};

struct ParameterEnvelope {
  std::map<std::string, ParamConstraint> constraints;

  // Empty reason means every parameter is declared and inside bounds.
  std::optional<std::string> violation(const Params& params) const;
  bool contains(const Params& params) const { return !violation(params).has_value(); }

  Json to_json() const;
  static ParameterEnvelope from_json(const Json& j);
  bool operator==(const ParameterEnvelope&) const = default;
};

struct PolicyRule {
  ManagerRole role;
  std::string device_class;
  std::string operation;
  std::optional<ParameterEnvelope> bounds;

  bool operator==(const PolicyRule&) const = default;
};

struct PolicyDoc {
  std::vector<PolicyRule> rules;

  const PolicyRule* find(const ManagerRole& role, const std::string& device_class,
                         const std::string& operation) const;

  Json to_json() const;
  static PolicyDoc from_json(const Json& j);
  bool operator==(const PolicyDoc&) const = default;
};

struct Permit {
  ParameterEnvelope envelope;  // copied into the lease
};

struct Deny {
  std::string reason;  // NoMatchingRule | OutOfEnvelope:<param> | UndeclaredParam:<param>
};

using EvalResult = std::variant<Permit, Deny>;

// Throws Error(parse | duplicate_rule | unsatisfiable_envelope) naming the line.
PolicyDoc parse_policy(const std::string& text);

// Pure. Deny-by-default: no matching rule means Deny.
EvalResult evaluate(const PolicyDoc& p, const ManagerRole& role, const std::string& device_class,
                    const std::string& operation, const Params& params);

Json params_to_json(const Params& p);
Params params_from_json(const Json& j);
std::string render_param(const Json& value);

}  // namespace hearth
