#include "policy.hpp"

#include <algorithm>
#include <sstream>

namespace hearth {

std::string render_param(const Json& value) {
  if (value.is_string()) return value.get<std::string>();
  return canonical(value);
}

bool ParamConstraint::admits(const Json& value) const {
  switch (kind) {
    case Kind::open:
      return true;
    case Kind::range:
      if (!value.is_number_integer()) return false;
      return value.get<int64_t>() >= lo && value.get<int64_t>() <= hi;
    case Kind::value_set:
      return std::binary_search(values.begin(), values.end(), render_param(value));
  }
  return false;
}

Json ParamConstraint::to_json() const {
  switch (kind) {
    case Kind::open:
      return Json{{"type", "open"}};
    case Kind::range:
      return Json{{"type", "range"}, {"min", lo}, {"max", hi}};
    case Kind::value_set:
      return Json{{"type", "set"}, {"values", values}};
  }
  return Json::object();
}

ParamConstraint ParamConstraint::from_json(const Json& j) {
  ParamConstraint c;
  auto type = j.at("type").get<std::string>();
  if (type == "open") {
    c.kind = Kind::open;
  } else if (type == "range") {
    c.kind = Kind::range;
    c.lo = j.at("min").get<int64_t>();
    c.hi = j.at("max").get<int64_t>();
  } else if (type == "set") {
    c.kind = Kind::value_set;
    c.values = j.at("values").get<std::vector<std::string>>();
  } else {
    parse_fail("param constraint", type);
  }
  return c;
}

std::optional<std::string> ParameterEnvelope::violation(const Params& params) const {
  for (const auto& [name, value] : params) {
    auto it = constraints.find(name);
    if (it == constraints.end()) return "UndeclaredParam:" + name;
    if (!it->second.admits(value)) return "OutOfEnvelope:" + name;
  }
  return std::nullopt;
}

Json ParameterEnvelope::to_json() const {
  Json j = Json::object();
  for (const auto& [name, c] : constraints) j[name] = c.to_json();
  return j;
}

ParameterEnvelope ParameterEnvelope::from_json(const Json& j) {
  ParameterEnvelope e;
  for (auto it = j.begin(); it != j.end(); ++it)
    e.constraints[it.key()] = ParamConstraint::from_json(it.value());
  return e;
}

const PolicyRule* PolicyDoc::find(const ManagerRole& role, const std::string& device_class,
                                  const std::string& operation) const {
  for (const auto& r : rules)
    if (r.role == role && r.device_class == device_class && r.operation == operation) return &r;
  return nullptr;
}

Json PolicyDoc::to_json() const {
  Json arr = Json::array();
  for (const auto& r : rules) {
    Json jr{{"role", r.role}, {"device_class", r.device_class}, {"operation", r.operation}};
    if (r.bounds) jr["bounds"] = r.bounds->to_json();
    arr.push_back(std::move(jr));
  }
  return Json{{"rules", arr}};
}

PolicyDoc PolicyDoc::from_json(const Json& j) {
  PolicyDoc doc;
  for (const auto& jr : j.at("rules")) {
    PolicyRule r;
    r.role = jr.at("role").get<std::string>();
    r.device_class = jr.at("device_class").get<std::string>();
    r.operation = jr.at("operation").get<std::string>();
    if (jr.contains("bounds")) r.bounds = ParameterEnvelope::from_json(jr.at("bounds"));
    doc.rules.push_back(std::move(r));
  }
  return doc;
}

static ParamConstraint parse_constraint(const std::string& spec, int line_no) {
  ParamConstraint c;
  if (spec == "*") {
    c.kind = ParamConstraint::Kind::open;
    return c;
  }
  if (spec.size() >= 2 && spec.front() == '{' && spec.back() == '}') {
    c.kind = ParamConstraint::Kind::value_set;
    std::string body = spec.substr(1, spec.size() - 2);
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) c.values.push_back(item);
    std::sort(c.values.begin(), c.values.end());
    c.values.erase(std::unique(c.values.begin(), c.values.end()), c.values.end());
    if (c.values.empty())
      throw Error(Errc::unsatisfiable_envelope,
                  "line " + std::to_string(line_no) + ": empty value set");
    return c;
  }
  auto dots = spec.find("..");
  if (dots == std::string::npos)
    throw Error(Errc::parse, "line " + std::to_string(line_no) + ": bad constraint '" + spec + "'");
  c.kind = ParamConstraint::Kind::range;
  try {
    c.lo = std::stoll(spec.substr(0, dots));
    c.hi = std::stoll(spec.substr(dots + 2));
  } catch (const std::exception&) {
    throw Error(Errc::parse, "line " + std::to_string(line_no) + ": bad range '" + spec + "'");
  }
  if (c.lo > c.hi)
    throw Error(Errc::unsatisfiable_envelope,
                "line " + std::to_string(line_no) + ": min > max in '" + spec + "'");
  return c;
}

PolicyDoc parse_policy(const std::string& text) {
  PolicyDoc doc;
  std::stringstream lines(text);
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::stringstream ss(line);
    std::vector<std::string> tokens;
    for (std::string tok; ss >> tok;) tokens.push_back(tok);
    if (tokens.empty()) continue;
    if (tokens.size() < 3)
      throw Error(Errc::parse,
                  "line " + std::to_string(line_no) + ": expected 'role class operation ...'");
    PolicyRule rule;
    rule.role = tokens[0];
    rule.device_class = tokens[1];
    rule.operation = tokens[2];
    if (doc.find(rule.role, rule.device_class, rule.operation))
      throw Error(Errc::duplicate_rule,
                  "line " + std::to_string(line_no) + ": duplicate rule for (" + rule.role + ", " +
                      rule.device_class + ", " + rule.operation + ")");
    if (tokens.size() > 3) {
      ParameterEnvelope env;
      for (size_t i = 3; i < tokens.size(); ++i) {
        auto eq = tokens[i].find('=');
        if (eq == std::string::npos || eq == 0)
          throw Error(Errc::parse,
                      "line " + std::to_string(line_no) + ": bad bound '" + tokens[i] + "'");
        env.constraints[tokens[i].substr(0, eq)] =
            parse_constraint(tokens[i].substr(eq + 1), line_no);
      }
      rule.bounds = std::move(env);
    }
    doc.rules.push_back(std::move(rule));
  }
  return doc;
}

EvalResult evaluate(const PolicyDoc& p, const ManagerRole& role, const std::string& device_class,
                    const std::string& operation, const Params& params) {
  const PolicyRule* rule = p.find(role, device_class, operation);
  if (!rule) return Deny{"NoMatchingRule"};
  if (!rule->bounds) {
    // No declared bounds: every parameter is open.
    ParameterEnvelope env;
    for (const auto& [name, _] : params)
      env.constraints[name] = ParamConstraint{};  // open
    return Permit{std::move(env)};
  }
  if (auto why = rule->bounds->violation(params)) return Deny{*why};
  return Permit{*rule->bounds};
}

Json params_to_json(const Params& p) {
  Json j = Json::object();
  for (const auto& [k, v] : p) j[k] = v;
  return j;
}

Params params_from_json(const Json& j) {
  Params p;
  for (auto it = j.begin(); it != j.end(); ++it) p[it.key()] = it.value();
  return p;
}

}  // namespace hearth
