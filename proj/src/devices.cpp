#include "devices.hpp"

#include <sstream>

namespace hearth {

namespace {

std::map<std::string, std::string> kv_args(const std::vector<std::string>& tokens, size_t from,
                                           int line_no) {
  std::map<std::string, std::string> out;
  for (size_t i = from; i < tokens.size(); ++i) {
    auto eq = tokens[i].find('=');
    if (eq == std::string::npos || eq == 0)
      parse_fail("fixture line " + std::to_string(line_no), "expected key=value, got '" + tokens[i] + "'");
    out[tokens[i].substr(0, eq)] = tokens[i].substr(eq + 1);
  }
  return out;
}

Json scalar_from_token(const std::string& tok) {
  if (tok == "true") return true;
  if (tok == "false") return false;
  if (!tok.empty() && (std::isdigit(static_cast<unsigned char>(tok[0])) || tok[0] == '-')) {
    try {
      size_t used = 0;
      int64_t v = std::stoll(tok, &used);
      if (used == tok.size()) return v;
    } catch (const std::exception&) {
    }
  }
  return tok;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

std::vector<DeviceSpec> parse_fixture(const std::string& text) {
  std::vector<DeviceSpec> specs;
  std::map<DeviceId, size_t> by_id;
  DeviceSpec* current = nullptr;

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

    const std::string& head = tokens[0];
    if (head == "device") {
      if (tokens.size() < 2) parse_fail("fixture line " + std::to_string(line_no), "device needs an id");
      DeviceSpec spec;
      spec.id = tokens[1];
      auto args = kv_args(tokens, 2, line_no);
      if (!args.count("class"))
        parse_fail("fixture line " + std::to_string(line_no), "device needs class=");
      spec.device_class = args["class"];
      if (args.count("latency")) spec.latency = std::stoll(args["latency"]);
      by_id[spec.id] = specs.size();
      specs.push_back(std::move(spec));
      current = &specs.back();
    } else if (head == "param") {
      if (!current || tokens.size() < 2)
        parse_fail("fixture line " + std::to_string(line_no), "param outside device stanza");
      DeviceParamSpec p;
      p.name = tokens[1];
      auto args = kv_args(tokens, 2, line_no);
      if (args.count("range")) {
        auto dots = args["range"].find("..");
        if (dots == std::string::npos)
          parse_fail("fixture line " + std::to_string(line_no), "bad range " + args["range"]);
        p.range.kind = ParamConstraint::Kind::range;
        p.range.lo = std::stoll(args["range"].substr(0, dots));
        p.range.hi = std::stoll(args["range"].substr(dots + 2));
      } else if (args.count("set")) {
        p.range.kind = ParamConstraint::Kind::value_set;
        p.range.values = split_commas(args["set"]);
        std::sort(p.range.values.begin(), p.range.values.end());
      } else {
        p.range.kind = ParamConstraint::Kind::open;
      }
      if (!args.count("init"))
        parse_fail("fixture line " + std::to_string(line_no), "param needs init=");
      p.init = scalar_from_token(args["init"]);
      current->params[p.name] = std::move(p);
    } else if (head == "op") {
      if (!current || tokens.size() < 2)
        parse_fail("fixture line " + std::to_string(line_no), "op outside device stanza");
      DeviceOpSpec op;
      op.name = tokens[1];
      auto args = kv_args(tokens, 2, line_no);
      if (args.count("sets")) op.sets = split_commas(args["sets"]);
      if (args.count("implies")) {
        for (const auto& pair : split_commas(args["implies"])) {
          auto colon = pair.find(':');
          if (colon == std::string::npos)
            parse_fail("fixture line " + std::to_string(line_no), "bad implies " + pair);
          op.implies.emplace_back(pair.substr(0, colon), scalar_from_token(pair.substr(colon + 1)));
        }
      }
      current->ops[op.name] = std::move(op);
    } else if (head == "fault") {
      if (tokens.size() < 2) parse_fail("fixture line " + std::to_string(line_no), "fault needs device id");
      auto it = by_id.find(tokens[1]);
      if (it == by_id.end())
        parse_fail("fixture line " + std::to_string(line_no), "fault for unknown device " + tokens[1]);
      auto args = kv_args(tokens, 2, line_no);
      auto profile = args.count("profile") ? args["profile"] : std::string("none");
      FaultProfile f;
      if (profile == "none") {
        f.kind = FaultProfile::Kind::none;
      } else if (profile == "icon_misidentification") {
        f.kind = FaultProfile::Kind::icon_misidentification;
      } else if (profile.rfind("timeout:", 0) == 0) {
        f.kind = FaultProfile::Kind::timeout;
        f.timeout_ms = std::stoll(profile.substr(8));
      } else if (profile.rfind("intermittent:", 0) == 0) {
        f.kind = FaultProfile::Kind::intermittent;
        f.percent = static_cast<int>(std::stoll(profile.substr(13)));
      } else {
        parse_fail("fixture line " + std::to_string(line_no), "unknown fault profile " + profile);
      }
      specs[it->second].fault = f;
    } else {
      parse_fail("fixture line " + std::to_string(line_no), "unknown directive " + head);
    }
  }
  return specs;
}

DeviceSet::DeviceSet(std::vector<DeviceSpec> specs) {
  for (auto& spec : specs) {
    Slot s;
    for (const auto& [name, p] : spec.params) s.state[name] = p.init;
    s.spec = std::move(spec);
    slots_[s.spec.id] = std::move(s);
  }
}

const DeviceSet::Slot& DeviceSet::slot(const DeviceId& id) const {
  auto it = slots_.find(id);
  if (it == slots_.end()) throw Error(Errc::unknown_device, "unknown device " + id);
  return it->second;
}

Params DeviceSet::transition(const Slot& s, const std::string& op, const Params& params) const {
  auto oit = s.spec.ops.find(op);
  if (oit == s.spec.ops.end())
    throw Error(Errc::unknown_operation, "device " + s.spec.id + " has no op " + op);
  Params next = s.state;
  for (const auto& [name, value] : oit->second.implies) next[name] = value;
  for (const auto& [name, value] : params) {
    if (std::find(oit->second.sets.begin(), oit->second.sets.end(), name) ==
        oit->second.sets.end())
      continue;  // params the op does not write are advisory
    auto pit = s.spec.params.find(name);
    if (pit == s.spec.params.end())
      throw Error(Errc::unknown_operation, "device " + s.spec.id + " has no param " + name);
    next[name] = value;
  }
  // Declared ranges are a hard invariant of the simulated hardware.
  for (const auto& [name, value] : next) {
    auto pit = s.spec.params.find(name);
    if (pit != s.spec.params.end() && !pit->second.range.admits(value))
      throw Error(Errc::unknown_operation,
                  "device " + s.spec.id + " value out of range for " + name);
  }
  return next;
}

Params DeviceSet::next_state(const DeviceId& id, const std::string& op,
                             const Params& params) const {
  std::lock_guard lock(mu_);
  return transition(slot(id), op, params);
}

ApplyResult DeviceSet::apply(const AdapterCommand& cmd, const Lease& lease, Millis now,
                             const CommitHash& head, const FreshnessProbe& fresh,
                             const IntentId& intent) {
  std::lock_guard lock(mu_);
  auto it = slots_.find(cmd.device_id);
  if (it == slots_.end()) throw Error(Errc::unknown_device, "unknown device " + cmd.device_id);
  Slot& s = it->second;

  auto decision = validate_lease(&lease, cmd, now, head, consumed_, fresh, [this](const DeviceId& d) {
    auto sit = slots_.find(d);
    return sit == slots_.end() ? std::optional<std::string>{}
                               : std::optional<std::string>{sit->second.spec.device_class};
  });
  if (!decision.accepted) {
    ApplyResult r;
    r.kind = ApplyResult::Kind::rejected;
    r.decision = decision;
    return r;
  }

  s.attempts += 1;
  const FaultProfile& f = s.spec.fault;
  bool fault = false;
  std::string fault_detail;
  switch (f.kind) {
    case FaultProfile::Kind::none:
      break;
    case FaultProfile::Kind::icon_misidentification:
      if (s.attempts == 1) {
        fault = true;
        fault_detail = "ui_automation fault: misidentified app icon on " + cmd.device_id +
                       " during " + cmd.operation + "; screen state unchanged, screenshot kept";
      }
      break;
    case FaultProfile::Kind::timeout:
      fault = true;
      fault_detail = "adapter timeout after " + std::to_string(f.timeout_ms) + " ms on " +
                     cmd.device_id;
      break;
    case FaultProfile::Kind::intermittent:
      if (rng_ && static_cast<int>((*rng_)() % 100) < f.percent) {
        fault = true;
        fault_detail = "intermittent adapter fault on " + cmd.device_id;
      }
      break;
  }
  if (fault) {
    ApplyResult r;
    r.kind = ApplyResult::Kind::faulted;
    r.detail = fault_detail;
    return r;
  }

  Params next;
  try {
    next = transition(s, cmd.operation, cmd.params);
  } catch (const Error& e) {
    ApplyResult r;
    r.kind = ApplyResult::Kind::faulted;
    r.detail = e.what();
    return r;
  }
  s.state = next;
  s.provenance_commit = lease.base_commit;
  s.provenance_intent = intent;
  s.updated_at = now;

  ApplyResult r;
  r.kind = ApplyResult::Kind::applied;
  r.new_state = std::move(next);
  return r;
}

DeviceShadow DeviceSet::read(const DeviceId& id) const {
  std::lock_guard lock(mu_);
  const Slot& s = slot(id);
  DeviceShadow sh;
  sh.device_id = s.spec.id;
  sh.device_class = s.spec.device_class;
  sh.state = s.state;
  sh.provenance_commit = s.provenance_commit;
  sh.provenance_intent = s.provenance_intent;
  sh.updated_at = s.updated_at;
  return sh;
}

bool DeviceSet::has(const DeviceId& id) const {
  std::lock_guard lock(mu_);
  return slots_.count(id) > 0;
}

std::optional<std::string> DeviceSet::class_of(const DeviceId& id) const {
  std::lock_guard lock(mu_);
  auto it = slots_.find(id);
  if (it == slots_.end()) return std::nullopt;
  return it->second.spec.device_class;
}

std::vector<DeviceId> DeviceSet::ids_of_class(const std::string& cls) const {
  std::lock_guard lock(mu_);
  std::vector<DeviceId> out;
  for (const auto& [id, s] : slots_)
    if (s.spec.device_class == cls) out.push_back(id);
  return out;
}

const DeviceSpec& DeviceSet::spec(const DeviceId& id) const {
  std::lock_guard lock(mu_);
  return slot(id).spec;
}

Millis DeviceSet::latency(const DeviceId& id) const {
  std::lock_guard lock(mu_);
  return slot(id).spec.latency;
}

ClassResolver DeviceSet::class_resolver() const {
  return [this](const DeviceId& d) { return class_of(d); };
}

void DeviceSet::clear_fault(const DeviceId& id) {
  std::lock_guard lock(mu_);
  auto it = slots_.find(id);
  if (it != slots_.end()) it->second.spec.fault = FaultProfile{};
}

}  // namespace hearth
