#include "event.hpp"

#include <algorithm>

namespace hearth {

int origin_rank(IntentOrigin o) {
  switch (o) {
    case IntentOrigin::user_explicit: return 3;
    case IntentOrigin::scheduled: return 2;
    case IntentOrigin::system_default: return 1;
  }
  return 0;
}

const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::task_dispatch: return "task_dispatch";
    case EventKind::proposal: return "proposal";
    case EventKind::lease_grant: return "lease_grant";
    case EventKind::lease_reject: return "lease_reject";
    case EventKind::exec_result: return "exec_result";
    case EventKind::conflict_report: return "conflict_report";
    case EventKind::conflict_resolution: return "conflict_resolution";
    case EventKind::recovery_outcome: return "recovery_outcome";
    case EventKind::policy_update: return "policy_update";
    case EventKind::agent_status: return "agent_status";
  }
  return "?";
}

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::ok: return "ok";
    case Outcome::rejected: return "rejected";
    case Outcome::failed: return "failed";
    case Outcome::escalated: return "escalated";
  }
  return "?";
}

const char* to_string(IntentOrigin o) {
  switch (o) {
    case IntentOrigin::user_explicit: return "user_explicit";
    case IntentOrigin::scheduled: return "scheduled";
    case IntentOrigin::system_default: return "system_default";
  }
  return "?";
}

EventKind event_kind_from_string(const std::string& s) {
  for (auto k : {EventKind::task_dispatch, EventKind::proposal, EventKind::lease_grant,
                 EventKind::lease_reject, EventKind::exec_result, EventKind::conflict_report,
                 EventKind::conflict_resolution, EventKind::recovery_outcome,
                 EventKind::policy_update, EventKind::agent_status}) {
    if (s == to_string(k)) return k;
  }
  parse_fail("event kind", s);
}

Outcome outcome_from_string(const std::string& s) {
  for (auto o : {Outcome::ok, Outcome::rejected, Outcome::failed, Outcome::escalated})
    if (s == to_string(o)) return o;
  parse_fail("outcome", s);
}

IntentOrigin origin_from_string(const std::string& s) {
  for (auto o :
       {IntentOrigin::user_explicit, IntentOrigin::scheduled, IntentOrigin::system_default})
    if (s == to_string(o)) return o;
  parse_fail("intent origin", s);
}

Json EventRefs::to_json() const {
  Json j = Json::object();
  if (lease) j["lease"] = *lease;
  if (task) j["task"] = *task;
  if (intent) j["intent"] = *intent;
  if (intent_b) j["intent_b"] = *intent_b;
  if (commit) j["commit"] = commit->hex();
  return j;
}

EventRefs EventRefs::from_json(const Json& j) {
  EventRefs r;
  if (j.contains("lease")) r.lease = j.at("lease").get<std::string>();
  if (j.contains("task")) r.task = j.at("task").get<std::string>();
  if (j.contains("intent")) r.intent = j.at("intent").get<std::string>();
  if (j.contains("intent_b")) r.intent_b = j.at("intent_b").get<std::string>();
  if (j.contains("commit")) r.commit = Digest::from_hex(j.at("commit").get<std::string>());
  return r;
}

void EventRecord::validate() const {
  auto need = [&](bool ok, const char* what) {
    if (!ok)
      throw Error(Errc::invalid_argument,
                  std::string("event ") + to_string(kind) + " missing " + what);
  };
  switch (kind) {
    case EventKind::lease_grant:
    case EventKind::lease_reject:
      need(refs.lease.has_value(), "lease ref");
      break;
    case EventKind::exec_result:
      need(refs.task.has_value(), "task ref");
      need(refs.lease.has_value(), "lease ref");
      break;
    case EventKind::conflict_resolution:
      need(refs.intent.has_value() && refs.intent_b.has_value(), "conflicting intent refs");
      break;
    default:
      break;
  }
}

Json EventRecord::to_json() const {
  return Json{{"kind", to_string(kind)},   {"sender", sender}, {"subject", subject},
              {"outcome", to_string(outcome)}, {"detail", detail}, {"refs", refs.to_json()}};
}

EventRecord EventRecord::from_json(const Json& j) {
  EventRecord e;
  e.kind = event_kind_from_string(j.at("kind").get<std::string>());
  e.sender = j.at("sender").get<std::string>();
  e.subject = j.at("subject").get<std::string>();
  e.outcome = outcome_from_string(j.at("outcome").get<std::string>());
  e.detail = j.at("detail").get<std::string>();
  e.refs = EventRefs::from_json(j.at("refs"));
  return e;
}

void IntentRecord::claim(const DeviceId& d) {
  auto it = std::lower_bound(claimed_devices.begin(), claimed_devices.end(), d);
  if (it == claimed_devices.end() || *it != d) claimed_devices.insert(it, d);
}

void IntentRecord::release(const DeviceId& d) {
  auto it = std::lower_bound(claimed_devices.begin(), claimed_devices.end(), d);
  if (it != claimed_devices.end() && *it == d) claimed_devices.erase(it);
}

bool IntentRecord::claims(const DeviceId& d) const {
  return std::binary_search(claimed_devices.begin(), claimed_devices.end(), d);
}

Json IntentRecord::to_json() const {
  return Json{{"intent_id", intent_id},
              {"origin", to_string(origin)},
              {"issued_at", issued_at},
              {"description", description},
              {"claimed_devices", claimed_devices}};
}

IntentRecord IntentRecord::from_json(const Json& j) {
  IntentRecord r;
  r.intent_id = j.at("intent_id").get<std::string>();
  r.origin = origin_from_string(j.at("origin").get<std::string>());
  r.issued_at = j.at("issued_at").get<Millis>();
  r.description = j.at("description").get<std::string>();
  r.claimed_devices = j.at("claimed_devices").get<std::vector<std::string>>();
  return r;
}

}  // namespace hearth
