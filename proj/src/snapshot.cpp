#include "snapshot.hpp"

#include <algorithm>

namespace hearth {

Json DeviceShadow::to_json() const {
  return Json{{"device_id", device_id},
              {"device_class", device_class},
              {"state", params_to_json(state)},
              {"provenance_commit", provenance_commit.hex()},
              {"provenance_intent", provenance_intent},
              {"updated_at", updated_at}};
}

DeviceShadow DeviceShadow::from_json(const Json& j) {
  DeviceShadow d;
  d.device_id = j.at("device_id").get<std::string>();
  d.device_class = j.at("device_class").get<std::string>();
  d.state = params_from_json(j.at("state"));
  d.provenance_commit = Digest::from_hex(j.at("provenance_commit").get<std::string>());
  d.provenance_intent = j.at("provenance_intent").get<std::string>();
  d.updated_at = j.at("updated_at").get<Millis>();
  return d;
}

const char* to_string(TaskPhase p) {
  switch (p) {
    case TaskPhase::dispatched: return "dispatched";
    case TaskPhase::proposed: return "proposed";
    case TaskPhase::granted: return "granted";
    case TaskPhase::confirmed: return "confirmed";
    case TaskPhase::blocked: return "blocked";
    case TaskPhase::retrying: return "retrying";
    case TaskPhase::escalated: return "escalated";
  }
  return "?";
}

TaskPhase task_phase_from_string(const std::string& s) {
  for (auto p : {TaskPhase::dispatched, TaskPhase::proposed, TaskPhase::granted,
                 TaskPhase::confirmed, TaskPhase::blocked, TaskPhase::retrying,
                 TaskPhase::escalated})
    if (s == to_string(p)) return p;
  parse_fail("task phase", s);
}

Json TaskStatus::to_json() const {
  Json j{{"task_id", task_id},     {"intent_id", intent_id}, {"capability", capability},
         {"phase", to_string(phase)}, {"attempts", attempts}};
  if (assigned_to) j["assigned_to"] = *assigned_to;
  if (lease_id) j["lease_id"] = *lease_id;
  if (next_retry_at) j["next_retry_at"] = *next_retry_at;
  return j;
}

TaskStatus TaskStatus::from_json(const Json& j) {
  TaskStatus t;
  t.task_id = j.at("task_id").get<std::string>();
  t.intent_id = j.at("intent_id").get<std::string>();
  t.capability = j.at("capability").get<std::string>();
  t.phase = task_phase_from_string(j.at("phase").get<std::string>());
  t.attempts = j.at("attempts").get<int>();
  if (j.contains("assigned_to")) t.assigned_to = j.at("assigned_to").get<std::string>();
  if (j.contains("lease_id")) t.lease_id = j.at("lease_id").get<std::string>();
  if (j.contains("next_retry_at")) t.next_retry_at = j.at("next_retry_at").get<Millis>();
  return t;
}

IntentRecord* StateSnapshot::find_intent(const IntentId& id) {
  for (auto& i : active_intents)
    if (i.intent_id == id) return &i;
  return nullptr;
}

const IntentRecord* StateSnapshot::find_intent(const IntentId& id) const {
  for (const auto& i : active_intents)
    if (i.intent_id == id) return &i;
  return nullptr;
}

bool StateSnapshot::lease_consumed(const LeaseId& id) const {
  return std::binary_search(consumed_leases.begin(), consumed_leases.end(), id);
}

bool StateSnapshot::content_equals(const StateSnapshot& other) const {
  return content_json() == other.content_json();
}

Json StateSnapshot::content_json() const {
  Json jshadows = Json::object();
  for (const auto& [id, sh] : shadows) jshadows[id] = sh.to_json();
  Json jtasks = Json::object();
  for (const auto& [id, t] : open_tasks) jtasks[id] = t.to_json();
  Json jintents = Json::array();
  for (const auto& i : active_intents) jintents.push_back(i.to_json());
  return Json{{"shadows", jshadows},
              {"policy_commit", policy_commit_pending ? std::string("self") : policy_commit.hex()},
              {"policy", policy.to_json()},
              {"open_tasks", jtasks},
              {"active_intents", jintents},
              {"pending_leases", pending_leases},
              {"consumed_leases", consumed_leases}};
}

Digest StateSnapshot::digest() const { return sha256(canonical(content_json())); }

Json StateSnapshot::to_json() const {
  Json j = content_json();
  j["head"] = head.hex();
  return j;
}

StateSnapshot StateSnapshot::from_json(const Json& j) {
  StateSnapshot s;
  s.head = Digest::from_hex(j.at("head").get<std::string>());
  for (auto it = j.at("shadows").begin(); it != j.at("shadows").end(); ++it)
    s.shadows[it.key()] = DeviceShadow::from_json(it.value());
  auto pc = j.at("policy_commit").get<std::string>();
  if (pc == "self") {
    s.policy_commit = s.head;
  } else {
    s.policy_commit = Digest::from_hex(pc);
  }
  s.policy = PolicyDoc::from_json(j.at("policy"));
  for (auto it = j.at("open_tasks").begin(); it != j.at("open_tasks").end(); ++it)
    s.open_tasks[it.key()] = TaskStatus::from_json(it.value());
  for (const auto& ji : j.at("active_intents")) s.active_intents.push_back(IntentRecord::from_json(ji));
  s.pending_leases = j.at("pending_leases").get<std::vector<std::string>>();
  s.consumed_leases = j.at("consumed_leases").get<std::vector<std::string>>();
  return s;
}

static Json detail_json(const EventRecord& e) {
  Json j = Json::parse(e.detail, nullptr, false);
  if (j.is_discarded()) return Json::object();
  return j;
}

static void sorted_insert(std::vector<std::string>& v, const std::string& s) {
  auto it = std::lower_bound(v.begin(), v.end(), s);
  if (it == v.end() || *it != s) v.insert(it, s);
}

static void sorted_erase(std::vector<std::string>& v, const std::string& s) {
  auto it = std::lower_bound(v.begin(), v.end(), s);
  if (it != v.end() && *it == s) v.erase(it);
}

static void upsert_intent(StateSnapshot& s, const Json& ji) {
  if (!ji.is_object() || !ji.contains("intent_id")) return;
  auto id = ji.at("intent_id").get<std::string>();
  if (s.find_intent(id)) return;
  IntentRecord rec;
  rec.intent_id = id;
  rec.origin = origin_from_string(ji.value("origin", std::string("system_default")));
  rec.issued_at = ji.value("issued_at", Millis{0});
  rec.description = ji.value("description", std::string());
  s.active_intents.push_back(std::move(rec));
}

static TaskStatus* task_of(StateSnapshot& s, const EventRecord& e) {
  if (!e.refs.task) return nullptr;
  auto it = s.open_tasks.find(*e.refs.task);
  return it == s.open_tasks.end() ? nullptr : &it->second;
}

void apply_event(StateSnapshot& s, const EventRecord& e, const FoldContext& ctx) {
  Json d = detail_json(e);
  switch (e.kind) {
    case EventKind::task_dispatch: {
      if (d.contains("intent")) upsert_intent(s, d.at("intent"));
      if (!e.refs.task) break;
      auto& t = s.open_tasks[*e.refs.task];
      t.task_id = *e.refs.task;
      if (e.refs.intent) t.intent_id = *e.refs.intent;
      t.capability = d.value("capability", t.capability);
      if (d.contains("assigned_to")) t.assigned_to = d.at("assigned_to").get<std::string>();
      t.attempts = d.value("attempt", t.attempts);
      if (!is_terminal(t.phase)) t.phase = TaskPhase::dispatched;
      t.next_retry_at.reset();
      break;
    }
    case EventKind::proposal: {
      if (auto* t = task_of(s, e); t && !is_terminal(t->phase))
        t->phase = e.outcome == Outcome::ok ? TaskPhase::proposed : TaskPhase::blocked;
      break;
    }
    case EventKind::lease_grant: {
      if (e.refs.lease) sorted_insert(s.pending_leases, *e.refs.lease);
      if (auto* t = task_of(s, e); t && !is_terminal(t->phase)) {
        t->phase = TaskPhase::granted;
        t->lease_id = e.refs.lease;
      }
      break;
    }
    case EventKind::lease_reject: {
      if (auto* t = task_of(s, e); t && !is_terminal(t->phase)) t->phase = TaskPhase::blocked;
      break;
    }
    case EventKind::exec_result: {
      if (e.refs.lease) {
        sorted_erase(s.pending_leases, *e.refs.lease);
        if (e.outcome == Outcome::ok) sorted_insert(s.consumed_leases, *e.refs.lease);
      }
      auto* t = task_of(s, e);
      if (e.outcome != Outcome::ok) {
        if (t && !is_terminal(t->phase)) t->phase = TaskPhase::blocked;
        break;
      }
      if (t) t->phase = TaskPhase::confirmed;
      // Shadow transition.
      if (!d.contains("device") || !d.contains("state")) break;
      DeviceShadow& sh = s.shadows[d.at("device").get<std::string>()];
      sh.device_id = d.at("device").get<std::string>();
      sh.device_class = d.value("device_class", sh.device_class);
      sh.state = params_from_json(d.at("state"));
      if (d.contains("base_commit"))
        sh.provenance_commit = Digest::from_hex(d.at("base_commit").get<std::string>());
      sh.updated_at = ctx.timestamp;
      IntentId intent = t ? t->intent_id : IntentId{};
      sh.provenance_intent = intent;
      for (auto& i : s.active_intents) {
        if (i.intent_id == intent)
          i.claim(sh.device_id);
        else
          i.release(sh.device_id);
      }
      break;
    }
    case EventKind::conflict_report:
      break;
    case EventKind::conflict_resolution: {
      if (d.value("action", std::string()) == "supersede" && e.refs.intent_b &&
          d.contains("device")) {
        if (auto* loser = s.find_intent(*e.refs.intent_b))
          loser->release(d.at("device").get<std::string>());
      }
      break;
    }
    case EventKind::recovery_outcome: {
      auto* t = task_of(s, e);
      if (!t) break;
      auto action = d.value("action", std::string());
      if (action == "queued" && !is_terminal(t->phase)) {
        t->phase = TaskPhase::retrying;
        t->attempts = d.value("attempts", t->attempts);
        if (d.contains("next_retry_at")) t->next_retry_at = d.at("next_retry_at").get<Millis>();
      } else if (action == "escalated" && !is_terminal(t->phase)) {
        t->phase = TaskPhase::escalated;
      }
      // closed: task already confirmed; reissued: a fresh task_dispatch follows.
      break;
    }
    case EventKind::policy_update: {
      if (d.contains("policy_text")) {
        s.policy = parse_policy(d.at("policy_text").get<std::string>());
        if (ctx.self_hash) {
          s.policy_commit = *ctx.self_hash;
          s.policy_commit_pending = false;
        } else {
          s.policy_commit_pending = true;
        }
      }
      break;
    }
    case EventKind::agent_status:
      break;
  }
}

}  // namespace hearth
