#include "root.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

namespace hearth {

FreshnessResult verify_freshness(const Store& store, const CommitHash& base,
                                 const DeviceId& device, FreshnessMode mode) {
  if (!store.contains(base))
    return {false, std::nullopt, "base commit " + base.hex() + " is unknown"};
  CommitHash head = store.head();
  if (base == head) return {true, std::nullopt, "base is HEAD"};
  if (mode == FreshnessMode::strict) {
    auto next = store.successor(base);
    return {false, next, "HEAD advanced past base (strict mode)"};
  }
  if (!store.touched_since(device, base))
    return {true, std::nullopt, "no commit after base touched " + device};
  auto invalidating = store.first_touch_after(device, base);
  return {false, invalidating,
          "state of " + device + " advanced past base " + base.hex().substr(0, 12)};
}

std::optional<ConflictReport> detect_conflict(const ProposalView& p,
                                              const IntentRecord& incoming_intent,
                                              const StateSnapshot& snap, const DeviceSet& devices,
                                              Millis now) {
  const IntentRecord* standing = nullptr;
  for (const auto& i : snap.active_intents) {
    if (i.intent_id != p.intent_id && i.claims(p.device)) {
      standing = &i;
      break;
    }
  }
  if (!standing) return std::nullopt;
  auto shadow_it = snap.shadows.find(p.device);
  if (shadow_it == snap.shadows.end()) return std::nullopt;

  Params target;
  try {
    target = devices.next_state(p.device, p.operation, p.params);
  } catch (const Error&) {
    return std::nullopt;  // the policy stage rejects unknown operations
  }
  if (target == shadow_it->second.state) return std::nullopt;  // idempotent re-assert

  ConflictReport c;
  c.device = p.device;
  c.standing = *standing;
  c.standing_state = shadow_it->second.state;
  c.incoming = incoming_intent;
  c.proposal = p;
  c.detected_at = now;
  return c;
}

const char* to_string(Resolution::Action a) {
  switch (a) {
    case Resolution::Action::keep: return "keep";
    case Resolution::Action::supersede: return "supersede";
    case Resolution::Action::escalate: return "escalate";
  }
  return "?";
}

Resolution arbitrate(const ConflictReport& c) {
  Resolution r;
  int standing = origin_rank(c.standing.origin);
  int incoming = origin_rank(c.incoming.origin);
  std::ostringstream why;
  why << "device " << c.device << ": standing intent " << c.standing.intent_id << " ("
      << to_string(c.standing.origin) << ") vs incoming " << c.incoming.intent_id << " ("
      << to_string(c.incoming.origin) << "); ";
  if (standing > incoming) {
    r.action = Resolution::Action::keep;
    r.winner = c.standing.intent_id;
    why << to_string(c.standing.origin) << " outranks " << to_string(c.incoming.origin)
        << ", standing intent kept";
  } else if (incoming > standing) {
    r.action = Resolution::Action::supersede;
    r.winner = c.incoming.intent_id;
    why << to_string(c.incoming.origin) << " outranks " << to_string(c.standing.origin)
        << ", standing claim released";
  } else {
    r.action = Resolution::Action::escalate;
    r.winner = c.standing.intent_id;  // status quo holds pending review
    why << "equal precedence, escalated for operator review";
  }
  r.reasoning = why.str();
  return r;
}

Root::Root(InProcessBus& bus, const Store& store, const DeviceSet& devices, Planner& planner,
           KernelConfig config, AgentId id)
    : id_(std::move(id)), bus_(bus), store_(store), devices_(devices), planner_(planner),
      config_(config) {}

Envelope Root::make(MessageKind kind, const Topic& topic) {
  Envelope e;
  e.msg_id = ctx_->msg_id();
  e.sender = id_;
  e.topic = topic;
  e.kind = kind;
  e.sent_at = ctx_->now();
  return e;
}

void Root::start(AgentContext& ctx) {
  ctx_ = &ctx;
  bus_.connect(id_);
  inbox_ = bus_.subscribe(id_, Topic::inbox(id_));
  bus_.subscribe(id_, Topic::broadcast());  // same stream: heartbeats and wills
  schedule_liveness();
  schedule_sweep();
}

void Root::schedule_liveness() {
  ctx_->schedule_at(ctx_->now() + config_.heartbeat_interval / 2, [this] {
    liveness_tick(ctx_->now());
    schedule_liveness();
  });
}

void Root::schedule_sweep() {
  ctx_->schedule_at(ctx_->now() + config_.sweep_interval, [this] {
    leases_.sweep_expired(ctx_->now());
    schedule_sweep();
  });
}

void Root::on_envelope(const Envelope& e) {
  if (!seen_.insert(e.msg_id).second) return;
  switch (e.kind) {
    case MessageKind::user_intent:
      handle_intent(e.payload.value("name", std::string()),
                    origin_from_string(e.payload.value("origin", "user_explicit")),
                    e.payload.value("description", std::string()));
      break;
    case MessageKind::heartbeat: on_heartbeat(e); break;
    case MessageKind::will: on_will(e); break;
    case MessageKind::proposal: on_proposal(e); break;
    case MessageKind::exec_request: on_exec_request(e); break;
    case MessageKind::exec_result: on_exec_result(e); break;
    case MessageKind::rejection: {
      // Manager negative-ack: the task is blocked, not dropped. The
      // root's own broadcast notices come back through this inbox too
      // and are not acks.
      auto stage = e.payload.value("stage", std::string());
      if (e.sender == id_ || (stage != "capability" && stage != "resolution")) break;
      auto it = tasks_.find(e.payload.value("task_id", std::string()));
      if (it != tasks_.end() && !is_terminal(it->second.phase))
        it->second.phase = TaskPhase::blocked;
      break;
    }
    default: break;
  }
}

std::vector<TaskId> Root::handle_intent(const std::string& name, IntentOrigin origin,
                                        const std::string& description) {
  IntentRecord intent;
  intent.intent_id = "intent-" + std::to_string(next_intent_++);
  intent.origin = origin;
  intent.issued_at = ctx_->now();
  intent.description = description.empty() ? name : description;
  intents_[intent.intent_id] = intent;

  auto snap = store_.head_snapshot();
  std::optional<std::vector<Subtask>> plan;
  try {
    plan = planner_.decompose(name, *snap);
  } catch (const std::exception& e) {
    publish_rejection(std::nullopt, intent.intent_id, "planner", Json::object(),
                      std::string("planner failure: ") + e.what());
    return {};
  }
  if (!plan || plan->empty()) {
    publish_rejection(std::nullopt, intent.intent_id, "planner", Json::object(),
                      "no decomposition for intent '" + name + "'");
    return {};
  }

  std::vector<TaskId> out;
  for (const auto& st : *plan) {
    TaskEntry t;
    t.task_id = "task-" + std::to_string(next_task_++);
    t.intent_id = intent.intent_id;
    t.capability = st.capability;
    t.device_class = st.device_class;
    t.operation = st.operation;
    t.params = st.params;
    t.justification = st.justification;
    out.push_back(t.task_id);

    auto manager = pick_manager(t, *snap, std::nullopt);
    if (!manager) {
      t.phase = TaskPhase::blocked;
      tasks_[t.task_id] = t;
      publish_rejection(std::nullopt, t.task_id, "dispatch", Json::object(),
                        "no live manager advertises capability " + t.capability);
      continue;
    }
    tasks_[t.task_id] = t;
    dispatch_task(tasks_[t.task_id], *manager);
  }
  return out;
}

std::optional<AgentId> Root::pick_manager(const TaskEntry& t, const StateSnapshot& snap,
                                          const std::optional<AgentId>& exclude) const {
  for (const auto& [agent, info] : managers_) {  // map order: deterministic
    if (!info.live || (exclude && agent == *exclude)) continue;
    if (!info.capabilities.count(t.capability)) continue;
    // Reissue requires a grantable lease under the current policy.
    auto verdict = evaluate(snap.policy, info.role, t.device_class, t.operation, t.params);
    if (std::holds_alternative<Permit>(verdict)) return agent;
  }
  return std::nullopt;
}

void Root::dispatch_task(TaskEntry& t, const AgentId& manager) {
  t.assigned_to = manager;
  if (!is_terminal(t.phase)) t.phase = TaskPhase::dispatched;
  t.next_retry_at.reset();

  const IntentRecord& intent = intents_[t.intent_id];
  Envelope d = make(MessageKind::task_dispatch, Topic::inbox(manager));
  d.base_commit = store_.head();
  d.payload = Json{{"task_id", t.task_id},
                   {"intent_id", t.intent_id},
                   {"capability", t.capability},
                   {"device_class", t.device_class},
                   {"operation", t.operation},
                   {"params", params_to_json(t.params)},
                   {"justification", t.justification},
                   {"assigned_to", manager},
                   {"attempt", t.attempts},
                   {"intent", Json{{"intent_id", intent.intent_id},
                                   {"origin", to_string(intent.origin)},
                                   {"issued_at", intent.issued_at},
                                   {"description", intent.description}}}};
  bus_.publish(d);
}

void Root::on_heartbeat(const Envelope& e) {
  auto& m = managers_[e.sender];
  m.role = e.payload.value("role", m.role);
  if (e.payload.contains("capabilities")) {
    m.capabilities.clear();
    for (const auto& c : e.payload.at("capabilities")) m.capabilities.insert(c.get<std::string>());
  }
  m.last_heartbeat = e.sent_at;
  if (!m.live) {
    m.live = true;
    Envelope note = make(MessageKind::rejection, Topic::broadcast());
    note.payload = Json{{"stage", "liveness"}, {"agent", e.sender}, {"status", "back_online"},
                        {"reasoning", e.sender + " heartbeating again"}};
    bus_.publish(note);
  }
}

void Root::on_will(const Envelope& e) {
  mark_unresponsive(e.payload.value("agent", e.sender), "will received");
}

void Root::mark_unresponsive(const AgentId& agent, const std::string& how) {
  auto it = managers_.find(agent);
  if (it == managers_.end() || !it->second.live) return;
  it->second.live = false;
  Envelope note = make(MessageKind::rejection, Topic::broadcast());
  note.payload = Json{{"stage", "liveness"}, {"agent", agent}, {"status", "unresponsive"},
                      {"reasoning", agent + " marked unresponsive: " + how}};
  bus_.publish(note);
  recover_tasks(agent, ctx_->now());
}

std::vector<AgentId> Root::liveness_tick(Millis now) {
  std::vector<AgentId> newly;
  for (auto& [agent, info] : managers_) {
    if (info.live && now - info.last_heartbeat >= 2 * config_.heartbeat_interval)
      newly.push_back(agent);
  }
  for (const auto& a : newly) mark_unresponsive(a, "heartbeat missing for two intervals");
  return newly;
}

void Root::publish_rejection(const std::optional<AgentId>& to, const TaskId& task,
                             const std::string& stage, const Json& evidence,
                             const std::string& reasoning) {
  Envelope rej = make(MessageKind::rejection, to ? Topic::inbox(*to) : Topic::broadcast());
  rej.payload = Json{{"task_id", task}, {"stage", stage}, {"evidence", evidence},
                     {"reasoning", reasoning}};
  bus_.publish(rej);
}

void Root::on_proposal(const Envelope& e) {
  ProposalView p;
  p.task_id = e.payload.value("task_id", std::string());
  p.device = e.payload.value("device", std::string());
  p.operation = e.payload.value("operation", std::string());
  if (e.payload.contains("params")) p.params = params_from_json(e.payload.at("params"));

  auto it = tasks_.find(p.task_id);
  if (it == tasks_.end()) {
    publish_rejection(e.sender, p.task_id, "dispatch", Json::object(), "unknown task");
    return;
  }
  TaskEntry& t = it->second;
  p.intent_id = t.intent_id;
  t.device = p.device;
  if (!is_terminal(t.phase)) t.phase = TaskPhase::proposed;

  auto snap = store_.head_snapshot();

  // Stage 1: freshness.
  if (!e.base_commit) {
    publish_rejection(e.sender, p.task_id, "freshness", Json::object(),
                      "proposal carries no base_commit");
    if (!is_terminal(t.phase)) t.phase = TaskPhase::blocked;
    return;
  }
  auto freshness = verify_freshness(store_, *e.base_commit, p.device, config_.freshness_mode);
  if (!freshness.fresh) {
    Json evidence = Json::object();
    if (freshness.invalidating) evidence["invalidating_commit"] = freshness.invalidating->hex();
    publish_rejection(e.sender, p.task_id, "freshness", evidence, freshness.reason);
    if (!is_terminal(t.phase)) t.phase = TaskPhase::blocked;
    return;
  }

  // Stage 2: conflict detection and arbitration.
  const IntentRecord& incoming = intents_.count(t.intent_id)
                                     ? intents_[t.intent_id]
                                     : *snap->find_intent(t.intent_id);
  if (auto conflict = detect_conflict(p, incoming, *snap, devices_, ctx_->now())) {
    Json report{{"device", conflict->device},
                {"standing", Json{{"intent_id", conflict->standing.intent_id},
                                  {"origin", to_string(conflict->standing.origin)},
                                  {"state", params_to_json(conflict->standing_state)}}},
                {"incoming", Json{{"intent_id", conflict->incoming.intent_id},
                                  {"origin", to_string(conflict->incoming.origin)},
                                  {"operation", p.operation},
                                  {"params", params_to_json(p.params)}}},
                {"detected_at", conflict->detected_at}};
    Envelope detected = make(MessageKind::conflict_report, Topic::broadcast());
    detected.payload = report;
    bus_.publish(detected);

    Resolution res = arbitrate(*conflict);

    // Timeline evidence backs the written decision.
    Json evidence = Json::array();
    for (const auto& entry : store_.timeline_query(p.device, std::nullopt)) {
      Json line{{"commit", entry.commit.hash.hex()}, {"sender", entry.event.sender},
                {"outcome", to_string(entry.event.outcome)}};
      if (entry.intent) {
        line["intent"] = entry.intent->intent_id;
        line["origin"] = to_string(entry.intent->origin);
      }
      evidence.push_back(std::move(line));
    }

    Envelope resolved = make(MessageKind::conflict_report, Topic::broadcast());
    resolved.payload = report;
    resolved.payload["resolution"] =
        Json{{"action", to_string(res.action)},
             {"winner", res.winner},
             {"loser", res.winner == conflict->standing.intent_id ? conflict->incoming.intent_id
                                                                  : conflict->standing.intent_id},
             {"reasoning", res.reasoning},
             {"evidence", Json{{"timeline", evidence}}}};
    bus_.publish(resolved);

    if (res.action == Resolution::Action::keep) {
      publish_rejection(e.sender, p.task_id, "conflict",
                        Json{{"winner", res.winner}, {"action", "keep"}}, res.reasoning);
      if (!is_terminal(t.phase)) t.phase = TaskPhase::blocked;
      return;
    }
    if (res.action == Resolution::Action::escalate) {
      publish_rejection(e.sender, p.task_id, "conflict",
                        Json{{"winner", res.winner}, {"action", "escalate"}}, res.reasoning);
      t.phase = TaskPhase::escalated;
      return;
    }
    // supersede: the incoming intent outranks; the pipeline continues.
  }

  // Stage 3: policy.
  auto role = managers_.count(e.sender) ? managers_[e.sender].role : std::string();
  auto device_class = devices_.class_of(p.device).value_or(t.device_class);
  auto verdict = evaluate(snap->policy, role, device_class, p.operation, p.params);
  if (std::holds_alternative<Deny>(verdict)) {
    publish_rejection(e.sender, p.task_id, "policy",
                      Json{{"rule", std::get<Deny>(verdict).reason}},
                      "policy denies " + role + " " + device_class + "/" + p.operation + ": " +
                          std::get<Deny>(verdict).reason);
    if (!is_terminal(t.phase)) t.phase = TaskPhase::blocked;
    return;
  }

  // All gates passed: bind the approved action to the current commit.
  Lease lease = leases_.issue(std::get<Permit>(verdict), Grantee{role, e.sender},
                              LeaseTarget{LeaseTarget::Kind::device, p.device}, p.operation,
                              store_.head(), snap->policy_commit, ctx_->now(), config_.lease_ttl,
                              t.justification.empty() ? incoming.description : t.justification);
  t.lease_id = lease.lease_id;
  if (!is_terminal(t.phase)) t.phase = TaskPhase::granted;

  Envelope grant = make(MessageKind::lease_grant, Topic::inbox(e.sender));
  grant.lease_id = lease.lease_id;
  grant.base_commit = lease.base_commit;
  grant.payload = Json{{"task_id", p.task_id}, {"lease", lease.to_json()}};
  bus_.publish(grant);
}

void Root::on_exec_request(const Envelope& e) {
  AdapterCommand cmd;
  cmd.device_id = e.payload.value("device", std::string());
  cmd.operation = e.payload.value("operation", std::string());
  if (e.payload.contains("params")) cmd.params = params_from_json(e.payload.at("params"));
  cmd.sender = e.sender;
  cmd.lease_id = e.lease_id.value_or("");

  const Lease* lease = leases_.find(cmd.lease_id);
  auto snap = store_.head_snapshot();
  // The root's consumed view is chain-derived: a lease is spent once an
  // ok exec_result references it. Session state alone must not burn a
  // lease that never actuated.
  std::set<LeaseId> consumed(snap->consumed_leases.begin(), snap->consumed_leases.end());

  auto t0 = std::chrono::steady_clock::now();
  LeaseDecision decision =
      validate_lease(lease, cmd, ctx_->now(), store_.head(), consumed,
                     [this](const DeviceId& d, const CommitHash& base) {
                       return !store_.touched_since(d, base);
                     },
                     devices_.class_resolver());
  auto t1 = std::chrono::steady_clock::now();
  if (sink_) sink_->lease_sample(std::chrono::duration<double, std::nano>(t1 - t0).count());

  auto task_id = e.payload.value("task_id", std::string());
  if (decision.accepted) return;  // silence means proceed; the adapter re-validates

  Json evidence{{"lease_id", cmd.lease_id},
                {"code", to_string(*decision.code)},
                {"command", cmd.to_json()}};
  std::string reasoning = std::string("lease validation failed: ") + to_string(*decision.code);
  if (decision.code == RejectCode::StaleCommit && lease) {
    auto invalidating = store_.first_touch_after(cmd.device_id, lease->base_commit);
    if (invalidating) {
      evidence["invalidating_commit"] = invalidating->hex();
      reasoning += "; state of " + cmd.device_id + " advanced at commit " +
                   invalidating->hex().substr(0, 12) + " after lease base " +
                   lease->base_commit.hex().substr(0, 12);
    }
  }
  publish_rejection(e.sender, task_id, "lease", evidence, reasoning);
}

void Root::on_exec_result(const Envelope& e) {
  auto it = tasks_.find(e.payload.value("task_id", std::string()));
  if (it == tasks_.end()) return;
  TaskEntry& t = it->second;
  if (e.payload.value("outcome", std::string()) == "ok") {
    t.phase = TaskPhase::confirmed;
    auto timer = retry_timers_.find(t.task_id);
    if (timer != retry_timers_.end()) {
      ctx_->cancel_timer(timer->second);
      retry_timers_.erase(timer);
    }
  } else if (!is_terminal(t.phase)) {
    // Device fault or adapter rejection: surfaced, never silently retried.
    t.phase = TaskPhase::blocked;
  }
}

void Root::publish_recovery(const RecoveryAction& a) {
  Json evidence{{"action", a.action}, {"attempts", a.attempts}};
  if (a.reassigned_to) evidence["reassigned_to"] = *a.reassigned_to;
  if (a.next_retry_at) evidence["next_retry_at"] = *a.next_retry_at;
  publish_rejection(std::nullopt, a.task_id, "recovery", evidence,
                    "recovery: task " + a.task_id + " " + a.action);
  recovery_log_.push_back(a);
}

std::vector<RecoveryAction> Root::recover_tasks(const AgentId& failed, Millis now) {
  std::vector<RecoveryAction> actions;
  auto snap = store_.head_snapshot();
  for (auto& [tid, t] : tasks_) {
    if (!t.assigned_to || *t.assigned_to != failed) continue;
    if (t.phase == TaskPhase::escalated || t.phase == TaskPhase::retrying) continue;

    // Classification reads the committed log, not session memory.
    auto logged = snap->open_tasks.find(tid);
    TaskPhase log_phase =
        logged != snap->open_tasks.end() ? logged->second.phase : TaskPhase::dispatched;

    RecoveryAction a;
    a.task_id = tid;
    a.attempts = t.attempts;
    if (log_phase == TaskPhase::confirmed) {
      t.phase = TaskPhase::confirmed;
      a.action = "closed";
    } else if (log_phase == TaskPhase::blocked || log_phase == TaskPhase::escalated) {
      continue;  // already surfaced before the crash
    } else if (auto candidate = pick_manager(t, *snap, failed)) {
      t.attempts += 1;
      a.attempts = t.attempts;
      a.action = "reissued";
      a.reassigned_to = candidate;
      publish_recovery(a);
      dispatch_task(t, *candidate);
      actions.push_back(a);
      continue;
    } else if (t.attempts >= config_.max_attempts) {
      t.phase = TaskPhase::escalated;
      a.action = "escalated";
    } else {
      Millis delay = config_.backoff_base;
      for (int i = 1; i < t.attempts; ++i)
        delay = std::min<Millis>(delay * config_.backoff_factor, config_.backoff_cap);
      t.phase = TaskPhase::retrying;
      t.next_retry_at = now + delay;
      a.action = "queued";
      a.next_retry_at = t.next_retry_at;
      schedule_retry(tid, *t.next_retry_at);
    }
    publish_recovery(a);
    actions.push_back(a);
  }
  return actions;
}

void Root::schedule_retry(const TaskId& task, Millis due) {
  retry_timers_[task] = ctx_->schedule_at(due, [this, task] { retry_fire(task); });
}

void Root::retry_fire(const TaskId& task) {
  retry_timers_.erase(task);
  auto it = tasks_.find(task);
  if (it == tasks_.end()) return;
  TaskEntry& t = it->second;
  if (is_terminal(t.phase) || t.phase == TaskPhase::blocked) return;

  auto snap = store_.head_snapshot();
  RecoveryAction a;
  a.task_id = task;
  if (auto candidate = pick_manager(t, *snap, std::nullopt)) {
    t.attempts += 1;
    a.attempts = t.attempts;
    a.action = "reissued";
    a.reassigned_to = candidate;
    publish_recovery(a);
    dispatch_task(t, *candidate);
    return;
  }
  if (t.attempts + 1 > config_.max_attempts) {
    t.phase = TaskPhase::escalated;
    a.attempts = t.attempts;
    a.action = "escalated";
    publish_recovery(a);
    return;
  }
  t.attempts += 1;
  a.attempts = t.attempts;
  Millis delay = config_.backoff_base;
  for (int i = 1; i < t.attempts; ++i)
    delay = std::min<Millis>(delay * config_.backoff_factor, config_.backoff_cap);
  t.next_retry_at = ctx_->now() + delay;
  a.action = "queued";
  a.next_retry_at = t.next_retry_at;
  publish_recovery(a);
  schedule_retry(task, *t.next_retry_at);
}

}  // namespace hearth
