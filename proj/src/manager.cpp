#include "manager.hpp"

#include <algorithm>

namespace hearth {

Manager::Manager(InProcessBus& bus, DeviceSet& devices, const Store& store,
                 ManagerProfile profile, KernelConfig config, AgentId root, AgentId librarian)
    : bus_(bus), devices_(devices), store_(store), profile_(std::move(profile)),
      config_(config), root_(std::move(root)), librarian_(std::move(librarian)) {}

void Manager::restart_with(CrashResidue residue, bool replay_stale) {
  restarted_ = true;
  replay_stale_ = replay_stale;
  residue_ = std::move(residue.pending);
}

Envelope Manager::make(MessageKind kind, const Topic& topic) {
  Envelope e;
  e.msg_id = ctx_->msg_id();
  e.sender = profile_.agent_id;
  e.topic = topic;
  e.kind = kind;
  e.sent_at = ctx_->now();
  return e;
}

void Manager::start(AgentContext& ctx) {
  ctx_ = &ctx;
  bus_.connect(profile_.agent_id);
  inbox_ = bus_.subscribe(profile_.agent_id, Topic::inbox(profile_.agent_id));

  Envelope will = make(MessageKind::will, Topic::broadcast());
  will.payload = Json{{"agent", profile_.agent_id}, {"reason", "unexpected_disconnect"}};
  bus_.register_will(profile_.agent_id, std::move(will));

  if (restarted_) {
    // Pull current state first; the heartbeat that announces us back
    // carries the freshly pulled HEAD in its payload.
    request_snapshot();
  } else {
    publish_heartbeat();
    schedule_heartbeat();
  }
}

bool Manager::idle() const {
  return parked_.empty() && exec_queue_.empty() && !exec_busy_ && !snapshot_pending_;
}

void Manager::publish_heartbeat() {
  Envelope hb = make(MessageKind::heartbeat, Topic::broadcast());
  std::vector<std::string> caps(profile_.capabilities.begin(), profile_.capabilities.end());
  hb.payload = Json{{"agent", profile_.agent_id},
                    {"role", profile_.role},
                    {"capabilities", caps},
                    {"seq", hb_seq_++}};
  if (resynced_ && snap_) hb.payload["resynced_head"] = snap_->head.hex();
  bus_.publish(hb);
}

void Manager::schedule_heartbeat() {
  ctx_->schedule_at(ctx_->now() + config_.heartbeat_interval, [this] {
    publish_heartbeat();
    schedule_heartbeat();
  });
}

bool Manager::grounded_fresh() const {
  return snap_ && snap_at_ >= 0 && ctx_->now() - snap_at_ <= config_.ground_cache;
}

void Manager::request_snapshot() {
  if (snapshot_pending_) return;
  snapshot_pending_ = true;
  Envelope req = make(MessageKind::snapshot_request, Topic::inbox(librarian_));
  bus_.publish(req);
  // Unreachable librarian: re-ask with doubling backoff.
  snapshot_backoff_ = snapshot_backoff_ ? std::min<Millis>(snapshot_backoff_ * 2, 4000)
                                        : config_.snapshot_retry;
  snapshot_retry_timer_ = ctx_->schedule_at(ctx_->now() + snapshot_backoff_, [this] {
    if (!snapshot_pending_) return;
    snapshot_pending_ = false;
    request_snapshot();
  });
}

void Manager::on_snapshot_reply(const Envelope& e) {
  snap_ = StateSnapshot::from_json(e.payload.at("snapshot"));
  snap_at_ = ctx_->now();
  snapshot_pending_ = false;
  snapshot_backoff_ = 0;
  ctx_->cancel_timer(snapshot_retry_timer_);

  if (restarted_ && !resynced_) {
    resynced_ = true;
    publish_heartbeat();
    schedule_heartbeat();
    if (replay_stale_) {
      for (const auto& item : residue_) {
        pending_execs_[item.task_id] = item;
        replayed_.insert(item.task_id);
        publish_exec_request(item, std::nullopt);
        enqueue_exec(item.task_id);
      }
    } else {
      residue_.clear();  // discarded on a clean resync
    }
  }

  auto parked = std::move(parked_);
  parked_.clear();
  for (const auto& task : parked) propose(task);
}

void Manager::on_envelope(const Envelope& e) {
  if (!seen_.insert(e.msg_id).second) return;  // at-least-once dedup
  switch (e.kind) {
    case MessageKind::task_dispatch: on_task_dispatch(e); break;
    case MessageKind::snapshot_reply: on_snapshot_reply(e); break;
    case MessageKind::lease_grant: on_lease_grant(e); break;
    case MessageKind::rejection: on_rejection(e); break;
    default: break;
  }
}

void Manager::send_negative_ack(const TaskId& task, const std::string& stage,
                                const std::string& why) {
  Envelope rej = make(MessageKind::rejection, Topic::inbox(root_));
  rej.payload = Json{{"task_id", task}, {"stage", stage}, {"reasoning", why},
                     {"evidence", Json::object()}};
  bus_.publish(rej);
}

void Manager::on_task_dispatch(const Envelope& e) {
  auto task = e.payload.value("task_id", std::string());
  auto capability = e.payload.value("capability", std::string());
  if (!profile_.capabilities.count(capability)) {
    send_negative_ack(task, "capability",
                      profile_.agent_id + " does not advertise " + capability);
    return;
  }
  if (grounded_fresh()) {
    propose(e.payload);
  } else {
    parked_.push_back(e.payload);
    request_snapshot();
  }
}

void Manager::propose(const Json& task_payload) {
  auto task = task_payload.value("task_id", std::string());
  auto device_class = task_payload.value("device_class", std::string());
  auto operation = task_payload.value("operation", std::string());
  Params params = task_payload.contains("params") ? params_from_json(task_payload.at("params"))
                                                  : Params{};

  // Resolve the class against this manager's own domain.
  std::vector<DeviceId> candidates;
  for (const auto& d : devices_.ids_of_class(device_class))
    if (profile_.domain_devices.count(d)) candidates.push_back(d);
  std::sort(candidates.begin(), candidates.end());
  if (candidates.empty()) {
    send_negative_ack(task, "resolution",
                      "no device of class " + device_class + " in domain of " + profile_.agent_id);
    return;
  }
  const DeviceId& device = candidates.front();

  PendingProposal pp;
  pp.device = device;
  pp.operation = operation;
  pp.params = params;
  pp.base = snap_->head;
  pp.intent_id = task_payload.value("intent_id", std::string());
  pp.justification = task_payload.value("justification", std::string());
  proposals_[task] = pp;

  Envelope prop = make(MessageKind::proposal, Topic::inbox(root_));
  prop.base_commit = snap_->head;
  prop.payload = Json{{"task_id", task},
                      {"intent_id", pp.intent_id},
                      {"device", device},
                      {"operation", operation},
                      {"params", params_to_json(params)},
                      {"rationale", pp.justification}};
  bus_.publish(prop);
}

void Manager::on_lease_grant(const Envelope& e) {
  auto task = e.payload.value("task_id", std::string());
  auto it = proposals_.find(task);
  if (it == proposals_.end() || !e.payload.contains("lease")) return;
  Lease lease = Lease::from_json(e.payload.at("lease"));

  PendingExec item;
  item.task_id = task;
  item.intent_id = it->second.intent_id;
  item.cmd = AdapterCommand{it->second.device, it->second.operation, it->second.params,
                            profile_.agent_id, lease.lease_id};
  item.lease = lease;
  proposals_.erase(it);
  pending_execs_[task] = item;

  publish_exec_request(item, std::nullopt);
  enqueue_exec(task);
}

void Manager::publish_exec_request(const PendingExec& item,
                                   const std::optional<LeaseId>& lease_override) {
  Envelope req = make(MessageKind::exec_request, Topic::inbox(root_));
  req.base_commit = item.lease.base_commit;
  req.lease_id = lease_override.value_or(item.lease.lease_id);
  req.payload = Json{{"task_id", item.task_id},
                     {"device", item.cmd.device_id},
                     {"operation", item.cmd.operation},
                     {"params", params_to_json(item.cmd.params)}};
  bus_.publish(req);
}

void Manager::enqueue_exec(const TaskId& task) {
  exec_queue_.push_back(task);
  maybe_start_exec();
}

void Manager::maybe_start_exec() {
  if (exec_busy_) return;
  while (!exec_queue_.empty() && !pending_execs_.count(exec_queue_.front()))
    exec_queue_.pop_front();  // cancelled upstream
  if (exec_queue_.empty()) return;
  TaskId task = exec_queue_.front();
  exec_queue_.pop_front();
  exec_busy_ = true;
  Millis latency = devices_.has(pending_execs_[task].cmd.device_id)
                       ? devices_.latency(pending_execs_[task].cmd.device_id)
                       : 0;
  ctx_->schedule_at(ctx_->now() + latency, [this, task] { complete_exec(task); });
}

void Manager::complete_exec(const TaskId& task) {
  exec_busy_ = false;
  auto it = pending_execs_.find(task);
  if (it == pending_execs_.end()) {  // rejected upstream before actuation
    maybe_start_exec();
    return;
  }
  PendingExec item = std::move(it->second);
  pending_execs_.erase(it);

  auto probe = [this](const DeviceId& d, const CommitHash& base) {
    return !store_.touched_since(d, base);
  };
  ApplyResult result =
      devices_.apply(item.cmd, item.lease, ctx_->now(), store_.head(), probe, item.intent_id);

  Envelope res = make(MessageKind::exec_result, Topic::inbox(root_));
  res.base_commit = item.lease.base_commit;
  res.lease_id = item.lease.lease_id;
  Json resulting{{"device", item.cmd.device_id},
                 {"device_class", devices_.class_of(item.cmd.device_id).value_or("")}};
  std::string outcome, detail;
  switch (result.kind) {
    case ApplyResult::Kind::applied:
      outcome = "ok";
      detail = "applied";
      resulting["state"] = params_to_json(result.new_state);
      break;
    case ApplyResult::Kind::faulted:
      outcome = "failed";
      detail = result.detail;
      break;
    case ApplyResult::Kind::rejected:
      outcome = "failed";
      detail = std::string("adapter rejected lease: ") +
               to_string(result.decision.code.value_or(RejectCode::Missing));
      break;
  }
  res.payload = Json{{"task_id", item.task_id},
                     {"lease_id", item.lease.lease_id},
                     {"outcome", outcome},
                     {"detail", detail},
                     {"resulting_state", resulting}};
  bus_.publish(res);
  maybe_start_exec();
}

void Manager::on_rejection(const Envelope& e) {
  auto task = e.payload.value("task_id", std::string());
  if (task.empty()) return;

  // Abort a pending actuation only when the rejection is about the
  // lease it would consume; a verdict on some older replayed command
  // must not cancel a freshly granted one for the same task.
  std::string rejected_lease;
  if (e.payload.contains("evidence"))
    rejected_lease = e.payload.at("evidence").value("lease_id", std::string());
  bool was_pending = false;
  auto pending = pending_execs_.find(task);
  if (pending != pending_execs_.end() &&
      (rejected_lease.empty() || pending->second.lease.lease_id == rejected_lease)) {
    pending_execs_.erase(pending);
    was_pending = true;
  }
  proposals_.erase(task);

  // A replayed pre-crash command gets one re-grounded retry: pull the
  // current state, then re-propose under a fresh base.
  if (was_pending && replayed_.count(task) && !replay_retried_) {
    replay_retried_ = true;
    auto residue = std::find_if(residue_.begin(), residue_.end(),
                                [&](const PendingExec& p) { return p.task_id == task; });
    if (residue != residue_.end()) {
      Json retry{{"task_id", task},
                 {"intent_id", residue->intent_id},
                 {"capability", ""},
                 {"device_class", devices_.class_of(residue->cmd.device_id).value_or("")},
                 {"operation", residue->cmd.operation},
                 {"params", params_to_json(residue->cmd.params)},
                 {"justification", "re-grounded retry after rejection"}};
      snap_at_ = -1;  // force a fresh ground
      parked_.push_back(retry);
      request_snapshot();
    }
  }
}

CrashResidue Manager::take_residue() {
  CrashResidue r;
  for (auto& [task, item] : pending_execs_) r.pending.push_back(item);
  return r;
}

void Manager::replay_pending(const std::optional<LeaseId>& lease_override) {
  for (const auto& item : residue_) publish_exec_request(item, lease_override);
}

void Manager::on_reconnect() {
  bus_.connect(profile_.agent_id);
  Envelope will = make(MessageKind::will, Topic::broadcast());
  will.payload = Json{{"agent", profile_.agent_id}, {"reason", "unexpected_disconnect"}};
  bus_.register_will(profile_.agent_id, std::move(will));
  publish_heartbeat();
}

}  // namespace hearth
