#include "bus.hpp"

#include <algorithm>

namespace hearth {

const char* to_string(MessageKind k) {
  switch (k) {
    case MessageKind::user_intent: return "user_intent";
    case MessageKind::task_dispatch: return "task_dispatch";
    case MessageKind::proposal: return "proposal";
    case MessageKind::lease_grant: return "lease_grant";
    case MessageKind::lease_reject: return "lease_reject";
    case MessageKind::exec_request: return "exec_request";
    case MessageKind::exec_result: return "exec_result";
    case MessageKind::conflict_report: return "conflict_report";
    case MessageKind::snapshot_request: return "snapshot_request";
    case MessageKind::snapshot_reply: return "snapshot_reply";
    case MessageKind::heartbeat: return "heartbeat";
    case MessageKind::will: return "will";
    case MessageKind::rejection: return "rejection";
  }
  return "?";
}

MessageKind message_kind_from_string(const std::string& s) {
  for (auto k : {MessageKind::user_intent, MessageKind::task_dispatch, MessageKind::proposal,
                 MessageKind::lease_grant, MessageKind::lease_reject, MessageKind::exec_request,
                 MessageKind::exec_result, MessageKind::conflict_report,
                 MessageKind::snapshot_request, MessageKind::snapshot_reply,
                 MessageKind::heartbeat, MessageKind::will, MessageKind::rejection})
    if (s == to_string(k)) return k;
  parse_fail("message kind", s);
}

std::string Topic::str() const {
  switch (kind) {
    case Kind::inbox: return "inbox:" + agent;
    case Kind::broadcast: return "broadcast";
    case Kind::audit: return "audit";
  }
  return "?";
}

std::string Topic::broker_topic() const {
  switch (kind) {
    case Kind::inbox: return "hearth/inbox/" + agent;
    case Kind::broadcast: return "hearth/broadcast";
    case Kind::audit: return "hearth/audit/#";
  }
  return "?";
}

Topic Topic::parse(const std::string& s) {
  if (s == "broadcast") return broadcast();
  if (s == "audit") return audit();
  if (s.rfind("inbox:", 0) == 0) return inbox(s.substr(6));
  parse_fail("topic", s);
}

void Envelope::validate() const {
  if (kind == MessageKind::exec_request) {
    if (!base_commit || !lease_id)
      throw Error(Errc::malformed_envelope, "exec_request requires base_commit and lease_id");
  }
  if (kind == MessageKind::heartbeat || kind == MessageKind::will) {
    if (base_commit || lease_id)
      throw Error(Errc::malformed_envelope,
                  std::string(to_string(kind)) + " carries neither base_commit nor lease_id");
  }
}

Json Envelope::to_json() const {
  return Json{{"msg_id", msg_id},
              {"sender", sender},
              {"topic", topic.str()},
              {"kind", to_string(kind)},
              {"base_commit", base_commit ? Json(base_commit->hex()) : Json(nullptr)},
              {"lease_id", lease_id ? Json(*lease_id) : Json(nullptr)},
              {"payload", payload},
              {"sent_at", sent_at}};
}

Envelope Envelope::from_json(const Json& j) {
  Envelope e;
  e.msg_id = j.at("msg_id").get<std::string>();
  e.sender = j.at("sender").get<std::string>();
  e.topic = Topic::parse(j.at("topic").get<std::string>());
  e.kind = message_kind_from_string(j.at("kind").get<std::string>());
  if (!j.at("base_commit").is_null())
    e.base_commit = Digest::from_hex(j.at("base_commit").get<std::string>());
  if (!j.at("lease_id").is_null()) e.lease_id = j.at("lease_id").get<std::string>();
  e.payload = j.at("payload");
  e.sent_at = j.at("sent_at").get<Millis>();
  return e;
}

std::optional<Envelope> Subscription::try_next() {
  std::lock_guard lock(mu_);
  if (q_.empty()) return std::nullopt;
  return q_.front();
}

void Subscription::ack() {
  std::lock_guard lock(mu_);
  if (!q_.empty()) q_.pop_front();
}

std::optional<Envelope> Subscription::try_pop() {
  std::lock_guard lock(mu_);
  if (q_.empty()) return std::nullopt;
  Envelope e = std::move(q_.front());
  q_.pop_front();
  return e;
}

std::optional<Envelope> Subscription::pop_wait(std::chrono::steady_clock::time_point deadline,
                                               const std::atomic<bool>* cancel) {
  std::unique_lock lock(mu_);
  cv_.wait_until(lock, deadline,
                 [&] { return !q_.empty() || (cancel && cancel->load()); });
  if (q_.empty()) return std::nullopt;
  if (cancel && cancel->load()) return std::nullopt;
  Envelope e = std::move(q_.front());
  q_.pop_front();
  return e;
}

void Subscription::poke() {
  std::lock_guard lock(mu_);
  cv_.notify_all();
}

size_t Subscription::size() const {
  std::lock_guard lock(mu_);
  return q_.size();
}

void Subscription::push(Envelope e) {
  std::lock_guard lock(mu_);
  if (q_.size() >= bound_)
    throw Error(Errc::io, "subscriber queue overflow");
  q_.push_back(std::move(e));
  cv_.notify_one();
}

void InProcessBus::connect(const AgentId& agent) {
  std::lock_guard lock(mu_);
  connected_[agent] = true;
}

void InProcessBus::disconnect(const AgentId& agent) {
  std::lock_guard lock(mu_);
  connected_[agent] = false;
  will_armed_[agent] = false;  // clean shutdown discards the will
}

void InProcessBus::drop(const AgentId& agent) {
  Envelope will;
  bool fire = false;
  {
    std::lock_guard lock(mu_);
    connected_[agent] = false;
    if (will_armed_[agent] && wills_.count(agent)) {
      fire = true;
      will = wills_[agent];
      will_armed_[agent] = false;
    }
  }
  if (fire) route(will);  // broker publishes on the client's behalf
}

bool InProcessBus::connected(const AgentId& agent) const {
  std::lock_guard lock(mu_);
  auto it = connected_.find(agent);
  return it != connected_.end() && it->second;
}

DeliveryReceipt InProcessBus::publish(const Envelope& e) {
  e.validate();
  if (!connected(e.sender)) throw Error(Errc::not_connected, e.sender + " is not connected");
  return route(e);
}

DeliveryReceipt InProcessBus::route(const Envelope& e) {
  std::vector<std::pair<AgentId, SubscriptionRef>> targets;
  {
    std::lock_guard lock(mu_);
    ++published_;
    for (const auto& [key, sub] : subs_) {
      const auto& [owner, topic] = key;
      bool match = topic == e.topic;
      // Every inbox/broadcast publication is mirrored onto audit.
      if (!match && topic.kind == Topic::Kind::audit) match = true;
      if (match) targets.emplace_back(owner, sub);
    }
  }
  for (auto& [owner, sub] : targets) {
    sub->push(e);
    if (hook_) hook_(owner, sub);
  }
  return DeliveryReceipt{e.msg_id, static_cast<int>(targets.size())};
}

SubscriptionRef InProcessBus::subscribe(const AgentId& agent, const Topic& t) {
  if (!connected(agent)) throw Error(Errc::not_connected, agent + " is not connected");
  std::lock_guard lock(mu_);
  auto& queue = owner_queues_[agent];
  if (!queue) queue = std::make_shared<Subscription>();
  subs_[std::make_pair(agent, t)] = queue;  // durable session: same queue
  return queue;
}

void InProcessBus::register_will(const AgentId& agent, Envelope will) {
  will.validate();
  if (!connected(agent)) throw Error(Errc::not_connected, agent + " is not connected");
  std::lock_guard lock(mu_);
  wills_[agent] = std::move(will);
  will_armed_[agent] = true;
}

SubscriptionRef InProcessBus::audit_tap(const std::string& observer) {
  std::lock_guard lock(mu_);
  auto& queue = owner_queues_[observer];
  if (!queue) queue = std::make_shared<Subscription>();
  subs_[std::make_pair(observer, Topic::audit())] = queue;
  return queue;
}

void InProcessBus::set_delivery_hook(std::function<void(const AgentId&, SubscriptionRef)> hook) {
  hook_ = std::move(hook);
}

uint64_t InProcessBus::publish_count() const {
  std::lock_guard lock(mu_);
  return published_;
}

}  // namespace hearth
