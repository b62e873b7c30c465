#pragma once

// Message transport: per-agent inboxes, a broadcast channel, and a
// mirrored audit stream. The in-process implementation is exactly-once
// per subscription and deterministic; consumers stay idempotent on
// msg_id so an external at-least-once broker adapter can slot in behind
// the same interface. Subscriptions are durable across connection
// sessions (queued messages survive an agent restart); an abrupt drop
// publishes the registered will exactly once per session.
//
// External broker topic map: inbox(a) -> hearth/inbox/<a>,
// broadcast -> hearth/broadcast, audit -> hearth/audit/#, QoS 1, LWT
// payload = canonical serialized will envelope.

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"
#include "wire.hpp"

namespace hearth {

enum class MessageKind {
  user_intent,
  task_dispatch,
  proposal,
  lease_grant,
  lease_reject,
  exec_request,
  exec_result,
  conflict_report,
  snapshot_request,
  snapshot_reply,
  heartbeat,
  will,
  rejection,
};

const char* to_string(MessageKind k);
MessageKind message_kind_from_string(const std::string& s);

struct Topic {
  enum class Kind { inbox, broadcast, audit };
  Kind kind = Kind::broadcast;
  AgentId agent;  // inbox only

  static Topic inbox(const AgentId& a) { return {Kind::inbox, a}; }
  static Topic broadcast() { return {Kind::broadcast, {}}; }
  static Topic audit() { return {Kind::audit, {}}; }

  bool operator==(const Topic&) const = default;
  bool operator<(const Topic& o) const {
    return kind != o.kind ? kind < o.kind : agent < o.agent;
  }

  std::string str() const;
  // Topic name on an external MQTT broker.
  std::string broker_topic() const;
  static Topic parse(const std::string& s);
};

struct Envelope {
  MsgId msg_id;
  AgentId sender;
  Topic topic;
  MessageKind kind = MessageKind::heartbeat;
  std::optional<CommitHash> base_commit;
  std::optional<LeaseId> lease_id;
  Json payload = Json::object();
  Millis sent_at = 0;

  // exec_request must carry base_commit and lease_id; heartbeat and
  // will carry neither. Throws Errc::malformed_envelope.
  void validate() const;

  Json to_json() const;
  static Envelope from_json(const Json& j);
  std::string wire() const { return canonical(to_json()); }
};

struct DeliveryReceipt {
  MsgId msg_id;
  int deliveries = 0;
};

// One subscriber stream. next()/ack() give at-least-once consumption:
// an envelope stays queued until acked, so a consumer that crashes
// between next() and ack() sees it again after re-attach.
class Subscription {
public:
  std::optional<Envelope> try_next();
  void ack();
  // Convenience exactly-once pop for consumers with no durability needs.
  std::optional<Envelope> try_pop();
  // Blocking pop with deadline; real-clock hosts use this. A set cancel
  // flag (with a poke) returns early with no envelope.
  std::optional<Envelope> pop_wait(std::chrono::steady_clock::time_point deadline,
                                   const std::atomic<bool>* cancel = nullptr);
  // Wakes a pop_wait so it can observe its cancel flag.
  void poke();
  size_t size() const;
  bool empty() const { return size() == 0; }

private:
  friend class InProcessBus;
  void push(Envelope e);

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Envelope> q_;
  size_t bound_ = 4096;
};

using SubscriptionRef = std::shared_ptr<Subscription>;

class InProcessBus {
public:
  void connect(const AgentId& agent);
  // Clean shutdown: discards the registered will.
  void disconnect(const AgentId& agent);
  // Abrupt drop: publishes the will (once per session) to broadcast.
  void drop(const AgentId& agent);
  bool connected(const AgentId& agent) const;

  DeliveryReceipt publish(const Envelope& e);  // NotConnected | MalformedEnvelope
  SubscriptionRef subscribe(const AgentId& agent, const Topic& t);
  void register_will(const AgentId& agent, Envelope will);
  // Observer stream of all traffic; no publish rights needed.
  SubscriptionRef audit_tap(const std::string& observer);

  // Virtual scheduler hook: called once per enqueued delivery.
  void set_delivery_hook(std::function<void(const AgentId&, SubscriptionRef)> hook);

  uint64_t publish_count() const;

private:
  DeliveryReceipt route(const Envelope& e);

  mutable std::mutex mu_;
  std::map<AgentId, bool> connected_;
  std::map<AgentId, Envelope> wills_;
  std::map<AgentId, bool> will_armed_;
  // All of an owner's subscriptions feed one stream, so a consumer
  // waits on a single queue; durable across sessions.
  std::map<std::pair<std::string, Topic>, SubscriptionRef> subs_;
  std::map<std::string, SubscriptionRef> owner_queues_;
  std::function<void(const AgentId&, SubscriptionRef)> hook_;
  uint64_t published_ = 0;
};

}  // namespace hearth
