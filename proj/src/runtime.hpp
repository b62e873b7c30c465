#pragma once

// Agent event loops and the two drivers that run them: a deterministic
// single-threaded virtual-clock scheduler (default; run-to-quiescence
// between trace steps) and a threaded real-clock host where protocol
// time is scaled wall time. Agents are written once against
// AgentContext and cannot tell which host drives them.

#include <atomic>
#include <chrono>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <queue>
#include <random>
#include <set>
#include <thread>
#include <vector>

#include "bus.hpp"
#include "common.hpp"

namespace hearth {

struct MetricsSink {
  std::mutex mu;
  std::vector<double> lease_validation_ns;  // live samples from the root
  std::vector<double> hop_wall_ms;          // publish-to-handled, real clock only

  void lease_sample(double ns) {
    std::lock_guard lock(mu);
    lease_validation_ns.push_back(ns);
  }
  void hop_sample(double ms) {
    std::lock_guard lock(mu);
    hop_wall_ms.push_back(ms);
  }
};

class AgentContext {
public:
  virtual ~AgentContext() = default;
  virtual Millis now() const = 0;
  virtual uint64_t schedule_at(Millis due, std::function<void()> fn) = 0;
  virtual void cancel_timer(uint64_t id) = 0;
  virtual MsgId msg_id() = 0;
};

class Agent {
public:
  virtual ~Agent() = default;
  virtual const AgentId& id() const = 0;
  // Connect, subscribe, register will, arm timers. ctx stays valid until
  // the agent is removed from its host.
  virtual void start(AgentContext& ctx) = 0;
  virtual void on_envelope(const Envelope& e) = 0;
  virtual SubscriptionRef stream() const = 0;
  // Durable consumers see an envelope again after a crash between
  // delivery and handler completion.
  virtual bool durable() const { return false; }
  // False while protocol work is still queued inside the agent.
  virtual bool idle() const { return true; }
};

// Deterministic message ids: seeded, drawn in scheduler order.
class MsgIdGen {
public:
  explicit MsgIdGen(uint64_t seed) : rng_(seed) {}
  MsgId next();
  uint64_t draw();
  std::mt19937_64& rng() { return rng_; }

private:
  std::mutex mu_;
  std::mt19937_64 rng_;
};

class VirtualHost {
public:
  VirtualHost(InProcessBus& bus, MsgIdGen& ids);
  ~VirtualHost();

  Millis now() const { return now_; }
  void add_agent(Agent* a);
  void remove_agent(const AgentId& id);
  bool has_agent(const AgentId& id) const;

  // Processes every delivery and timer due at or before t; the clock
  // ends at t. Work spawned along the way at <= t runs too.
  void advance_to(Millis t);
  // Drains work due at the current instant.
  void settle() { advance_to(now_); }
  // Runs fn in the agent's execution context (immediate here; the
  // threaded host queues it onto the agent's own loop).
  void run_on(const AgentId& id, std::function<void()> fn) {
    if (agents_.count(id)) fn();
  }

  MsgIdGen& ids() { return ids_; }

  uint64_t schedule(const AgentId& owner, Millis due, std::function<void()> fn);
  void cancel(uint64_t id);

private:
  struct Timer {
    Millis due;
    uint64_t seq;
    uint64_t id;
    AgentId owner;
    std::function<void()> fn;
    bool operator>(const Timer& o) const {
      return due != o.due ? due > o.due : seq > o.seq;
    }
  };

  bool deliver_one();

  InProcessBus& bus_;
  MsgIdGen& ids_;
  Millis now_ = 0;
  uint64_t next_timer_id_ = 1;
  uint64_t next_seq_ = 1;
  std::priority_queue<Timer, std::vector<Timer>, std::greater<>> timers_;
  std::set<uint64_t> cancelled_;
  std::deque<std::pair<AgentId, SubscriptionRef>> ready_;
  std::map<AgentId, Agent*> agents_;
  std::map<AgentId, std::unique_ptr<AgentContext>> contexts_;
};

// Threaded host: each agent runs its own loop; protocol time is
// wall time times `scale` (60 keeps the 60 s heartbeat interval at
// 1 s of wall time).
class RealHost {
public:
  RealHost(InProcessBus& bus, MsgIdGen& ids, double scale, MetricsSink* sink);
  ~RealHost();

  Millis now() const;
  void add_agent(Agent* a);
  void remove_agent(const AgentId& id);
  void sleep_until(Millis protocol_t);
  // True once all queues are drained, handlers idle, and agents report
  // no queued protocol work; polls up to timeout_wall_ms.
  bool wait_quiesce(Millis timeout_wall_ms);
  // Queues fn onto the agent's own loop (runs within its poll interval).
  void run_on(const AgentId& id, std::function<void()> fn);
  void stop_all();

  struct Runner;

private:
  InProcessBus& bus_;
  MsgIdGen& ids_;
  double scale_;
  MetricsSink* sink_;
  std::chrono::steady_clock::time_point start_;
  std::mutex mu_;
  std::map<AgentId, std::unique_ptr<Runner>> runners_;
};

}  // namespace hearth
