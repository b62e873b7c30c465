#pragma once

// Manager runtime: ground against the librarian's snapshot, translate
// dispatched subtasks into concrete device proposals, execute only under
// a granted lease, resynchronize after restart. Managers never write to
// the store and hold no standing authority to actuate.

#include <deque>
#include <map>
#include <optional>
#include <set>

#include "bus.hpp"
#include "config.hpp"
#include "devices.hpp"
#include "runtime.hpp"
#include "store.hpp"

namespace hearth {

struct ManagerProfile {
  AgentId agent_id;
  ManagerRole role;
  std::set<std::string> capabilities;
  std::set<DeviceId> domain_devices;
};

// A granted command waiting on (or interrupted before) actuation.
struct PendingExec {
  TaskId task_id;
  IntentId intent_id;
  AdapterCommand cmd;
  Lease lease;
};

struct CrashResidue {
  std::vector<PendingExec> pending;
};

class Manager final : public Agent {
public:
  Manager(InProcessBus& bus, DeviceSet& devices, const Store& store, ManagerProfile profile,
          KernelConfig config, AgentId root = "root", AgentId librarian = "scribe");

  // Restart path: a fresh process with the persisted profile only. With
  // replay_stale the pre-crash pending commands are replayed verbatim
  // after resync instead of being discarded.
  void restart_with(CrashResidue residue, bool replay_stale);

  const AgentId& id() const override { return profile_.agent_id; }
  void start(AgentContext& ctx) override;
  void on_envelope(const Envelope& e) override;
  SubscriptionRef stream() const override { return inbox_; }
  bool idle() const override;

  // Crash capture: granted-but-unactuated commands survive as residue.
  CrashResidue take_residue();
  // Fault-injection hook: re-send a (possibly doctored) pre-crash
  // exec_request without restarting again.
  void replay_pending(const std::optional<LeaseId>& lease_override);
  // Transport blip recovery: re-arm the will and announce liveness.
  void on_reconnect();

  const ManagerProfile& profile() const { return profile_; }

private:
  struct PendingProposal {
    DeviceId device;
    std::string operation;
    Params params;
    CommitHash base;
    IntentId intent_id;
    std::string justification;
  };

  void publish_heartbeat();
  void schedule_heartbeat();
  void request_snapshot();
  void on_snapshot_reply(const Envelope& e);
  void on_task_dispatch(const Envelope& e);
  void on_lease_grant(const Envelope& e);
  void on_rejection(const Envelope& e);
  void propose(const Json& task_payload);
  void publish_exec_request(const PendingExec& item, const std::optional<LeaseId>& lease_override);
  void enqueue_exec(const TaskId& task);
  void maybe_start_exec();
  void complete_exec(const TaskId& task);
  void send_negative_ack(const TaskId& task, const std::string& stage, const std::string& why);
  Envelope make(MessageKind kind, const Topic& topic);
  bool grounded_fresh() const;

  InProcessBus& bus_;
  DeviceSet& devices_;
  const Store& store_;  // adapter-side freshness probe only
  ManagerProfile profile_;
  KernelConfig config_;
  AgentId root_;
  AgentId librarian_;
  AgentContext* ctx_ = nullptr;
  SubscriptionRef inbox_;

  std::optional<StateSnapshot> snap_;
  Millis snap_at_ = -1;
  bool snapshot_pending_ = false;
  Millis snapshot_backoff_ = 0;
  uint64_t snapshot_retry_timer_ = 0;
  std::vector<Json> parked_;  // dispatches awaiting ground

  std::map<TaskId, PendingProposal> proposals_;
  std::map<TaskId, PendingExec> pending_execs_;
  std::deque<TaskId> exec_queue_;
  bool exec_busy_ = false;

  bool restarted_ = false;
  bool replay_stale_ = false;
  bool resynced_ = false;
  std::vector<PendingExec> residue_;
  std::set<TaskId> replayed_;
  bool replay_retried_ = false;

  std::set<MsgId> seen_;
  int64_t hb_seq_ = 0;
};

}  // namespace hearth
