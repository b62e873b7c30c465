#pragma once

// Root orchestrator: decomposes intents through a pluggable planner,
// gates every proposal through freshness -> conflict -> policy, is the
// only lease issuer, monitors liveness, and recovers tasks from crashed
// managers. One logical event loop; snapshots are read-only.

#include <map>
#include <optional>
#include <set>

#include "bus.hpp"
#include "config.hpp"
#include "devices.hpp"
#include "lease.hpp"
#include "planner.hpp"
#include "runtime.hpp"
#include "store.hpp"

namespace hearth {

struct FreshnessResult {
  bool fresh = false;
  std::optional<CommitHash> invalidating;
  std::string reason;
};

// Fresh when base equals HEAD, or (device-scoped mode) when no commit
// after base touched the device. An unknown base is stale with reason.
FreshnessResult verify_freshness(const Store& store, const CommitHash& base,
                                 const DeviceId& device, FreshnessMode mode);

struct ProposalView {
  TaskId task_id;
  IntentId intent_id;
  DeviceId device;
  std::string operation;
  Params params;
};

struct ConflictReport {
  DeviceId device;
  IntentRecord standing;
  Params standing_state;
  IntentRecord incoming;
  ProposalView proposal;
  Millis detected_at = 0;
};

// Reports iff the device is claimed by a different active intent and
// the proposal's target state differs from the standing state.
// Re-asserting the standing state is not a conflict.
std::optional<ConflictReport> detect_conflict(const ProposalView& p,
                                              const IntentRecord& incoming_intent,
                                              const StateSnapshot& snap, const DeviceSet& devices,
                                              Millis now);

struct Resolution {
  enum class Action { keep, supersede, escalate };
  Action action = Action::escalate;
  IntentId winner;
  std::string reasoning;
};

const char* to_string(Resolution::Action a);

// Precedence ladder: user_explicit > scheduled > system_default.
// Equal precedence escalates for operator review.
Resolution arbitrate(const ConflictReport& c);

struct RecoveryAction {
  TaskId task_id;
  std::string action;  // closed | reissued | queued | escalated
  int attempts = 0;
  std::optional<AgentId> reassigned_to;
  std::optional<Millis> next_retry_at;
};

class Root final : public Agent {
public:
  Root(InProcessBus& bus, const Store& store, const DeviceSet& devices, Planner& planner,
       KernelConfig config, AgentId id = "root");

  const AgentId& id() const override { return id_; }
  void start(AgentContext& ctx) override;
  void on_envelope(const Envelope& e) override;
  SubscriptionRef stream() const override { return inbox_; }
  bool idle() const override { return true; }

  void set_metrics_sink(MetricsSink* sink) { sink_ = sink; }

  struct ManagerInfo {
    ManagerRole role;
    std::set<std::string> capabilities;
    Millis last_heartbeat = 0;
    bool live = false;
  };

  struct TaskEntry {
    TaskId task_id;
    IntentId intent_id;
    std::string capability;
    std::string device_class;
    std::string operation;
    Params params;
    std::string justification;
    std::optional<AgentId> assigned_to;
    std::optional<DeviceId> device;
    TaskPhase phase = TaskPhase::dispatched;
    std::optional<LeaseId> lease_id;
    int attempts = 1;
    std::optional<Millis> next_retry_at;
  };

  const std::map<TaskId, TaskEntry>& tasks() const { return tasks_; }
  const std::map<AgentId, ManagerInfo>& managers() const { return managers_; }
  const std::vector<RecoveryAction>& recovery_log() const { return recovery_log_; }

  // Exposed for direct driving in tests; the event loop calls these.
  std::vector<TaskId> handle_intent(const std::string& name, IntentOrigin origin,
                                    const std::string& description);
  std::vector<AgentId> liveness_tick(Millis now);
  std::vector<RecoveryAction> recover_tasks(const AgentId& failed, Millis now);

private:
  void on_heartbeat(const Envelope& e);
  void on_will(const Envelope& e);
  void on_proposal(const Envelope& e);
  void on_exec_request(const Envelope& e);
  void on_exec_result(const Envelope& e);
  void mark_unresponsive(const AgentId& agent, const std::string& how);
  void dispatch_task(TaskEntry& t, const AgentId& manager);
  std::optional<AgentId> pick_manager(const TaskEntry& t, const StateSnapshot& snap,
                                      const std::optional<AgentId>& exclude) const;
  void publish_rejection(const std::optional<AgentId>& to, const TaskId& task,
                         const std::string& stage, const Json& evidence,
                         const std::string& reasoning);
  void publish_recovery(const RecoveryAction& a);
  void schedule_retry(const TaskId& task, Millis due);
  void retry_fire(const TaskId& task);
  void schedule_liveness();
  void schedule_sweep();
  Envelope make(MessageKind kind, const Topic& topic);

  AgentId id_;
  InProcessBus& bus_;
  const Store& store_;
  const DeviceSet& devices_;
  Planner& planner_;
  KernelConfig config_;
  AgentContext* ctx_ = nullptr;
  SubscriptionRef inbox_;
  MetricsSink* sink_ = nullptr;

  std::map<AgentId, ManagerInfo> managers_;
  std::map<TaskId, TaskEntry> tasks_;
  std::map<IntentId, IntentRecord> intents_;
  LeaseTable leases_{true};
  std::map<TaskId, uint64_t> retry_timers_;
  std::vector<RecoveryAction> recovery_log_;
  std::set<MsgId> seen_;
  uint64_t next_intent_ = 1;
  uint64_t next_task_ = 1;
};

}  // namespace hearth
