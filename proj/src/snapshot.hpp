#pragma once

// Materialized world state at a commit: device shadows, active policy,
// open tasks, active intents. Snapshots are pure folds over event
// records; the store maintains one incrementally at HEAD and refolds
// for historical queries.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"
#include "event.hpp"
#include "policy.hpp"
#include "wire.hpp"

namespace hearth {

struct DeviceShadow {
  DeviceId device_id;
  std::string device_class;
  Params state;
  // State version the actuation was authorized under; always a strict
  // ancestor of the commit that recorded it.
  CommitHash provenance_commit;
  IntentId provenance_intent;
  Millis updated_at = 0;

  bool operator==(const DeviceShadow&) const = default;
  Json to_json() const;
  static DeviceShadow from_json(const Json& j);
};

enum class TaskPhase { dispatched, proposed, granted, confirmed, blocked, retrying, escalated };

const char* to_string(TaskPhase p);
TaskPhase task_phase_from_string(const std::string& s);

inline bool is_terminal(TaskPhase p) {
  return p == TaskPhase::confirmed || p == TaskPhase::escalated;
}

struct TaskStatus {
  TaskId task_id;
  IntentId intent_id;
  std::string capability;
  std::optional<AgentId> assigned_to;
  TaskPhase phase = TaskPhase::dispatched;
  std::optional<LeaseId> lease_id;
  int attempts = 1;
  std::optional<Millis> next_retry_at;

  bool operator==(const TaskStatus&) const = default;
  Json to_json() const;
  static TaskStatus from_json(const Json& j);
};

struct StateSnapshot {
  CommitHash head;
  std::map<DeviceId, DeviceShadow> shadows;
  CommitHash policy_commit;
  // True while the policy_update sits in the commit currently being
  // built (its hash is not known yet); digested as "self".
  bool policy_commit_pending = false;
  PolicyDoc policy;
  std::map<TaskId, TaskStatus> open_tasks;
  std::vector<IntentRecord> active_intents;  // ordered by first appearance
  // Leases granted but not yet consumed by an ok exec_result.
  std::vector<LeaseId> pending_leases;  // sorted
  std::vector<LeaseId> consumed_leases;  // sorted

  bool content_equals(const StateSnapshot& other) const;

  IntentRecord* find_intent(const IntentId& id);
  const IntentRecord* find_intent(const IntentId& id) const;
  bool lease_consumed(const LeaseId& id) const;

  // Content serialization. `head` is excluded (assigned after hashing);
  // policy_commit renders as "self" while pending.
  Json content_json() const;
  Digest digest() const;

  Json to_json() const;  // full form, including head — wire replies
  static StateSnapshot from_json(const Json& j);
};

struct FoldContext {
  // Hash of the commit the events belong to; unset while that commit is
  // still being built.
  std::optional<CommitHash> self_hash;
  Millis timestamp = 0;
};

// Applies one event to the snapshot. Unknown structure in detail is
// ignored rather than fatal: the store must be able to fold any chain
// it can verify.
void apply_event(StateSnapshot& s, const EventRecord& e, const FoldContext& ctx);

}  // namespace hearth
