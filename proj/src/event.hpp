#pragma once

// Event records are the only thing the store persists; snapshots are folds
// over them. `detail` holds canonical JSON text when a record needs more
// structure than its fixed fields (serialized leases, resulting device
// state, intent metadata).

#include <optional>
#include <string>

#include "common.hpp"
#include "wire.hpp"

namespace hearth {

enum class EventKind {
  task_dispatch,
  proposal,
  lease_grant,
  lease_reject,
  exec_result,
  conflict_report,
  conflict_resolution,
  recovery_outcome,
  policy_update,
  agent_status,
};

enum class Outcome { ok, rejected, failed, escalated };

enum class IntentOrigin { user_explicit, scheduled, system_default };

// Higher wins arbitration.
int origin_rank(IntentOrigin o);

const char* to_string(EventKind k);
const char* to_string(Outcome o);
const char* to_string(IntentOrigin o);
EventKind event_kind_from_string(const std::string& s);
Outcome outcome_from_string(const std::string& s);
IntentOrigin origin_from_string(const std::string& s);

struct EventRefs {
  std::optional<LeaseId> lease;
  std::optional<TaskId> task;
  std::optional<IntentId> intent;
  // Second party of a conflict_resolution (the losing intent).
  std::optional<IntentId> intent_b;
  // Invalidating commit for staleness rejections.
  std::optional<CommitHash> commit;

  bool operator==(const EventRefs&) const = default;

  Json to_json() const;
  static EventRefs from_json(const Json& j);
};

struct EventRecord {
  EventKind kind = EventKind::agent_status;
  AgentId sender;
  // Device id, task id, lease id, or agent id depending on kind. Only
  // exec_result records carry a device id here; that is what makes a
  // commit "touch" a device for freshness purposes.
  std::string subject;
  Outcome outcome = Outcome::ok;
  std::string detail;  // free text, canonical JSON when structured
  EventRefs refs;

  bool operator==(const EventRecord&) const = default;

  // lease_grant/lease_reject must carry a lease id; exec_result must carry
  // task and lease ids; conflict_resolution must carry both intent ids.
  void validate() const;

  Json to_json() const;
  static EventRecord from_json(const Json& j);
};

struct IntentRecord {
  IntentId intent_id;
  IntentOrigin origin = IntentOrigin::system_default;
  Millis issued_at = 0;
  std::string description;
  std::vector<DeviceId> claimed_devices;  // sorted, unique

  bool operator==(const IntentRecord&) const = default;

  void claim(const DeviceId& d);
  void release(const DeviceId& d);
  bool claims(const DeviceId& d) const;

  Json to_json() const;
  static IntentRecord from_json(const Json& j);
};

}  // namespace hearth
