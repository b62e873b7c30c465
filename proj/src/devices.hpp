#pragma once

// Simulated device adapters: thin deterministic endpoints that validate
// leases before any state change and support injectable faults.
//
// Fixture format, one device per stanza:
//
//   device <id> class=<cls> [latency=<ms>]
//   param <name> range=<lo>..<hi> init=<v>
//   param <name> set=<a,b,c> init=<v>
//   op <name> [sets=<p1,p2>] [implies=<p:v[,p:v]>]
//   fault <device-id> profile=none|icon_misidentification|timeout:<ms>|intermittent:<percent>
//
// '#' starts a comment.

#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "common.hpp"
#include "lease.hpp"
#include "policy.hpp"
#include "snapshot.hpp"

namespace hearth {

struct FaultProfile {
  enum class Kind { none, icon_misidentification, timeout, intermittent };
  Kind kind = Kind::none;
  Millis timeout_ms = 0;
  int percent = 0;  // intermittent fault probability
};

struct DeviceParamSpec {
  std::string name;
  ParamConstraint range;  // declared legal values
  Json init;
};

struct DeviceOpSpec {
  std::string name;
  std::vector<std::string> sets;                    // params the command may write
  std::vector<std::pair<std::string, Json>> implies;  // fixed side effects
};

struct DeviceSpec {
  DeviceId id;
  std::string device_class;
  Millis latency = 50;
  std::map<std::string, DeviceParamSpec> params;
  std::map<std::string, DeviceOpSpec> ops;
  FaultProfile fault;
};

std::vector<DeviceSpec> parse_fixture(const std::string& text);

struct ApplyResult {
  enum class Kind { applied, rejected, faulted };
  Kind kind = Kind::faulted;
  Params new_state;       // applied
  LeaseDecision decision;  // rejected
  std::string detail;      // faulted: diagnosable description
};

class DeviceSet {
public:
  explicit DeviceSet(std::vector<DeviceSpec> specs);

  // Lease validation first; rejected and faulted outcomes never mutate
  // state. `fresh` is the adapter's own staleness probe.
  ApplyResult apply(const AdapterCommand& cmd, const Lease& lease, Millis now,
                    const CommitHash& head, const FreshnessProbe& fresh,
                    const IntentId& intent = {});

  DeviceShadow read(const DeviceId& id) const;  // throws unknown_device
  // Pure state transition table; shared with conflict detection.
  Params next_state(const DeviceId& id, const std::string& op, const Params& params) const;

  bool has(const DeviceId& id) const;
  std::optional<std::string> class_of(const DeviceId& id) const;
  std::vector<DeviceId> ids_of_class(const std::string& cls) const;
  const DeviceSpec& spec(const DeviceId& id) const;
  Millis latency(const DeviceId& id) const;
  ClassResolver class_resolver() const;

  void set_rng(std::mt19937_64* rng) { rng_ = rng; }
  void clear_fault(const DeviceId& id);

private:
  struct Slot {
    DeviceSpec spec;
    Params state;
    int attempts = 0;
    CommitHash provenance_commit;
    IntentId provenance_intent;
    Millis updated_at = 0;
  };

  const Slot& slot(const DeviceId& id) const;
  Params transition(const Slot& s, const std::string& op, const Params& params) const;

  mutable std::mutex mu_;
  std::map<DeviceId, Slot> slots_;
  std::set<LeaseId> consumed_;
  std::mt19937_64* rng_ = nullptr;
};

}  // namespace hearth
