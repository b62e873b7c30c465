#pragma once

// Actuation leases: short-lived, single-use, machine-checkable
// authorizations binding identity, device scope, parameter envelope,
// state version, policy version, expiry, and justification. Validation
// is total and runs the same eight checks at every site.

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "common.hpp"
#include "policy.hpp"
#include "wire.hpp"

namespace hearth {

struct Grantee {
  ManagerRole role;
  AgentId agent;

  bool operator==(const Grantee&) const = default;
  Json to_json() const { return Json{{"role", role}, {"agent", agent}}; }
  static Grantee from_json(const Json& j) {
    return {j.at("role").get<std::string>(), j.at("agent").get<std::string>()};
  }
};

struct LeaseTarget {
  enum class Kind { device, device_class };
  Kind kind = Kind::device;
  std::string value;

  bool operator==(const LeaseTarget&) const = default;
  Json to_json() const {
    return Json{{"kind", kind == Kind::device ? "device" : "device_class"}, {"value", value}};
  }
  static LeaseTarget from_json(const Json& j) {
    LeaseTarget t;
    t.kind = j.at("kind").get<std::string>() == "device" ? Kind::device : Kind::device_class;
    t.value = j.at("value").get<std::string>();
    return t;
  }
};

struct Lease {
  LeaseId lease_id;
  Grantee grantee;
  LeaseTarget target;
  std::string operation;
  ParameterEnvelope envelope;
  CommitHash base_commit;
  CommitHash policy_commit;
  Millis expires_at = 0;
  std::string justification;

  bool operator==(const Lease&) const = default;
  Json to_json() const;
  static Lease from_json(const Json& j);
};

enum class RejectCode {
  Missing,
  Expired,
  AlreadyConsumed,
  WrongGrantee,
  WrongTarget,
  WrongOperation,
  OutOfEnvelope,
  StaleCommit,
};

const char* to_string(RejectCode c);
RejectCode reject_code_from_string(const std::string& s);

struct LeaseDecision {
  bool accepted = false;
  std::optional<RejectCode> code;  // exactly one code when rejected

  static LeaseDecision accept() { return {true, std::nullopt}; }
  static LeaseDecision reject(RejectCode c) { return {false, c}; }
};

struct AdapterCommand {
  DeviceId device_id;
  std::string operation;
  Params params;
  AgentId sender;
  LeaseId lease_id;

  Json to_json() const;
  static AdapterCommand from_json(const Json& j);
};

// True when no commit after `base` touched `device`.
using FreshnessProbe = std::function<bool(const DeviceId&, const CommitHash&)>;
// Maps a device id to its class; used only for class-scoped leases.
using ClassResolver = std::function<std::optional<std::string>(const DeviceId&)>;

// Total. Check order (first failure reported): Missing, Expired,
// AlreadyConsumed, WrongGrantee, WrongTarget, WrongOperation,
// OutOfEnvelope, StaleCommit. On Accept the lease id is inserted into
// `consumed`. Touches only lease and command fields plus one freshness
// probe.
LeaseDecision validate_lease(const Lease* lease, const AdapterCommand& cmd, Millis now,
                             const CommitHash& current_head, std::set<LeaseId>& consumed,
                             const FreshnessProbe& fresh,
                             const ClassResolver& resolve_class = nullptr);

// Live-lease table for one validation site (issuance plus sweep).
class LeaseTable {
public:
  explicit LeaseTable(bool is_root_issuer = true) : is_root_(is_root_issuer) {}

  Lease issue(const Permit& permit, const Grantee& grantee, const LeaseTarget& target,
              const std::string& operation, const CommitHash& base_commit,
              const CommitHash& policy_commit, Millis now, Millis ttl,
              const std::string& justification);

  const Lease* find(const LeaseId& id) const;
  std::vector<LeaseId> sweep_expired(Millis now);
  size_t live_count() const { return live_.size(); }

private:
  bool is_root_;
  uint64_t next_id_ = 1;
  std::map<LeaseId, Lease> live_;
};

}  // namespace hearth
