#include "lease.hpp"

namespace hearth {

Json Lease::to_json() const {
  return Json{{"lease_id", lease_id},
              {"grantee", grantee.to_json()},
              {"target", target.to_json()},
              {"operation", operation},
              {"envelope", envelope.to_json()},
              {"base_commit", base_commit.hex()},
              {"policy_commit", policy_commit.hex()},
              {"expires_at", expires_at},
              {"justification", justification}};
}

Lease Lease::from_json(const Json& j) {
  Lease l;
  l.lease_id = j.at("lease_id").get<std::string>();
  l.grantee = Grantee::from_json(j.at("grantee"));
  l.target = LeaseTarget::from_json(j.at("target"));
  l.operation = j.at("operation").get<std::string>();
  l.envelope = ParameterEnvelope::from_json(j.at("envelope"));
  l.base_commit = Digest::from_hex(j.at("base_commit").get<std::string>());
  l.policy_commit = Digest::from_hex(j.at("policy_commit").get<std::string>());
  l.expires_at = j.at("expires_at").get<Millis>();
  l.justification = j.at("justification").get<std::string>();
  return l;
}

const char* to_string(RejectCode c) {
  switch (c) {
    case RejectCode::Missing: return "Missing";
    case RejectCode::Expired: return "Expired";
    case RejectCode::AlreadyConsumed: return "AlreadyConsumed";
    case RejectCode::WrongGrantee: return "WrongGrantee";
    case RejectCode::WrongTarget: return "WrongTarget";
    case RejectCode::WrongOperation: return "WrongOperation";
    case RejectCode::OutOfEnvelope: return "OutOfEnvelope";
    case RejectCode::StaleCommit: return "StaleCommit";
  }
  return "?";
}

RejectCode reject_code_from_string(const std::string& s) {
  for (auto c : {RejectCode::Missing, RejectCode::Expired, RejectCode::AlreadyConsumed,
                 RejectCode::WrongGrantee, RejectCode::WrongTarget, RejectCode::WrongOperation,
                 RejectCode::OutOfEnvelope, RejectCode::StaleCommit})
    if (s == to_string(c)) return c;
  parse_fail("reject code", s);
}

Json AdapterCommand::to_json() const {
  return Json{{"device_id", device_id},
              {"operation", operation},
              {"params", params_to_json(params)},
              {"sender", sender},
              {"lease_id", lease_id}};
}

AdapterCommand AdapterCommand::from_json(const Json& j) {
  AdapterCommand c;
  c.device_id = j.at("device_id").get<std::string>();
  c.operation = j.at("operation").get<std::string>();
  c.params = params_from_json(j.at("params"));
  c.sender = j.at("sender").get<std::string>();
  c.lease_id = j.at("lease_id").get<std::string>();
  return c;
}

LeaseDecision validate_lease(const Lease* lease, const AdapterCommand& cmd, Millis now,
                             const CommitHash& current_head, std::set<LeaseId>& consumed,
                             const FreshnessProbe& fresh, const ClassResolver& resolve_class) {
  if (!lease) return LeaseDecision::reject(RejectCode::Missing);
  if (now >= lease->expires_at) return LeaseDecision::reject(RejectCode::Expired);
  if (consumed.count(lease->lease_id)) return LeaseDecision::reject(RejectCode::AlreadyConsumed);
  if (cmd.sender != lease->grantee.agent) return LeaseDecision::reject(RejectCode::WrongGrantee);

  bool target_ok = false;
  if (lease->target.kind == LeaseTarget::Kind::device) {
    target_ok = cmd.device_id == lease->target.value;
  } else if (resolve_class) {
    auto cls = resolve_class(cmd.device_id);
    target_ok = cls && *cls == lease->target.value;
  }
  if (!target_ok) return LeaseDecision::reject(RejectCode::WrongTarget);

  if (cmd.operation != lease->operation) return LeaseDecision::reject(RejectCode::WrongOperation);
  if (!lease->envelope.contains(cmd.params))
    return LeaseDecision::reject(RejectCode::OutOfEnvelope);
  if (lease->base_commit != current_head && !fresh(cmd.device_id, lease->base_commit))
    return LeaseDecision::reject(RejectCode::StaleCommit);

  consumed.insert(lease->lease_id);
  return LeaseDecision::accept();
}

Lease LeaseTable::issue(const Permit& permit, const Grantee& grantee, const LeaseTarget& target,
                        const std::string& operation, const CommitHash& base_commit,
                        const CommitHash& policy_commit, Millis now, Millis ttl,
                        const std::string& justification) {
  if (!is_root_) throw Error(Errc::invalid_argument, "only the root issues leases");
  Lease l;
  l.lease_id = "lease-" + std::to_string(next_id_++);
  l.grantee = grantee;
  l.target = target;
  l.operation = operation;
  l.envelope = permit.envelope;
  l.base_commit = base_commit;
  l.policy_commit = policy_commit;
  l.expires_at = now + ttl;
  l.justification = justification.empty() ? "unspecified" : justification;
  live_[l.lease_id] = l;
  return l;
}

const Lease* LeaseTable::find(const LeaseId& id) const {
  auto it = live_.find(id);
  return it == live_.end() ? nullptr : &it->second;
}

std::vector<LeaseId> LeaseTable::sweep_expired(Millis now) {
  std::vector<LeaseId> expired;
  for (auto it = live_.begin(); it != live_.end();) {
    if (now >= it->second.expires_at) {
      expired.push_back(it->first);
      it = live_.erase(it);
    } else {
      ++it;
    }
  }
  return expired;
}

}  // namespace hearth
