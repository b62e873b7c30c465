#pragma once

// Generative suites shared by the property tests and the acceptance
// binary. Each returns how many cases ran and the first failure.

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "sim_fixture.hpp"

namespace hearth::props {

struct SuiteResult {
  size_t cases = 0;
  size_t failures = 0;
  std::string first_failure;

  void fail(const std::string& msg) {
    ++failures;
    if (first_failure.empty()) first_failure = msg;
  }
  bool ok() const { return failures == 0; }
};

struct RandomPair {
  Lease lease;
  AdapterCommand cmd;
  Millis now;
  CommitHash head;
  std::set<std::pair<std::string, std::string>> stale;  // (device, base hex)

  FreshnessProbe probe() const {
    return [this](const DeviceId& d, const CommitHash& b) {
      return !stale.count({d, b.hex()});
    };
  }
};

inline RandomPair random_valid_pair(std::mt19937_64& rng) {
  RandomPair p;
  auto pick = [&](std::initializer_list<const char*> xs) {
    auto it = xs.begin();
    std::advance(it, rng() % xs.size());
    return std::string(*it);
  };
  p.lease.lease_id = "lease-" + std::to_string(rng());
  p.lease.grantee = {pick({"hub_manager", "mobile_manager"}),
                     pick({"hub", "phone", "phone2"})};
  p.lease.target = {LeaseTarget::Kind::device, pick({"lamp", "tv", "speaker", "cam"})};
  p.lease.operation = pick({"set_scene", "set_power", "launch_app"});
  int64_t lo = static_cast<int64_t>(rng() % 50);
  int64_t hi = lo + 1 + static_cast<int64_t>(rng() % 50);
  p.lease.envelope.constraints["level"] = ParamConstraint{ParamConstraint::Kind::range, lo, hi, {}};
  p.lease.envelope.constraints["mode"] =
      ParamConstraint{ParamConstraint::Kind::value_set, 0, 0, {"a", "b", "c"}};
  p.lease.base_commit = sha256("base-" + std::to_string(rng()));
  p.lease.policy_commit = sha256(std::string("policy"));
  p.now = static_cast<Millis>(rng() % 100000);
  p.lease.expires_at = p.now + 1 + static_cast<Millis>(rng() % 30000);
  p.lease.justification = "generated";
  p.head = sha256("head-" + std::to_string(rng()));

  p.cmd.device_id = p.lease.target.value;
  p.cmd.operation = p.lease.operation;
  p.cmd.sender = p.lease.grantee.agent;
  p.cmd.lease_id = p.lease.lease_id;
  p.cmd.params["level"] = Json(lo + static_cast<int64_t>(rng() % (hi - lo + 1)));
  p.cmd.params["mode"] = Json(std::string(1, static_cast<char>('a' + rng() % 3)));
  return p;
}

// Random mutations of exactly one condition never accept and always
// report the designated code; the unmutated pair always accepts.
inline SuiteResult lease_soundness(size_t cases, uint64_t seed) {
  SuiteResult r;
  std::mt19937_64 rng(seed);
  for (size_t i = 0; i < cases; ++i) {
    ++r.cases;
    RandomPair p = random_valid_pair(rng);
    {
      std::set<LeaseId> consumed;
      auto d = validate_lease(&p.lease, p.cmd, p.now, p.head, consumed, p.probe());
      if (!d.accepted) {
        r.fail("case " + std::to_string(i) + ": valid pair rejected with " +
               std::string(to_string(*d.code)));
        continue;
      }
    }
    int mutation = static_cast<int>(rng() % 8);
    RejectCode expected{};
    const Lease* lease_ptr = &p.lease;
    std::set<LeaseId> consumed;
    switch (mutation) {
      case 0: lease_ptr = nullptr; expected = RejectCode::Missing; break;
      case 1:
        p.now = p.lease.expires_at + static_cast<Millis>(rng() % 1000);
        expected = RejectCode::Expired;
        break;
      case 2: consumed.insert(p.lease.lease_id); expected = RejectCode::AlreadyConsumed; break;
      case 3: p.cmd.sender += "-imposter"; expected = RejectCode::WrongGrantee; break;
      case 4: p.cmd.device_id += "-other"; expected = RejectCode::WrongTarget; break;
      case 5: p.cmd.operation += "-other"; expected = RejectCode::WrongOperation; break;
      case 6:
        if (rng() % 2)
          p.cmd.params["level"] = Json(p.lease.envelope.constraints["level"].hi + 1);
        else
          p.cmd.params["undeclared"] = Json(1);
        expected = RejectCode::OutOfEnvelope;
        break;
      case 7:
        p.stale.insert({p.cmd.device_id, p.lease.base_commit.hex()});
        expected = RejectCode::StaleCommit;
        break;
    }
    auto d = validate_lease(lease_ptr, p.cmd, p.now, p.head, consumed, p.probe());
    if (d.accepted) {
      r.fail("case " + std::to_string(i) + ": mutation " + std::to_string(mutation) +
             " accepted");
    } else if (*d.code != expected) {
      r.fail("case " + std::to_string(i) + ": mutation " + std::to_string(mutation) + " got " +
             to_string(*d.code) + " expected " + to_string(expected));
    }
  }
  return r;
}

inline SuiteResult lease_single_consumption(size_t cases, uint64_t seed) {
  SuiteResult r;
  std::mt19937_64 rng(seed);
  for (size_t i = 0; i < cases; ++i) {
    ++r.cases;
    RandomPair p = random_valid_pair(rng);
    std::set<LeaseId> consumed;
    auto first = validate_lease(&p.lease, p.cmd, p.now, p.head, consumed, p.probe());
    auto second = validate_lease(&p.lease, p.cmd, p.now, p.head, consumed, p.probe());
    if (!first.accepted)
      r.fail("case " + std::to_string(i) + ": first validation rejected");
    else if (second.accepted || *second.code != RejectCode::AlreadyConsumed)
      r.fail("case " + std::to_string(i) + ": second validation not AlreadyConsumed");
  }
  return r;
}

// For every prefix of random chains, the incrementally maintained head
// snapshot equals a from-scratch replay.
inline SuiteResult fold_equivalence(size_t cases, uint64_t seed) {
  SuiteResult r;
  std::mt19937_64 rng(seed);
  while (r.cases < cases) {
    EventRecord policy_event;
    policy_event.kind = EventKind::policy_update;
    policy_event.sender = "scribe";
    policy_event.subject = "policy";
    policy_event.detail = canonical(Json{{"policy_text", "m light set_scene brightness=0..60"}});
    auto store = Store::create({}, "scribe", {policy_event}, 0);

    int commits = 5 + static_cast<int>(rng() % 20);
    for (int c = 0; c < commits; ++c) {
      std::vector<EventRecord> events;
      int n = 1 + static_cast<int>(rng() % 3);
      for (int k = 0; k < n; ++k) {
        EventRecord e;
        int kind = static_cast<int>(rng() % 4);
        std::string id = std::to_string(c) + "-" + std::to_string(k);
        if (kind == 0) {
          e.kind = EventKind::task_dispatch;
          e.sender = "root";
          e.subject = "task-" + id;
          e.refs.task = e.subject;
          e.refs.intent = "intent-" + std::to_string(rng() % 4);
          e.detail = canonical(Json{
              {"capability", "light"},
              {"assigned_to", "hub"},
              {"intent", Json{{"intent_id", *e.refs.intent},
                              {"origin", rng() % 2 ? "user_explicit" : "scheduled"},
                              {"issued_at", c}, {"description", "d"}}}});
        } else if (kind == 1) {
          e.kind = EventKind::lease_grant;
          e.sender = "root";
          e.subject = "lease-" + id;
          e.refs.lease = e.subject;
          e.refs.task = "task-" + std::to_string(rng() % (c + 1)) + "-0";
          e.detail = "{}";
        } else if (kind == 2) {
          e.kind = EventKind::exec_result;
          e.sender = "hub";
          e.subject = "dev-" + std::to_string(rng() % 4);
          e.outcome = rng() % 4 ? Outcome::ok : Outcome::failed;
          e.refs.task = "task-" + std::to_string(rng() % (c + 1)) + "-0";
          e.refs.lease = "lease-" + id;
          e.detail = canonical(Json{{"device", e.subject},
                                    {"device_class", "light"},
                                    {"state", Json{{"brightness", static_cast<int64_t>(rng() % 100)}}},
                                    {"base_commit", store->head().hex()}});
        } else {
          e.kind = EventKind::agent_status;
          e.sender = "root";
          e.subject = "hub";
          e.detail = "{}";
        }
        events.push_back(std::move(e));
      }
      store->append_commit("scribe", events, *store->head_snapshot(), c + 1);
    }

    StateSnapshot oracle;
    for (const auto& c : store->all_commits()) {
      for (const auto& e : c.events) apply_event(oracle, e, {c.hash, c.timestamp});
      oracle.head = c.hash;
      ++r.cases;
      if (store->snapshot_at(c.hash).content_json() != oracle.content_json())
        r.fail("prefix " + c.hash.hex().substr(0, 12) + " diverged from replay");
      if (r.cases >= cases) break;
    }
    if (store->head_snapshot()->content_json() !=
        store->snapshot_at(store->head()).content_json())
      r.fail("cached head snapshot diverged");
  }
  return r;
}

// Any single-byte corruption inside a record body is detected on load.
inline SuiteResult chain_corruption(size_t cases, uint64_t seed) {
  namespace fs = std::filesystem;
  SuiteResult r;
  std::mt19937_64 rng(seed);
  fs::path dir = fs::temp_directory_path() / ("hearth-prop-corrupt-" + std::to_string(seed));
  fs::remove_all(dir);
  {
    EventRecord policy_event;
    policy_event.kind = EventKind::policy_update;
    policy_event.sender = "scribe";
    policy_event.subject = "policy";
    policy_event.detail = canonical(Json{{"policy_text", ""}});
    auto store = Store::create(dir, "scribe", {policy_event}, 0);
    for (int i = 0; i < 6; ++i) {
      EventRecord e;
      e.kind = EventKind::exec_result;
      e.sender = "hub";
      e.subject = "lamp";
      e.refs.task = "t" + std::to_string(i);
      e.refs.lease = "l" + std::to_string(i);
      e.detail = canonical(Json{{"device", "lamp"}, {"state", Json{{"power", "on"}}}});
      store->append_commit("scribe", {e}, *store->head_snapshot(), i + 1);
    }
  }
  std::ifstream in(dir / "commits.log", std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  std::string pristine = buf.str();
  in.close();

  // Record-body byte offsets (framing prefixes excluded: flipping a
  // length turns the tail into a truncation, which is loss, not
  // corruption).
  std::vector<size_t> body_offsets;
  for (size_t pos = 0; pos + 4 <= pristine.size();) {
    uint32_t len = (uint32_t(uint8_t(pristine[pos])) << 24) |
                   (uint32_t(uint8_t(pristine[pos + 1])) << 16) |
                   (uint32_t(uint8_t(pristine[pos + 2])) << 8) | uint32_t(uint8_t(pristine[pos + 3]));
    for (size_t i = 0; i < len; ++i) body_offsets.push_back(pos + 4 + i);
    pos += 4 + len;
  }

  for (size_t i = 0; i < cases; ++i) {
    ++r.cases;
    std::string tampered = pristine;
    size_t off = body_offsets[rng() % body_offsets.size()];
    tampered[off] = static_cast<char>(tampered[off] ^ (1u << (rng() % 8)));
    {
      std::ofstream out(dir / "commits.log", std::ios::binary | std::ios::trunc);
      out.write(tampered.data(), static_cast<std::streamsize>(tampered.size()));
    }
    try {
      auto reopened = Store::open(dir);
      r.fail("flip at offset " + std::to_string(off) + " loaded silently");
    } catch (const Error&) {
      // detected
    }
  }
  fs::remove_all(dir);
  return r;
}

// A manager cleanly restarted at an idle point between envelopes leaves
// every protocol outcome unchanged.
inline SuiteResult restart_equivalence(size_t cases, uint64_t seed) {
  using hearth::testing::SimWorld;
  SuiteResult r;
  std::mt19937_64 rng(seed);

  auto scenario = [](SimWorld& w) {
    w.planner.set("scene_a",
                  {{"light", "light", "set_scene",
                    {{"tone", Json("club")}, {"brightness", Json(40)}}, "a"},
                   {"speaker", "speaker", "set_volume", {{"volume", Json(20)}}, "b"},
                   {"ui_automation", "tv", "launch_app", {{"app", Json("youtube")}}, "c"}});
    w.planner.set("scene_b",
                  {{"desk_light", "desk_light", "set_scene", {{"brightness", Json(12)}}, "d"}});
  };
  auto outcome = [](SimWorld& w) {
    Json out;
    out["lights"] = params_to_json(w.devices->read("living_room_lights").state);
    out["desk"] = params_to_json(w.devices->read("desk_lamp").state);
    out["speaker"] = params_to_json(w.devices->read("living_room_speaker").state);
    out["tv"] = params_to_json(w.devices->read("living_room_tv").state);
    out["completed"] = w.collector->tasks_completed.size();
    out["false_rejections"] = w.collector->false_rejections;
    return out;
  };

  Json baseline;
  {
    SimWorld w(99);
    w.add_default_managers();
    scenario(w);
    w.advance(10);
    w.inject_intent("scene_a");
    w.advance(4000);
    w.inject_intent("scene_b");
    w.advance(12000);
    baseline = outcome(w);
  }

  for (size_t i = 0; i < cases; ++i) {
    ++r.cases;
    Millis restart_at = 10 + static_cast<Millis>(rng() % 11000);
    AgentId victim = rng() % 2 ? "hub" : "phone";
    SimWorld w(99);
    w.add_default_managers();
    scenario(w);
    w.advance(10);
    w.inject_intent("scene_a");
    bool restarted = false;
    if (restart_at < 4000) {
      w.advance(restart_at);
      if (w.managers.count(victim) && w.managers.at(victim)->idle()) {
        w.clean_restart_manager(victim);
        restarted = true;
      }
    }
    w.advance(4000);
    w.inject_intent("scene_b");
    if (!restarted && restart_at >= 4000) {
      w.advance(restart_at);
      if (w.managers.count(victim) && w.managers.at(victim)->idle()) {
        w.clean_restart_manager(victim);
      }
    }
    w.advance(12000);
    Json got = outcome(w);
    if (got != baseline)
      r.fail("restart of " + victim + " at t=" + std::to_string(restart_at) + " diverged: " +
             canonical(got) + " vs " + canonical(baseline));
  }
  return r;
}

inline SuiteResult deny_by_default(size_t cases, uint64_t seed) {
  SuiteResult r;
  std::mt19937_64 rng(seed);
  PolicyDoc empty;
  for (size_t i = 0; i < cases; ++i) {
    ++r.cases;
    Params params;
    if (rng() % 2) params["p" + std::to_string(rng() % 3)] = Json(static_cast<int64_t>(rng() % 100));
    auto v = evaluate(empty, "role-" + std::to_string(rng() % 10), "class-" + std::to_string(rng() % 5),
                      "op-" + std::to_string(rng() % 5), params);
    if (!std::holds_alternative<Deny>(v)) r.fail("empty policy permitted case " + std::to_string(i));
  }
  return r;
}

}  // namespace hearth::props
