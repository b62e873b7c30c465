#include <doctest.h>

#include <random>

#include "sim_fixture.hpp"

using namespace hearth;
using hearth::testing::SimWorld;

namespace {

std::unique_ptr<Store> chain_store() {
  EventRecord policy_event;
  policy_event.kind = EventKind::policy_update;
  policy_event.sender = "scribe";
  policy_event.subject = "policy";
  policy_event.detail = canonical(Json{{"policy_text", ""}});
  return Store::create({}, "scribe", {policy_event}, 0);
}

EventRecord touch(const DeviceId& device, int i) {
  EventRecord e;
  e.kind = EventKind::exec_result;
  e.sender = "hub";
  e.subject = device;
  e.refs.task = "t" + std::to_string(i);
  e.refs.lease = "l" + std::to_string(i);
  e.detail = canonical(Json{{"device", device}, {"state", Json{{"power", "on"}}}});
  return e;
}

IntentRecord intent(const IntentId& id, IntentOrigin origin,
                    std::vector<DeviceId> claims = {}) {
  IntentRecord r;
  r.intent_id = id;
  r.origin = origin;
  for (auto& d : claims) r.claim(d);
  return r;
}

}  // namespace

TEST_CASE("verify_freshness: HEAD base is fresh; device-scoped ignores unrelated commits") {
  auto store = chain_store();
  CommitHash base = store->head();
  CHECK(verify_freshness(*store, base, "lamp", FreshnessMode::device_scoped).fresh);

  store->append_commit("scribe", {touch("other", 1)}, *store->head_snapshot(), 1);
  auto scoped = verify_freshness(*store, base, "lamp", FreshnessMode::device_scoped);
  CHECK(scoped.fresh);
  auto strict = verify_freshness(*store, base, "lamp", FreshnessMode::strict);
  CHECK_FALSE(strict.fresh);
  REQUIRE(strict.invalidating);
  CHECK(*strict.invalidating == store->head());

  store->append_commit("scribe", {touch("lamp", 2)}, *store->head_snapshot(), 2);
  auto stale = verify_freshness(*store, base, "lamp", FreshnessMode::device_scoped);
  CHECK_FALSE(stale.fresh);
  CHECK(*stale.invalidating == store->head());

  auto unknown = verify_freshness(*store, sha256(std::string("x")), "lamp",
                                  FreshnessMode::device_scoped);
  CHECK_FALSE(unknown.fresh);
  CHECK(unknown.reason.find("unknown") != std::string::npos);
}

TEST_CASE("strict and device-scoped modes disagree only on commits touching other devices") {
  std::mt19937_64 rng(21);
  auto store = chain_store();
  std::vector<CommitHash> commits{store->head()};
  std::vector<std::string> devices = {"a", "b", "c", "d"};
  for (int i = 0; i < 40; ++i) {
    store->append_commit("scribe", {touch(devices[rng() % devices.size()], i)},
                         *store->head_snapshot(), i);
    commits.push_back(store->head());
  }
  for (const auto& base : commits) {
    for (const auto& dev : devices) {
      bool scoped = verify_freshness(*store, base, dev, FreshnessMode::device_scoped).fresh;
      bool strict = verify_freshness(*store, base, dev, FreshnessMode::strict).fresh;
      if (scoped != strict) {
        // Disagreement means HEAD advanced but never over this device.
        CHECK(scoped);
        CHECK_FALSE(strict);
        CHECK(base != store->head());
        CHECK_FALSE(store->touched_since(dev, base));
      }
    }
  }
}

TEST_CASE("detect_conflict: claimed device with a different target state reports") {
  SimWorld w;
  DeviceSet& devices = *w.devices;

  StateSnapshot snap;
  DeviceShadow shadow;
  shadow.device_id = "living_room_lights";
  shadow.device_class = "light";
  shadow.state = devices.next_state("living_room_lights", "set_scene",
                                    {{"tone", Json("club")}, {"brightness", Json(55)}});
  snap.shadows["living_room_lights"] = shadow;
  snap.active_intents.push_back(
      intent("intent-1", IntentOrigin::user_explicit, {"living_room_lights"}));

  ProposalView p{"task-9", "intent-2", "living_room_lights", "set_scene",
                 {{"tone", Json("warm")}, {"brightness", Json(20)}}};
  auto report = detect_conflict(p, intent("intent-2", IntentOrigin::scheduled), snap, devices, 7);
  REQUIRE(report);
  CHECK(report->standing.intent_id == "intent-1");
  CHECK(report->device == "living_room_lights");

  // Unclaimed device: no conflict.
  ProposalView q = p;
  q.device = "desk_lamp";
  q.operation = "set_scene";
  q.params = {{"brightness", Json(10)}};
  CHECK_FALSE(detect_conflict(q, intent("intent-2", IntentOrigin::scheduled), snap, devices, 7));

  // Idempotent re-assert of the standing state: no conflict.
  ProposalView r = p;
  r.params = {{"tone", Json("club")}, {"brightness", Json(55)}};
  CHECK_FALSE(detect_conflict(r, intent("intent-2", IntentOrigin::scheduled), snap, devices, 7));

  // Same intent re-proposing: no conflict with itself.
  ProposalView s = p;
  s.intent_id = "intent-1";
  CHECK_FALSE(
      detect_conflict(s, intent("intent-1", IntentOrigin::user_explicit), snap, devices, 7));
}

TEST_CASE("arbitrate: precedence ladder decides independent of pair order") {
  auto report = [](IntentOrigin standing, IntentOrigin incoming) {
    ConflictReport c;
    c.device = "living_room_lights";
    c.standing = intent("standing", standing, {"living_room_lights"});
    c.incoming = intent("incoming", incoming);
    return c;
  };

  auto keep = arbitrate(report(IntentOrigin::user_explicit, IntentOrigin::scheduled));
  CHECK(keep.action == Resolution::Action::keep);
  CHECK(keep.winner == "standing");

  auto supersede = arbitrate(report(IntentOrigin::scheduled, IntentOrigin::user_explicit));
  CHECK(supersede.action == Resolution::Action::supersede);
  CHECK(supersede.winner == "incoming");

  auto escalate = arbitrate(report(IntentOrigin::scheduled, IntentOrigin::scheduled));
  CHECK(escalate.action == Resolution::Action::escalate);

  // Winner depends only on the origin ladder.
  for (auto a : {IntentOrigin::user_explicit, IntentOrigin::scheduled,
                 IntentOrigin::system_default})
    for (auto b : {IntentOrigin::user_explicit, IntentOrigin::scheduled,
                   IntentOrigin::system_default}) {
      auto res = arbitrate(report(a, b));
      if (origin_rank(a) > origin_rank(b)) CHECK(res.winner == "standing");
      if (origin_rank(b) > origin_rank(a)) CHECK(res.winner == "incoming");
      if (origin_rank(a) == origin_rank(b)) CHECK(res.action == Resolution::Action::escalate);
    }
}

TEST_CASE("liveness: two missed intervals mark unresponsive; a will is immediate") {
  SimWorld w;
  w.add_default_managers();
  w.advance(10);  // startup heartbeats land

  REQUIRE(w.root->managers().count("hub"));
  CHECK(w.root->managers().at("hub").live);

  // 61 s of silence: still within two intervals.
  CHECK(w.root->liveness_tick(61000).empty());
  CHECK(w.root->managers().at("hub").live);

  // 130 s of silence: both managers unresponsive.
  auto newly = w.root->liveness_tick(130000);
  CHECK(newly.size() == 2);
  CHECK_FALSE(w.root->managers().at("hub").live);

  // Unresponsiveness is monotone in silence.
  CHECK(w.root->liveness_tick(140000).empty());
  CHECK_FALSE(w.root->managers().at("hub").live);
}

TEST_CASE("a will marks the manager unresponsive at once, regardless of heartbeat age") {
  SimWorld w;
  w.add_default_managers();
  w.advance(10);
  CHECK(w.root->managers().at("phone").live);
  w.bus.drop("phone");  // will fires through the broker
  w.host->settle();
  CHECK_FALSE(w.root->managers().at("phone").live);
}

TEST_CASE("handle_intent dispatches by advertised capability, stamps HEAD, records the intent") {
  SimWorld w;
  w.add_default_managers();
  w.planner.set("movie_night",
                {{"ui_automation", "tv", "launch_app", {{"app", Json("youtube")}}, "movie"},
                 {"light", "light", "set_scene",
                  {{"tone", Json("warm")}, {"brightness", Json(20)}}, "dim for the movie"}});
  w.advance(10);
  w.inject_intent("movie_night");
  w.advance(2000);

  CHECK(w.root->tasks().size() == 2);
  CHECK(w.collector->tasks_completed.size() == 2);
  CHECK(w.root->tasks().at("task-1").assigned_to == AgentId("phone"));
  CHECK(w.root->tasks().at("task-2").assigned_to == AgentId("hub"));

  auto snap = w.store->head_snapshot();
  REQUIRE(snap->find_intent("intent-1"));
  CHECK(snap->find_intent("intent-1")->origin == IntentOrigin::user_explicit);
  CHECK(snap->find_intent("intent-1")->claims("living_room_tv"));
}

TEST_CASE("unknown intent escalates; unmatched capability blocks but keeps the task") {
  SimWorld w;
  w.add_default_managers();
  w.advance(10);

  w.inject_intent("unknown_intent");
  w.advance(100);
  CHECK(w.root->tasks().empty());

  w.planner.set("needs_vacuum", {{"vacuum", "vacuum", "start", {}, "clean"}});
  w.inject_intent("needs_vacuum");
  w.advance(200);
  REQUIRE(w.root->tasks().size() == 1);
  CHECK(w.root->tasks().begin()->second.phase == TaskPhase::blocked);
}

TEST_CASE("grant pipeline order: a stale and out-of-policy proposal reports staleness first") {
  SimWorld w;
  w.add_default_managers();
  w.advance(10);

  // A fake manager publishes directly so the pipeline sees exactly the
  // proposal we craft.
  w.bus.connect("rogue");
  auto rogue_q = w.bus.subscribe("rogue", Topic::inbox("rogue"));
  Envelope hb;
  hb.msg_id = w.ids->next();
  hb.sender = "rogue";
  hb.topic = Topic::broadcast();
  hb.kind = MessageKind::heartbeat;
  hb.sent_at = w.host->now();
  hb.payload = Json{{"agent", "rogue"}, {"role", "hub_manager"},
                    {"capabilities", Json::array({"light"})}, {"seq", 0}};
  w.bus.publish(hb);
  w.host->settle();

  CommitHash old_base = w.store->head();
  // Advance the lights so old_base goes stale for that device.
  w.planner.set("warmup", {{"light", "light", "set_scene",
                            {{"tone", Json("club")}, {"brightness", Json(55)}}, "warmup"}});
  w.inject_intent("warmup");
  w.advance(2000);
  auto task_id = w.root->tasks().begin()->first;

  Envelope prop;
  prop.msg_id = w.ids->next();
  prop.sender = "rogue";
  prop.topic = Topic::inbox("root");
  prop.kind = MessageKind::proposal;
  prop.sent_at = w.host->now();
  prop.base_commit = old_base;
  prop.payload = Json{{"task_id", task_id},
                      {"device", "living_room_lights"},
                      {"operation", "set_scene"},
                      {"params", Json{{"brightness", 99}}},  // also out of policy
                      {"rationale", "stale and over-bright"}};
  w.bus.publish(prop);
  w.host->settle();

  auto rejection = rogue_q->try_pop();
  REQUIRE(rejection);
  CHECK(rejection->kind == MessageKind::rejection);
  CHECK(rejection->payload.at("stage") == "freshness");
  CHECK(rejection->payload.at("evidence").contains("invalidating_commit"));
}

TEST_CASE("recover_tasks: confirmed closes, in-flight reissues to a capable live manager") {
  SimWorld w;
  w.add_default_managers();
  w.add_manager({"phone2", "mobile_manager", {"ui_automation"}, {"living_room_tv"}});
  w.planner.set("tv_on", {{"ui_automation", "tv", "launch_app", {{"app", Json("youtube")}},
                           "tv"}});
  w.advance(10);
  w.inject_intent("tv_on");
  w.advance(150);  // dispatched, granted, exec pending (400 ms latency)

  w.crash_manager("phone");
  w.advance(200);

  REQUIRE(w.root->recovery_log().size() >= 1);
  const auto& action = w.root->recovery_log().back();
  CHECK(action.action == "reissued");
  CHECK(action.reassigned_to == AgentId("phone2"));

  w.advance(3000);
  CHECK(w.root->tasks().at("task-1").phase == TaskPhase::confirmed);
  CHECK(w.collector->confirmed_by.at("task-1") == "phone2");
  // Exactly one device effect for the confirmed task.
  CHECK(w.collector->exec_ok_count.at("task-1") == 1);
}

TEST_CASE("recover_tasks: no capable manager queues with exponential backoff, then escalates") {
  KernelConfig cfg;
  cfg.max_attempts = 3;
  SimWorld w(1, cfg);
  w.add_default_managers();
  w.planner.set("tv_on", {{"ui_automation", "tv", "launch_app", {{"app", Json("youtube")}},
                           "tv"}});
  w.advance(10);
  w.inject_intent("tv_on");
  w.advance(150);

  w.crash_manager("phone");
  w.advance(200);
  REQUIRE_FALSE(w.root->recovery_log().empty());
  CHECK(w.root->recovery_log().back().action == "queued");
  CHECK(w.root->tasks().at("task-1").phase == TaskPhase::retrying);
  CHECK(*w.root->tasks().at("task-1").next_retry_at == w.root->recovery_log().back().next_retry_at);

  // Backoff doubles per queue attempt (2 s, 4 s, 8 s) until attempts
  // exceed the maximum, then the task escalates.
  w.advance(400000);
  const auto& log = w.root->recovery_log();
  REQUIRE(log.size() == 4);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(log[i].action == "queued");
    CHECK(log[i].attempts == static_cast<int>(i + 1));
    REQUIRE(log[i].next_retry_at);
    if (i > 0) {
      // Retry i fires at next_retry_at[i-1] and requeues with delay
      // base * factor^i.
      Millis delay = cfg.backoff_base;
      for (size_t k = 0; k < i; ++k) delay *= cfg.backoff_factor;
      CHECK(*log[i].next_retry_at - *log[i - 1].next_retry_at == delay);
    }
  }
  CHECK(log[3].action == "escalated");
  CHECK(w.root->tasks().at("task-1").phase == TaskPhase::escalated);
}

TEST_CASE("a returning manager picks the queued task back up") {
  SimWorld w;
  w.add_default_managers();
  w.planner.set("tv_on", {{"ui_automation", "tv", "launch_app", {{"app", Json("youtube")}},
                           "tv"}});
  w.advance(10);
  w.inject_intent("tv_on");
  w.advance(150);
  w.crash_manager("phone");
  w.advance(300);
  CHECK(w.root->tasks().at("task-1").phase == TaskPhase::retrying);

  w.restart_manager("phone", false);
  w.advance(10000);  // next retry fires with the manager back
  CHECK(w.root->tasks().at("task-1").phase == TaskPhase::confirmed);
  CHECK(w.collector->confirmed_by.at("task-1") == "phone");
}
