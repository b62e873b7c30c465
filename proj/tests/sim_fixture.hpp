#pragma once

// Hand-wired in-process world for agent-level tests: full control over
// restart timing, direct access to every component, scripted planner.

#include <filesystem>
#include <memory>

#include "devices.hpp"
#include "harness.hpp"
#include "librarian.hpp"
#include "manager.hpp"
#include "planner.hpp"
#include "root.hpp"
#include "runtime.hpp"
#include "store.hpp"

namespace hearth::testing {

inline const char* kFixtureText = R"(
device living_room_lights class=light latency=40
param power set=on,off init=off
param brightness range=0..100 init=0
param tone set=neutral,club,warm,bright init=neutral
op set_scene sets=tone,brightness implies=power:on
op set_power sets=power

device desk_lamp class=desk_light latency=40
param power set=on,off init=off
param brightness range=0..100 init=0
op set_scene sets=brightness implies=power:on

device living_room_speaker class=speaker latency=40
param power set=on,off init=off
param volume range=0..100 init=0
op set_volume sets=volume implies=power:on

device living_room_tv class=tv latency=400
param power set=on,off init=on
param app set=none,youtube,home init=home
op power_off implies=power:off
op launch_app sets=app implies=power:on
)";

inline const char* kPolicyText = R"(
hub_manager light set_scene brightness=0..60 tone={club,warm,neutral,bright}
hub_manager desk_light set_scene brightness=0..60
hub_manager speaker set_volume volume=0..30
mobile_manager tv power_off
mobile_manager tv launch_app app={youtube,home}
)";

struct SimWorld {
  KernelConfig config;
  InProcessBus bus;
  std::unique_ptr<MsgIdGen> ids;
  std::unique_ptr<VirtualHost> host;
  std::unique_ptr<Store> store;
  std::unique_ptr<DeviceSet> devices;
  ScriptedPlanner planner;
  MetricsSink sink;
  std::unique_ptr<Librarian> librarian;
  std::unique_ptr<Root> root;
  std::map<AgentId, std::unique_ptr<Manager>> managers;
  std::map<AgentId, ManagerProfile> profiles;
  std::map<AgentId, CrashResidue> residues;
  std::unique_ptr<Collector> collector;
  uint64_t intent_seq = 0;

  explicit SimWorld(uint64_t seed = 1, KernelConfig cfg = {}) : config(cfg) {
    ids = std::make_unique<MsgIdGen>(seed);
    host = std::make_unique<VirtualHost>(bus, *ids);

    EventRecord policy_event;
    policy_event.kind = EventKind::policy_update;
    policy_event.sender = "scribe";
    policy_event.subject = "policy";
    policy_event.detail = canonical(Json{{"policy_text", kPolicyText}});
    store = Store::create({}, "scribe", {policy_event}, 0);

    devices = std::make_unique<DeviceSet>(parse_fixture(kFixtureText));
    devices->set_rng(&ids->rng());

    collector = std::make_unique<Collector>(bus, *store, *devices, config);
    host->add_agent(collector.get());
    librarian = std::make_unique<Librarian>(bus, *store, std::filesystem::path{}, config);
    host->add_agent(librarian.get());
    root = std::make_unique<Root>(bus, *store, *devices, planner, config);
    root->set_metrics_sink(&sink);
    host->add_agent(root.get());

    bus.connect("user");
  }

  Manager* add_manager(const ManagerProfile& p) {
    profiles[p.agent_id] = p;
    auto m = std::make_unique<Manager>(bus, *devices, *store, p, config);
    Manager* raw = m.get();
    managers[p.agent_id] = std::move(m);
    host->add_agent(raw);
    return raw;
  }

  void add_default_managers() {
    add_manager({"hub", "hub_manager",
                 {"light", "desk_light", "speaker"},
                 {"living_room_lights", "desk_lamp", "living_room_speaker"}});
    add_manager({"phone", "mobile_manager", {"ui_automation"}, {"living_room_tv"}});
  }

  void inject_intent(const std::string& name, IntentOrigin origin = IntentOrigin::user_explicit) {
    Envelope e;
    e.msg_id = ids->next();
    e.sender = "user";
    e.topic = Topic::inbox("root");
    e.kind = MessageKind::user_intent;
    e.sent_at = host->now();
    e.payload = Json{{"name", name}, {"origin", to_string(origin)}, {"description", name}};
    bus.publish(e);
    host->settle();
  }

  void crash_manager(const AgentId& id) {
    auto it = managers.find(id);
    if (it == managers.end()) return;
    residues[id] = it->second->take_residue();
    bus.drop(id);
    host->remove_agent(id);
    managers.erase(it);
    host->settle();
  }

  Manager* restart_manager(const AgentId& id, bool replay_stale) {
    auto m = std::make_unique<Manager>(bus, *devices, *store, profiles.at(id), config);
    CrashResidue residue;
    if (replay_stale && residues.count(id)) residue = residues[id];
    m->restart_with(std::move(residue), replay_stale);
    Manager* raw = m.get();
    managers[id] = std::move(m);
    host->add_agent(raw);
    host->settle();
    return raw;
  }

  void clean_restart_manager(const AgentId& id) {
    auto it = managers.find(id);
    if (it != managers.end()) {
      bus.disconnect(id);
      host->remove_agent(id);
      managers.erase(it);
    }
    restart_manager(id, false);
  }

  void advance(Millis t) { host->advance_to(t); }
};

}  // namespace hearth::testing
