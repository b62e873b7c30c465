#include <doctest.h>

#include "devices.hpp"
#include "trace.hpp"

using namespace hearth;

namespace {

const char* kFixture = R"(
device lamp class=light latency=40
param power set=on,off init=off
param brightness range=0..100 init=0
op set_scene sets=brightness implies=power:on
op set_power sets=power

device tv class=tv latency=400
param power set=on,off init=on
param app set=none,youtube,home init=home
op power_off implies=power:off
op launch_app sets=app implies=power:on
fault tv profile=icon_misidentification
)";

Lease lamp_lease(Millis expires = 10000) {
  ParameterEnvelope env;
  env.constraints["brightness"] = ParamConstraint{ParamConstraint::Kind::range, 0, 60, {}};
  Lease l;
  l.lease_id = "lease-1";
  l.grantee = {"hub_manager", "hub"};
  l.target = {LeaseTarget::Kind::device, "lamp"};
  l.operation = "set_scene";
  l.envelope = env;
  l.base_commit = sha256(std::string("b"));
  l.policy_commit = sha256(std::string("p"));
  l.expires_at = expires;
  l.justification = "test";
  return l;
}

FreshnessProbe always_fresh() {
  return [](const DeviceId&, const CommitHash&) { return true; };
}

}  // namespace

TEST_CASE("fixture parses devices, params, ops, and fault profiles") {
  auto specs = parse_fixture(kFixture);
  REQUIRE(specs.size() == 2);
  CHECK(specs[0].id == "lamp");
  CHECK(specs[0].latency == 40);
  CHECK(specs[0].params.at("brightness").range.hi == 100);
  CHECK(specs[1].fault.kind == FaultProfile::Kind::icon_misidentification);
  CHECK_THROWS_AS(parse_fixture("param x init=1\n"), Error);
  CHECK_THROWS_AS(parse_fixture("device d class=c\nfault other profile=none\n"), Error);
}

TEST_CASE("apply with a valid lease transitions state deterministically") {
  DeviceSet devices(parse_fixture(kFixture));
  AdapterCommand cmd{"lamp", "set_scene", {{"brightness", Json(55)}}, "hub", "lease-1"};
  auto r = devices.apply(cmd, lamp_lease(), 100, Digest{}, always_fresh(), "intent-1");
  CHECK(r.kind == ApplyResult::Kind::applied);
  CHECK(r.new_state.at("brightness") == 55);
  CHECK(r.new_state.at("power") == "on");  // implied side effect

  DeviceShadow shadow = devices.read("lamp");
  CHECK(shadow.state.at("brightness") == 55);
  CHECK(shadow.provenance_intent == "intent-1");
  CHECK(shadow.provenance_commit == lamp_lease().base_commit);
}

TEST_CASE("rejected and faulted outcomes never mutate state") {
  DeviceSet devices(parse_fixture(kFixture));
  Params before = devices.read("lamp").state;

  // Lease scoped to another device: WrongTarget.
  Lease wrong = lamp_lease();
  wrong.target.value = "tv";
  AdapterCommand cmd{"lamp", "set_scene", {{"brightness", Json(10)}}, "hub", wrong.lease_id};
  auto r = devices.apply(cmd, wrong, 100, Digest{}, always_fresh());
  CHECK(r.kind == ApplyResult::Kind::rejected);
  CHECK(*r.decision.code == RejectCode::WrongTarget);
  CHECK(devices.read("lamp").state == before);

  // Expired lease.
  auto r2 = devices.apply(AdapterCommand{"lamp", "set_scene", {{"brightness", Json(10)}}, "hub",
                                         "lease-1"},
                          lamp_lease(50), 100, Digest{}, always_fresh());
  CHECK(r2.kind == ApplyResult::Kind::rejected);
  CHECK(*r2.decision.code == RejectCode::Expired);
  CHECK(devices.read("lamp").state == before);

  // Stale base.
  auto r3 = devices.apply(AdapterCommand{"lamp", "set_scene", {{"brightness", Json(10)}}, "hub",
                                         "lease-1"},
                          lamp_lease(), 100, Digest{},
                          [](const DeviceId&, const CommitHash&) { return false; });
  CHECK(*r3.decision.code == RejectCode::StaleCommit);
  CHECK(devices.read("lamp").state == before);
}

TEST_CASE("icon misidentification faults the first attempt only, diagnosably") {
  DeviceSet devices(parse_fixture(kFixture));
  Lease l = lamp_lease();
  l.lease_id = "lease-tv-1";
  l.target.value = "tv";
  l.operation = "power_off";
  l.envelope = ParameterEnvelope{};
  AdapterCommand cmd{"tv", "power_off", {}, "hub", l.lease_id};

  Params before = devices.read("tv").state;
  auto first = devices.apply(cmd, l, 100, Digest{}, always_fresh());
  CHECK(first.kind == ApplyResult::Kind::faulted);
  CHECK(first.detail.find("icon") != std::string::npos);
  CHECK(devices.read("tv").state == before);

  Lease l2 = l;
  l2.lease_id = "lease-tv-2";
  cmd.lease_id = l2.lease_id;
  auto second = devices.apply(cmd, l2, 200, Digest{}, always_fresh());
  CHECK(second.kind == ApplyResult::Kind::applied);
  CHECK(devices.read("tv").state.at("power") == "off");
}

TEST_CASE("adapter enforces single use across its own site") {
  DeviceSet devices(parse_fixture(kFixture));
  AdapterCommand cmd{"lamp", "set_scene", {{"brightness", Json(20)}}, "hub", "lease-1"};
  auto first = devices.apply(cmd, lamp_lease(), 100, Digest{}, always_fresh());
  CHECK(first.kind == ApplyResult::Kind::applied);
  auto replay = devices.apply(cmd, lamp_lease(), 150, Digest{}, always_fresh());
  CHECK(replay.kind == ApplyResult::Kind::rejected);
  CHECK(*replay.decision.code == RejectCode::AlreadyConsumed);
}

TEST_CASE("unknown device and unknown operation are hard errors") {
  DeviceSet devices(parse_fixture(kFixture));
  CHECK_THROWS_AS(devices.read("toaster"), Error);
  CHECK_THROWS_AS(devices.next_state("lamp", "explode", {}), Error);
  CHECK_THROWS_AS(
      devices.apply(AdapterCommand{"toaster", "on", {}, "hub", "l"}, lamp_lease(), 0, Digest{},
                    always_fresh()),
      Error);
}

TEST_CASE("next_state is pure and matches apply's transition") {
  DeviceSet devices(parse_fixture(kFixture));
  Params target = devices.next_state("lamp", "set_scene", {{"brightness", Json(33)}});
  CHECK(target.at("brightness") == 33);
  CHECK(devices.read("lamp").state.at("brightness") == 0);  // untouched

  Lease l = lamp_lease();
  AdapterCommand cmd{"lamp", "set_scene", {{"brightness", Json(33)}}, "hub", l.lease_id};
  auto r = devices.apply(cmd, l, 1, Digest{}, always_fresh());
  CHECK(r.new_state == target);
}

TEST_CASE("timeout profile faults every attempt") {
  auto specs = parse_fixture(
      "device cam class=camera latency=60\nparam power set=on,off init=on\nop set_power "
      "sets=power\nfault cam profile=timeout:5000\n");
  DeviceSet devices(std::move(specs));
  Lease l = lamp_lease();
  l.target.value = "cam";
  l.operation = "set_power";
  l.envelope.constraints.clear();
  l.envelope.constraints["power"] =
      ParamConstraint{ParamConstraint::Kind::value_set, 0, 0, {"off", "on"}};
  for (int i = 0; i < 3; ++i) {
    l.lease_id = "lease-cam-" + std::to_string(i);
    AdapterCommand cmd{"cam", "set_power", {{"power", Json("off")}}, "hub", l.lease_id};
    auto r = devices.apply(cmd, l, 10 * i, Digest{}, always_fresh());
    CHECK(r.kind == ApplyResult::Kind::faulted);
    CHECK(r.detail.find("timeout") != std::string::npos);
  }
  CHECK(devices.read("cam").state.at("power") == "on");
}

TEST_CASE("scene fixture file loads with the five testbed devices") {
  auto text = read_file(std::filesystem::path(HEARTH_SCENES_DIR) / "devices.fixture");
  auto specs = parse_fixture(text);
  CHECK(specs.size() == 5);
  DeviceSet devices(std::move(specs));
  CHECK(devices.class_of("living_room_tv") == "tv");
  CHECK(devices.ids_of_class("light") == std::vector<DeviceId>{"living_room_lights"});
}
