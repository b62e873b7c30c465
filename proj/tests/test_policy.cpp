#include <doctest.h>

#include "policy.hpp"

using namespace hearth;

static const char* kDemoPolicy = R"(# demo policy
hub_manager light set_scene brightness=0..60 tone={club,warm,neutral,bright}
hub_manager speaker set_volume volume=0..30
mobile_manager tv power_off
)";

TEST_CASE("demo policy parses with expected rules") {
  PolicyDoc p = parse_policy(kDemoPolicy);
  CHECK(p.rules.size() == 3);
  const PolicyRule* r = p.find("hub_manager", "light", "set_scene");
  REQUIRE(r);
  REQUIRE(r->bounds);
  CHECK(r->bounds->constraints.at("brightness").lo == 0);
  CHECK(r->bounds->constraints.at("brightness").hi == 60);
  // A rule with no bounds permits the operation with open parameters.
  CHECK(p.find("mobile_manager", "tv", "power_off")->bounds == std::nullopt);
}

TEST_CASE("duplicate rule and unsatisfiable envelopes are parse failures") {
  CHECK_THROWS_AS(parse_policy("a light on\na light on\n"), Error);
  CHECK_THROWS_WITH_AS(parse_policy("a light dim brightness=80..20\n"),
                       doctest::Contains("min > max"), Error);
  CHECK_THROWS_AS(parse_policy("a light dim tone={}\n"), Error);
  CHECK_THROWS_AS(parse_policy("a light\n"), Error);
}

TEST_CASE("evaluate: permit inside bounds, deny outside, deny unknown") {
  PolicyDoc p = parse_policy(kDemoPolicy);
  auto permit = evaluate(p, "hub_manager", "light", "set_scene",
                         {{"brightness", Json(55)}, {"tone", Json("club")}});
  REQUIRE(std::holds_alternative<Permit>(permit));
  CHECK(std::get<Permit>(permit).envelope.constraints.size() == 2);

  auto deny_range = evaluate(p, "hub_manager", "light", "set_scene", {{"brightness", Json(61)}});
  REQUIRE(std::holds_alternative<Deny>(deny_range));
  CHECK(std::get<Deny>(deny_range).reason == "OutOfEnvelope:brightness");

  auto deny_role = evaluate(p, "stranger", "light", "set_scene", {{"brightness", Json(5)}});
  REQUIRE(std::holds_alternative<Deny>(deny_role));
  CHECK(std::get<Deny>(deny_role).reason == "NoMatchingRule");

  auto deny_param = evaluate(p, "hub_manager", "light", "set_scene", {{"speed", Json(1)}});
  REQUIRE(std::holds_alternative<Deny>(deny_param));
  CHECK(std::get<Deny>(deny_param).reason == "UndeclaredParam:speed");
}

TEST_CASE("deny-by-default: empty policy denies everything") {
  PolicyDoc empty;
  for (int i = 0; i < 50; ++i) {
    auto v = evaluate(empty, "r" + std::to_string(i), "c", "op", {{"x", Json(i)}});
    CHECK(std::holds_alternative<Deny>(v));
  }
}

TEST_CASE("grid around bound edges matches interval-containment oracle") {
  PolicyDoc p = parse_policy("m light set brightness=10..20 tone={a,b}\n");
  for (int b = 8; b <= 22; ++b) {
    for (const std::string tone : {"a", "b", "c"}) {
      auto v = evaluate(p, "m", "light", "set", {{"brightness", Json(b)}, {"tone", Json(tone)}});
      bool oracle = b >= 10 && b <= 20 && (tone == "a" || tone == "b");
      CHECK(std::holds_alternative<Permit>(v) == oracle);
    }
  }
}

TEST_CASE("monotonicity: adding a rule never flips an existing permit to deny") {
  PolicyDoc base = parse_policy(kDemoPolicy);
  PolicyDoc extended = base;
  extended.rules.push_back(PolicyRule{"other_role", "camera", "set_power", std::nullopt});
  Params ok{{"brightness", Json(30)}, {"tone", Json("warm")}};
  CHECK(std::holds_alternative<Permit>(evaluate(base, "hub_manager", "light", "set_scene", ok)));
  CHECK(
      std::holds_alternative<Permit>(evaluate(extended, "hub_manager", "light", "set_scene", ok)));
}

TEST_CASE("open parameters must be declared explicitly") {
  PolicyDoc p = parse_policy("m tv launch_app app={youtube,home} extra=*\n");
  CHECK(std::holds_alternative<Permit>(
      evaluate(p, "m", "tv", "launch_app", {{"app", Json("youtube")}, {"extra", Json(42)}})));
  CHECK(std::holds_alternative<Deny>(
      evaluate(p, "m", "tv", "launch_app", {{"app", Json("vimeo")}})));
}

TEST_CASE("wire round trip preserves the document") {
  PolicyDoc p = parse_policy(kDemoPolicy);
  PolicyDoc back = PolicyDoc::from_json(Json::parse(canonical(p.to_json())));
  CHECK(back == p);
}
