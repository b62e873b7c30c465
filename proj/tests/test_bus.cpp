#include <doctest.h>

#include "bus.hpp"

using namespace hearth;

namespace {

Envelope env(const AgentId& sender, Topic topic, MessageKind kind, int seq) {
  Envelope e;
  e.msg_id = sender + "-" + std::to_string(seq);
  e.sender = sender;
  e.topic = topic;
  e.kind = kind;
  e.payload = Json{{"seq", seq}};
  e.sent_at = seq;
  return e;
}

}  // namespace

TEST_CASE("envelope validation: exec_request needs lease and base, heartbeat carries neither") {
  Envelope bad = env("hub", Topic::inbox("root"), MessageKind::exec_request, 1);
  CHECK_THROWS_AS(bad.validate(), Error);
  bad.base_commit = sha256(std::string("c"));
  CHECK_THROWS_AS(bad.validate(), Error);
  bad.lease_id = "lease-1";
  CHECK_NOTHROW(bad.validate());

  Envelope hb = env("hub", Topic::broadcast(), MessageKind::heartbeat, 2);
  CHECK_NOTHROW(hb.validate());
  hb.base_commit = sha256(std::string("c"));
  CHECK_THROWS_AS(hb.validate(), Error);

  Envelope will = env("hub", Topic::broadcast(), MessageKind::will, 3);
  will.lease_id = "lease-1";
  CHECK_THROWS_AS(will.validate(), Error);
}

TEST_CASE("envelope wire form carries the eight field names and round trips") {
  Envelope e = env("hub", Topic::inbox("root"), MessageKind::proposal, 9);
  e.base_commit = sha256(std::string("base"));
  Json j = e.to_json();
  for (const char* k :
       {"msg_id", "sender", "topic", "kind", "base_commit", "lease_id", "payload", "sent_at"})
    CHECK(j.contains(k));
  Envelope back = Envelope::from_json(Json::parse(e.wire()));
  CHECK(back.wire() == e.wire());
}

TEST_CASE("publish requires a connection; subscribe delivers; no cross-talk") {
  InProcessBus bus;
  CHECK_THROWS_AS(bus.publish(env("ghost", Topic::broadcast(), MessageKind::heartbeat, 1)), Error);

  bus.connect("a");
  bus.connect("b");
  auto qa = bus.subscribe("a", Topic::inbox("a"));
  auto qb = bus.subscribe("b", Topic::inbox("b"));
  bus.publish(env("b", Topic::inbox("a"), MessageKind::task_dispatch, 1));
  CHECK(qa->size() == 1);
  CHECK(qb->empty());
  CHECK(qa->try_pop()->payload.at("seq") == 1);
}

TEST_CASE("broadcast reaches every broadcast subscriber") {
  InProcessBus bus;
  bus.connect("a");
  bus.connect("b");
  bus.connect("c");
  auto qa = bus.subscribe("a", Topic::broadcast());
  auto qb = bus.subscribe("b", Topic::broadcast());
  bus.publish(env("c", Topic::broadcast(), MessageKind::heartbeat, 5));
  CHECK(qa->size() == 1);
  CHECK(qb->size() == 1);
}

TEST_CASE("audit mirror: every inbox and broadcast publication appears exactly once") {
  InProcessBus bus;
  bus.connect("a");
  bus.connect("b");
  auto inbox = bus.subscribe("b", Topic::inbox("b"));
  auto tap = bus.audit_tap("observer");

  int published = 0;
  for (int i = 0; i < 20; ++i) {
    Topic t = (i % 3 == 0) ? Topic::broadcast() : Topic::inbox("b");
    bus.publish(env("a", t, i % 3 == 0 ? MessageKind::heartbeat : MessageKind::task_dispatch, i));
    ++published;
  }
  CHECK(tap->size() == static_cast<size_t>(published));
  // Tap order equals publish order for a single sender.
  for (int i = 0; i < published; ++i) {
    auto e = tap->try_pop();
    REQUIRE(e);
    CHECK(e->payload.at("seq") == i);
  }
  (void)inbox;
}

TEST_CASE("per-sender FIFO holds over a thousand messages") {
  InProcessBus bus;
  bus.connect("a");
  auto tap = bus.audit_tap("observer");
  bus.connect("sink");
  bus.subscribe("sink", Topic::inbox("sink"));
  for (int i = 0; i < 1000; ++i)
    bus.publish(env("a", Topic::inbox("sink"), MessageKind::task_dispatch, i));
  for (int i = 0; i < 1000; ++i) {
    auto e = tap->try_pop();
    REQUIRE(e);
    CHECK(e->payload.at("seq") == i);
  }
}

TEST_CASE("last will: published on drop, discarded on clean disconnect, once per session") {
  InProcessBus bus;
  bus.connect("mgr");
  bus.connect("root");
  auto root_q = bus.subscribe("root", Topic::broadcast());

  Envelope will = env("mgr", Topic::broadcast(), MessageKind::will, 0);
  will.payload = Json{{"agent", "mgr"}};
  bus.register_will("mgr", will);

  SUBCASE("clean shutdown discards the will") {
    bus.disconnect("mgr");
    CHECK(root_q->empty());
  }

  SUBCASE("abrupt drop publishes exactly once, redrop without re-arm stays silent") {
    bus.drop("mgr");
    CHECK(root_q->size() == 1);
    CHECK(root_q->try_pop()->kind == MessageKind::will);
    bus.drop("mgr");
    CHECK(root_q->empty());
  }

  SUBCASE("reconnect, re-arm, drop again: one will per drop") {
    bus.drop("mgr");
    CHECK(root_q->try_pop()->kind == MessageKind::will);
    bus.connect("mgr");
    bus.register_will("mgr", will);
    bus.drop("mgr");
    CHECK(root_q->size() == 1);
  }
}

TEST_CASE("subscriptions are durable across sessions") {
  InProcessBus bus;
  bus.connect("mgr");
  auto q = bus.subscribe("mgr", Topic::inbox("mgr"));
  bus.connect("peer");
  bus.drop("mgr");  // connection gone, queue stays
  bus.publish(env("peer", Topic::inbox("mgr"), MessageKind::task_dispatch, 1));
  bus.connect("mgr");
  auto q2 = bus.subscribe("mgr", Topic::inbox("mgr"));
  CHECK(q2 == q);
  CHECK(q2->size() == 1);
}

TEST_CASE("at-least-once consumption: unacked head is seen again") {
  InProcessBus bus;
  bus.connect("a");
  bus.connect("scribe");
  auto q = bus.subscribe("scribe", Topic::inbox("scribe"));
  bus.publish(env("a", Topic::inbox("scribe"), MessageKind::snapshot_request, 1));

  auto first = q->try_next();
  REQUIRE(first);
  auto again = q->try_next();  // crash between next and ack: still visible
  REQUIRE(again);
  CHECK(again->msg_id == first->msg_id);
  q->ack();
  CHECK(q->empty());
}

TEST_CASE("subscriber queues are bounded") {
  InProcessBus bus;
  bus.connect("a");
  bus.connect("slow");
  bus.subscribe("slow", Topic::inbox("slow"));
  for (int i = 0; i < 4096; ++i)
    bus.publish(env("a", Topic::inbox("slow"), MessageKind::task_dispatch, i));
  CHECK_THROWS_AS(bus.publish(env("a", Topic::inbox("slow"), MessageKind::task_dispatch, 4096)),
                  Error);
}

TEST_CASE("broker topic map for the external adapter") {
  CHECK(Topic::inbox("hub").broker_topic() == "hearth/inbox/hub");
  CHECK(Topic::broadcast().broker_topic() == "hearth/broadcast");
  CHECK(Topic::audit().broker_topic() == "hearth/audit/#");
  CHECK(Topic::parse("inbox:hub") == Topic::inbox("hub"));
}
