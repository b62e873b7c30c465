#include "harness.hpp"

#include <atomic>
#include <chrono>
#include <random>
#include <sstream>
#include <thread>

#include <unistd.h>

namespace hearth {

namespace fs = std::filesystem;

Collector::Collector(InProcessBus& bus, const Store& store, const DeviceSet& devices,
                     KernelConfig config)
    : bus_(bus), store_(store), devices_(devices), config_(config) {}

void Collector::start(AgentContext& ctx) {
  ctx_ = &ctx;
  tap_ = bus_.audit_tap(id_);
}

// Independent re-derivation of the validation conditions; deliberately
// not a call into validate_lease.
bool Collector::lease_pair_valid(const Lease& lease, const AdapterCommand& cmd,
                                 Millis now) const {
  if (now >= lease.expires_at) return false;
  if (consumed_ok_.count(lease.lease_id)) return false;
  if (cmd.sender != lease.grantee.agent) return false;
  if (lease.target.kind == LeaseTarget::Kind::device) {
    if (cmd.device_id != lease.target.value) return false;
  } else {
    auto cls = devices_.class_of(cmd.device_id);
    if (!cls || *cls != lease.target.value) return false;
  }
  if (cmd.operation != lease.operation) return false;
  for (const auto& [name, value] : cmd.params) {
    auto it = lease.envelope.constraints.find(name);
    if (it == lease.envelope.constraints.end()) return false;
    const ParamConstraint& c = it->second;
    switch (c.kind) {
      case ParamConstraint::Kind::open:
        break;
      case ParamConstraint::Kind::range: {
        if (!value.is_number_integer()) return false;
        int64_t v = value.get<int64_t>();
        if (v < c.lo || v > c.hi) return false;
        break;
      }
      case ParamConstraint::Kind::value_set: {
        std::string rendered = value.is_string() ? value.get<std::string>() : canonical(value);
        if (!std::binary_search(c.values.begin(), c.values.end(), rendered)) return false;
        break;
      }
    }
  }
  if (!store_.contains(lease.base_commit)) return false;
  if (lease.base_commit != store_.head() &&
      store_.touched_since(cmd.device_id, lease.base_commit))
    return false;
  return true;
}

void Collector::on_envelope(const Envelope& e) {
  produced += static_cast<int64_t>(distill(e).size());
  const Json& p = e.payload;
  switch (e.kind) {
    case MessageKind::task_dispatch:
      tasks_seen.insert(p.value("task_id", std::string()));
      dispatch_facts[p.value("task_id", std::string())] = p;
      break;
    case MessageKind::proposal:
      if (e.base_commit)
        proposal_base_[p.value("task_id", std::string())] = {p.value("device", std::string()),
                                                             *e.base_commit};
      break;
    case MessageKind::lease_grant:
      if (p.contains("lease")) {
        Lease l = Lease::from_json(p.at("lease"));
        leases_[l.lease_id] = std::move(l);
      }
      break;
    case MessageKind::exec_result: {
      auto task = p.value("task_id", std::string());
      if (p.value("outcome", std::string()) == "ok") {
        tasks_completed.insert(task);
        confirmed_by.emplace(task, e.sender);  // first confirmation wins
        exec_ok_count[task] += 1;
        consumed_ok_.insert(p.value("lease_id", std::string()));
      } else {
        ExecFailure f;
        f.task = task;
        if (p.contains("resulting_state"))
          f.device = p.at("resulting_state").value("device", std::string());
        f.detail = p.value("detail", std::string());
        exec_failures.push_back(std::move(f));
      }
      break;
    }
    case MessageKind::conflict_report:
      if (p.contains("resolution")) {
        conflicts_resolved += 1;
        resolution_actions[p.at("resolution").value("action", std::string())] += 1;
        last_resolution_winner = p.at("resolution").value("winner", std::string());
      } else {
        conflicts_detected += 1;
      }
      break;
    case MessageKind::rejection: {
      auto stage = p.value("stage", std::string());
      if (stage != "lease" && stage != "freshness") break;
      RejectionSeen r;
      r.stage = stage;
      r.task = p.value("task_id", std::string());
      const Json evidence = p.contains("evidence") ? p.at("evidence") : Json::object();
      r.invalidating_hex = evidence.value("invalidating_commit", std::string());
      if (stage == "lease") {
        r.code = evidence.value("code", std::string());
        r.lease_id = evidence.value("lease_id", std::string());
        AdapterCommand cmd;
        if (evidence.contains("command")) cmd = AdapterCommand::from_json(evidence.at("command"));
        r.device = cmd.device_id;
        r.command_sender = cmd.sender;
        auto lease_it = leases_.find(r.lease_id);
        r.oracle_says_valid =
            lease_it != leases_.end() && lease_pair_valid(lease_it->second, cmd, e.sent_at);
        if (r.code == "StaleCommit")
          stale_rejected += 1;
        else
          invalid_lease_rejected += 1;
      } else {
        r.code = "StaleCommit";
        stale_rejected += 1;
        auto base_it = proposal_base_.find(r.task);
        if (base_it != proposal_base_.end()) {
          r.device = base_it->second.first;
          // Oracle: a fresh proposal must never be rejected for staleness.
          bool actually_stale =
              config_.freshness_mode == FreshnessMode::strict
                  ? base_it->second.second != store_.head()
                  : store_.touched_since(base_it->second.first, base_it->second.second);
          r.oracle_says_valid = !actually_stale;
        }
      }
      if (r.oracle_says_valid) false_rejections += 1;
      rejections.push_back(std::move(r));
      break;
    }
    default:
      break;
  }
}

// ---------------------------------------------------------------------------

namespace {

struct World {
  Trace trace;
  RunOptions opts;
  InProcessBus bus;
  std::unique_ptr<MsgIdGen> ids;
  MetricsSink sink;
  std::unique_ptr<Store> store;
  std::unique_ptr<DeviceSet> devices;
  RulePlanner planner;
  std::unique_ptr<Librarian> librarian;
  std::unique_ptr<Root> root;
  std::map<AgentId, std::unique_ptr<Manager>> managers;
  std::map<AgentId, CrashResidue> residues;
  std::unique_ptr<Collector> collector;
  std::unique_ptr<VirtualHost> vhost;
  std::unique_ptr<RealHost> rhost;
  fs::path store_dir;
  fs::path journal_path;
  bool temp_store = false;
  std::vector<std::string> asserts_passed;

  Millis now() const { return vhost ? vhost->now() : rhost->now(); }

  void add(Agent* a) {
    if (vhost) vhost->add_agent(a);
    else rhost->add_agent(a);
  }
  void remove(const AgentId& id) {
    if (vhost) vhost->remove_agent(id);
    else rhost->remove_agent(id);
  }
  void settle() {
    if (vhost) vhost->settle();
  }
  void run_agent(const AgentId& id, std::function<void()> fn) {
    if (vhost) vhost->run_on(id, std::move(fn));
    else rhost->run_on(id, std::move(fn));
  }

  Manager* manager(const AgentId& id) {
    auto it = managers.find(id);
    return it == managers.end() ? nullptr : it->second.get();
  }
  const ManagerProfile* profile(const AgentId& id) const {
    for (const auto& p : trace.managers)
      if (p.agent_id == id) return &p;
    return nullptr;
  }

  void spawn_manager(const ManagerProfile& p, bool restarted, bool replay_stale) {
    auto m = std::make_unique<Manager>(bus, *devices, *store, p, trace.config);
    if (restarted) {
      CrashResidue residue;
      if (replay_stale) {
        auto it = residues.find(p.agent_id);
        if (it != residues.end()) residue = it->second;
      }
      m->restart_with(std::move(residue), replay_stale);
    }
    Manager* raw = m.get();
    managers[p.agent_id] = std::move(m);
    add(raw);
  }

  void publish_intent(const std::string& sender, const TraceStep& step, IntentOrigin origin) {
    Envelope e;
    e.msg_id = ids->next();
    e.sender = sender;
    e.topic = Topic::inbox("root");
    e.kind = MessageKind::user_intent;
    e.sent_at = now();
    e.payload = Json{{"name", step.arg("name")},
                     {"origin", to_string(origin)},
                     {"description", step.arg("description", step.arg("name"))}};
    bus.publish(e);
  }

  int64_t persisted_events() const {
    int64_t n = 0;
    auto commits = store->all_commits();
    for (size_t i = 1; i < commits.size(); ++i)
      n += static_cast<int64_t>(commits[i].events.size());
    return n;
  }
};

[[noreturn]] void assert_fail(const TraceStep& step, const std::string& expected,
                              const std::string& actual) {
  throw Error(Errc::assert_failed, "assert at=" + std::to_string(step.at) + " check=" +
                                       step.arg("check") + ": expected " + expected + ", got " +
                                       actual);
}

std::string render_value(const Json& v) {
  return v.is_string() ? v.get<std::string>() : canonical(v);
}

// Evaluates one assert step; throws Errc::assert_failed on mismatch.
void eval_assert(World& w, const TraceStep& step) {
  const std::string check = step.arg("check");
  if (check == "shadow" || check == "device_state") {
    const DeviceId device = step.arg("device");
    const std::string param = step.arg("param");
    const std::string expected = step.arg("value");
    Params state;
    if (check == "shadow") {
      auto snap = w.store->head_snapshot();
      auto it = snap->shadows.find(device);
      if (it == snap->shadows.end()) {
        if (expected == "absent") return;
        assert_fail(step, "shadow for " + device, "no shadow");
      }
      state = it->second.state;
    } else {
      state = w.devices->read(device).state;
    }
    auto pit = state.find(param);
    if (pit == state.end()) assert_fail(step, param + "=" + expected, "param absent");
    if (render_value(pit->second) != expected)
      assert_fail(step, param + "=" + expected, param + "=" + render_value(pit->second));
  } else if (check == "task") {
    const TaskId id = step.arg("id");
    auto it = w.root->tasks().find(id);
    if (it == w.root->tasks().end()) assert_fail(step, "task " + id, "unknown task");
    if (step.has("phase") && to_string(it->second.phase) != step.arg("phase"))
      assert_fail(step, "phase " + step.arg("phase"), to_string(it->second.phase));
  } else if (check == "task_count") {
    const std::string phase = step.arg("phase");
    int64_t n = 0;
    for (const auto& [id, t] : w.root->tasks())
      if (to_string(t.phase) == phase) ++n;
    if (n != std::stoll(step.arg("value")))
      assert_fail(step, step.arg("value") + " tasks " + phase, std::to_string(n));
  } else if (check == "metric") {
    const std::string key = step.arg("key");
    int64_t actual = -1;
    if (key == "tasks_total") actual = static_cast<int64_t>(w.collector->tasks_seen.size());
    else if (key == "tasks_completed") actual = static_cast<int64_t>(w.collector->tasks_completed.size());
    else if (key == "conflicts_detected") actual = w.collector->conflicts_detected;
    else if (key == "conflicts_resolved") actual = w.collector->conflicts_resolved;
    else if (key == "stale_rejected") actual = w.collector->stale_rejected;
    else if (key == "invalid_lease_rejected") actual = w.collector->invalid_lease_rejected;
    else if (key == "false_rejections") actual = w.collector->false_rejections;
    else if (key == "events_produced") actual = w.collector->produced;
    else if (key == "events_persisted") actual = w.persisted_events();
    else assert_fail(step, "known metric", key);
    if (actual != std::stoll(step.arg("value")))
      assert_fail(step, key + "=" + step.arg("value"), key + "=" + std::to_string(actual));
  } else if (check == "replay_rejected") {
    // A lease-stage rejection for this sender with the expected code,
    // citing the commit that actually invalidated the lease base.
    const std::string code = step.arg("code");
    const AgentId agent = step.arg("agent");
    for (const auto& r : w.collector->rejections) {
      if (r.stage != "lease" || r.code != code) continue;
      if (!agent.empty() && r.command_sender != agent) continue;
      if (code == "StaleCommit") {
        if (r.invalidating_hex.empty())
          assert_fail(step, "invalidating commit cited", "no citation");
        auto cited = Digest::try_from_hex(r.invalidating_hex);
        if (!cited || !w.store->contains(*cited))
          assert_fail(step, "cited commit in chain", r.invalidating_hex);
        bool touches = false;
        for (const auto& ev : w.store->commit_at(*cited).events)
          if (Store::touches(ev, r.device)) touches = true;
        if (!touches)
          assert_fail(step, "cited commit touching " + r.device, r.invalidating_hex);
      }
      if (r.oracle_says_valid) assert_fail(step, "an oracle-invalid pair", "valid pair rejected");
      return;
    }
    assert_fail(step, "rejection code=" + code + " agent=" + agent, "none seen");
  } else if (check == "zero_event_loss") {
    int64_t persisted = w.persisted_events();
    if (persisted != w.collector->produced)
      assert_fail(step, std::to_string(w.collector->produced) + " persisted",
                  std::to_string(persisted));
  } else if (check == "chain_ok") {
    if (auto bad = w.store->verify_chain())
      assert_fail(step, "verified chain", "bad commit " + bad->hex());
  } else if (check == "timeline_last") {
    const DeviceId device = step.arg("device");
    auto entries = w.store->timeline_query(device, std::nullopt);
    if (entries.empty()) assert_fail(step, "timeline entries for " + device, "empty");
    const auto& last = entries.back();
    if (!last.intent) assert_fail(step, "intent attribution", "none");
    if (step.has("origin") && to_string(last.intent->origin) != step.arg("origin"))
      assert_fail(step, "origin " + step.arg("origin"), to_string(last.intent->origin));
  } else if (check == "confirmed_by") {
    const TaskId task = step.arg("task");
    auto it = w.collector->confirmed_by.find(task);
    if (it == w.collector->confirmed_by.end())
      assert_fail(step, task + " confirmed", "not confirmed");
    if (it->second != step.arg("agent"))
      assert_fail(step, "confirmed by " + step.arg("agent"), it->second);
  } else if (check == "exec_failure") {
    const DeviceId device = step.arg("device");
    for (const auto& f : w.collector->exec_failures) {
      if (f.device != device) continue;
      if (step.has("contains") && f.detail.find(step.arg("contains")) == std::string::npos)
        continue;
      if (f.detail.empty()) assert_fail(step, "diagnosable detail", "empty detail");
      return;
    }
    assert_fail(step, "exec failure on " + device, "none recorded");
  } else if (check == "resolution") {
    const std::string action = step.arg("value");
    auto it = w.collector->resolution_actions.find(action);
    if (it == w.collector->resolution_actions.end() || it->second == 0)
      assert_fail(step, "resolution action " + action, "none");
    if (step.has("winner") && w.collector->last_resolution_winner != step.arg("winner"))
      assert_fail(step, "winner " + step.arg("winner"), w.collector->last_resolution_winner);
  } else {
    assert_fail(step, "known check", check);
  }
}

void eval_assert_with_retry(World& w, const TraceStep& step) {
  if (w.vhost) {
    eval_assert(w, step);
    w.asserts_passed.push_back(step.arg("check"));
    return;
  }
  // Real clock: give the threads a moment to quiesce, then retry briefly.
  w.rhost->wait_quiesce(3000);
  for (int attempt = 0;; ++attempt) {
    try {
      eval_assert(w, step);
      w.asserts_passed.push_back(step.arg("check"));
      return;
    } catch (const Error&) {
      if (attempt >= 40) throw;
      std::this_thread::sleep_for(std::chrono::milliseconds(25));
    }
  }
}

void execute_step(World& w, const TraceStep& step) {
  const std::string& action = step.action;
  if (action == "inject_intent") {
    w.publish_intent("user", step,
                     step.has("origin") ? origin_from_string(step.arg("origin"))
                                        : IntentOrigin::user_explicit);
  } else if (action == "fire_schedule") {
    w.publish_intent("automation", step, IntentOrigin::scheduled);
  } else if (action == "crash_agent") {
    // Stop the loop first (joins the thread under the real host), then
    // capture residue, then let the broker announce the death.
    const AgentId agent = step.arg("agent");
    if (Manager* m = w.manager(agent)) {
      w.remove(agent);
      w.residues[agent] = m->take_residue();
      w.bus.drop(agent);
      w.managers.erase(agent);
    } else if (agent == "scribe" && w.librarian) {
      w.remove(agent);
      w.bus.drop(agent);
      w.librarian.reset();
    } else {
      throw Error(Errc::invalid_argument, "crash_agent: unknown agent " + agent);
    }
  } else if (action == "restart_agent") {
    const AgentId agent = step.arg("agent");
    bool replay = step.arg("replay_stale") == "true";
    if (agent == "scribe") {
      if (w.librarian) {
        w.bus.disconnect(agent);
        w.remove(agent);
        w.librarian.reset();
      }
      w.librarian = std::make_unique<Librarian>(w.bus, *w.store, w.journal_path, w.trace.config);
      w.add(w.librarian.get());
    } else {
      if (Manager* m = w.manager(agent)) {  // clean restart of a live manager
        w.remove(agent);
        w.residues[agent] = m->take_residue();
        w.bus.disconnect(agent);
        w.managers.erase(agent);
        if (!replay) w.residues.erase(agent);
      }
      const ManagerProfile* p = w.profile(agent);
      if (!p) throw Error(Errc::invalid_argument, "restart_agent: unknown agent " + agent);
      w.spawn_manager(*p, true, replay);
    }
  } else if (action == "drop_connection") {
    const AgentId agent = step.arg("agent");
    w.bus.drop(agent);
    // Transport blip: the client reconnects, re-arms its will, and
    // heartbeats so the root sees it live again.
    if (Manager* m = w.manager(agent))
      w.run_agent(agent, [m] { m->on_reconnect(); });
    else
      w.bus.connect(agent);
  } else if (action == "replay_pending") {
    const AgentId agent = step.arg("agent");
    Manager* m = w.manager(agent);
    if (!m) throw Error(Errc::invalid_argument, "replay_pending: unknown agent");
    std::optional<LeaseId> override_id;
    if (step.has("lease_override")) override_id = step.arg("lease_override");
    w.run_agent(agent, [m, override_id] { m->replay_pending(override_id); });
  } else if (action == "assert") {
    eval_assert_with_retry(w, step);
  } else {
    throw Error(Errc::parse, "unknown trace action " + action);
  }
}

}  // namespace

RunResult run_trace(const Trace& trace, const RunOptions& opts) {
  World w;
  w.trace = trace;
  w.opts = opts;
  w.ids = std::make_unique<MsgIdGen>(opts.seed);

  parse_policy(trace.policy_text);  // surface policy errors before wiring

  w.store_dir = opts.store_dir;
  if (w.store_dir.empty()) {
    static std::atomic<uint64_t> run_counter{0};
    w.store_dir = fs::temp_directory_path() /
                  ("hearth-run-" + std::to_string(::getpid()) + "-" +
                   std::to_string(run_counter.fetch_add(1)) + "-" +
                   std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    w.temp_store = true;
  }
  // A replay always starts from a clean slate; a stale journal would be
  // mistaken for redelivered traffic.
  std::error_code ec;
  fs::remove_all(w.store_dir, ec);
  fs::create_directories(w.store_dir);
  w.journal_path = w.store_dir / "journal.log";

  struct TempDirGuard {
    fs::path dir;
    bool active;
    ~TempDirGuard() {
      if (!active) return;
      std::error_code ec;
      fs::remove_all(dir, ec);
    }
  } guard{w.store_dir, w.temp_store && !opts.keep_store};

  EventRecord policy_event;
  policy_event.kind = EventKind::policy_update;
  policy_event.sender = "scribe";
  policy_event.subject = "policy";
  policy_event.detail = canonical(Json{{"policy_text", trace.policy_text}});
  w.store = Store::create(w.store_dir / "store", "scribe", {policy_event}, 0);

  w.devices = std::make_unique<DeviceSet>(parse_fixture(trace.fixture_text));
  w.devices->set_rng(&w.ids->rng());
  w.planner = RulePlanner::parse(trace.rules_text);

  if (opts.real_clock) {
    w.rhost = std::make_unique<RealHost>(w.bus, *w.ids, opts.scale, &w.sink);
  } else {
    w.vhost = std::make_unique<VirtualHost>(w.bus, *w.ids);
  }

  // Observer and librarian attach first so the audit mirror misses
  // nothing; the root subscribes before managers start heartbeating.
  w.collector = std::make_unique<Collector>(w.bus, *w.store, *w.devices, trace.config);
  w.add(w.collector.get());
  w.librarian = std::make_unique<Librarian>(w.bus, *w.store, w.journal_path, trace.config);
  w.add(w.librarian.get());
  w.root = std::make_unique<Root>(w.bus, *w.store, *w.devices, w.planner, trace.config);
  w.root->set_metrics_sink(&w.sink);
  w.add(w.root.get());
  for (const auto& p : trace.managers) w.spawn_manager(p, false, false);

  w.bus.connect("user");
  w.bus.connect("automation");

  for (const auto& step : trace.steps) {
    if (w.vhost) {
      w.vhost->advance_to(step.at);
    } else {
      w.rhost->sleep_until(step.at);
    }
    execute_step(w, step);
    w.settle();
  }
  w.settle();

  RunResult result;
  result.asserts_passed = std::move(w.asserts_passed);

  MetricsReport& r = result.report;
  r.tasks_total = static_cast<int64_t>(w.collector->tasks_seen.size());
  r.tasks_completed = static_cast<int64_t>(w.collector->tasks_completed.size());
  r.conflicts_detected = w.collector->conflicts_detected;
  r.conflicts_resolved = w.collector->conflicts_resolved;
  r.stale_rejected = w.collector->stale_rejected;
  r.invalid_lease_rejected = w.collector->invalid_lease_rejected;
  r.false_rejections = w.collector->false_rejections;
  r.events_produced = w.collector->produced;
  r.events_persisted = w.persisted_events();
  {
    std::lock_guard lock(w.sink.mu);
    r.lease_validation_p95_us = percentile(w.sink.lease_validation_ns, 95.0) / 1000.0;
    r.per_hop_overhead_p95_ms = percentile(w.sink.hop_wall_ms, 95.0);
  }

  if (w.rhost) w.rhost->stop_all();
  result.head_hex = w.store->head().hex();
  result.chain_depth = w.store->depth();
  result.store = std::move(w.store);
  result.store_dir = w.store_dir;
  return result;
}

namespace {

// Per-call cost sits near the clock's own overhead, so latency is
// sampled as the mean over small batches.
constexpr size_t kBenchBatch = 64;

struct BenchRig {
  std::unique_ptr<Store> store;
  Lease lease;
  AdapterCommand cmd;
  CommitHash head;
  CommitHash genesis;
  std::set<LeaseId> consumed;

  FreshnessProbe probe() {
    return [this](const DeviceId& d, const CommitHash& b) {
      return !store->touched_since(d, b);
    };
  }

  double one_batch() {
    auto p = probe();
    bool ok = true;
    auto t0 = std::chrono::steady_clock::now();
    for (size_t i = 0; i < kBenchBatch; ++i) {
      LeaseDecision d = validate_lease(&lease, cmd, 1000, head, consumed, p);
      ok &= d.accepted;
      consumed.erase(lease.lease_id);
    }
    auto t1 = std::chrono::steady_clock::now();
    if (!ok) throw Error(Errc::invalid_argument, "bench lease unexpectedly rejected");
    return std::chrono::duration<double, std::nano>(t1 - t0).count() / kBenchBatch;
  }

  void warm_up(size_t batches = 64) {
    for (size_t i = 0; i < batches; ++i) one_batch();
  }
};

BenchRig make_bench_rig(size_t chain_depth) {
  BenchRig rig;
  rig.store = Store::create({}, "scribe", {}, 0);
  for (size_t i = 0; i < chain_depth; ++i) {
    // Failed results keep the folded snapshot small and constant-size,
    // so deep chains build in linear time; the touch index still grows
    // with every commit, which is what the probe walks.
    EventRecord e;
    e.kind = EventKind::exec_result;
    e.sender = "hub";
    e.subject = "dev-" + std::to_string(i % 8);
    e.outcome = Outcome::failed;
    e.refs.task = "task-" + std::to_string(i);
    e.refs.lease = "lease-" + std::to_string(i);
    e.detail = canonical(Json{{"device", e.subject}, {"detail", "bench filler"}});
    rig.store->append_commit("scribe", {e}, *rig.store->head_snapshot(),
                             static_cast<Millis>(i));
  }

  ParameterEnvelope env;
  env.constraints["brightness"] = ParamConstraint{ParamConstraint::Kind::range, 0, 100, {}};
  env.constraints["tone"] =
      ParamConstraint{ParamConstraint::Kind::value_set, 0, 0, {"club", "warm"}};

  rig.lease.lease_id = "lease-bench";
  rig.lease.grantee = {"hub_manager", "hub"};
  rig.lease.target = {LeaseTarget::Kind::device, "bench-light"};
  rig.lease.operation = "set_scene";
  rig.lease.envelope = env;
  rig.lease.policy_commit = rig.store->head();
  rig.lease.expires_at = 1'000'000'000;
  rig.lease.justification = "bench";

  rig.cmd.device_id = "bench-light";
  rig.cmd.operation = "set_scene";
  rig.cmd.params = {{"brightness", Json(55)}, {"tone", Json("club")}};
  rig.cmd.sender = "hub";
  rig.cmd.lease_id = rig.lease.lease_id;

  rig.head = rig.store->head();
  rig.genesis = rig.store->all_commits().front().hash;
  rig.lease.base_commit = rig.head;  // metadata-only by default
  return rig;
}

std::vector<double> sample(BenchRig& rig, size_t iterations) {
  rig.warm_up();
  std::vector<double> ns;
  ns.reserve(iterations / kBenchBatch + 1);
  for (size_t done = 0; done < iterations; done += kBenchBatch) ns.push_back(rig.one_batch());
  return ns;
}

}  // namespace

BenchResult bench_lease_validation(size_t iterations, size_t chain_depth) {
  BenchRig rig = make_bench_rig(chain_depth);

  // Metadata-only: base equals HEAD, the probe short-circuits.
  rig.lease.base_commit = rig.head;
  auto meta = sample(rig, iterations);
  // Full path: an older base forces the touch-index probe. The bench
  // device is never touched, so the pair stays valid.
  rig.lease.base_commit = rig.genesis;
  auto full = sample(rig, iterations);

  BenchResult b;
  b.iterations = iterations;
  b.chain_depth = rig.store->depth();
  b.p50_us = percentile(meta, 50.0) / 1000.0;
  b.p95_us = percentile(meta, 95.0) / 1000.0;
  b.p99_us = percentile(meta, 99.0) / 1000.0;
  b.full_p50_us = percentile(full, 50.0) / 1000.0;
  b.full_p95_us = percentile(full, 95.0) / 1000.0;
  b.full_p99_us = percentile(full, 99.0) / 1000.0;
  return b;
}

FlatnessResult bench_lease_flatness(size_t iterations, size_t shallow_depth, size_t deep_depth) {
  BenchRig shallow = make_bench_rig(shallow_depth);
  BenchRig deep = make_bench_rig(deep_depth);
  shallow.warm_up(256);
  deep.warm_up(256);

  std::vector<double> ns_shallow, ns_deep;
  for (size_t done = 0; done < iterations; done += kBenchBatch) {
    ns_shallow.push_back(shallow.one_batch());
    ns_deep.push_back(deep.one_batch());
  }
  FlatnessResult r;
  r.shallow_p95_us = percentile(ns_shallow, 95.0) / 1000.0;
  r.deep_p95_us = percentile(ns_deep, 95.0) / 1000.0;
  return r;
}

}  // namespace hearth
