#include "runtime.hpp"

#include <condition_variable>
#include <cstdio>

namespace hearth {

MsgId MsgIdGen::next() {
  static const char* digits = "0123456789abcdef";
  uint64_t v = draw();
  std::string s = "m";
  for (int i = 15; i >= 0; --i) s.push_back(digits[(v >> (i * 4)) & 0xf]);
  return s;
}

uint64_t MsgIdGen::draw() {
  std::lock_guard lock(mu_);
  return rng_();
}

namespace {

class VirtualContext final : public AgentContext {
public:
  VirtualContext(VirtualHost& host, AgentId owner) : host_(host), owner_(std::move(owner)) {}
  Millis now() const override { return host_.now(); }
  uint64_t schedule_at(Millis due, std::function<void()> fn) override;
  void cancel_timer(uint64_t id) override;
  MsgId msg_id() override { return host_.ids().next(); }

private:
  VirtualHost& host_;
  AgentId owner_;
};

}  // namespace

VirtualHost::VirtualHost(InProcessBus& bus, MsgIdGen& ids) : bus_(bus), ids_(ids) {
  bus_.set_delivery_hook([this](const AgentId& owner, SubscriptionRef sub) {
    ready_.emplace_back(owner, std::move(sub));
  });
}

VirtualHost::~VirtualHost() { bus_.set_delivery_hook(nullptr); }

uint64_t VirtualContext::schedule_at(Millis due, std::function<void()> fn) {
  return host_.schedule(owner_, due, std::move(fn));
}

void VirtualContext::cancel_timer(uint64_t id) { host_.cancel(id); }

void VirtualHost::add_agent(Agent* a) {
  auto ctx = std::make_unique<VirtualContext>(*this, a->id());
  agents_[a->id()] = a;
  AgentContext& ref = *ctx;
  contexts_[a->id()] = std::move(ctx);
  a->start(ref);
  // Deliveries queued while the agent was away get fresh markers.
  auto sub = a->stream();
  if (sub) {
    for (size_t i = sub->size(); i > 0; --i) ready_.emplace_back(a->id(), sub);
  }
}

void VirtualHost::remove_agent(const AgentId& id) {
  agents_.erase(id);
  contexts_.erase(id);
  // Timers owned by the agent die with it; queued envelopes stay in the
  // durable subscription.
  std::priority_queue<Timer, std::vector<Timer>, std::greater<>> keep;
  while (!timers_.empty()) {
    Timer t = timers_.top();
    timers_.pop();
    if (t.owner != id) keep.push(std::move(t));
  }
  timers_ = std::move(keep);
}

bool VirtualHost::has_agent(const AgentId& id) const { return agents_.count(id) > 0; }

uint64_t VirtualHost::schedule(const AgentId& owner, Millis due, std::function<void()> fn) {
  Timer t{due, next_seq_++, next_timer_id_++, owner, std::move(fn)};
  uint64_t id = t.id;
  timers_.push(std::move(t));
  return id;
}

void VirtualHost::cancel(uint64_t id) { cancelled_.insert(id); }

bool VirtualHost::deliver_one() {
  if (ready_.empty()) return false;
  auto [owner, sub] = std::move(ready_.front());
  ready_.pop_front();
  auto it = agents_.find(owner);
  if (it == agents_.end()) return true;  // agent away; envelope stays queued
  Agent* a = it->second;
  if (a->durable()) {
    auto e = sub->try_next();
    if (e) {
      a->on_envelope(*e);
      sub->ack();
    }
  } else {
    auto e = sub->try_pop();
    if (e) a->on_envelope(*e);
  }
  return true;
}

void VirtualHost::advance_to(Millis t) {
  while (true) {
    if (deliver_one()) continue;
    if (!timers_.empty() && timers_.top().due <= t) {
      Timer timer = timers_.top();
      timers_.pop();
      if (cancelled_.erase(timer.id)) continue;
      if (!agents_.count(timer.owner)) continue;
      now_ = std::max(now_, timer.due);
      timer.fn();
      continue;
    }
    break;
  }
  now_ = std::max(now_, t);
}

// ---------------------------------------------------------------------------

struct RealHost::Runner {
  Agent* agent = nullptr;
  std::unique_ptr<AgentContext> ctx;
  std::thread thread;
  std::atomic<bool> stop{false};
  std::atomic<bool> busy{false};

  std::mutex mu;
  struct Timer {
    Millis due;
    uint64_t id;
    std::function<void()> fn;
  };
  std::vector<Timer> timers;  // small; scanned linearly
  uint64_t next_id = 1;
};

namespace {

class RealContext final : public AgentContext {
public:
  RealContext(RealHost& host, RealHost::Runner& runner, MsgIdGen& ids)
      : host_(host), runner_(runner), ids_(ids) {}
  Millis now() const override { return host_.now(); }
  uint64_t schedule_at(Millis due, std::function<void()> fn) override {
    std::lock_guard lock(runner_.mu);
    uint64_t id = runner_.next_id++;
    runner_.timers.push_back({due, id, std::move(fn)});
    return id;
  }
  void cancel_timer(uint64_t id) override {
    std::lock_guard lock(runner_.mu);
    std::erase_if(runner_.timers, [id](const auto& t) { return t.id == id; });
  }
  MsgId msg_id() override { return ids_.next(); }

private:
  RealHost& host_;
  RealHost::Runner& runner_;
  MsgIdGen& ids_;
};

}  // namespace

RealHost::RealHost(InProcessBus& bus, MsgIdGen& ids, double scale, MetricsSink* sink)
    : bus_(bus), ids_(ids), scale_(scale), sink_(sink),
      start_(std::chrono::steady_clock::now()) {}

RealHost::~RealHost() { stop_all(); }

Millis RealHost::now() const {
  auto wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_);
  return static_cast<Millis>(wall.count() * scale_);
}

void RealHost::add_agent(Agent* a) {
  std::lock_guard lock(mu_);
  auto runner = std::make_unique<Runner>();
  Runner* r = runner.get();
  r->agent = a;
  r->ctx = std::make_unique<RealContext>(*this, *r, ids_);
  a->start(*r->ctx);
  auto sub = a->stream();
  r->thread = std::thread([this, r, sub] {
    while (!r->stop.load()) {
      // Next own timer bounds the wait.
      Millis next_due = -1;
      {
        std::lock_guard tl(r->mu);
        for (const auto& t : r->timers)
          if (next_due < 0 || t.due < next_due) next_due = t.due;
      }
      auto wall_deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(20);
      if (next_due >= 0) {
        auto due_wall = start_ + std::chrono::microseconds(
                                     static_cast<int64_t>(next_due * 1000.0 / scale_));
        if (due_wall < wall_deadline) wall_deadline = due_wall;
      }
      std::optional<Envelope> e;
      if (sub) e = sub->pop_wait(wall_deadline, &r->stop);
      if (e) {
        r->busy.store(true);
        try {
          r->agent->on_envelope(*e);
        } catch (const std::exception& ex) {
          // A transport drop can race an in-flight handler; surfaced,
          // not fatal to the loop.
          std::fprintf(stderr, "agent %s handler: %s\n", r->agent->id().c_str(), ex.what());
        }
        r->busy.store(false);
        if (sink_ && e->topic.kind == Topic::Kind::inbox)
          sink_->hop_sample(static_cast<double>(now() - e->sent_at) / scale_);
      }
      // Fire due timers.
      while (!r->stop.load()) {
        std::function<void()> fn;
        {
          std::lock_guard tl(r->mu);
          Millis t_now = now();
          auto it = std::min_element(r->timers.begin(), r->timers.end(),
                                     [](const auto& a, const auto& b) { return a.due < b.due; });
          if (it == r->timers.end() || it->due > t_now) break;
          fn = std::move(it->fn);
          r->timers.erase(it);
        }
        r->busy.store(true);
        try {
          fn();
        } catch (const std::exception& ex) {
          std::fprintf(stderr, "agent %s timer: %s\n", r->agent->id().c_str(), ex.what());
        }
        r->busy.store(false);
      }
    }
  });
  runners_[a->id()] = std::move(runner);
}

void RealHost::remove_agent(const AgentId& id) {
  std::unique_ptr<Runner> runner;
  {
    std::lock_guard lock(mu_);
    auto it = runners_.find(id);
    if (it == runners_.end()) return;
    runner = std::move(it->second);
    runners_.erase(it);
  }
  runner->stop.store(true);
  if (auto sub = runner->agent->stream()) sub->poke();
  if (runner->thread.joinable()) runner->thread.join();
}

void RealHost::run_on(const AgentId& id, std::function<void()> fn) {
  std::lock_guard lock(mu_);
  auto it = runners_.find(id);
  if (it == runners_.end()) return;
  Runner* r = it->second.get();
  std::lock_guard tl(r->mu);
  r->timers.push_back({now(), r->next_id++, std::move(fn)});
}

void RealHost::sleep_until(Millis protocol_t) {
  auto wall = start_ + std::chrono::microseconds(static_cast<int64_t>(protocol_t * 1000.0 / scale_));
  std::this_thread::sleep_until(wall);
}

bool RealHost::wait_quiesce(Millis timeout_wall_ms) {
  auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_wall_ms);
  while (std::chrono::steady_clock::now() < deadline) {
    bool quiet = true;
    {
      std::lock_guard lock(mu_);
      for (const auto& [id, r] : runners_) {
        auto sub = r->agent->stream();
        if ((sub && !sub->empty()) || r->busy.load() || !r->agent->idle()) {
          quiet = false;
          break;
        }
      }
    }
    if (quiet) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  return false;
}

void RealHost::stop_all() {
  std::map<AgentId, std::unique_ptr<Runner>> taken;
  {
    std::lock_guard lock(mu_);
    taken = std::move(runners_);
    runners_.clear();
  }
  for (auto& [id, r] : taken) {
    r->stop.store(true);
    if (auto sub = r->agent->stream()) sub->poke();
  }
  for (auto& [id, r] : taken)
    if (r->thread.joinable()) r->thread.join();
}

}  // namespace hearth
