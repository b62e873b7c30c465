#pragma once

// The non-participant observer: consumes the audit tap, distills
// externally relevant envelopes into event records, appends commits as
// the store's sole writer, and serves snapshots. It publishes nothing
// but snapshot replies and holds no leases or device handles.

#include <filesystem>
#include <set>
#include <vector>

#include "bus.hpp"
#include "config.hpp"
#include "event.hpp"
#include "runtime.hpp"
#include "store.hpp"

namespace hearth {

// Pure distillation: envelope -> zero or more event records.
// Heartbeats, snapshot traffic, and exec_requests leave no record; the
// lease_grant/exec_result pair brackets an execution in the log.
std::vector<EventRecord> distill(const Envelope& e);

// True for envelope kinds whose records must be committed immediately
// so the next freshness check sees them.
bool freshness_relevant(MessageKind k);

// Durable intake buffer with the same record framing as the commit log.
class Journal {
public:
  explicit Journal(const std::filesystem::path& path);
  void append(const Envelope& e);
  std::vector<Envelope> replay() const;
  bool knows(const MsgId& id) const { return seen_.count(id) > 0; }

private:
  std::filesystem::path path_;
  std::set<MsgId> seen_;
};

class Librarian final : public Agent {
public:
  Librarian(InProcessBus& bus, Store& store, const std::filesystem::path& journal_path,
            KernelConfig config);

  const AgentId& id() const override { return id_; }
  void start(AgentContext& ctx) override;
  void on_envelope(const Envelope& e) override;
  SubscriptionRef stream() const override { return tap_; }
  bool durable() const override { return true; }
  bool idle() const override { return pending_.empty(); }

  uint64_t records_produced() const { return produced_; }

private:
  void observe(const Envelope& e);
  void flush();
  void serve_snapshot(const Envelope& req);
  std::set<MsgId> committed_msg_ids() const;

  AgentId id_ = "scribe";
  InProcessBus& bus_;
  Store& store_;
  KernelConfig config_;
  Journal journal_;
  AgentContext* ctx_ = nullptr;
  SubscriptionRef tap_;
  std::vector<EventRecord> pending_;
  bool flush_scheduled_ = false;
  uint64_t flush_timer_ = 0;
  uint64_t produced_ = 0;
};

}  // namespace hearth
