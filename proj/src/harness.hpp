#pragma once

// Deterministic scenario replay: wires bus, store, librarian, root,
// managers, and devices in-process, executes trace steps on the virtual
// clock (or scaled wall clock), evaluates asserts, and emits a metrics
// report. Two runs with the same seed produce byte-identical commit
// chains under the virtual clock.

#include <filesystem>
#include <memory>

#include "devices.hpp"
#include "librarian.hpp"
#include "manager.hpp"
#include "metrics.hpp"
#include "root.hpp"
#include "runtime.hpp"
#include "store.hpp"
#include "trace.hpp"

namespace hearth {

// Audit observer: counts protocol outcomes and re-checks every
// rejection against first-principles oracles so false rejections are
// measured, not assumed.
class Collector final : public Agent {
public:
  Collector(InProcessBus& bus, const Store& store, const DeviceSet& devices, KernelConfig config);

  const AgentId& id() const override { return id_; }
  void start(AgentContext& ctx) override;
  void on_envelope(const Envelope& e) override;
  SubscriptionRef stream() const override { return tap_; }

  struct RejectionSeen {
    std::string stage;
    std::string code;
    TaskId task;
    LeaseId lease_id;
    DeviceId device;
    AgentId command_sender;
    std::string invalidating_hex;
    bool oracle_says_valid = false;
  };

  int64_t produced = 0;
  std::set<TaskId> tasks_seen;
  std::map<TaskId, Json> dispatch_facts;  // last task_dispatch payload
  std::set<TaskId> tasks_completed;
  std::map<TaskId, AgentId> confirmed_by;
  std::map<TaskId, int> exec_ok_count;
  int64_t conflicts_detected = 0;
  int64_t conflicts_resolved = 0;
  std::map<std::string, int64_t> resolution_actions;
  std::string last_resolution_winner;
  int64_t stale_rejected = 0;
  int64_t invalid_lease_rejected = 0;
  int64_t false_rejections = 0;
  std::vector<RejectionSeen> rejections;
  struct ExecFailure {
    TaskId task;
    DeviceId device;
    std::string detail;
  };
  std::vector<ExecFailure> exec_failures;

private:
  bool lease_pair_valid(const Lease& lease, const AdapterCommand& cmd, Millis now) const;

  AgentId id_ = "_observer";
  InProcessBus& bus_;
  const Store& store_;
  const DeviceSet& devices_;
  KernelConfig config_;
  SubscriptionRef tap_;
  AgentContext* ctx_ = nullptr;
  std::map<LeaseId, Lease> leases_;
  std::set<LeaseId> consumed_ok_;
  std::map<TaskId, std::pair<DeviceId, CommitHash>> proposal_base_;
};

struct RunOptions {
  uint64_t seed = 1;
  bool real_clock = false;
  double scale = 60.0;  // protocol ms per wall ms in real-clock mode
  std::filesystem::path store_dir;  // empty: throwaway temp directory
  bool keep_store = false;
};

struct RunResult {
  MetricsReport report;
  std::string head_hex;
  size_t chain_depth = 0;
  std::vector<std::string> asserts_passed;
  std::unique_ptr<Store> store;
  std::filesystem::path store_dir;
};

RunResult run_trace(const Trace& trace, const RunOptions& opts);

struct BenchResult {
  double p50_us = 0, p95_us = 0, p99_us = 0;        // metadata-only path
  double full_p50_us = 0, full_p95_us = 0, full_p99_us = 0;  // with staleness probe
  size_t chain_depth = 0;
  size_t iterations = 0;
};

// Validation latency with and without the staleness probe, over a chain
// of the given depth.
BenchResult bench_lease_validation(size_t iterations, size_t chain_depth);

// Metadata-only p95 at two depths, sampled in interleaved batches after
// both chains are built, so both depths see identical machine state.
struct FlatnessResult {
  double shallow_p95_us = 0;
  double deep_p95_us = 0;
};
FlatnessResult bench_lease_flatness(size_t iterations, size_t shallow_depth, size_t deep_depth);

}  // namespace hearth
