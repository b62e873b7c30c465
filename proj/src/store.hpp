#pragma once

// Hash-chained, single-writer commit log: the canonical shared record.
// Append-only; snapshots are folds over events; HEAD comparison and
// device-scoped touch queries anchor every freshness check.
//
// On disk: `commits.log` holds [u32 length big-endian][canonical commit
// JSON] records; `HEAD` holds the hex hash plus newline. A crash at any
// byte boundary loses at most the trailing partial record.

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <unordered_map>
#include <vector>

#include "common.hpp"
#include "event.hpp"
#include "snapshot.hpp"
#include "wire.hpp"

namespace hearth {

struct Commit {
  CommitHash hash;
  std::optional<CommitHash> parent;  // none iff genesis
  AgentId author;
  Millis timestamp = 0;
  std::vector<EventRecord> events;
  Digest snapshot_digest;

  // Digest preimage: (parent or zero sentinel, author, timestamp,
  // events, snapshot digest). Two commits with identical canonical
  // content hash identically.
  Json preimage_json() const;
  CommitHash compute_hash() const;

  Json to_json() const;
  static Commit from_json(const Json& j);
};

struct TimelineEntry {
  Commit commit;
  EventRecord event;
  std::optional<IntentRecord> intent;  // intent that produced the event, if known
};

class Store {
public:
  // Creates a new store with a genesis commit authored by `writer`.
  // `dir` empty means memory-only (no persistence).
  static std::unique_ptr<Store> create(const std::filesystem::path& dir, const AgentId& writer,
                                       std::vector<EventRecord> genesis_events, Millis now);
  // Replays the log, re-verifies the chain, truncates a trailing
  // partial record. Throws Errc::corrupt on a broken chain.
  static std::unique_ptr<Store> open(const std::filesystem::path& dir);

  const AgentId& writer() const { return writer_; }

  // Single writer; base.head must equal current HEAD.
  Commit append_commit(const AgentId& author, std::vector<EventRecord> events,
                       const StateSnapshot& base, Millis now);

  CommitHash head() const;
  std::shared_ptr<const StateSnapshot> head_snapshot() const;

  StateSnapshot snapshot_at(const CommitHash& c) const;  // throws unknown_commit
  Commit commit_at(const CommitHash& c) const;           // throws unknown_commit
  bool contains(const CommitHash& c) const;
  size_t depth() const;  // number of commits including genesis
  std::vector<Commit> all_commits() const;

  std::vector<TimelineEntry> timeline_query(const DeviceId& device,
                                            const std::optional<CommitHash>& since) const;

  // True iff some commit strictly after base touches the device.
  bool touched_since(const DeviceId& device, const CommitHash& base) const;
  // Earliest commit after base that touches the device.
  std::optional<CommitHash> first_touch_after(const DeviceId& device,
                                              const CommitHash& base) const;
  // Immediate child in the chain, if any.
  std::optional<CommitHash> successor(const CommitHash& c) const;

  // nullopt means every commit digest matches its content.
  std::optional<CommitHash> verify_chain() const;

  // An exec_result event is the only kind whose subject is a device id.
  static bool touches(const EventRecord& e, const DeviceId& device);

private:
  Store() = default;
  size_t index_of(const CommitHash& c) const;  // throws unknown_commit
  void install_commit(Commit c, StateSnapshot next_snapshot);
  void persist(const Commit& c);
  void load_log();

  mutable std::shared_mutex mu_;
  std::filesystem::path dir_;
  AgentId writer_;
  std::vector<Commit> commits_;
  std::unordered_map<CommitHash, size_t> by_hash_;
  std::unordered_map<DeviceId, std::vector<size_t>> touch_index_;
  std::shared_ptr<const StateSnapshot> head_snapshot_;
};

}  // namespace hearth
