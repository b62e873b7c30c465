#include "store.hpp"

#include <fstream>

namespace hearth {

namespace fs = std::filesystem;

Json Commit::preimage_json() const {
  Json jevents = Json::array();
  for (const auto& e : events) jevents.push_back(e.to_json());
  return Json{{"parent", parent ? parent->hex() : Digest{}.hex()},
              {"author", author},
              {"timestamp", timestamp},
              {"events", jevents},
              {"snapshot_digest", snapshot_digest.hex()}};
}

CommitHash Commit::compute_hash() const { return sha256(canonical(preimage_json())); }

Json Commit::to_json() const {
  Json j = preimage_json();
  j["hash"] = hash.hex();
  if (!parent) j["parent"] = nullptr;
  return j;
}

Commit Commit::from_json(const Json& j) {
  Commit c;
  c.hash = Digest::from_hex(j.at("hash").get<std::string>());
  if (!j.at("parent").is_null()) c.parent = Digest::from_hex(j.at("parent").get<std::string>());
  c.author = j.at("author").get<std::string>();
  c.timestamp = j.at("timestamp").get<Millis>();
  for (const auto& je : j.at("events")) c.events.push_back(EventRecord::from_json(je));
  c.snapshot_digest = Digest::from_hex(j.at("snapshot_digest").get<std::string>());
  return c;
}

bool Store::touches(const EventRecord& e, const DeviceId& device) {
  return e.kind == EventKind::exec_result && e.subject == device;
}

std::unique_ptr<Store> Store::create(const fs::path& dir, const AgentId& writer,
                                     std::vector<EventRecord> genesis_events, Millis now) {
  auto store = std::unique_ptr<Store>(new Store());
  store->dir_ = dir;
  store->writer_ = writer;
  if (!dir.empty()) {
    fs::create_directories(dir);
    std::ofstream(dir / "commits.log", std::ios::binary | std::ios::trunc);
  }

  for (auto& e : genesis_events) e.validate();
  StateSnapshot snap;
  Commit genesis;
  genesis.author = writer;
  genesis.timestamp = now;
  genesis.events = std::move(genesis_events);
  for (const auto& e : genesis.events) apply_event(snap, e, {std::nullopt, now});
  genesis.snapshot_digest = snap.digest();
  genesis.hash = genesis.compute_hash();
  store->install_commit(std::move(genesis), std::move(snap));
  return store;
}

std::unique_ptr<Store> Store::open(const fs::path& dir) {
  auto store = std::unique_ptr<Store>(new Store());
  store->dir_ = dir;
  store->load_log();
  if (store->commits_.empty()) throw Error(Errc::corrupt, "empty commit log");
  store->writer_ = store->commits_.front().author;
  return store;
}

void Store::load_log() {
  std::ifstream in(dir_ / "commits.log", std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + (dir_ / "commits.log").string());

  StateSnapshot snap;
  uint64_t consumed = 0;
  while (true) {
    unsigned char len_buf[4];
    in.read(reinterpret_cast<char*>(len_buf), 4);
    if (in.gcount() != 4) break;
    uint32_t len = (uint32_t(len_buf[0]) << 24) | (uint32_t(len_buf[1]) << 16) |
                   (uint32_t(len_buf[2]) << 8) | uint32_t(len_buf[3]);
    std::string body(len, '\0');
    in.read(body.data(), len);
    if (in.gcount() != static_cast<std::streamsize>(len)) break;  // trailing partial record

    Json j = Json::parse(body, nullptr, false);
    if (j.is_discarded()) throw Error(Errc::corrupt, "unparseable commit record");
    Commit c;
    try {
      c = Commit::from_json(j);
    } catch (const std::exception& e) {
      throw Error(Errc::corrupt, std::string("malformed commit record: ") + e.what());
    }
    if (c.compute_hash() != c.hash)
      throw Error(Errc::corrupt, "commit digest mismatch at " + c.hash.hex());
    // The log stores canonical bytes; any re-encoding drift is damage,
    // even when it decodes to the same values.
    if (canonical(c.to_json()) != body)
      throw Error(Errc::corrupt, "non-canonical commit record at " + c.hash.hex());
    if (commits_.empty()) {
      if (c.parent) throw Error(Errc::corrupt, "first record is not a genesis commit");
    } else {
      if (!c.parent || *c.parent != commits_.back().hash)
        throw Error(Errc::corrupt, "broken parent link at " + c.hash.hex());
      if (c.events.empty()) throw Error(Errc::corrupt, "empty non-genesis commit");
    }
    for (const auto& e : c.events) apply_event(snap, e, {c.hash, c.timestamp});
    snap.head = c.hash;

    size_t idx = commits_.size();
    by_hash_[c.hash] = idx;
    for (const auto& e : c.events) {
      if (e.kind == EventKind::exec_result) touch_index_[e.subject].push_back(idx);
    }
    commits_.push_back(std::move(c));
    consumed += 4 + len;
  }

  // Drop a trailing partial record so the next append lands cleanly.
  in.close();
  std::error_code ec;
  auto size = fs::file_size(dir_ / "commits.log", ec);
  if (!ec && size > consumed) fs::resize_file(dir_ / "commits.log", consumed);

  head_snapshot_ = std::make_shared<const StateSnapshot>(std::move(snap));
}

void Store::install_commit(Commit c, StateSnapshot next_snapshot) {
  std::unique_lock lock(mu_);
  next_snapshot.head = c.hash;
  if (next_snapshot.policy_commit_pending) {
    next_snapshot.policy_commit = c.hash;
    next_snapshot.policy_commit_pending = false;
  }
  size_t idx = commits_.size();
  by_hash_[c.hash] = idx;
  for (const auto& e : c.events) {
    if (e.kind == EventKind::exec_result) touch_index_[e.subject].push_back(idx);
  }
  persist(c);
  commits_.push_back(std::move(c));
  head_snapshot_ = std::make_shared<const StateSnapshot>(std::move(next_snapshot));
}

void Store::persist(const Commit& c) {
  if (dir_.empty()) return;
  std::string body = canonical(c.to_json());
  if (body.size() > 0xffffffffULL) throw Error(Errc::io, "commit record too large");
  unsigned char len_buf[4] = {static_cast<unsigned char>(body.size() >> 24),
                              static_cast<unsigned char>(body.size() >> 16),
                              static_cast<unsigned char>(body.size() >> 8),
                              static_cast<unsigned char>(body.size())};
  std::ofstream out(dir_ / "commits.log", std::ios::binary | std::ios::app);
  out.write(reinterpret_cast<char*>(len_buf), 4);
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  out.flush();
  if (!out) throw Error(Errc::io, "commit log write failed");

  std::ofstream head_out(dir_ / "HEAD", std::ios::trunc);
  head_out << c.hash.hex() << "\n";
}

Commit Store::append_commit(const AgentId& author, std::vector<EventRecord> events,
                            const StateSnapshot& base, Millis now) {
  if (author != writer_) throw Error(Errc::not_writer, "append by non-writer " + author);
  if (events.empty()) throw Error(Errc::empty_events, "append with no events");
  for (auto& e : events) e.validate();

  // Fold outside the lock against the caller's base, then install only
  // if the base still matches; a lost race surfaces as StaleBase.
  StateSnapshot next = base;
  for (const auto& e : events) apply_event(next, e, {std::nullopt, now});

  Commit c;
  {
    std::shared_lock lock(mu_);
    if (base.head != commits_.back().hash)
      throw Error(Errc::stale_base, "base " + base.head.hex() + " is not HEAD");
    c.parent = commits_.back().hash;
  }
  c.author = author;
  c.timestamp = now;
  c.events = std::move(events);
  c.snapshot_digest = next.digest();
  c.hash = c.compute_hash();

  install_commit(c, std::move(next));
  return c;
}

CommitHash Store::head() const {
  std::shared_lock lock(mu_);
  return commits_.back().hash;
}

std::shared_ptr<const StateSnapshot> Store::head_snapshot() const {
  std::shared_lock lock(mu_);
  return head_snapshot_;
}

size_t Store::index_of(const CommitHash& c) const {
  auto it = by_hash_.find(c);
  if (it == by_hash_.end()) throw Error(Errc::unknown_commit, "unknown commit " + c.hex());
  return it->second;
}

bool Store::contains(const CommitHash& c) const {
  std::shared_lock lock(mu_);
  return by_hash_.count(c) > 0;
}

size_t Store::depth() const {
  std::shared_lock lock(mu_);
  return commits_.size();
}

std::vector<Commit> Store::all_commits() const {
  std::shared_lock lock(mu_);
  return commits_;
}

Commit Store::commit_at(const CommitHash& c) const {
  std::shared_lock lock(mu_);
  return commits_[index_of(c)];
}

StateSnapshot Store::snapshot_at(const CommitHash& c) const {
  std::shared_lock lock(mu_);
  size_t upto = index_of(c);
  if (upto + 1 == commits_.size()) return *head_snapshot_;
  StateSnapshot snap;
  for (size_t i = 0; i <= upto; ++i) {
    for (const auto& e : commits_[i].events)
      apply_event(snap, e, {commits_[i].hash, commits_[i].timestamp});
  }
  snap.head = c;
  return snap;
}

std::vector<TimelineEntry> Store::timeline_query(const DeviceId& device,
                                                 const std::optional<CommitHash>& since) const {
  std::shared_lock lock(mu_);
  size_t start = 0;
  if (since) start = index_of(*since) + 1;

  // Fold just enough state to attribute events to intents.
  std::unordered_map<TaskId, IntentId> task_intent;
  std::unordered_map<IntentId, IntentRecord> intents;
  std::vector<TimelineEntry> out;
  for (size_t i = 0; i < commits_.size(); ++i) {
    for (const auto& e : commits_[i].events) {
      Json d = Json::parse(e.detail, nullptr, false);
      if (!d.is_discarded() && d.contains("intent") && d.at("intent").contains("intent_id")) {
        auto rec = IntentRecord::from_json(
            Json{{"intent_id", d.at("intent").at("intent_id")},
                 {"origin", d.at("intent").value("origin", "system_default")},
                 {"issued_at", d.at("intent").value("issued_at", Millis{0})},
                 {"description", d.at("intent").value("description", "")},
                 {"claimed_devices", Json::array()}});
        intents[rec.intent_id] = rec;
      }
      if (e.refs.task && e.refs.intent) task_intent[*e.refs.task] = *e.refs.intent;
      if (i >= start && touches(e, device)) {
        TimelineEntry entry;
        entry.commit = commits_[i];
        entry.event = e;
        std::optional<IntentId> intent_id;
        if (e.refs.intent)
          intent_id = *e.refs.intent;
        else if (e.refs.task && task_intent.count(*e.refs.task))
          intent_id = task_intent[*e.refs.task];
        if (intent_id && intents.count(*intent_id)) entry.intent = intents[*intent_id];
        out.push_back(std::move(entry));
      }
    }
  }
  return out;
}

bool Store::touched_since(const DeviceId& device, const CommitHash& base) const {
  std::shared_lock lock(mu_);
  size_t base_idx = index_of(base);
  auto it = touch_index_.find(device);
  if (it == touch_index_.end()) return false;
  return !it->second.empty() && it->second.back() > base_idx;
}

std::optional<CommitHash> Store::first_touch_after(const DeviceId& device,
                                                   const CommitHash& base) const {
  std::shared_lock lock(mu_);
  size_t base_idx = index_of(base);
  auto it = touch_index_.find(device);
  if (it == touch_index_.end()) return std::nullopt;
  auto pos = std::upper_bound(it->second.begin(), it->second.end(), base_idx);
  if (pos == it->second.end()) return std::nullopt;
  return commits_[*pos].hash;
}

std::optional<CommitHash> Store::successor(const CommitHash& c) const {
  std::shared_lock lock(mu_);
  size_t idx = index_of(c);
  if (idx + 1 >= commits_.size()) return std::nullopt;
  return commits_[idx + 1].hash;
}

std::optional<CommitHash> Store::verify_chain() const {
  std::shared_lock lock(mu_);
  for (size_t i = 0; i < commits_.size(); ++i) {
    const Commit& c = commits_[i];
    if (c.compute_hash() != c.hash) return c.hash;
    if (i == 0) {
      if (c.parent) return c.hash;
    } else if (!c.parent || *c.parent != commits_[i - 1].hash) {
      return c.hash;
    }
  }
  return std::nullopt;
}

}  // namespace hearth
