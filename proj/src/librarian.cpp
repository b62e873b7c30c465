#include "librarian.hpp"

#include <fstream>

namespace hearth {

namespace fs = std::filesystem;

bool freshness_relevant(MessageKind k) {
  return k == MessageKind::lease_grant || k == MessageKind::lease_reject ||
         k == MessageKind::rejection || k == MessageKind::exec_result;
}

static Json base_detail(const Envelope& e) { return Json{{"msg_id", e.msg_id}}; }

std::vector<EventRecord> distill(const Envelope& e) {
  std::vector<EventRecord> out;
  const Json& p = e.payload;
  auto str = [&](const char* key) { return p.value(key, std::string()); };

  switch (e.kind) {
    case MessageKind::heartbeat:
    case MessageKind::snapshot_request:
    case MessageKind::snapshot_reply:
    case MessageKind::exec_request:
    case MessageKind::user_intent:
      // Liveness and read chatter is not externally relevant; an
      // execution is bracketed by its lease_grant and exec_result; an
      // intent enters the record on its first dispatch.
      return out;

    case MessageKind::task_dispatch: {
      EventRecord r;
      r.kind = EventKind::task_dispatch;
      r.sender = e.sender;
      r.subject = str("task_id");
      r.refs.task = str("task_id");
      r.refs.intent = str("intent_id");
      Json d = base_detail(e);
      for (const char* k : {"capability", "device_class", "operation", "justification",
                            "assigned_to"})
        if (p.contains(k)) d[k] = p.at(k);
      if (p.contains("params")) d["params"] = p.at("params");
      if (p.contains("attempt")) d["attempt"] = p.at("attempt");
      if (p.contains("intent")) d["intent"] = p.at("intent");
      r.detail = canonical(d);
      out.push_back(std::move(r));
      break;
    }

    case MessageKind::proposal: {
      EventRecord r;
      r.kind = EventKind::proposal;
      r.sender = e.sender;
      r.subject = str("task_id");
      r.refs.task = str("task_id");
      if (p.contains("intent_id")) r.refs.intent = str("intent_id");
      Json d = base_detail(e);
      for (const char* k : {"device", "operation", "rationale"})
        if (p.contains(k)) d[k] = p.at(k);
      if (p.contains("params")) d["params"] = p.at("params");
      if (e.base_commit) d["base_commit"] = e.base_commit->hex();
      r.detail = canonical(d);
      out.push_back(std::move(r));
      break;
    }

    case MessageKind::lease_grant: {
      EventRecord r;
      r.kind = EventKind::lease_grant;
      r.sender = e.sender;
      Json d = base_detail(e);
      if (p.contains("lease")) {
        d["lease"] = p.at("lease");
        r.subject = p.at("lease").value("lease_id", std::string());
      }
      r.refs.lease = r.subject.empty() ? e.lease_id.value_or("") : r.subject;
      r.refs.task = str("task_id");
      r.detail = canonical(d);
      out.push_back(std::move(r));
      break;
    }

    case MessageKind::lease_reject: {
      EventRecord r;
      r.kind = EventKind::lease_reject;
      r.sender = e.sender;
      r.outcome = Outcome::rejected;
      r.subject = e.lease_id.value_or(str("lease_id"));
      r.refs.lease = r.subject;
      if (p.contains("task_id")) r.refs.task = str("task_id");
      Json d = base_detail(e);
      for (const char* k : {"code", "reasoning"})
        if (p.contains(k)) d[k] = p.at(k);
      r.detail = canonical(d);
      out.push_back(std::move(r));
      break;
    }

    case MessageKind::exec_result: {
      EventRecord r;
      r.kind = EventKind::exec_result;
      r.sender = e.sender;
      r.outcome = str("outcome") == "ok" ? Outcome::ok : Outcome::failed;
      r.refs.task = str("task_id");
      r.refs.lease = str("lease_id");
      Json d = base_detail(e);
      if (p.contains("resulting_state")) {
        const Json& rs = p.at("resulting_state");
        r.subject = rs.value("device", std::string());
        d["device"] = r.subject;
        if (rs.contains("device_class")) d["device_class"] = rs.at("device_class");
        if (rs.contains("state")) d["state"] = rs.at("state");
      }
      if (e.base_commit) d["base_commit"] = e.base_commit->hex();
      if (p.contains("detail")) d["detail"] = p.at("detail");
      r.detail = canonical(d);
      out.push_back(std::move(r));
      break;
    }

    case MessageKind::conflict_report: {
      EventRecord r;
      r.sender = e.sender;
      r.subject = str("device");
      Json d = base_detail(e);
      for (const char* k : {"device", "standing", "incoming", "detected_at"})
        if (p.contains(k)) d[k] = p.at(k);
      if (p.contains("resolution")) {
        const Json& res = p.at("resolution");
        r.kind = EventKind::conflict_resolution;
        r.refs.intent = res.value("winner", std::string());
        r.refs.intent_b = res.value("loser", std::string());
        r.outcome = res.value("action", std::string()) == "escalate" ? Outcome::escalated
                                                                      : Outcome::ok;
        d["action"] = res.value("action", std::string());
        d["winner"] = res.value("winner", std::string());
        d["loser"] = res.value("loser", std::string());
        d["reasoning"] = res.value("reasoning", std::string());
        if (res.contains("evidence")) d["evidence"] = res.at("evidence");
      } else {
        r.kind = EventKind::conflict_report;
        if (p.contains("standing")) r.refs.intent = p.at("standing").value("intent_id", std::string());
        if (p.contains("incoming")) r.refs.intent_b = p.at("incoming").value("intent_id", std::string());
      }
      r.detail = canonical(d);
      out.push_back(std::move(r));
      break;
    }

    case MessageKind::rejection: {
      EventRecord r;
      r.sender = e.sender;
      auto stage = str("stage");
      Json d = base_detail(e);
      d["stage"] = stage;
      if (p.contains("reasoning")) d["reasoning"] = p.at("reasoning");
      if (p.contains("evidence")) d["evidence"] = p.at("evidence");
      const Json evidence = p.contains("evidence") ? p.at("evidence") : Json::object();

      if (stage == "lease") {
        r.kind = EventKind::lease_reject;
        r.outcome = Outcome::rejected;
        r.subject = evidence.value("lease_id", std::string());
        r.refs.lease = r.subject;
        r.refs.task = str("task_id");
        if (evidence.contains("code")) d["code"] = evidence.at("code");
      } else if (stage == "freshness" || stage == "policy" || stage == "conflict" ||
                 stage == "capability" || stage == "resolution") {
        r.kind = EventKind::proposal;
        r.outcome = Outcome::rejected;
        r.subject = str("task_id");
        r.refs.task = str("task_id");
      } else if (stage == "recovery") {
        r.kind = EventKind::recovery_outcome;
        r.subject = str("task_id");
        r.refs.task = str("task_id");
        auto action = evidence.value("action", std::string());
        r.outcome = action == "escalated" ? Outcome::escalated : Outcome::ok;
        d["action"] = action;
        if (evidence.contains("attempts")) d["attempts"] = evidence.at("attempts");
        if (evidence.contains("next_retry_at")) d["next_retry_at"] = evidence.at("next_retry_at");
        if (evidence.contains("reassigned_to")) d["reassigned_to"] = evidence.at("reassigned_to");
      } else if (stage == "liveness") {
        r.kind = EventKind::agent_status;
        r.subject = p.value("agent", e.sender);
        auto status = p.value("status", std::string());
        r.outcome = status == "unresponsive" ? Outcome::failed : Outcome::ok;
        d["status"] = status;
      } else {
        // Unknown stages are escalated, never dropped silently.
        r.kind = EventKind::agent_status;
        r.outcome = Outcome::escalated;
        r.subject = p.value("task_id", p.value("intent_id", e.sender));
      }
      if (evidence.contains("invalidating_commit"))
        r.refs.commit = Digest::from_hex(evidence.at("invalidating_commit").get<std::string>());
      r.detail = canonical(d);
      out.push_back(std::move(r));
      break;
    }

    case MessageKind::will: {
      EventRecord r;
      r.kind = EventKind::agent_status;
      r.sender = e.sender;
      r.subject = p.value("agent", e.sender);
      r.outcome = Outcome::failed;
      Json d = base_detail(e);
      d["reason"] = p.value("reason", std::string("unexpected_disconnect"));
      r.detail = canonical(d);
      out.push_back(std::move(r));
      break;
    }
  }
  return out;
}

Journal::Journal(const fs::path& path) : path_(path) {
  if (path_.empty()) return;
  fs::create_directories(path_.parent_path());
  for (const auto& e : replay()) seen_.insert(e.msg_id);
}

void Journal::append(const Envelope& e) {
  seen_.insert(e.msg_id);
  if (path_.empty()) return;
  std::string body = e.wire();
  unsigned char len_buf[4] = {static_cast<unsigned char>(body.size() >> 24),
                              static_cast<unsigned char>(body.size() >> 16),
                              static_cast<unsigned char>(body.size() >> 8),
                              static_cast<unsigned char>(body.size())};
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  out.write(reinterpret_cast<char*>(len_buf), 4);
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  out.flush();
}

std::vector<Envelope> Journal::replay() const {
  std::vector<Envelope> out;
  if (path_.empty()) return out;
  std::ifstream in(path_, std::ios::binary);
  if (!in) return out;
  while (true) {
    unsigned char len_buf[4];
    in.read(reinterpret_cast<char*>(len_buf), 4);
    if (in.gcount() != 4) break;
    uint32_t len = (uint32_t(len_buf[0]) << 24) | (uint32_t(len_buf[1]) << 16) |
                   (uint32_t(len_buf[2]) << 8) | uint32_t(len_buf[3]);
    std::string body(len, '\0');
    in.read(body.data(), len);
    if (in.gcount() != static_cast<std::streamsize>(len)) break;
    Json j = Json::parse(body, nullptr, false);
    if (j.is_discarded()) break;
    out.push_back(Envelope::from_json(j));
  }
  return out;
}

Librarian::Librarian(InProcessBus& bus, Store& store, const fs::path& journal_path,
                     KernelConfig config)
    : bus_(bus), store_(store), config_(config), journal_(journal_path) {
  // Recover: records journaled before a crash but not yet committed are
  // re-distilled in journal order. msg_ids embedded in record details
  // make the replay idempotent.
  auto committed = committed_msg_ids();
  for (const auto& e : journal_.replay()) {
    if (committed.count(e.msg_id)) continue;
    for (auto& r : distill(e)) pending_.push_back(std::move(r));
  }
}

std::set<MsgId> Librarian::committed_msg_ids() const {
  std::set<MsgId> ids;
  for (const auto& c : store_.all_commits()) {
    for (const auto& ev : c.events) {
      Json d = Json::parse(ev.detail, nullptr, false);
      if (!d.is_discarded() && d.contains("msg_id"))
        ids.insert(d.at("msg_id").get<std::string>());
    }
  }
  return ids;
}

void Librarian::start(AgentContext& ctx) {
  ctx_ = &ctx;
  bus_.connect(id_);
  tap_ = bus_.audit_tap(id_);
  if (!pending_.empty()) flush();
}

void Librarian::on_envelope(const Envelope& e) {
  if (journal_.knows(e.msg_id)) return;  // redelivery
  journal_.append(e);

  if (e.kind == MessageKind::snapshot_request && e.topic == Topic::inbox(id_)) {
    serve_snapshot(e);
    return;
  }

  auto records = distill(e);
  produced_ += records.size();
  for (auto& r : records) pending_.push_back(std::move(r));
  if (pending_.empty()) return;

  if (freshness_relevant(e.kind)) {
    flush();
  } else if (!flush_scheduled_) {
    flush_scheduled_ = true;
    flush_timer_ = ctx_->schedule_at(ctx_->now() + config_.librarian_flush, [this] {
      flush_scheduled_ = false;
      flush();
    });
  }
}

void Librarian::flush() {
  if (pending_.empty()) return;
  if (flush_scheduled_) {
    ctx_->cancel_timer(flush_timer_);
    flush_scheduled_ = false;
  }
  auto base = store_.head_snapshot();
  store_.append_commit(id_, std::move(pending_), *base, ctx_->now());
  pending_.clear();
}

void Librarian::serve_snapshot(const Envelope& req) {
  // Replies are computed from a single commit, never mid-flush: the
  // cached head snapshot is exactly that.
  auto snap = store_.head_snapshot();
  Envelope reply;
  reply.msg_id = ctx_->msg_id();
  reply.sender = id_;
  reply.topic = Topic::inbox(req.sender);
  reply.kind = MessageKind::snapshot_reply;
  reply.payload = Json{{"in_reply_to", req.msg_id}, {"snapshot", snap->to_json()}};
  reply.sent_at = ctx_->now();
  bus_.publish(reply);
}

}  // namespace hearth
