#include "hearth/hearth.h"

#include <cstring>
#include <sstream>

#include "harness.hpp"
#include "metrics.hpp"
#include "store.hpp"
#include "trace.hpp"

using namespace hearth;

namespace {

thread_local std::string g_last_error;

int map_errc(Errc c) {
  switch (c) {
    case Errc::io: return HEARTH_ERR_IO;
    case Errc::parse:
    case Errc::duplicate_rule:
    case Errc::unsatisfiable_envelope:
    case Errc::malformed_envelope: return HEARTH_ERR_PARSE;
    case Errc::corrupt: return HEARTH_ERR_CORRUPT;
    case Errc::unknown_commit: return HEARTH_ERR_UNKNOWN_COMMIT;
    case Errc::assert_failed: return HEARTH_ERR_ASSERT;
    default: return HEARTH_ERR_INVALID_ARGUMENT;
  }
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    g_last_error = e.what();
    return map_errc(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return HEARTH_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void write_hex(const std::string& hex, char buf[65]) {
  std::memset(buf, 0, 65);
  std::memcpy(buf, hex.c_str(), std::min<size_t>(64, hex.size()));
}

}  // namespace

struct hearth_store {
  std::unique_ptr<Store> store;
};

struct hearth_report {
  MetricsReport report;
  std::string head_hex;
  size_t chain_depth = 0;
};

extern "C" {

const char* hearth_version(void) { return "0.1.0"; }

const char* hearth_last_error(void) { return g_last_error.c_str(); }

void hearth_string_free(char* s) { std::free(s); }

int hearth_replay(const char* trace_path, const hearth_replay_options_t* options,
                  hearth_report_t** out) {
  if (!trace_path || !out) {
    g_last_error = "trace_path and out are required";
    return HEARTH_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] {
    Trace trace = load_trace(trace_path);
    RunOptions opts;
    if (options) {
      opts.seed = options->seed;
      opts.real_clock = options->real_clock != 0;
      if (options->scale > 0) opts.scale = options->scale;
      if (options->store_dir) {
        opts.store_dir = options->store_dir;
        opts.keep_store = true;
      }
    }
    RunResult result = run_trace(trace, opts);
    auto* r = new hearth_report();
    r->report = result.report;
    r->head_hex = result.head_hex;
    r->chain_depth = result.chain_depth;
    *out = r;
    return HEARTH_OK;
  });
}

int64_t hearth_report_counter(const hearth_report_t* r, const char* name) {
  if (!r || !name) return -1;
  const MetricsReport& m = r->report;
  std::string key = name;
  if (key == "tasks_total") return m.tasks_total;
  if (key == "tasks_completed") return m.tasks_completed;
  if (key == "conflicts_detected") return m.conflicts_detected;
  if (key == "conflicts_resolved") return m.conflicts_resolved;
  if (key == "stale_rejected") return m.stale_rejected;
  if (key == "invalid_lease_rejected") return m.invalid_lease_rejected;
  if (key == "false_rejections") return m.false_rejections;
  if (key == "events_produced") return m.events_produced;
  if (key == "events_persisted") return m.events_persisted;
  if (key == "chain_depth") return static_cast<int64_t>(r->chain_depth);
  return -1;
}

double hearth_report_latency(const hearth_report_t* r, const char* name) {
  if (!r || !name) return -1.0;
  std::string key = name;
  if (key == "lease_validation_p95_us") return r->report.lease_validation_p95_us;
  if (key == "per_hop_overhead_p95_ms") return r->report.per_hop_overhead_p95_ms;
  return -1.0;
}

int hearth_report_head(const hearth_report_t* r, char buf[65]) {
  if (!r || !buf) return HEARTH_ERR_INVALID_ARGUMENT;
  write_hex(r->head_hex, buf);
  return HEARTH_OK;
}

int hearth_report_text(const hearth_report_t* r, char** out) {
  if (!r || !out) return HEARTH_ERR_INVALID_ARGUMENT;
  *out = dup_string(r->report.text());
  return *out ? HEARTH_OK : HEARTH_ERR_INTERNAL;
}

int hearth_report_json(const hearth_report_t* r, char** out) {
  if (!r || !out) return HEARTH_ERR_INVALID_ARGUMENT;
  *out = dup_string(canonical(r->report.to_json()));
  return *out ? HEARTH_OK : HEARTH_ERR_INTERNAL;
}

void hearth_report_free(hearth_report_t* r) { delete r; }

int hearth_store_open(const char* dir, hearth_store_t** out) {
  if (!dir || !out) {
    g_last_error = "dir and out are required";
    return HEARTH_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] {
    auto* s = new hearth_store();
    s->store = Store::open(dir);
    *out = s;
    return HEARTH_OK;
  });
}

void hearth_store_close(hearth_store_t* s) { delete s; }

int hearth_store_head(const hearth_store_t* s, char buf[65]) {
  if (!s || !buf) return HEARTH_ERR_INVALID_ARGUMENT;
  write_hex(s->store->head().hex(), buf);
  return HEARTH_OK;
}

int hearth_store_depth(const hearth_store_t* s, uint64_t* out) {
  if (!s || !out) return HEARTH_ERR_INVALID_ARGUMENT;
  *out = s->store->depth();
  return HEARTH_OK;
}

int hearth_store_verify(const hearth_store_t* s, char bad_hash[65]) {
  if (!s) return HEARTH_ERR_INVALID_ARGUMENT;
  auto bad = s->store->verify_chain();
  if (!bad) return HEARTH_OK;
  if (bad_hash) write_hex(bad->hex(), bad_hash);
  return HEARTH_VERIFY_BAD_COMMIT;
}

int hearth_store_log(const hearth_store_t* s, const char* device, const char* since_hash,
                     char** out) {
  if (!s || !out) return HEARTH_ERR_INVALID_ARGUMENT;
  return guarded([&] {
    std::ostringstream os;
    if (device) {
      std::optional<CommitHash> since;
      if (since_hash) since = Digest::from_hex(since_hash);
      for (const auto& entry : s->store->timeline_query(device, since)) {
        os << entry.commit.hash.hex().substr(0, 12) << "  t=" << entry.commit.timestamp << "  "
           << to_string(entry.event.kind) << "  " << entry.event.sender << "  "
           << to_string(entry.event.outcome);
        if (entry.intent)
          os << "  intent=" << entry.intent->intent_id << " ("
             << to_string(entry.intent->origin) << ")";
        os << "\n";
      }
    } else {
      std::optional<CommitHash> since;
      if (since_hash) since = Digest::from_hex(since_hash);
      bool emitting = !since;
      for (const auto& c : s->store->all_commits()) {
        if (!emitting) {
          if (c.hash == *since) emitting = true;
          continue;
        }
        os << c.hash.hex().substr(0, 12) << "  t=" << c.timestamp << "  author=" << c.author
           << "\n";
        for (const auto& ev : c.events)
          os << "    " << to_string(ev.kind) << "  " << ev.sender << " -> " << ev.subject << "  "
             << to_string(ev.outcome) << "\n";
      }
    }
    *out = dup_string(os.str());
    return *out ? HEARTH_OK : HEARTH_ERR_INTERNAL;
  });
}

int hearth_store_show(const hearth_store_t* s, const char* commit_hash, char** out_json) {
  if (!s || !commit_hash || !out_json) return HEARTH_ERR_INVALID_ARGUMENT;
  return guarded([&] {
    Commit c = s->store->commit_at(Digest::from_hex(commit_hash));
    *out_json = dup_string(c.to_json().dump(2));
    return *out_json ? HEARTH_OK : HEARTH_ERR_INTERNAL;
  });
}

int hearth_policy_check(const char* path) {
  if (!path) return HEARTH_ERR_INVALID_ARGUMENT;
  return guarded([&] {
    parse_policy(read_file(path));
    return HEARTH_OK;
  });
}

int hearth_bench_lease_validation(uint64_t iterations, uint64_t chain_depth,
                                  hearth_bench_result_t* out) {
  if (!out || iterations == 0) return HEARTH_ERR_INVALID_ARGUMENT;
  return guarded([&] {
    BenchResult b = bench_lease_validation(iterations, chain_depth);
    out->p50_us = b.p50_us;
    out->p95_us = b.p95_us;
    out->p99_us = b.p99_us;
    out->full_p50_us = b.full_p50_us;
    out->full_p95_us = b.full_p95_us;
    out->full_p99_us = b.full_p99_us;
    out->chain_depth = b.chain_depth;
    out->iterations = b.iterations;
    return HEARTH_OK;
  });
}

}  // extern "C"
