// Operator CLI. Links the public C API only.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hearth/hearth.h"

namespace {

int fail(const std::string& what, int code) {
  std::cerr << "error: " << what;
  const char* detail = hearth_last_error();
  if (detail && *detail) std::cerr << ": " << detail;
  std::cerr << "\n";
  return code == 0 ? 1 : std::abs(code);
}

struct StorePtr {
  hearth_store_t* s = nullptr;
  ~StorePtr() { hearth_store_close(s); }
};

int open_store(const std::string& dir, StorePtr& out) {
  int rc = hearth_store_open(dir.c_str(), &out.s);
  if (rc != HEARTH_OK) return fail("cannot open store at " + dir, rc);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hearth - multi-agent coordination kernel replay and inspection"};
  app.require_subcommand(1);

  // replay
  std::string trace_path, replay_store_dir, golden_path;
  uint64_t seed = 1;
  bool real_clock = false, emit_json = false;
  double scale = 60.0;
  auto* replay = app.add_subcommand("replay", "Replay a trace and print the metrics report");
  replay->add_option("trace", trace_path, "Trace file")->required();
  replay->add_option("--seed", seed, "Replay seed (msg ids and fault draws)");
  replay->add_flag("--real-clock", real_clock, "Run agent loops concurrently on scaled wall time");
  replay->add_option("--scale", scale, "Protocol ms per wall ms in real-clock mode");
  replay->add_option("--store-dir", replay_store_dir, "Persist the commit store here");
  replay->add_option("--golden", golden_path, "Compare counters against a golden metrics file");
  replay->add_flag("--json", emit_json, "Emit the report as canonical JSON");

  // log / show / verify
  std::string store_dir = "hearth_store", device, since, show_hash;
  auto* log = app.add_subcommand("log", "Timeline of the commit store");
  log->add_option("--store-dir", store_dir, "Store directory");
  log->add_option("--device", device, "Only events touching this device");
  log->add_option("--since", since, "Start after this commit hash");

  auto* show = app.add_subcommand("show", "Print one commit as JSON");
  show->add_option("hash", show_hash, "Commit hash (64 hex chars)")->required();
  show->add_option("--store-dir", store_dir, "Store directory");

  auto* verify = app.add_subcommand("verify", "Recompute every commit digest");
  verify->add_option("--store-dir", store_dir, "Store directory");

  // bench
  uint64_t iterations = 100000, depth = 1000;
  auto* bench = app.add_subcommand("bench", "Lease validation latency");
  bench->add_option("--iterations", iterations, "Validation calls per path");
  bench->add_option("--depth", depth, "Commit chain depth behind the staleness probe");

  // policy check
  std::string policy_path;
  auto* policy = app.add_subcommand("policy", "Policy file tools");
  auto* policy_check = policy->add_subcommand("check", "Parse and validate a policy file");
  policy_check->add_option("file", policy_path, "Policy file")->required();

  CLI11_PARSE(app, argc, argv);

  if (replay->parsed()) {
    hearth_replay_options_t opts{};
    opts.seed = seed;
    opts.real_clock = real_clock ? 1 : 0;
    opts.scale = scale;
    opts.store_dir = replay_store_dir.empty() ? nullptr : replay_store_dir.c_str();
    hearth_report_t* report = nullptr;
    int rc = hearth_replay(trace_path.c_str(), &opts, &report);
    if (rc != HEARTH_OK) return fail("replay failed", rc);

    char head[65];
    hearth_report_head(report, head);
    char* body = nullptr;
    if (emit_json)
      hearth_report_json(report, &body);
    else
      hearth_report_text(report, &body);
    if (body) {
      std::cout << body;
      if (emit_json) std::cout << "\n";
      hearth_string_free(body);
    }
    std::cout << "HEAD " << head << "\n";

    int exit_code = 0;
    if (!golden_path.empty()) {
      char* json = nullptr;
      hearth_report_json(report, &json);
      auto got = nlohmann::json::parse(json ? json : "{}");
      hearth_string_free(json);
      std::ifstream in(golden_path);
      if (!in) {
        hearth_report_free(report);
        return fail("cannot read golden file " + golden_path, 1);
      }
      auto want = nlohmann::json::parse(in, nullptr, false);
      if (want.is_discarded()) {
        hearth_report_free(report);
        return fail("golden file is not valid JSON", 1);
      }
      for (auto it = want.begin(); it != want.end(); ++it) {
        if (it.key().find("_us") != std::string::npos || it.key().find("_ms") != std::string::npos)
          continue;  // latency fields are environment-dependent
        if (!got.contains(it.key()) || got.at(it.key()) != it.value()) {
          std::cerr << "golden mismatch: " << it.key() << " expected " << it.value() << " got "
                    << (got.contains(it.key()) ? got.at(it.key()).dump() : "<missing>") << "\n";
          exit_code = 1;
        }
      }
      if (exit_code == 0) std::cout << "golden metrics match\n";
    }
    hearth_report_free(report);
    return exit_code;
  }

  if (log->parsed()) {
    StorePtr s;
    if (int rc = open_store(store_dir, s)) return rc;
    char* text = nullptr;
    int rc = hearth_store_log(s.s, device.empty() ? nullptr : device.c_str(),
                              since.empty() ? nullptr : since.c_str(), &text);
    if (rc != HEARTH_OK) return fail("log failed", rc);
    std::cout << text;
    hearth_string_free(text);
    return 0;
  }

  if (show->parsed()) {
    StorePtr s;
    if (int rc = open_store(store_dir, s)) return rc;
    char* json = nullptr;
    int rc = hearth_store_show(s.s, show_hash.c_str(), &json);
    if (rc != HEARTH_OK) return fail("unknown commit " + show_hash, rc);
    std::cout << json << "\n";
    hearth_string_free(json);
    return 0;
  }

  if (verify->parsed()) {
    StorePtr s;
    if (int rc = open_store(store_dir, s)) return rc;
    char bad[65];
    int rc = hearth_store_verify(s.s, bad);
    if (rc == HEARTH_OK) {
      uint64_t depth_out = 0;
      hearth_store_depth(s.s, &depth_out);
      std::cout << "chain ok (" << depth_out << " commits)\n";
      return 0;
    }
    if (rc == HEARTH_VERIFY_BAD_COMMIT) {
      std::cerr << "chain verification failed at commit " << bad << "\n";
      return 2;
    }
    return fail("verify failed", rc);
  }

  if (bench->parsed()) {
    hearth_bench_result_t b{};
    int rc = hearth_bench_lease_validation(iterations, depth, &b);
    if (rc != HEARTH_OK) return fail("bench failed", rc);
    std::printf("lease validation, %llu iterations, chain depth %llu\n",
                static_cast<unsigned long long>(b.iterations),
                static_cast<unsigned long long>(b.chain_depth));
    std::printf("  metadata-only  p50 %.3f us  p95 %.3f us  p99 %.3f us\n", b.p50_us, b.p95_us,
                b.p99_us);
    std::printf("  with probe     p50 %.3f us  p95 %.3f us  p99 %.3f us\n", b.full_p50_us,
                b.full_p95_us, b.full_p99_us);
    return 0;
  }

  if (policy_check->parsed()) {
    int rc = hearth_policy_check(policy_path.c_str());
    if (rc != HEARTH_OK) return fail("policy check failed", rc);
    std::cout << "policy ok\n";
    return 0;
  }

  return 1;
}
