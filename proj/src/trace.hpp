#pragma once

// Replay traces. Header directives name the fixture, policy, planner
// rules, manager roster, and config overrides; steps are line-oriented:
//
//   name <trace name>
//   fixture <path>          # relative to the trace file
//   policy <path>
//   rules <path>
//   manager <id> role=<role> caps=<a,b> devices=<d1,d2>
//   config <key>=<value>
//   at=<ms> action=<kind> key=value ...
//
// Step kinds: inject_intent, fire_schedule, crash_agent, restart_agent,
// drop_connection, replay_pending, assert. Values with spaces use
// double quotes.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "common.hpp"
#include "config.hpp"
#include "manager.hpp"

namespace hearth {

struct TraceStep {
  Millis at = 0;
  std::string action;
  std::map<std::string, std::string> args;

  std::string arg(const std::string& key, const std::string& fallback = {}) const {
    auto it = args.find(key);
    return it == args.end() ? fallback : it->second;
  }
  bool has(const std::string& key) const { return args.count(key) > 0; }
};

struct Trace {
  std::string name;
  std::string fixture_text;
  std::string policy_text;
  std::string rules_text;
  std::vector<ManagerProfile> managers;
  KernelConfig config;
  std::vector<TraceStep> steps;  // sorted by at
};

Trace load_trace(const std::filesystem::path& path);
Trace parse_trace(const std::string& text, const std::filesystem::path& base_dir);

std::string read_file(const std::filesystem::path& path);

}  // namespace hearth
