#include "trace.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace hearth {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Splits on whitespace, keeping "quoted strings" whole.
static std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
      continue;
    }
    if (!quoted && std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

static std::map<std::string, std::string> parse_kv(const std::vector<std::string>& tokens,
                                                   size_t from, int line_no) {
  std::map<std::string, std::string> out;
  for (size_t i = from; i < tokens.size(); ++i) {
    auto eq = tokens[i].find('=');
    if (eq == std::string::npos || eq == 0)
      parse_fail("trace line " + std::to_string(line_no), "expected key=value, got '" + tokens[i] + "'");
    out[tokens[i].substr(0, eq)] = tokens[i].substr(eq + 1);
  }
  return out;
}

static std::set<std::string> split_set(const std::string& s) {
  std::set<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.insert(item);
  return out;
}

static void apply_config(KernelConfig& c, const std::string& key, const std::string& value,
                         int line_no) {
  auto num = [&] { return std::stoll(value); };
  if (key == "heartbeat_interval") c.heartbeat_interval = num();
  else if (key == "lease_ttl") c.lease_ttl = num();
  else if (key == "backoff_base") c.backoff_base = num();
  else if (key == "backoff_factor") c.backoff_factor = static_cast<int>(num());
  else if (key == "backoff_cap") c.backoff_cap = num();
  else if (key == "max_attempts") c.max_attempts = static_cast<int>(num());
  else if (key == "librarian_flush") c.librarian_flush = num();
  else if (key == "ground_cache") c.ground_cache = num();
  else if (key == "sweep_interval") c.sweep_interval = num();
  else if (key == "snapshot_retry") c.snapshot_retry = num();
  else if (key == "freshness_mode") {
    if (value == "strict") c.freshness_mode = FreshnessMode::strict;
    else if (value == "device_scoped") c.freshness_mode = FreshnessMode::device_scoped;
    else parse_fail("trace line " + std::to_string(line_no), "bad freshness_mode " + value);
  } else {
    parse_fail("trace line " + std::to_string(line_no), "unknown config key " + key);
  }
}

Trace parse_trace(const std::string& text, const fs::path& base_dir) {
  Trace t;
  std::stringstream lines(text);
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    const std::string& head = tokens[0];

    if (head == "name") {
      if (tokens.size() > 1) t.name = tokens[1];
    } else if (head == "fixture") {
      t.fixture_text = read_file(base_dir / tokens.at(1));
    } else if (head == "policy") {
      t.policy_text = read_file(base_dir / tokens.at(1));
    } else if (head == "rules") {
      t.rules_text = read_file(base_dir / tokens.at(1));
    } else if (head == "manager") {
      if (tokens.size() < 2)
        parse_fail("trace line " + std::to_string(line_no), "manager needs an id");
      auto kv = parse_kv(tokens, 2, line_no);
      ManagerProfile p;
      p.agent_id = tokens[1];
      p.role = kv.count("role") ? kv["role"] : tokens[1];
      p.capabilities = split_set(kv["caps"]);
      p.domain_devices = split_set(kv["devices"]);
      t.managers.push_back(std::move(p));
    } else if (head == "config") {
      auto kv = parse_kv(tokens, 1, line_no);
      for (const auto& [k, v] : kv) apply_config(t.config, k, v, line_no);
    } else if (head.rfind("at=", 0) == 0) {
      auto kv = parse_kv(tokens, 0, line_no);
      TraceStep step;
      step.at = std::stoll(kv.at("at"));
      auto it = kv.find("action");
      if (it == kv.end())
        parse_fail("trace line " + std::to_string(line_no), "step needs action=");
      step.action = it->second;
      kv.erase("at");
      kv.erase("action");
      step.args = std::move(kv);
      t.steps.push_back(std::move(step));
    } else {
      parse_fail("trace line " + std::to_string(line_no), "unknown directive " + head);
    }
  }
  std::stable_sort(t.steps.begin(), t.steps.end(),
                   [](const TraceStep& a, const TraceStep& b) { return a.at < b.at; });
  return t;
}

Trace load_trace(const fs::path& path) {
  return parse_trace(read_file(path), path.parent_path());
}

}  // namespace hearth
