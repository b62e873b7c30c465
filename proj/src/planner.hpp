#pragma once

// Intent decomposition behind an interface. The kernel ships two
// deterministic implementations: a rule table parsed from text and a
// scripted planner for programmatic fixtures. A hosted-model planner is
// an extension point, not part of the kernel.
//
// Rule file format, one subtask per line:
//
//   subtask <intent> <capability> <device_class> <operation> [k=v]... -- <justification>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "policy.hpp"
#include "snapshot.hpp"

namespace hearth {

struct Subtask {
  std::string capability;
  std::string device_class;
  std::string operation;
  Params params;
  std::string justification;
};

class Planner {
public:
  virtual ~Planner() = default;
  // nullopt: the planner has no decomposition for this intent.
  virtual std::optional<std::vector<Subtask>> decompose(const std::string& intent,
                                                        const StateSnapshot& snap) = 0;
};

class RulePlanner final : public Planner {
public:
  static RulePlanner parse(const std::string& text);
  std::optional<std::vector<Subtask>> decompose(const std::string& intent,
                                                const StateSnapshot& snap) override;
  bool has_rule(const std::string& intent) const { return rules_.count(intent) > 0; }

private:
  std::map<std::string, std::vector<Subtask>> rules_;
};

class ScriptedPlanner final : public Planner {
public:
  void set(const std::string& intent, std::vector<Subtask> subtasks) {
    rules_[intent] = std::move(subtasks);
  }
  std::optional<std::vector<Subtask>> decompose(const std::string& intent,
                                                const StateSnapshot&) override {
    auto it = rules_.find(intent);
    if (it == rules_.end()) return std::nullopt;
    return it->second;
  }

private:
  std::map<std::string, std::vector<Subtask>> rules_;
};

}  // namespace hearth
