#include "planner.hpp"

#include <sstream>

namespace hearth {

RulePlanner RulePlanner::parse(const std::string& text) {
  RulePlanner p;
  std::stringstream lines(text);
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);

    std::string justification;
    if (auto dashes = line.find("--"); dashes != std::string::npos) {
      justification = line.substr(dashes + 2);
      size_t first = justification.find_first_not_of(" \t");
      justification = first == std::string::npos ? "" : justification.substr(first);
      line.resize(dashes);
    }

    std::stringstream ss(line);
    std::vector<std::string> tokens;
    for (std::string tok; ss >> tok;) tokens.push_back(tok);
    if (tokens.empty()) continue;
    if (tokens[0] != "subtask" || tokens.size() < 5)
      parse_fail("rules line " + std::to_string(line_no),
                 "expected 'subtask intent capability class operation ...'");

    Subtask st;
    st.capability = tokens[2];
    st.device_class = tokens[3];
    st.operation = tokens[4];
    st.justification = justification;
    for (size_t i = 5; i < tokens.size(); ++i) {
      auto eq = tokens[i].find('=');
      if (eq == std::string::npos || eq == 0)
        parse_fail("rules line " + std::to_string(line_no), "bad param '" + tokens[i] + "'");
      std::string key = tokens[i].substr(0, eq);
      std::string value = tokens[i].substr(eq + 1);
      if (!value.empty() && (std::isdigit(static_cast<unsigned char>(value[0])) || value[0] == '-')) {
        try {
          size_t used = 0;
          int64_t v = std::stoll(value, &used);
          if (used == value.size()) {
            st.params[key] = v;
            continue;
          }
        } catch (const std::exception&) {
        }
      }
      st.params[key] = value;
    }
    p.rules_[tokens[1]].push_back(std::move(st));
  }
  return p;
}

std::optional<std::vector<Subtask>> RulePlanner::decompose(const std::string& intent,
                                                           const StateSnapshot&) {
  auto it = rules_.find(intent);
  if (it == rules_.end()) return std::nullopt;
  return it->second;
}

}  // namespace hearth
