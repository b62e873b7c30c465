#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hearth {

// Protocol time. Virtual milliseconds under the replay scheduler,
// scaled wall milliseconds in real-clock mode.
using Millis = int64_t;

using AgentId = std::string;
using DeviceId = std::string;
using TaskId = std::string;
using LeaseId = std::string;
using IntentId = std::string;
using MsgId = std::string;

enum class Errc {
  ok = 0,
  io,
  parse,
  corrupt,
  unknown_commit,
  unknown_device,
  unknown_operation,
  not_writer,
  stale_base,
  empty_events,
  not_connected,
  malformed_envelope,
  duplicate_rule,
  unsatisfiable_envelope,
  assert_failed,
  invalid_argument,
};

class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

private:
  Errc code_;
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::ok: return "ok";
    case Errc::io: return "io";
    case Errc::parse: return "parse";
    case Errc::corrupt: return "corrupt";
    case Errc::unknown_commit: return "unknown_commit";
    case Errc::unknown_device: return "unknown_device";
    case Errc::unknown_operation: return "unknown_operation";
    case Errc::not_writer: return "not_writer";
    case Errc::stale_base: return "stale_base";
    case Errc::empty_events: return "empty_events";
    case Errc::not_connected: return "not_connected";
    case Errc::malformed_envelope: return "malformed_envelope";
    case Errc::duplicate_rule: return "duplicate_rule";
    case Errc::unsatisfiable_envelope: return "unsatisfiable_envelope";
    case Errc::assert_failed: return "assert_failed";
    case Errc::invalid_argument: return "invalid_argument";
  }
  return "unknown";
}

}  // namespace hearth
