#pragma once

#include "common.hpp"

namespace hearth {

enum class FreshnessMode { device_scoped, strict };

struct KernelConfig {
  Millis heartbeat_interval = 60000;  // two missed intervals mark a manager unresponsive
  Millis lease_ttl = 30000;
  Millis backoff_base = 2000;
  int backoff_factor = 2;
  Millis backoff_cap = 60000;
  int max_attempts = 5;
  FreshnessMode freshness_mode = FreshnessMode::device_scoped;
  Millis librarian_flush = 250;
  Millis ground_cache = 1000;   // manager snapshot reuse window
  Millis sweep_interval = 5000;  // expired-lease sweep
  Millis snapshot_retry = 500;   // manager re-asks an unreachable librarian
};

}  // namespace hearth
