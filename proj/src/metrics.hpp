#pragma once

#include <string>
#include <vector>

#include "common.hpp"
#include "wire.hpp"

namespace hearth {

struct MetricsReport {
  int64_t tasks_total = 0;
  int64_t tasks_completed = 0;
  int64_t conflicts_detected = 0;
  int64_t conflicts_resolved = 0;
  int64_t stale_rejected = 0;
  int64_t invalid_lease_rejected = 0;
  int64_t false_rejections = 0;
  int64_t events_produced = 0;
  int64_t events_persisted = 0;
  double lease_validation_p95_us = 0.0;
  double per_hop_overhead_p95_ms = 0.0;

  Json to_json() const;
  static MetricsReport from_json(const Json& j);
  std::string text() const;
  // Counter equality; latency fields are environment-dependent and skipped.
  bool counters_equal(const MetricsReport& other, std::string* diff = nullptr) const;
};

double percentile(std::vector<double> samples, double p);

}  // namespace hearth
