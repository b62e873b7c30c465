#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hearth {

Json MetricsReport::to_json() const {
  return Json{{"tasks_total", tasks_total},
              {"tasks_completed", tasks_completed},
              {"conflicts_detected", conflicts_detected},
              {"conflicts_resolved", conflicts_resolved},
              {"stale_rejected", stale_rejected},
              {"invalid_lease_rejected", invalid_lease_rejected},
              {"false_rejections", false_rejections},
              {"events_produced", events_produced},
              {"events_persisted", events_persisted},
              {"lease_validation_p95_us", lease_validation_p95_us},
              {"per_hop_overhead_p95_ms", per_hop_overhead_p95_ms}};
}

MetricsReport MetricsReport::from_json(const Json& j) {
  MetricsReport r;
  r.tasks_total = j.value("tasks_total", int64_t{0});
  r.tasks_completed = j.value("tasks_completed", int64_t{0});
  r.conflicts_detected = j.value("conflicts_detected", int64_t{0});
  r.conflicts_resolved = j.value("conflicts_resolved", int64_t{0});
  r.stale_rejected = j.value("stale_rejected", int64_t{0});
  r.invalid_lease_rejected = j.value("invalid_lease_rejected", int64_t{0});
  r.false_rejections = j.value("false_rejections", int64_t{0});
  r.events_produced = j.value("events_produced", int64_t{0});
  r.events_persisted = j.value("events_persisted", int64_t{0});
  r.lease_validation_p95_us = j.value("lease_validation_p95_us", 0.0);
  r.per_hop_overhead_p95_ms = j.value("per_hop_overhead_p95_ms", 0.0);
  return r;
}

std::string MetricsReport::text() const {
  std::ostringstream os;
  os << "tasks completed            " << tasks_completed << "/" << tasks_total << "\n"
     << "conflicts detected/resolved " << conflicts_detected << "/" << conflicts_resolved << "\n"
     << "stale commands rejected     " << stale_rejected << "\n"
     << "invalid leases rejected     " << invalid_lease_rejected << "\n"
     << "false rejections            " << false_rejections << "\n"
     << "events persisted            " << events_persisted << "/" << events_produced << "\n"
     << "lease validation p95        " << lease_validation_p95_us << " us\n"
     << "per-hop overhead p95        " << per_hop_overhead_p95_ms << " ms\n";
  return os.str();
}

bool MetricsReport::counters_equal(const MetricsReport& o, std::string* diff) const {
  auto check = [&](const char* name, int64_t a, int64_t b) {
    if (a == b) return true;
    if (diff) *diff += std::string(name) + ": " + std::to_string(a) + " != " + std::to_string(b) + "; ";
    return false;
  };
  bool ok = true;
  ok &= check("tasks_total", tasks_total, o.tasks_total);
  ok &= check("tasks_completed", tasks_completed, o.tasks_completed);
  ok &= check("conflicts_detected", conflicts_detected, o.conflicts_detected);
  ok &= check("conflicts_resolved", conflicts_resolved, o.conflicts_resolved);
  ok &= check("stale_rejected", stale_rejected, o.stale_rejected);
  ok &= check("invalid_lease_rejected", invalid_lease_rejected, o.invalid_lease_rejected);
  ok &= check("false_rejections", false_rejections, o.false_rejections);
  ok &= check("events_produced", events_produced, o.events_produced);
  ok &= check("events_persisted", events_persisted, o.events_persisted);
  return ok;
}

double percentile(std::vector<double> samples, double p) {
  if (samples.empty()) return 0.0;
  std::sort(samples.begin(), samples.end());
  double idx = p / 100.0 * static_cast<double>(samples.size() - 1);
  size_t lo = static_cast<size_t>(std::floor(idx));
  size_t hi = static_cast<size_t>(std::ceil(idx));
  double frac = idx - static_cast<double>(lo);
  return samples[lo] * (1.0 - frac) + samples[hi] * frac;
}

}  // namespace hearth
