// Copyright 2026 The bdcz-node Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bdcz/timing.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace bdcz {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("infeasible timing: " + what);
}

std::string num(double v) {
  std::string s = std::to_string(v);
  s.erase(s.find_last_not_of('0') + 1);
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

}  // namespace

void TimingConfig::validate() const {
  require(mot_load_ms >= 0.0, "mot_load_ms >= 0");
  require(window_ms > 0.0, "window_ms > 0");
  require(cycles_per_window >= 0, "cycles_per_window >= 0");
  require(writes_per_cycle >= 0, "writes_per_cycle >= 0");
  require(cycle_us > 0.0, "cycle_us > 0");
  require(write_interval_us > 0.0, "write_interval_us > 0");
  require(storage_time_us >= 0.0, "storage_time_us >= 0");
  require(fiber_length_m >= 0.0, "fiber_length_m >= 0");
  require(fiber_index >= 1.0, "fiber_index >= 1");
  require(writes_per_cycle * write_interval_us <= cycle_us + 1e-9,
          "N * write_interval_us <= cycle_us (" + std::to_string(writes_per_cycle) + " * " + num(write_interval_us) +
              " > " + num(cycle_us) + ")");
  require(cycles_per_window * cycle_us <= window_ms * 1000.0 + 1e-9,
          "cycles_per_window * cycle_us <= window_ms * 1000 (" + std::to_string(cycles_per_window) + " * " +
              num(cycle_us) + " > " + num(window_ms * 1000.0) + ")");
}

const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::kWrite: return "write";
    case EventKind::kBsmWindow: return "bsm_window";
    case EventKind::kFeedbackStop: return "feedback_stop";
    case EventKind::kRetrieve: return "retrieve";
    case EventKind::kDetect: return "detect";
  }
  return "?";
}

std::size_t EventLog::count(EventKind k) const {
  return static_cast<std::size_t>(std::count_if(events.begin(), events.end(), [&](const Event& e) { return e.kind == k; }));
}

bool EventLog::is_time_ordered() const {
  return std::is_sorted(events.begin(), events.end(),
                        [](const Event& a, const Event& b) { return a.time_ns < b.time_ns; });
}

bool EventLog::feedback_respected() const {
  std::map<int, double> stop;
  std::map<std::int64_t, bool> bsm_seen;
  for (const auto& e : events) {
    if (e.kind == EventKind::kBsmWindow) bsm_seen[e.slot] = true;
    if (e.kind == EventKind::kFeedbackStop) {
      if (!bsm_seen.count(e.slot)) return false;
      stop.emplace(e.cycle, e.time_ns);
    }
  }
  for (const auto& e : events) {
    if (e.kind != EventKind::kWrite) continue;
    const auto it = stop.find(e.cycle);
    if (it != stop.end() && e.time_ns > it->second) return false;
  }
  return true;
}

EventLog schedule(const TimingConfig& tc, const SuccessOracle& success) {
  tc.validate();
  const double delay = tc.fiber_delay_ns();
  require(tc.storage_time_us * 1000.0 >= delay,
          "storage_time_us * 1000 >= fiber delay (" + num(tc.storage_time_us * 1000.0) + " ns < " + num(delay) + " ns)");
  EventLog log;
  log.events.reserve(static_cast<std::size_t>(tc.write_slots()) * 2);
  for (int c = 0; c < tc.cycles_per_window; ++c) {
    const double start = c * tc.cycle_us * 1000.0;
    double stop_at = INFINITY;
    for (int k = 0; k < tc.writes_per_cycle; ++k) {
      const double t = start + k * tc.write_interval_us * 1000.0;
      if (t > stop_at) break;
      const std::int64_t slot = std::int64_t{c} * tc.writes_per_cycle + k;
      log.events.push_back({t, EventKind::kWrite, "I+II", slot, c});
      log.events.push_back({t + delay, EventKind::kBsmWindow, "BSM", slot, c});
      if (std::isinf(stop_at) && success && success(slot)) {
        stop_at = t + delay;
        const double retrieve_at = t + tc.storage_time_us * 1000.0;
        log.events.push_back({stop_at, EventKind::kFeedbackStop, "BSM", slot, c});
        log.events.push_back({retrieve_at, EventKind::kRetrieve, "I+II", slot, c});
        log.events.push_back({retrieve_at, EventKind::kDetect, "I+II", slot, c});
      }
    }
  }
  std::stable_sort(log.events.begin(), log.events.end(),
                   [](const Event& a, const Event& b) { return a.time_ns < b.time_ns; });
  return log;
}

double attempt_rate(const TimingConfig& tc) {
  tc.validate();
  const double period_s = (tc.mot_load_ms + tc.window_ms) * 1e-3;
  return static_cast<double>(tc.write_slots()) / period_s;
}

}  // namespace bdcz
