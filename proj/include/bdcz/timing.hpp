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

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace bdcz {

inline constexpr double kSpeedOfLightMPerNs = 0.299792458;

/// One experimental window: MOT loading, then `cycles_per_window` cycles of
/// length cycle_us, each holding `writes_per_cycle` write slots spaced by
/// write_interval_us. Time zero is the start of the window.
struct TimingConfig {
  double mot_load_ms = 20.0;
  double window_ms = 5.0;
  int cycles_per_window = 250;
  double cycle_us = 16.0;
  int writes_per_cycle = 10;
  double write_interval_us = 1.0;
  double storage_time_us = 0.5;
  double fiber_length_m = 3.0;
  double fiber_index = 1.46;

  /// Throws std::invalid_argument naming the violated inequality.
  void validate() const;
  double fiber_delay_ns() const { return fiber_index * fiber_length_m / kSpeedOfLightMPerNs; }
  std::int64_t write_slots() const { return std::int64_t{cycles_per_window} * writes_per_cycle; }

  bool operator==(const TimingConfig&) const = default;
};

enum class EventKind { kWrite, kBsmWindow, kFeedbackStop, kRetrieve, kDetect };

const char* to_string(EventKind k);

struct Event {
  double time_ns = 0.0;
  EventKind kind = EventKind::kWrite;
  /// "I+II" for events at both sites, "BSM" for the station.
  std::string site;
  /// Global write-slot index the event belongs to.
  std::int64_t slot = 0;
  int cycle = 0;
};

struct EventLog {
  std::vector<Event> events;

  std::size_t count(EventKind k) const;
  bool is_time_ordered() const;
  /// No write of a cycle is scheduled after that cycle's feedback_stop, and
  /// every feedback_stop follows a bsm_window of the same slot.
  bool feedback_respected() const;
};

/// Decides whether the BSM of a given write slot heralds success.
using SuccessOracle = std::function<bool(std::int64_t slot)>;

/// Write slots, BSM windows one fiber delay later and, for successful slots,
/// feedback_stop at the BSM window, then retrieve and detect storage_time
/// after the write. Remaining writes of that cycle are suppressed.
/// Throws std::invalid_argument on infeasible timing.
EventLog schedule(const TimingConfig& tc, const SuccessOracle& success = {});

/// Write slots per MOT-load-plus-window period, in attempts per second.
double attempt_rate(const TimingConfig& tc);

}  // namespace bdcz
