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

#include "bdcz/experiment.hpp"

namespace bdcz {

struct VisibilityAnchor {
  double storage_time_us;
  double visibility;
};

struct MemoryCalibration {
  MemoryChannel channel;
  /// Per-site coherence factor that reproduces each anchor.
  double lambda_first = 0.0;
  double lambda_second = 0.0;
  /// True when the two-anchor fit needed v0 > 1 and v0 was pinned to 1.
  bool v0_bounded = false;
  /// Visibility the fitted channel gives at the first anchor.
  double visibility_first = 0.0;
};

/// +/- visibility of photons 1 and 4 from the exact engine when each site's
/// memory coherence is scaled by `lambda` (no further storage decay).
double visibility_at_coherence(const ExactPipeline& pipeline, double lambda);

/// Fits (v0, tau) of cfg.memory.model so the exact +/- visibility passes
/// through both anchors. If that needs v0 > 1, v0 is pinned to 1 and tau
/// fitted to the second anchor alone. Throws ConfigError if an anchor is unreachable.
MemoryCalibration calibrate_memory(const ExperimentConfig& cfg, VisibilityAnchor first, VisibilityAnchor second);

}  // namespace bdcz
