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

#include "bdcz/calibration.hpp"

#include <cmath>

#include "bdcz/analysis.hpp"
#include "bdcz/errors.hpp"

namespace bdcz {
namespace {

double solve_lambda(const ExactPipeline& p, double target) {
  double lo = 0.0, hi = 1.0;
  const double v_hi = visibility_at_coherence(p, hi);
  if (target > v_hi) {
    throw ConfigError("calibration: visibility " + std::to_string(target) + " exceeds the noiseless-memory value " +
                      std::to_string(v_hi));
  }
  if (target < visibility_at_coherence(p, lo)) {
    throw ConfigError("calibration: visibility " + std::to_string(target) + " is below the fully dephased value");
  }
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (visibility_at_coherence(p, mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double visibility_at_coherence(const ExactPipeline& pipeline, double lambda) {
  MemoryChannel ch;
  ch.tau_us = 1.0;
  ch.v0 = std::max(lambda, 1e-300);
  const VerificationSetting s = visibility_setting();
  const auto r = pipeline.report(std::span<const VerificationSetting>(&s, 1), 0.0, ch);
  return exact_correlation(r.settings.front().joint).value;
}

MemoryCalibration calibrate_memory(const ExperimentConfig& cfg, VisibilityAnchor first, VisibilityAnchor second) {
  if (!(second.storage_time_us > first.storage_time_us)) {
    throw ConfigError("calibration: anchors must be ordered by storage time");
  }
  const ExactPipeline pipeline(cfg);
  MemoryCalibration c;
  c.lambda_first = solve_lambda(pipeline, first.visibility);
  c.lambda_second = solve_lambda(pipeline, second.visibility);
  if (!(c.lambda_second < c.lambda_first)) throw ConfigError("calibration: anchors do not describe a decay");
  const double log_ratio = std::log(c.lambda_first / c.lambda_second);
  c.channel.model = cfg.memory.model;
  const double t1 = first.storage_time_us, t2 = second.storage_time_us;
  auto fit_tau = [&](double t, double lambda) {
    const double l = -std::log(lambda);
    return cfg.memory.model == MemoryModel::kExponential ? t / l : t / std::sqrt(l);
  };
  auto decay = [&](double t) {
    const double x = t / c.channel.tau_us;
    return cfg.memory.model == MemoryModel::kExponential ? std::exp(-x) : std::exp(-x * x);
  };
  if (cfg.memory.model == MemoryModel::kExponential) {
    c.channel.tau_us = (t2 - t1) / log_ratio;
  } else {
    c.channel.tau_us = std::sqrt((t2 * t2 - t1 * t1) / log_ratio);
  }
  c.channel.v0 = c.lambda_first / decay(t1);
  if (c.channel.v0 > 1.0) {
    // Coherence cannot exceed 1: pin v0 = 1 and pass through the later anchor exactly.
    if (!(c.lambda_second < 1.0)) throw ConfigError("calibration: later anchor requires no memory decay");
    c.channel.v0 = 1.0;
    c.channel.tau_us = fit_tau(t2, c.lambda_second);
    c.v0_bounded = true;
  }
  c.visibility_first = visibility_at_coherence(pipeline, c.channel.v0 * decay(t1));
  return c;
}

}  // namespace bdcz
