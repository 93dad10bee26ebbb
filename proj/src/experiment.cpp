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

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "bdcz/errors.hpp"
#include "bdcz/experiment.hpp"

namespace bdcz {
namespace {

template <typename F>
void rethrow_as_config(const std::string& section, F&& f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(section + ": " + e.what());
  }
}

LabeledState phi_plus(const Register& reg) {
  CVector v = CVector::Zero(4);
  v(0) = v(3) = std::numbers::sqrt2 / 2;
  return LabeledState(reg, std::move(v));
}

}  // namespace

void ExperimentConfig::validate() const {
  if (scenario.empty()) throw ConfigError("scenario: name must not be empty");
  if (n_trials < 1) throw ConfigError("n_trials: must be >= 1");
  if (workers < 1) throw ConfigError("workers: must be >= 1");
  rethrow_as_config("sites.I", [&] { site_I.validate(); });
  rethrow_as_config("sites.II", [&] { site_II.validate(); });
  rethrow_as_config("station", [&] { station.validate(); });
  rethrow_as_config("memory", [&] { memory.validate(); });
  rethrow_as_config("timing", [&] { timing.validate(); });
  rethrow_as_config("verification", [&] {
    stokes_detector(site_I).validate();
    stokes_detector(site_II).validate();
  });
  if (chsh_settings.size() != 4) throw ConfigError("analysis.chsh_settings: exactly four setting pairs required");
  if (scan_times_us.empty()) throw ConfigError("analysis.scan_times_us: at least one storage time required");
  for (double t : scan_times_us) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw ConfigError("analysis.scan_times_us: times must be finite and >= 0");
  }
  if (output_dir.empty()) throw ConfigError("output.dir: must not be empty");
}

Detector ExperimentConfig::stokes_detector(const EnsembleParams& site) const {
  return {site.eta_s, verification.dark_prob, verification.number_resolving};
}

std::array<VerificationSetting, 3> fidelity_settings() {
  return {VerificationSetting{Analyzer::linear(45.0), Analyzer::linear(45.0)},
          VerificationSetting{Analyzer::linear(0.0), Analyzer::linear(0.0)},
          VerificationSetting{Analyzer::circular(), Analyzer::circular()}};
}

VerificationSetting visibility_setting() { return {Analyzer::linear(45.0), Analyzer::linear(45.0)}; }

ExactPipeline::ExactPipeline(const ExperimentConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  swap_ = entanglement_swap_exact(cfg_.site_I, cfg_.site_II, cfg_.station);
}

ConditionalStateReport ExactPipeline::report(std::span<const VerificationSetting> settings,
                                             double storage_time_us) const {
  return report(settings, storage_time_us, cfg_.memory);
}

ConditionalStateReport ExactPipeline::report(std::span<const VerificationSetting> settings, double storage_time_us,
                                             const MemoryChannel& memory) const {
  ConditionalStateReport r;
  r.storage_time_us = storage_time_us;
  r.bsm_success_probability = swap_.success_probability;
  r.rho_mem = swap_.rho_mem;
  r.rho_mem_qubits = memory_qubits(swap_.rho_mem);
  r.fidelity_mem = fidelity_pure(r.rho_mem_qubits, phi_plus(r.rho_mem_qubits.reg()));
  const auto stokes = stokes_state(swap_.conditional, cfg_.site_I, cfg_.site_II, memory, storage_time_us);
  r.rho_final = photon_qubits(stokes);
  r.fidelity_final = fidelity_pure(r.rho_final, phi_plus(r.rho_final.reg()));
  const Detector d1 = cfg_.stokes_detector(cfg_.site_I);
  const Detector d4 = cfg_.stokes_detector(cfg_.site_II);
  for (const auto& s : settings) {
    r.settings.push_back({s, verification_probabilities(stokes, s, d1, d4)});
  }
  return r;
}

ConditionalStateReport run_exact(const ExperimentConfig& cfg, std::span<const VerificationSetting> settings) {
  return ExactPipeline(cfg).report(settings, cfg.timing.storage_time_us);
}

}  // namespace bdcz
