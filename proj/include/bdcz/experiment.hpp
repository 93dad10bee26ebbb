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

/**
 * @file experiment.hpp
 * Experiment description and the two engines that evaluate it.
 *
 * The exact engine propagates density operators through
 * write -> BSM conditioning -> storage -> retrieval -> analyzers and returns
 * exact outcome probabilities. The Monte Carlo engine samples the same
 * physical model photon by photon and returns coincidence counts.
 */

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bdcz/optics.hpp"
#include "bdcz/protocol.hpp"
#include "bdcz/source.hpp"
#include "bdcz/timing.hpp"

namespace bdcz {

enum class EngineKind { kExact, kMonteCarlo };

enum class McMode {
  /// Every trial is one heralded swap; counts compare with conditional probabilities.
  kHeralded,
  /// Every trial is one write attempt; most end without a herald.
  kRaw,
};

/// Dark counts and resolution of the four Stokes-side detectors. Their
/// efficiency is the site's eta_s.
struct VerificationDetectors {
  double dark_prob = 0.0;
  bool number_resolving = false;
  bool operator==(const VerificationDetectors&) const = default;
};

struct ExperimentConfig {
  std::string scenario = "default";
  EngineKind engine = EngineKind::kExact;
  std::int64_t n_trials = 1000000;
  std::uint64_t master_seed = 1;
  McMode mc_mode = McMode::kHeralded;
  int workers = 1;
  EnsembleParams site_I;
  EnsembleParams site_II;
  BSMStation station;
  VerificationDetectors verification;
  MemoryChannel memory;
  TimingConfig timing;
  std::vector<VerificationSetting> chsh_settings{
      {Analyzer::linear(0.0), Analyzer::linear(22.5)},
      {Analyzer::linear(0.0), Analyzer::linear(-22.5)},
      {Analyzer::linear(45.0), Analyzer::linear(22.5)},
      {Analyzer::linear(45.0), Analyzer::linear(-22.5)}};
  std::vector<double> scan_times_us{0.5, 1.0, 2.0, 3.0, 4.0, 4.5, 5.0, 6.0, 8.0};
  std::string output_dir = "out";

  /// Revalidates every module-level invariant; throws ConfigError.
  void validate() const;
  Detector stokes_detector(const EnsembleParams& site) const;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Settings used to estimate the fidelity: (+/-, +/-), (H/V, H/V), (circ, circ).
std::array<VerificationSetting, 3> fidelity_settings();
/// (45, 45): +/- analysis on both photons. Correlated outcomes (++, --) are
/// the aligned coincidences, (+-, -+) the anti-aligned ones.
VerificationSetting visibility_setting();

// ---------------------------------------------------------------------------
// Exact engine

struct SettingProbabilities {
  VerificationSetting setting;
  /// Joint probabilities of BSM success and (++, +-, -+, --).
  std::array<double, 4> joint{};
  double fourfold() const { return joint[0] + joint[1] + joint[2] + joint[3]; }
};

struct ConditionalStateReport {
  double storage_time_us = 0.0;
  double bsm_success_probability = 0.0;
  /// Normalized memory state after the herald, before storage.
  DensityOperator rho_mem;
  /// rho_mem restricted to one excitation per site, as qubits.
  DensityOperator rho_mem_qubits;
  /// Stokes photons 1 and 4 restricted to one photon per side, as qubits.
  DensityOperator rho_final;
  double fidelity_mem = 0.0;
  double fidelity_final = 0.0;
  std::vector<SettingProbabilities> settings;
};

/// Holds the heralded memory state so storage times and settings can be
/// evaluated without repeating the swap.
class ExactPipeline {
 public:
  explicit ExactPipeline(const ExperimentConfig& cfg);

  const SwapResult& swap() const { return swap_; }
  ConditionalStateReport report(std::span<const VerificationSetting> settings, double storage_time_us) const;
  /// Same, with a different memory channel.
  ConditionalStateReport report(std::span<const VerificationSetting> settings, double storage_time_us,
                                const MemoryChannel& memory) const;

 private:
  ExperimentConfig cfg_;
  SwapResult swap_;
};

/// One evaluation at the configured storage time. Throws NoEventError on a
/// zero-probability herald.
ConditionalStateReport run_exact(const ExperimentConfig& cfg, std::span<const VerificationSetting> settings);

// ---------------------------------------------------------------------------
// Monte Carlo engine

struct CountsRow {
  VerificationSetting setting;
  std::int64_t n_pp = 0, n_pm = 0, n_mp = 0, n_mm = 0;
  std::int64_t attempts = 0;
  /// Trials with a BSM herald (equals attempts in heralded mode).
  std::int64_t heralds = 0;

  std::int64_t fourfold() const { return n_pp + n_pm + n_mp + n_mm; }
  bool operator==(const CountsRow&) const = default;
};

struct CountsTable {
  std::vector<CountsRow> rows;
  std::uint64_t seed = 0;
  McMode mode = McMode::kHeralded;
  bool operator==(const CountsTable&) const = default;
};

/// Outcome of one simulated trial, with its node phase trace.
struct TrialResult {
  SwapRecord record;
  /// 0..3 for ++, +-, -+, --; -1 without a four-fold coincidence.
  int outcome = -1;
  std::vector<NodeStateMachine::Step> trace;
};

/// Precomputed sampling tables for one configuration. Immutable after
/// construction, so trials may run concurrently.
class MonteCarloModel {
 public:
  /// Throws ConfigError when the model cannot be sampled (unequal eta_as).
  MonteCarloModel(const ExperimentConfig& cfg, std::span<const VerificationSetting> settings);
  ~MonteCarloModel();
  MonteCarloModel(const MonteCarloModel&) = delete;
  MonteCarloModel& operator=(const MonteCarloModel&) = delete;

  /// Deterministic in (master_seed, setting_index, trial_index).
  TrialResult trial(std::size_t setting_index, std::uint64_t trial_index, std::uint64_t master_seed,
                    double storage_time_us) const;

  /// Heralding probability per write attempt under the sampled model.
  double herald_probability() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Counts for every setting; per-trial streams make the result independent
/// of the worker count.
CountsTable run_monte_carlo(const ExperimentConfig& cfg, std::span<const VerificationSetting> settings,
                            std::int64_t n_trials, std::uint64_t master_seed, int workers = 1);

/// Per-trial generator seed.
std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t setting_index, std::uint64_t trial_index);

}  // namespace bdcz
