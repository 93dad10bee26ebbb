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
 * @file protocol.hpp
 * Node-level swap protocol: heralded entanglement swapping onto the two
 * memories, storage with dephasing, retrieval and four-fold verification.
 *
 * Site I is the left site (photons 1, 2), site II the right site (3, 4).
 * Noise on the anti-Stokes side (source visibility, loss) is applied to the
 * heralding effect in the Heisenberg picture, so the joint two-site state
 * never has to be held as a density matrix.
 */

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bdcz/optics.hpp"
#include "bdcz/source.hpp"

namespace bdcz {

inline const std::string kSiteI = "I";
inline const std::string kSiteII = "II";

// ---------------------------------------------------------------------------
// Node state machine

enum class NodePhase { kIdle, kWriting, kAwaitBsm, kStored, kRetrieved, kVerified };

const char* to_string(NodePhase p);
bool is_legal_transition(NodePhase from, NodePhase to);

class NodeStateMachine {
 public:
  struct Step {
    NodePhase phase;
    /// Storage time so far; only meaningful in kStored and later.
    double elapsed_us;
  };

  NodePhase phase() const { return trace_.back().phase; }
  /// Throws std::logic_error on an illegal transition.
  void advance(NodePhase next, double elapsed_us = 0.0);
  const std::vector<Step>& trace() const { return trace_; }

 private:
  std::vector<Step> trace_{{NodePhase::kIdle, 0.0}};
};

/// True iff consecutive phases of `trace` are legal transitions and it starts Idle.
bool is_legal_trace(const std::vector<NodeStateMachine::Step>& trace);

// ---------------------------------------------------------------------------
// Memory

enum class MemoryModel { kExponential, kGaussian };

struct MemoryChannel {
  MemoryModel model = MemoryModel::kExponential;
  double tau_us = 1e9;
  double v0 = 1.0;

  void validate() const;
  /// Coherence factor of one site's dual-rail qubit after `dt_us`.
  double attenuation(double dt_us) const;

  bool operator==(const MemoryChannel&) const = default;
};

/// Dephasing between mem_L_x and mem_R_x for every site x present in the
/// register; the single-excitation coherence of each site is scaled by
/// attenuation(dt). Populations are unchanged.
DensityOperator decohere_memory(const DensityOperator& rho, double dt_us, const MemoryChannel& ch);

struct SwapRecord {
  std::uint64_t trial_id = 0;
  bool bsm_success = false;
  bool double_excitation = false;
  double storage_time_us = 0.0;
  bool fourfold = false;
};

// ---------------------------------------------------------------------------
// Swapping

/// Heralding effect on (AS_H_I, AS_V_I, AS_H_II, AS_V_II) with anti-Stokes
/// loss and source visibility of each site pulled back onto it.
LinearMap heralding_effect(const BSMStation& station, const EnsembleParams& site_I, const EnsembleParams& site_II);

struct SwapResult {
  double success_probability = 0.0;
  /// Over (mem_L_I, mem_R_I, mem_L_II, mem_R_II); trace = success_probability.
  DensityOperator conditional;
  DensityOperator rho_mem;
};

/// Conditions the joint emitted state on `effect`. Throws NoEventError when
/// the success probability is below 1e-15.
SwapResult entanglement_swap_exact(const LabeledState& site_I, const LabeledState& site_II, const LinearMap& effect);

/// Full swap from source parameters, including phase jitter.
SwapResult entanglement_swap_exact(const EnsembleParams& site_I, const EnsembleParams& site_II,
                                   const BSMStation& station);

/// P rho P with P projecting onto k_I excitations in site I's memory pair and
/// k_II in site II's.
DensityOperator excitation_sector(const DensityOperator& rho, int k_I, int k_II);

/// Memory pair as two qubits: |0> = excitation in mem_R, |1> = in mem_L.
/// Normalized within the one-excitation-per-site subspace.
DensityOperator memory_qubits(const DensityOperator& rho_mem);

/// Stokes photons as two polarization qubits (H = |0>), normalized within
/// the one-photon-per-side subspace.
DensityOperator photon_qubits(const DensityOperator& stokes);

// ---------------------------------------------------------------------------
// Storage, retrieval and verification

/// Dephasing for `dt_us`, then retrieval at both sites.
DensityOperator stokes_state(const DensityOperator& rho_mem, const EnsembleParams& site_I,
                             const EnsembleParams& site_II, const MemoryChannel& ch, double dt_us);

struct VerificationSetting {
  Analyzer photon1;
  Analyzer photon4;
  bool operator==(const VerificationSetting&) const = default;
};

/// Joint probabilities of (++, +-, -+, --) for photons 1 and 4. Each
/// analyzer port has its own detector; '+' means only the transmitted port
/// clicked, '-' only the reflected one.
std::array<double, 4> verification_probabilities(const DensityOperator& stokes, const VerificationSetting& setting,
                                                 const Detector& site_I_detector, const Detector& site_II_detector);

// ---------------------------------------------------------------------------
// Derived node quantities

struct FalseEventReport {
  double bsm_success_probability = 0.0;
  /// Share of the BSM success probability outside the (1, 1) excitation sector.
  double bsm_false_fraction = 0.0;
  double fourfold_probability = 0.0;
  /// Same share among four-fold coincidences.
  double fourfold_false_fraction = 0.0;
};

/// Sector bookkeeping of the exact pipeline. Verification uses analyzers at
/// 0 degrees and the given detectors; dephasing and retrieval follow the
/// parameters.
FalseEventReport false_event_analysis(const EnsembleParams& site_I, const EnsembleParams& site_II,
                                      const BSMStation& station, const Detector& site_I_detector,
                                      const Detector& site_II_detector);

/// Thermal sources at truncation 2 with ideal hardware; BSM false fraction.
double false_event_fraction(double chi_I, double chi_II);
/// As above, after ideal four-fold conditioning.
double false_event_fraction_fourfold(double chi_I, double chi_II);

struct PrecisionEstimate {
  /// v_aa / (v_ap_I v_ap_II), clamped to [0, 1].
  double value = 0.0;
  double unclamped = 0.0;
  /// v_aa exceeds v_ap_I v_ap_II by more than the tolerance.
  bool model_violation = false;
};

PrecisionEstimate estimate_local_precision(double v_ap_I, double v_ap_II, double v_aa, double tolerance = 0.0);

}  // namespace bdcz
