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
 * @file source.hpp
 * One atomic-ensemble site: write process, anti-Stokes polarization
 * encoding and retrieval of the stored excitation into a Stokes photon.
 *
 * Mode names carry the site suffix: AS_L_I, AS_R_I, mem_L_I, mem_R_I, ...
 * After combination the anti-Stokes photon lives in AS_H_x (from R) and
 * AS_V_x (from L); after retrieval the Stokes photon lives in S_H_x (from
 * mem_R) and S_V_x (from mem_L).
 */

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bdcz/qstate.hpp"

namespace bdcz {

enum class SourceKind {
  /// Photon-number-correlated write state with thermal statistics per mode.
  kThermal,
  /// Exactly one excitation shared by L and R; the post-selected limit.
  kSingleExcitation,
};

struct EnsembleParams {
  double chi = 0.01;
  std::optional<double> chi_l;
  std::optional<double> chi_r;
  double phi1 = 0.0;
  double phi2 = 0.0;
  double eta_as = 1.0;
  double eta_ret = 1.0;
  double eta_s = 1.0;
  int truncation = 2;
  /// Interference visibility of the emitted atom-photon qubit pair.
  double source_visibility = 1.0;
  /// Standard deviation of the anti-Stokes path phase, radians.
  double phase_jitter = 0.0;
  SourceKind kind = SourceKind::kThermal;

  double chi_left() const { return chi_l.value_or(chi); }
  double chi_right() const { return chi_r.value_or(chi); }
  /// Throws std::invalid_argument naming the violated bound.
  void validate() const;

  bool operator==(const EnsembleParams&) const = default;
};

struct SiteModes {
  std::string as_l, as_r, as_h, as_v, mem_l, mem_r, s_h, s_v;
  static SiteModes of(const std::string& site);
};

struct AtomPhotonState {
  LabeledState state;
  std::string site;
};

/// 1 - (sum of retained thermal weights) for one mode.
double truncation_deficit(double chi, int truncation);

/// Normalized amplitudes c_0..c_T with c_n proportional to chi^(n/2).
std::vector<double> thermal_amplitudes(double chi, int truncation);

/// Register {AS_L, AS_R, mem_L, mem_R}.
AtomPhotonState write_joint_state(const EnsembleParams& params, const std::string& site);

/// Register {AS_H, AS_V, mem_L, mem_R}; AS_R -> AS_H, AS_L -> AS_V with exp(i phi1 n).
LabeledState combine_anti_stokes(const AtomPhotonState& aps, const EnsembleParams& params);

/// (|1_H 0_V>|0_L 1_R> + e^{i phi1}|0_H 1_V>|1_L 0_R>)/sqrt2 on the combined register.
LabeledState single_excitation_state(const EnsembleParams& params, const std::string& site);

/// The combined atom-photon state for the configured source kind.
LabeledState emitted_state(const EnsembleParams& params, const std::string& site);

/// Loss eta_as on both anti-Stokes components.
DensityOperator apply_anti_stokes_loss(const DensityOperator& rho, const EnsembleParams& params,
                                       const std::string& site);

/// Twirl that scales the coherence of the dual-rail qubit (first, second) by
/// `visibility`: Paulis on the one-excitation subspace, identity elsewhere.
LinearMap white_noise_channel(const ModeLabel& first, const ModeLabel& second, double visibility);

/// Source visibility and phase jitter, applied to the memory pair of `site`.
/// Both channels commute with the photon-number correlation of the write
/// state, so acting on the memory gives the same joint state as acting on
/// the anti-Stokes photon.
DensityOperator apply_source_noise(const DensityOperator& rho, const EnsembleParams& params,
                                   const std::string& site);

/// mem_R -> S_H, mem_L -> S_V with exp(i phi2 n) on S_V, then loss eta_ret.
DensityOperator retrieve(const DensityOperator& mem_state, const EnsembleParams& params, const std::string& site);

}  // namespace bdcz
