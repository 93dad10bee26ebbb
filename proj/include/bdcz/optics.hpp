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

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bdcz/qstate.hpp"

namespace bdcz {

using Rng = std::mt19937_64;

enum class AnalyzerBasis { kLinear, kCircular };

/// Polarization analyzer with a transmitted (+) and a reflected (-) port.
/// Linear: + transmits polarization at theta. Circular: + transmits (H + iV)/sqrt2.
struct Analyzer {
  AnalyzerBasis basis = AnalyzerBasis::kLinear;
  double theta_deg = 0.0;

  static Analyzer linear(double theta_deg) { return {AnalyzerBasis::kLinear, theta_deg}; }
  static Analyzer circular() { return {AnalyzerBasis::kCircular, 0.0}; }
  /// "22.5"-style angle in degrees, or "circ".
  static Analyzer parse(std::string_view text);

  /// Single-photon amplitudes <port|pol>; rows (+, -), columns (H, V).
  Eigen::Matrix2cd port_amplitudes() const;
  std::string label() const;

  bool operator==(const Analyzer&) const = default;
};

/// Threshold detector, optionally number resolving.
struct Detector {
  double eta = 1.0;
  double dark_prob = 0.0;
  bool number_resolving = false;

  void validate() const;
  /// 2 outcomes (none, click) or 3 (none, one count, several counts).
  int outcome_count() const { return number_resolving ? 3 : 2; }
  double outcome_probability(int outcome, int photons) const;

  bool operator==(const Detector&) const = default;
};

/// Station detector channels: PBS output arm a and b, each split at its analyzer.
enum BsmChannel : int { kAPlus = 0, kAMinus = 1, kBPlus = 2, kBMinus = 3 };

struct BSMStation {
  std::array<Analyzer, 2> analyzers{Analyzer::linear(45.0), Analyzer::linear(45.0)};
  std::array<Detector, 4> detectors{};
  /// Two-photon indistinguishability at the PBS, in [0, 1].
  double mode_overlap = 1.0;

  void validate() const;
  bool operator==(const BSMStation&) const = default;
};

struct ClickPattern {
  std::vector<bool> clicks;
  std::vector<int> counts;
  std::int64_t window_id = 0;
};

/// Multi-photon amplitudes of a passive linear-optical network.
/// `amplitudes(o, i)` = <out_o| U |in_i> for the input Fock basis in
/// mixed-radix order (first mode most significant) and every reachable
/// output occupation `out_configs[o]`.
struct FockTransfer {
  std::vector<std::vector<int>> out_configs;
  CMatrix amplitudes;
};

/// mode_map(j, i) = <out_j|in_i> for single photons; it must be an isometry.
FockTransfer fock_transfer(const CMatrix& mode_map, std::span<const int> in_cutoffs);

/// A^† diag(weight) A with weights evaluated on the output occupations.
template <typename Weight>
CMatrix detection_operator(const FockTransfer& t, Weight&& weight) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(t.out_configs.size()));
  for (std::size_t o = 0; o < t.out_configs.size(); ++o) w(static_cast<Eigen::Index>(o)) = weight(t.out_configs[o]);
  CMatrix e = t.amplitudes.adjoint() * w.asDiagonal() * t.amplitudes;
  return (e + e.adjoint()) / 2.0;
}

// ---------------------------------------------------------------------------
// Analyzers

/// Click / no-click elements of the transmitted port. On n photons in the
/// transmitted mode the click probability is 1 - (1 - eta)^n.
std::pair<LinearMap, LinearMap> analyzer_povm(const Analyzer& a, double eta, const ModeLabel& h,
                                              const ModeLabel& v);

/// Both ports instrumented. Index 0: '+' only, 1: '-' only, 2: anything else.
std::array<LinearMap, 3> analyzer_outcome_povms(const Analyzer& a, const Detector& plus_det,
                                                const Detector& minus_det, const ModeLabel& h,
                                                const ModeLabel& v);

// ---------------------------------------------------------------------------
// Bell-state measurement

/// Single-photon mode map (a+, a-, b+, b-) x (H2, V2, H3, V3). The PBS
/// transmits H and reflects V, so arm a collects H2 and V3, arm b H3 and V2.
CMatrix bsm_mode_map(const BSMStation& station);

/// Outcome tuple per station detector (see Detector::outcome_probability).
using BsmOutcome = std::array<int, 4>;

bool is_phi_plus_outcome(const BsmOutcome& outcome);

/// Probability of `outcome` given the photon number reaching each detector.
double outcome_probability(const BSMStation& station, const BsmOutcome& outcome, std::span<const int> photons);
double phi_plus_probability(const BSMStation& station, std::span<const int> photons);

std::vector<BsmOutcome> bsm_outcomes(const BSMStation& station);

/// One POVM element per entry of bsm_outcomes(); they sum to the identity.
/// `photon_modes` are (H2, V2, H3, V3).
std::vector<LinearMap> bsm_outcome_povms(const BSMStation& station, std::span<const ModeLabel, 4> photon_modes);

/// The heralding element: exactly (a+, b+) or exactly (a-, b-) registered.
LinearMap bsm_phi_plus_povm(const BSMStation& station, std::span<const ModeLabel, 4> photon_modes);

// ---------------------------------------------------------------------------
// Sampling and coincidence logic

/// Binomial thinning of each detector's photons, dark counts ORed in.
ClickPattern sample_clicks(std::span<const int> photons, std::span<const Detector> detectors, Rng& rng,
                           std::int64_t window_id = 0);

struct Channel {
  std::size_t pattern;
  std::size_t detector;
};

/// True iff every required channel clicked. Patterns must share a window.
/// An empty requirement is vacuously satisfied.
bool coincidence(std::span<const ClickPattern> patterns, std::span<const Channel> required);

}  // namespace bdcz
