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
 * @file analysis.hpp
 * Estimators over coincidence counts. Every count is treated as an
 * independent Poisson variable and errors are propagated to first order.
 * The same estimators accept exact probabilities, in which case the
 * reported standard error is zero.
 */

#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "bdcz/experiment.hpp"

namespace bdcz {

struct CorrelationEstimate {
  double value = 0.0;
  double std_error = 0.0;
  double n_total = 0.0;
};

/// E = (n_pp + n_mm - n_pm - n_mp) / total. Throws std::invalid_argument on zero total.
CorrelationEstimate correlation(double n_pp, double n_pm, double n_mp, double n_mm);
CorrelationEstimate correlation(const CountsRow& row);
/// From exact outcome probabilities; std_error = 0.
CorrelationEstimate exact_correlation(const std::array<double, 4>& p);

struct CHSHResult {
  double s = 0.0;
  double std_error = 0.0;
  std::array<VerificationSetting, 4> settings{};
  std::array<CorrelationEstimate, 4> correlations{};
  /// Index of the negated term.
  int sign_pattern = 0;

  /// (S - 2) / std_error; infinite for exact inputs above the bound.
  double sigma() const;
};

/// Maximum over the four placements of a single minus sign of |sum +-E_i|.
CHSHResult chsh_s(std::span<const CorrelationEstimate, 4> e, std::span<const VerificationSetting, 4> settings);

struct VisibilityEstimate {
  double value = 0.0;
  double std_error = 0.0;
  /// Above 1/sqrt2, the CHSH threshold for Werner-type states.
  bool bell_capable = false;
};

/// V = (c_max - c_min) / (c_max + c_min).
VisibilityEstimate visibility(double c_max, double c_min);
/// Correlated (++, --) against anticorrelated (+-, -+) coincidences of one row.
VisibilityEstimate visibility(const CountsRow& row);

struct FidelityEstimate {
  double f = 0.0;
  double std_error = 0.0;
  double e_xx = 0.0, e_yy = 0.0, e_zz = 0.0;
};

/// F = (1 + E_xx - E_yy + E_zz) / 4 from correlations in the +/-, circular
/// and H/V bases.
FidelityEstimate fidelity_from_correlations(const CorrelationEstimate& xx, const CorrelationEstimate& yy,
                                            const CorrelationEstimate& zz);
/// Rows are matched to bases by setting: (45, 45), (circ, circ), (0, 0).
/// Throws std::invalid_argument naming a missing basis.
FidelityEstimate fidelity_from_settings(std::span<const CountsRow> rows);
FidelityEstimate fidelity_from_settings(std::span<const SettingProbabilities> exact);

/// Fidelity above which a Werner state violates CHSH: (1 + 3/sqrt2) / 4.
double werner_chsh_threshold();

}  // namespace bdcz
