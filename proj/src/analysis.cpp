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

#include "bdcz/analysis.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

namespace bdcz {
namespace {

/// (A - B) / (A + B) with Poisson errors on A and B.
std::pair<double, double> contrast(double a, double b) {
  if (!(a >= 0.0 && b >= 0.0)) throw std::invalid_argument("counts must be non-negative");
  const double n = a + b;
  if (!(n > 0.0)) throw std::invalid_argument("no coincidences: total count is zero");
  return {(a - b) / n, 2.0 * std::sqrt(a * b / (n * n * n))};
}

template <typename Row, typename Setting>
std::optional<std::size_t> find_setting(std::span<const Row> rows, Setting&& match) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (match(rows[i].setting)) return i;
  }
  return std::nullopt;
}

bool is_linear(const Analyzer& a, double deg) {
  return a.basis == AnalyzerBasis::kLinear && std::abs(a.theta_deg - deg) < 1e-9;
}

template <typename Row, typename ToCorrelation>
FidelityEstimate fidelity_rows(std::span<const Row> rows, ToCorrelation&& corr) {
  const auto xx = find_setting(rows, [](const VerificationSetting& s) {
    return is_linear(s.photon1, 45.0) && is_linear(s.photon4, 45.0);
  });
  const auto yy = find_setting(rows, [](const VerificationSetting& s) {
    return s.photon1.basis == AnalyzerBasis::kCircular && s.photon4.basis == AnalyzerBasis::kCircular;
  });
  const auto zz = find_setting(rows, [](const VerificationSetting& s) {
    return is_linear(s.photon1, 0.0) && is_linear(s.photon4, 0.0);
  });
  if (!xx) throw std::invalid_argument("fidelity: missing +/- basis setting (45, 45)");
  if (!yy) throw std::invalid_argument("fidelity: missing circular basis setting (circ, circ)");
  if (!zz) throw std::invalid_argument("fidelity: missing H/V basis setting (0, 0)");
  return fidelity_from_correlations(corr(rows[*xx]), corr(rows[*yy]), corr(rows[*zz]));
}

}  // namespace

CorrelationEstimate correlation(double n_pp, double n_pm, double n_mp, double n_mm) {
  const auto [v, se] = contrast(n_pp + n_mm, n_pm + n_mp);
  return {v, se, n_pp + n_pm + n_mp + n_mm};
}

CorrelationEstimate correlation(const CountsRow& row) {
  return correlation(static_cast<double>(row.n_pp), static_cast<double>(row.n_pm), static_cast<double>(row.n_mp),
                     static_cast<double>(row.n_mm));
}

CorrelationEstimate exact_correlation(const std::array<double, 4>& p) {
  auto e = correlation(p[0], p[1], p[2], p[3]);
  e.std_error = 0.0;
  return e;
}

double CHSHResult::sigma() const {
  if (std_error > 0.0) return (s - 2.0) / std_error;
  if (s > 2.0) return std::numeric_limits<double>::infinity();
  if (s < 2.0) return -std::numeric_limits<double>::infinity();
  return 0.0;
}

CHSHResult chsh_s(std::span<const CorrelationEstimate, 4> e, std::span<const VerificationSetting, 4> settings) {
  CHSHResult r;
  double var = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    r.settings[i] = settings[i];
    r.correlations[i] = e[i];
    var += e[i].std_error * e[i].std_error;
    total += e[i].value;
  }
  r.s = -1.0;
  for (int k = 0; k < 4; ++k) {
    const double s = std::abs(total - 2.0 * e[static_cast<std::size_t>(k)].value);
    if (s > r.s) {
      r.s = s;
      r.sign_pattern = k;
    }
  }
  r.std_error = std::sqrt(var);
  return r;
}

VisibilityEstimate visibility(double c_max, double c_min) {
  const auto [v, se] = contrast(c_max, c_min);
  return {v, se, v > std::numbers::sqrt2 / 2.0};
}

VisibilityEstimate visibility(const CountsRow& row) {
  return visibility(static_cast<double>(row.n_pp + row.n_mm), static_cast<double>(row.n_pm + row.n_mp));
}

FidelityEstimate fidelity_from_correlations(const CorrelationEstimate& xx, const CorrelationEstimate& yy,
                                            const CorrelationEstimate& zz) {
  FidelityEstimate f;
  f.e_xx = xx.value;
  f.e_yy = yy.value;
  f.e_zz = zz.value;
  f.f = (1.0 + f.e_xx - f.e_yy + f.e_zz) / 4.0;
  f.std_error = std::sqrt(xx.std_error * xx.std_error + yy.std_error * yy.std_error + zz.std_error * zz.std_error) / 4.0;
  return f;
}

FidelityEstimate fidelity_from_settings(std::span<const CountsRow> rows) {
  return fidelity_rows(rows, [](const CountsRow& r) { return correlation(r); });
}

FidelityEstimate fidelity_from_settings(std::span<const SettingProbabilities> exact) {
  return fidelity_rows(exact, [](const SettingProbabilities& r) { return exact_correlation(r.joint); });
}

double werner_chsh_threshold() { return (1.0 + 3.0 / std::numbers::sqrt2) / 4.0; }

}  // namespace bdcz
