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

#include "bdcz/optics.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <numbers>

namespace bdcz {

namespace {

double factorial(int n) { return std::tgamma(n + 1.0); }

std::vector<int> radix_digits(Eigen::Index index, std::span<const int> cutoffs) {
  std::vector<int> digits(cutoffs.size());
  for (std::size_t k = cutoffs.size(); k-- > 0;) {
    digits[k] = static_cast<int>(index % (cutoffs[k] + 1));
    index /= cutoffs[k] + 1;
  }
  return digits;
}

std::vector<std::string> names_of(std::span<const ModeLabel> modes) {
  std::vector<std::string> out;
  for (const auto& m : modes) out.push_back(m.name);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

Analyzer Analyzer::parse(std::string_view text) {
  if (text == "circ" || text == "circular") return circular();
  double deg = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, deg);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument("analyzer setting '" + std::string(text) + "' is neither an angle nor 'circ'");
  }
  return linear(deg);
}

Eigen::Matrix2cd Analyzer::port_amplitudes() const {
  Eigen::Matrix2cd p;
  if (basis == AnalyzerBasis::kCircular) {
    const double s = std::numbers::sqrt2 / 2.0;
    p << Complex(s, 0), Complex(0, -s), Complex(s, 0), Complex(0, s);
  } else {
    const double th = theta_deg * std::numbers::pi / 180.0;
    p << std::cos(th), std::sin(th), -std::sin(th), std::cos(th);
  }
  return p;
}

std::string Analyzer::label() const {
  if (basis == AnalyzerBasis::kCircular) return "circ";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), theta_deg);
  return std::string(buf, ptr);
}

void Detector::validate() const {
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("detector efficiency must lie in [0, 1]");
  if (!(dark_prob >= 0.0 && dark_prob < 1.0)) {
    throw std::invalid_argument("dark-count probability must lie in [0, 1)");
  }
}

double Detector::outcome_probability(int outcome, int photons) const {
  const double miss = std::pow(1.0 - eta, photons);
  const double none = (1.0 - dark_prob) * miss;
  if (outcome == 0) return none;
  if (!number_resolving) return outcome == 1 ? 1.0 - none : 0.0;
  const double single_photon = photons == 0 ? 0.0 : photons * eta * std::pow(1.0 - eta, photons - 1);
  const double one = (1.0 - dark_prob) * single_photon + dark_prob * miss;
  if (outcome == 1) return one;
  return std::max(0.0, 1.0 - none - one);
}

void BSMStation::validate() const {
  for (const auto& d : detectors) d.validate();
  if (!(mode_overlap >= 0.0 && mode_overlap <= 1.0)) {
    throw std::invalid_argument("mode_overlap must lie in [0, 1]");
  }
}

// ---------------------------------------------------------------------------

FockTransfer fock_transfer(const CMatrix& mode_map, std::span<const int> in_cutoffs) {
  const Eigen::Index n_in = mode_map.cols();
  const Eigen::Index n_out = mode_map.rows();
  if (static_cast<std::size_t>(n_in) != in_cutoffs.size()) {
    throw std::invalid_argument("fock_transfer: one cutoff per input mode required");
  }
  const CMatrix gram = mode_map.adjoint() * mode_map;
  if (detail::max_abs(CMatrix(gram - CMatrix::Identity(n_in, n_in))) > kOperatorTolerance) {
    throw std::invalid_argument("fock_transfer: mode map is not an isometry");
  }

  Eigen::Index in_dim = 1;
  for (int c : in_cutoffs) in_dim *= c + 1;

  std::map<std::vector<int>, std::size_t> out_index;
  std::vector<std::vector<std::pair<std::size_t, Complex>>> columns(static_cast<std::size_t>(in_dim));

  for (Eigen::Index i = 0; i < in_dim; ++i) {
    const auto n = radix_digits(i, in_cutoffs);
    // Expand prod_i (a_i^dagger)^{n_i} with a_i^dagger = sum_j U(j,i) b_j^dagger.
    std::map<std::vector<int>, Complex> poly{{std::vector<int>(static_cast<std::size_t>(n_out), 0), Complex(1)}};
    double norm_in = 1.0;
    for (Eigen::Index mode = 0; mode < n_in; ++mode) {
      norm_in *= factorial(n[static_cast<std::size_t>(mode)]);
      for (int rep = 0; rep < n[static_cast<std::size_t>(mode)]; ++rep) {
        std::map<std::vector<int>, Complex> next;
        for (const auto& [mono, c] : poly) {
          for (Eigen::Index j = 0; j < n_out; ++j) {
            const Complex u = mode_map(j, mode);
            if (u == Complex(0)) continue;
            auto m = mono;
            ++m[static_cast<std::size_t>(j)];
            next[m] += c * u;
          }
        }
        poly = std::move(next);
      }
    }
    for (const auto& [mono, c] : poly) {
      double norm_out = 1.0;
      for (int k : mono) norm_out *= factorial(k);
      const Complex amp = c * std::sqrt(norm_out / norm_in);
      if (std::abs(amp) < 1e-15) continue;
      auto [it, inserted] = out_index.try_emplace(mono, out_index.size());
      columns[static_cast<std::size_t>(i)].emplace_back(it->second, amp);
    }
  }

  FockTransfer t;
  t.out_configs.resize(out_index.size());
  for (const auto& [mono, idx] : out_index) t.out_configs[idx] = mono;
  t.amplitudes = CMatrix::Zero(static_cast<Eigen::Index>(out_index.size()), in_dim);
  for (Eigen::Index i = 0; i < in_dim; ++i) {
    for (const auto& [o, amp] : columns[static_cast<std::size_t>(i)]) t.amplitudes(static_cast<Eigen::Index>(o), i) = amp;
  }
  return t;
}

// ---------------------------------------------------------------------------

namespace {

FockTransfer analyzer_transfer(const Analyzer& a, const ModeLabel& h, const ModeLabel& v) {
  const CMatrix map = a.port_amplitudes();
  const std::array<int, 2> cut{h.dim() - 1, v.dim() - 1};
  return fock_transfer(map, cut);
}

}  // namespace

std::pair<LinearMap, LinearMap> analyzer_povm(const Analyzer& a, double eta, const ModeLabel& h,
                                              const ModeLabel& v) {
  Detector det{eta, 0.0, false};
  det.validate();
  const auto t = analyzer_transfer(a, h, v);
  CMatrix click = detection_operator(t, [&](const std::vector<int>& occ) { return det.outcome_probability(1, occ[0]); });
  CMatrix none = detection_operator(t, [&](const std::vector<int>& occ) { return det.outcome_probability(0, occ[0]); });
  std::vector<std::string> on{h.name, v.name};
  return {LinearMap::povm_element(std::move(click), on), LinearMap::povm_element(std::move(none), on)};
}

std::array<LinearMap, 3> analyzer_outcome_povms(const Analyzer& a, const Detector& plus_det,
                                                const Detector& minus_det, const ModeLabel& h,
                                                const ModeLabel& v) {
  plus_det.validate();
  minus_det.validate();
  const auto t = analyzer_transfer(a, h, v);
  auto p_of = [&](int out_plus, int out_minus) {
    return detection_operator(t, [&](const std::vector<int>& occ) {
      return plus_det.outcome_probability(out_plus, occ[0]) * minus_det.outcome_probability(out_minus, occ[1]);
    });
  };
  const CMatrix plus = p_of(1, 0);
  const CMatrix minus = p_of(0, 1);
  const Eigen::Index d = plus.rows();
  CMatrix rest = CMatrix::Identity(d, d) - plus - minus;
  rest = (rest + rest.adjoint()) / 2.0;
  std::vector<std::string> on{h.name, v.name};
  return {LinearMap::povm_element(plus, on), LinearMap::povm_element(minus, on),
          LinearMap::povm_element(std::move(rest), on)};
}

// ---------------------------------------------------------------------------

CMatrix bsm_mode_map(const BSMStation& station) {
  const Eigen::Matrix2cd pa = station.analyzers[0].port_amplitudes();
  const Eigen::Matrix2cd pb = station.analyzers[1].port_amplitudes();
  CMatrix u = CMatrix::Zero(4, 4);
  // columns: H2, V2, H3, V3
  for (int port = 0; port < 2; ++port) {
    u(kAPlus + port, 0) = pa(port, 0);  // H2 transmitted into arm a
    u(kAPlus + port, 3) = pa(port, 1);  // V3 reflected into arm a
    u(kBPlus + port, 2) = pb(port, 0);  // H3 transmitted into arm b
    u(kBPlus + port, 1) = pb(port, 1);  // V2 reflected into arm b
  }
  return u;
}

bool is_phi_plus_outcome(const BsmOutcome& o) {
  return (o[kAPlus] == 1 && o[kAMinus] == 0 && o[kBPlus] == 1 && o[kBMinus] == 0) ||
         (o[kAPlus] == 0 && o[kAMinus] == 1 && o[kBPlus] == 0 && o[kBMinus] == 1);
}

double outcome_probability(const BSMStation& station, const BsmOutcome& outcome, std::span<const int> photons) {
  double p = 1.0;
  for (int d = 0; d < 4; ++d) p *= station.detectors[static_cast<std::size_t>(d)].outcome_probability(outcome[static_cast<std::size_t>(d)], photons[static_cast<std::size_t>(d)]);
  return p;
}

double phi_plus_probability(const BSMStation& station, std::span<const int> photons) {
  return outcome_probability(station, {1, 0, 1, 0}, photons) + outcome_probability(station, {0, 1, 0, 1}, photons);
}

std::vector<BsmOutcome> bsm_outcomes(const BSMStation& station) {
  std::vector<BsmOutcome> out;
  BsmOutcome o{0, 0, 0, 0};
  while (true) {
    out.push_back(o);
    int d = 3;
    for (; d >= 0; --d) {
      if (++o[static_cast<std::size_t>(d)] < station.detectors[static_cast<std::size_t>(d)].outcome_count()) break;
      o[static_cast<std::size_t>(d)] = 0;
    }
    if (d < 0) break;
  }
  return out;
}

namespace {

/// Per-site transfers for the distinguishable-photon part of the station.
struct SplitTransfer {
  FockTransfer site2;
  FockTransfer site3;
};

SplitTransfer split_transfer(const BSMStation& station, std::span<const ModeLabel, 4> modes) {
  const CMatrix u = bsm_mode_map(station);
  const std::array<int, 2> c2{modes[0].dim() - 1, modes[1].dim() - 1};
  const std::array<int, 2> c3{modes[2].dim() - 1, modes[3].dim() - 1};
  return {fock_transfer(u.leftCols(2), c2), fock_transfer(u.rightCols(2), c3)};
}

template <typename Weight>
CMatrix station_operator(const BSMStation& station, std::span<const ModeLabel, 4> modes, Weight&& weight) {
  const std::array<int, 4> cut{modes[0].dim() - 1, modes[1].dim() - 1, modes[2].dim() - 1, modes[3].dim() - 1};
  CMatrix e = detection_operator(fock_transfer(bsm_mode_map(station), cut), weight);
  if (station.mode_overlap < 1.0) {
    // Distinguishable photons: each site's photons reach the detectors without interfering.
    const auto st = split_transfer(station, modes);
    const CMatrix& a2 = st.site2.amplitudes;
    const CMatrix& a3 = st.site3.amplitudes;
    const Eigen::Index d2 = a2.cols();
    const Eigen::Index d3 = a3.cols();
    CMatrix dist = CMatrix::Zero(d2 * d3, d2 * d3);
    std::vector<int> photons(4);
    for (std::size_t o2 = 0; o2 < st.site2.out_configs.size(); ++o2) {
      const CMatrix r2 = a2.row(static_cast<Eigen::Index>(o2)).adjoint() * a2.row(static_cast<Eigen::Index>(o2));
      for (std::size_t o3 = 0; o3 < st.site3.out_configs.size(); ++o3) {
        for (int k = 0; k < 4; ++k) {
          photons[static_cast<std::size_t>(k)] = st.site2.out_configs[o2][static_cast<std::size_t>(k)] + st.site3.out_configs[o3][static_cast<std::size_t>(k)];
        }
        const double w = weight(photons);
        if (w == 0.0) continue;
        const CMatrix r3 = a3.row(static_cast<Eigen::Index>(o3)).adjoint() * a3.row(static_cast<Eigen::Index>(o3));
        dist += w * Eigen::kroneckerProduct(r2, r3).eval();
      }
    }
    e = station.mode_overlap * e + (1.0 - station.mode_overlap) * dist;
  }
  return (e + e.adjoint()) / 2.0;
}

}  // namespace

std::vector<LinearMap> bsm_outcome_povms(const BSMStation& station, std::span<const ModeLabel, 4> modes) {
  station.validate();
  std::vector<LinearMap> out;
  const auto on = names_of(modes);
  for (const auto& o : bsm_outcomes(station)) {
    out.push_back(LinearMap::povm_element(
        station_operator(station, modes, [&](std::span<const int> n) { return outcome_probability(station, o, n); }),
        on));
  }
  return out;
}

LinearMap bsm_phi_plus_povm(const BSMStation& station, std::span<const ModeLabel, 4> modes) {
  station.validate();
  return LinearMap::povm_element(
      station_operator(station, modes, [&](std::span<const int> n) { return phi_plus_probability(station, n); }),
      names_of(modes));
}

// ---------------------------------------------------------------------------

ClickPattern sample_clicks(std::span<const int> photons, std::span<const Detector> detectors, Rng& rng,
                           std::int64_t window_id) {
  if (photons.size() != detectors.size()) {
    throw std::invalid_argument("sample_clicks: one photon count per detector required");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ClickPattern p;
  p.window_id = window_id;
  p.clicks.resize(detectors.size());
  p.counts.resize(detectors.size());
  for (std::size_t d = 0; d < detectors.size(); ++d) {
    int count = 0;
    for (int k = 0; k < photons[d]; ++k) count += unit(rng) < detectors[d].eta ? 1 : 0;
    count += unit(rng) < detectors[d].dark_prob ? 1 : 0;
    p.counts[d] = count;
    p.clicks[d] = count > 0;
  }
  return p;
}

bool coincidence(std::span<const ClickPattern> patterns, std::span<const Channel> required) {
  for (std::size_t i = 1; i < patterns.size(); ++i) {
    if (patterns[i].window_id != patterns[0].window_id) {
      throw std::invalid_argument("coincidence: click patterns come from different windows");
    }
  }
  for (const auto& ch : required) {
    if (ch.pattern >= patterns.size() || ch.detector >= patterns[ch.pattern].clicks.size()) {
      throw std::invalid_argument("coincidence: channel out of range");
    }
    if (!patterns[ch.pattern].clicks[ch.detector]) return false;
  }
  return true;
}

}  // namespace bdcz
