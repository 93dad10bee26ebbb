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

#include "bdcz/source.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace bdcz {
namespace {

constexpr double kMaxChi = 0.2;
constexpr double kMaxDeficit = 1e-3;

void check_unit(const char* name, double v) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw std::invalid_argument(std::string(name) + " must lie in [0, 1], got " + std::to_string(v));
  }
}

void check_chi(const char* name, double chi, int truncation) {
  if (!(chi >= 0.0 && chi <= kMaxChi)) {
    throw std::invalid_argument(std::string(name) + " must lie in [0, 0.2], got " + std::to_string(chi));
  }
  // Two modes per site, each truncated independently.
  const double kept = 1.0 - truncation_deficit(chi, truncation);
  if (1.0 - kept * kept >= kMaxDeficit) {
    throw std::invalid_argument(std::string(name) + " = " + std::to_string(chi) + " leaves a truncation norm deficit >= 1e-3 at truncation " +
                                std::to_string(truncation));
  }
}

}  // namespace

void EnsembleParams::validate() const {
  if (truncation < 2) {
    throw std::invalid_argument("truncation must be >= 2 so double excitations are representable");
  }
  check_chi("chi", chi, truncation);
  if (chi_l) check_chi("chi_l", *chi_l, truncation);
  if (chi_r) check_chi("chi_r", *chi_r, truncation);
  check_unit("eta_as", eta_as);
  check_unit("eta_ret", eta_ret);
  check_unit("eta_s", eta_s);
  check_unit("source_visibility", source_visibility);
  if (!(phase_jitter >= 0.0) || !std::isfinite(phase_jitter)) {
    throw std::invalid_argument("phase_jitter must be finite and >= 0");
  }
  if (!std::isfinite(phi1) || !std::isfinite(phi2)) throw std::invalid_argument("phases must be finite");
}

SiteModes SiteModes::of(const std::string& site) {
  return {"AS_L_" + site, "AS_R_" + site, "AS_H_" + site, "AS_V_" + site,
          "mem_L_" + site, "mem_R_" + site, "S_H_" + site, "S_V_" + site};
}

double truncation_deficit(double chi, int truncation) {
  return std::pow(chi, truncation + 1);
}

std::vector<double> thermal_amplitudes(double chi, int truncation) {
  std::vector<double> c(static_cast<std::size_t>(truncation) + 1);
  double norm2 = 0.0;
  for (int n = 0; n <= truncation; ++n) {
    const double w = (1.0 - chi) * std::pow(chi, n);
    c[static_cast<std::size_t>(n)] = std::sqrt(w);
    norm2 += w;
  }
  for (auto& x : c) x /= std::sqrt(norm2);
  return c;
}

AtomPhotonState write_joint_state(const EnsembleParams& params, const std::string& site) {
  params.validate();
  const auto m = SiteModes::of(site);
  const int t = params.truncation;
  Register reg({ModeLabel::bosonic(m.as_l, t), ModeLabel::bosonic(m.as_r, t), ModeLabel::bosonic(m.mem_l, t),
                ModeLabel::bosonic(m.mem_r, t)});
  const auto cl = thermal_amplitudes(params.chi_left(), t);
  const auto cr = thermal_amplitudes(params.chi_right(), t);
  CVector v = CVector::Zero(reg.dim());
  for (int nl = 0; nl <= t; ++nl) {
    for (int nr = 0; nr <= t; ++nr) {
      const int occ[] = {nl, nr, nl, nr};
      v(reg.basis_index(occ)) = cl[static_cast<std::size_t>(nl)] * cr[static_cast<std::size_t>(nr)];
    }
  }
  v /= v.norm();
  return {LabeledState(std::move(reg), std::move(v)), site};
}

LabeledState combine_anti_stokes(const AtomPhotonState& aps, const EnsembleParams& params) {
  const auto m = SiteModes::of(aps.site);
  const std::vector<std::string> order{m.as_r, m.as_l, m.mem_l, m.mem_r};
  const auto p = permute(aps.state, order);
  const Register reg = p.reg().renamed(m.as_r, m.as_h).renamed(m.as_l, m.as_v);
  const LabeledState renamed(reg, p.amplitudes(), p.is_normalized());
  return apply(number_phase(reg.mode(m.as_v), params.phi1), renamed);
}

LabeledState single_excitation_state(const EnsembleParams& params, const std::string& site) {
  const auto m = SiteModes::of(site);
  const int t = params.truncation;
  Register reg({ModeLabel::bosonic(m.as_h, t), ModeLabel::bosonic(m.as_v, t), ModeLabel::bosonic(m.mem_l, t),
                ModeLabel::bosonic(m.mem_r, t)});
  CVector v = CVector::Zero(reg.dim());
  const int hr[] = {1, 0, 0, 1};
  const int vl[] = {0, 1, 1, 0};
  v(reg.basis_index(hr)) = std::numbers::sqrt2 / 2;
  v(reg.basis_index(vl)) = std::polar(std::numbers::sqrt2 / 2, params.phi1);
  return LabeledState(std::move(reg), std::move(v));
}

LabeledState emitted_state(const EnsembleParams& params, const std::string& site) {
  params.validate();
  if (params.kind == SourceKind::kSingleExcitation) return single_excitation_state(params, site);
  return combine_anti_stokes(write_joint_state(params, site), params);
}

DensityOperator apply_anti_stokes_loss(const DensityOperator& rho, const EnsembleParams& params,
                                       const std::string& site) {
  const auto m = SiteModes::of(site);
  auto out = apply(loss_channel(rho.reg().mode(m.as_h), params.eta_as), rho);
  return apply(loss_channel(out.reg().mode(m.as_v), params.eta_as), out);
}

LinearMap white_noise_channel(const ModeLabel& first, const ModeLabel& second, double visibility) {
  check_unit("visibility", visibility);
  const Register reg({first, second});
  const Eigen::Index d = reg.dim();
  const int a_occ[] = {1, 0};
  const int b_occ[] = {0, 1};
  const Eigen::Index a = reg.basis_index(a_occ);
  const Eigen::Index b = reg.basis_index(b_occ);
  const double q = 1.0 - visibility;
  const double w[] = {1.0 - 0.75 * q, q / 4, q / 4, q / 4};
  std::vector<CMatrix> ops;
  for (int k = 0; k < 4; ++k) {
    if (w[k] == 0.0) continue;
    CMatrix u = CMatrix::Identity(d, d);
    const Complex i(0, 1);
    switch (k) {
      case 1:  // X
        u(a, a) = 0;
        u(b, b) = 0;
        u(a, b) = 1;
        u(b, a) = 1;
        break;
      case 2:  // Y
        u(a, a) = 0;
        u(b, b) = 0;
        u(a, b) = -i;
        u(b, a) = i;
        break;
      case 3:  // Z
        u(b, b) = -1;
        break;
      default:
        break;
    }
    ops.push_back(std::sqrt(w[k]) * u);
  }
  return LinearMap::kraus(std::move(ops), {first.name, second.name});
}

DensityOperator apply_source_noise(const DensityOperator& rho, const EnsembleParams& params,
                                   const std::string& site) {
  const auto m = SiteModes::of(site);
  DensityOperator out = rho;
  if (params.source_visibility < 1.0) {
    out = apply(white_noise_channel(rho.reg().mode(m.mem_r), rho.reg().mode(m.mem_l), params.source_visibility), out);
  }
  if (params.phase_jitter > 0.0) {
    out = phase_diffuse(out, {{m.mem_l, 1.0}}, params.phase_jitter * params.phase_jitter);
  }
  return out;
}

DensityOperator retrieve(const DensityOperator& mem_state, const EnsembleParams& params, const std::string& site) {
  const auto m = SiteModes::of(site);
  const Register reg = mem_state.reg().renamed(m.mem_r, m.s_h).renamed(m.mem_l, m.s_v);
  DensityOperator out(reg, mem_state.matrix(), mem_state.is_normalized());
  out = apply(number_phase(reg.mode(m.s_v), params.phi2), out);
  out = apply(loss_channel(reg.mode(m.s_h), params.eta_ret), out);
  return apply(loss_channel(reg.mode(m.s_v), params.eta_ret), out);
}

}  // namespace bdcz
