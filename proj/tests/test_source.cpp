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

#include <gtest/gtest.h>

#include <numbers>

#include "bdcz/experiment.hpp"
#include "bdcz/source.hpp"
#include "support.hpp"

namespace bdcz {
namespace {

using testing::Gen;
using testing::pauli;

EnsembleParams ideal_thermal(double chi = 0.01) {
  EnsembleParams p;
  p.chi = chi;
  return p;
}

/// Probability that the anti-Stokes modes carry `n` photons in total.
double anti_stokes_number_probability(const DensityOperator& rho, const std::string& site, int n) {
  const auto m = SiteModes::of(site);
  const std::vector<std::string> keep{m.as_h, m.as_v};
  const auto r = partial_trace(rho, keep);
  double p = 0.0;
  for (Eigen::Index i = 0; i < r.reg().dim(); ++i) {
    const auto occ = r.reg().occupations(i);
    if (occ[0] + occ[1] == n) p += r.matrix()(i, i).real();
  }
  return p;
}

TEST(EnsembleParams, RejectsOutOfRangeValues) {
  EnsembleParams p;
  p.truncation = 1;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = EnsembleParams{};
  p.chi = 0.3;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = EnsembleParams{};
  p.eta_ret = 1.2;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = EnsembleParams{};
  p.chi = 0.2;  // 1 - (1 - 0.2^3)^2 is above 1e-3 at truncation 2
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p.truncation = 4;
  EXPECT_NO_THROW(p.validate());
}

TEST(WriteJointState, ZeroChiIsVacuum) {
  const auto s = write_joint_state(ideal_thermal(0.0), "I");
  EXPECT_NEAR(std::abs(s.state.amplitudes()(0)), 1.0, 1e-15);
  EXPECT_NEAR(s.state.amplitudes().tail(s.state.amplitudes().size() - 1).norm(), 0.0, 1e-15);
}

TEST(WriteJointState, AmplitudeRatioIsSqrtChi) {
  const auto s = write_joint_state(ideal_thermal(0.01), "I");
  const auto& r = s.state.reg();
  const int one[] = {0, 1, 0, 1};
  const int two[] = {0, 2, 0, 2};
  const int zero[] = {0, 0, 0, 0};
  const Complex a1 = s.state.amplitudes()(r.basis_index(one));
  const Complex a2 = s.state.amplitudes()(r.basis_index(two));
  EXPECT_NEAR(std::abs(a2 / a1), 0.1, 1e-10);
  EXPECT_NEAR(std::abs(a1 / s.state.amplitudes()(r.basis_index(zero))), 0.1, 1e-10);
}

TEST(WriteJointState, PhotonNumberCorrelation) {
  EnsembleParams p = ideal_thermal(0.05);
  p.truncation = 3;
  const auto s = write_joint_state(p, "II");
  const auto& r = s.state.reg();
  for (Eigen::Index i = 0; i < r.dim(); ++i) {
    if (std::abs(s.state.amplitudes()(i)) == 0.0) continue;
    const auto occ = r.occupations(i);
    EXPECT_EQ(occ[0], occ[2]);
    EXPECT_EQ(occ[1], occ[3]);
  }
}

TEST(CombineAntiStokes, PostSelectedSinglePhotonIsAtomPhotonBellState) {
  for (double phi1 : {0.0, std::numbers::pi}) {
    EnsembleParams p = ideal_thermal(0.01);
    p.phi1 = phi1;
    const auto psi = combine_anti_stokes(write_joint_state(p, "I"), p);
    const auto rho = DensityOperator::from_state(psi);
    // Qubits: photon (AS_H -> 0, AS_V -> 1) and memory (mem_R -> 0, mem_L -> 1).
    const auto q = dual_rail_projection(rho, {{"AS_H_I", "AS_V_I"}, {"mem_R_I", "mem_L_I"}}, {"p", "a"}).normalized();
    CVector t = CVector::Zero(4);
    t(0) = 1.0 / std::sqrt(2.0);
    t(3) = std::polar(1.0 / std::sqrt(2.0), phi1);
    EXPECT_NEAR(fidelity_pure(q, LabeledState(q.reg(), t)), 1.0, 1e-10);
  }
}

TEST(CombineAntiStokes, SinglePhotonPostSelectionProbability) {
  EnsembleParams p = ideal_thermal(0.01);
  p.eta_as = 0.25;
  const auto rho = apply_anti_stokes_loss(DensityOperator::from_state(emitted_state(p, "I")), p, "I");
  const double exact = anti_stokes_number_probability(rho, "I", 1);
  // Independent oracle: truncated thermal number distribution per mode, binomially thinned.
  const auto c = thermal_amplitudes(p.chi, p.truncation);
  double one = 0.0, none = 0.0;
  for (int n = 0; n <= p.truncation; ++n) {
    const double pn = c[static_cast<std::size_t>(n)] * c[static_cast<std::size_t>(n)];
    none += pn * std::pow(1.0 - p.eta_as, n);
    if (n > 0) one += pn * n * p.eta_as * std::pow(1.0 - p.eta_as, n - 1);
  }
  EXPECT_NEAR(exact, 2.0 * one * none, 1e-14);
  const double leading = 2.0 * p.chi * (1.0 - p.chi) * p.eta_as;
  EXPECT_NEAR(leading, 4.95e-3, 1e-12);
  EXPECT_NEAR(exact / leading, 1.0, 0.02);
}

TEST(EmissionProbability, MonotoneInChi) {
  double last = -1.0;
  for (double chi = 0.0; chi <= 0.1 + 1e-12; chi += 0.005) {
    EnsembleParams p = ideal_thermal(chi);
    p.truncation = 3;
    const auto rho = DensityOperator::from_state(emitted_state(p, "I"));
    const double emit = 1.0 - anti_stokes_number_probability(rho, "I", 0);
    EXPECT_GT(emit, last);
    last = emit;
  }
}

TEST(Retrieve, MapsMemoryQubitOntoStokesPolarization) {
  const Register r({ModeLabel::bosonic("mem_L_I", 2), ModeLabel::bosonic("mem_R_I", 2)});
  CVector v = CVector::Zero(r.dim());
  const int lo[] = {1, 0}, ro[] = {0, 1};
  v(r.basis_index(lo)) = v(r.basis_index(ro)) = 1.0 / std::sqrt(2.0);
  const auto mem = DensityOperator::from_state(LabeledState(r, v));
  const auto out = retrieve(mem, EnsembleParams{}, "I");
  const auto q = dual_rail_projection(out, {{"S_H_I", "S_V_I"}}, {"s"});
  CVector plus(2);
  plus << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(fidelity_pure(q, LabeledState(q.reg(), plus)), 1.0, 1e-12);

  for (double eta : {0.35, 0.0}) {
    EnsembleParams p;
    p.eta_ret = eta;
    const auto lossy = retrieve(mem, p, "I");
    EXPECT_NEAR(dual_rail_projection(lossy, {{"S_H_I", "S_V_I"}}, {"s"}).trace(), eta, 1e-10);
    EXPECT_NEAR(lossy.matrix()(0, 0).real(), 1.0 - eta, 1e-10);
  }
}

TEST(Retrieve, IdealPairReproducesPolarizationEntanglement) {
  Gen g(21);
  for (int i = 0; i < 20; ++i) {
    EnsembleParams p = ideal_thermal(0.01);
    p.phi1 = g.uniform(-std::numbers::pi, std::numbers::pi);
    p.phi2 = g.uniform(-std::numbers::pi, std::numbers::pi);
    const auto rho = retrieve(DensityOperator::from_state(emitted_state(p, "I")), p, "I");
    const auto q = dual_rail_projection(rho, {{"AS_H_I", "AS_V_I"}, {"S_H_I", "S_V_I"}}, {"as", "s"}).normalized();
    CVector t = CVector::Zero(4);
    t(0) = 1.0 / std::sqrt(2.0);
    t(3) = std::polar(1.0 / std::sqrt(2.0), p.phi1 + p.phi2);
    EXPECT_NEAR(fidelity_pure(q, LabeledState(q.reg(), t)), 1.0, 1e-9);
  }
}

TEST(SourceNoise, WhiteNoiseSetsAtomPhotonVisibility) {
  EnsembleParams p;
  p.kind = SourceKind::kSingleExcitation;
  p.source_visibility = 0.92;
  const auto rho = apply_source_noise(DensityOperator::from_state(emitted_state(p, "I")), p, "I");
  const auto q = dual_rail_projection(rho, {{"AS_H_I", "AS_V_I"}, {"mem_R_I", "mem_L_I"}}, {"p", "a"});
  const std::vector<std::string> on{"p", "a"};
  for (char c : {'x', 'z'}) {
    const CMatrix o = Eigen::kroneckerProduct(pauli(c), pauli(c)).eval();
    EXPECT_NEAR(expectation(q, o, std::span<const std::string>(on)), 0.92, 1e-12);
  }
  const CMatrix yy = Eigen::kroneckerProduct(pauli('y'), pauli('y')).eval();
  EXPECT_NEAR(expectation(q, yy, std::span<const std::string>(on)), -0.92, 1e-12);
}

TEST(SourceNoise, PhaseJitterAttenuatesCoherence) {
  EnsembleParams p;
  p.kind = SourceKind::kSingleExcitation;
  p.phase_jitter = 0.3;
  const auto rho = apply_source_noise(DensityOperator::from_state(emitted_state(p, "I")), p, "I");
  const auto q = dual_rail_projection(rho, {{"AS_H_I", "AS_V_I"}, {"mem_R_I", "mem_L_I"}}, {"p", "a"});
  EXPECT_NEAR(std::abs(q.matrix()(0, 3)), 0.5 * std::exp(-0.09 / 2), 1e-12);
}

TEST(Truncation, ObservablesConvergeFromTwoToThree) {
  ExperimentConfig c;
  for (auto* s : {&c.site_I, &c.site_II}) {
    s->chi = 0.01;
    s->eta_as = 0.25;
    s->eta_ret = 0.35;
    s->eta_s = 0.43;
  }
  const auto settings = fidelity_settings();
  const std::span<const VerificationSetting> span(settings);
  const auto t2 = run_exact(c, span);
  c.site_I.truncation = c.site_II.truncation = 3;
  const auto t3 = run_exact(c, span);
  EXPECT_LT(std::abs(t2.bsm_success_probability / t3.bsm_success_probability - 1.0), 5e-3);
  EXPECT_LT(std::abs(t2.fidelity_final / t3.fidelity_final - 1.0), 5e-3);
  for (std::size_t i = 0; i < settings.size(); ++i) {
    EXPECT_LT(std::abs(t2.settings[i].fourfold() / t3.settings[i].fourfold() - 1.0), 5e-3);
  }
}

}  // namespace
}  // namespace bdcz
