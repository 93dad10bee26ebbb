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

#include "bdcz/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bdcz {
namespace {

constexpr double kMinSuccess = 1e-15;

std::vector<std::string> memory_names() {
  const auto a = SiteModes::of(kSiteI);
  const auto b = SiteModes::of(kSiteII);
  return {a.mem_l, a.mem_r, b.mem_l, b.mem_r};
}

/// Sites x with both mem_L_x and mem_R_x in the register.
std::vector<std::string> memory_sites(const Register& reg) {
  std::vector<std::string> out;
  for (const auto& m : reg) {
    if (m.name.rfind("mem_L_", 0) != 0) continue;
    const std::string site = m.name.substr(6);
    if (reg.contains("mem_R_" + site)) out.push_back(site);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// State machine

const char* to_string(NodePhase p) {
  switch (p) {
    case NodePhase::kIdle: return "Idle";
    case NodePhase::kWriting: return "Writing";
    case NodePhase::kAwaitBsm: return "AwaitBSM";
    case NodePhase::kStored: return "Stored";
    case NodePhase::kRetrieved: return "Retrieved";
    case NodePhase::kVerified: return "Verified";
  }
  return "?";
}

bool is_legal_transition(NodePhase from, NodePhase to) {
  switch (from) {
    case NodePhase::kIdle: return to == NodePhase::kWriting;
    case NodePhase::kWriting: return to == NodePhase::kAwaitBsm;
    case NodePhase::kAwaitBsm: return to == NodePhase::kWriting || to == NodePhase::kStored;
    case NodePhase::kStored: return to == NodePhase::kRetrieved;
    case NodePhase::kRetrieved: return to == NodePhase::kVerified;
    case NodePhase::kVerified: return to == NodePhase::kIdle;
  }
  return false;
}

void NodeStateMachine::advance(NodePhase next, double elapsed_us) {
  if (!is_legal_transition(phase(), next)) {
    throw std::logic_error(std::string("illegal node transition ") + to_string(phase()) + " -> " + to_string(next));
  }
  trace_.push_back({next, elapsed_us});
}

bool is_legal_trace(const std::vector<NodeStateMachine::Step>& trace) {
  if (trace.empty() || trace.front().phase != NodePhase::kIdle) return false;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (!is_legal_transition(trace[i - 1].phase, trace[i].phase)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Memory

void MemoryChannel::validate() const {
  if (!(tau_us > 0.0)) throw std::invalid_argument("memory tau_us must be > 0");
  if (!(v0 > 0.0 && v0 <= 1.0)) throw std::invalid_argument("memory v0 must lie in (0, 1]");
}

double MemoryChannel::attenuation(double dt_us) const {
  if (dt_us < 0.0) throw std::invalid_argument("storage time must be >= 0");
  const double x = dt_us / tau_us;
  return model == MemoryModel::kExponential ? v0 * std::exp(-x) : v0 * std::exp(-x * x);
}

DensityOperator decohere_memory(const DensityOperator& rho, double dt_us, const MemoryChannel& ch) {
  ch.validate();
  const double lambda = ch.attenuation(dt_us);
  if (lambda >= 1.0) return rho;
  // Generator n_L - n_R differs by 2 across the qubit, so exp(-2 var) = lambda.
  const double variance = lambda > 0.0 ? -std::log(lambda) / 2.0 : std::numeric_limits<double>::infinity();
  DensityOperator out = rho;
  for (const auto& site : memory_sites(rho.reg())) {
    out = phase_diffuse(out, {{"mem_L_" + site, 1.0}, {"mem_R_" + site, -1.0}}, variance);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Swapping

LinearMap heralding_effect(const BSMStation& station, const EnsembleParams& site_I, const EnsembleParams& site_II) {
  station.validate();
  site_I.validate();
  site_II.validate();
  const auto a = SiteModes::of(kSiteI);
  const auto b = SiteModes::of(kSiteII);
  const std::array<ModeLabel, 4> modes{
      ModeLabel::bosonic(a.as_h, site_I.truncation), ModeLabel::bosonic(a.as_v, site_I.truncation),
      ModeLabel::bosonic(b.as_h, site_II.truncation), ModeLabel::bosonic(b.as_v, site_II.truncation)};
  const Register reg{std::vector<ModeLabel>(modes.begin(), modes.end())};
  CMatrix e = bsm_phi_plus_povm(station, std::span<const ModeLabel, 4>(modes)).op();
  // Emission order: twirl, then loss. Pull-back applies the adjoints in reverse.
  for (std::size_t k = 0; k < 4; ++k) {
    const double eta = k < 2 ? site_I.eta_as : site_II.eta_as;
    if (eta < 1.0) e = adjoint_apply(loss_channel(modes[k], eta), e, reg);
  }
  if (site_I.source_visibility < 1.0) e = adjoint_apply(white_noise_channel(modes[0], modes[1], site_I.source_visibility), e, reg);
  if (site_II.source_visibility < 1.0) e = adjoint_apply(white_noise_channel(modes[2], modes[3], site_II.source_visibility), e, reg);
  e = (e + e.adjoint()).eval() / 2.0;
  return LinearMap::povm_element(std::move(e), reg.names());
}

SwapResult entanglement_swap_exact(const LabeledState& site_I, const LabeledState& site_II, const LinearMap& effect) {
  const auto joint = tensor(site_I, site_II);
  const auto cond = condition_and_trace(joint, effect);
  const double p = cond.trace();
  if (!(p >= kMinSuccess)) {
    throw NoEventError("BSM success probability " + std::to_string(p) + " is below 1e-15");
  }
  const auto names = memory_names();
  auto conditional = permute(cond, names);
  return {p, conditional, conditional.normalized()};
}

SwapResult entanglement_swap_exact(const EnsembleParams& site_I, const EnsembleParams& site_II,
                                   const BSMStation& station) {
  const auto effect = heralding_effect(station, site_I, site_II);
  auto r = entanglement_swap_exact(emitted_state(site_I, kSiteI), emitted_state(site_II, kSiteII), effect);
  // Path-phase noise on AS_V equals the same phase on mem_L: their
  // occupations agree on every emitted ket.
  DensityOperator c = r.conditional;
  if (site_I.phase_jitter > 0.0) c = phase_diffuse(c, {{"mem_L_" + kSiteI, 1.0}}, site_I.phase_jitter * site_I.phase_jitter);
  if (site_II.phase_jitter > 0.0) c = phase_diffuse(c, {{"mem_L_" + kSiteII, 1.0}}, site_II.phase_jitter * site_II.phase_jitter);
  return {r.success_probability, c, c.normalized()};
}

DensityOperator excitation_sector(const DensityOperator& rho, int k_I, int k_II) {
  const Register& reg = rho.reg();
  const auto a = SiteModes::of(kSiteI);
  const auto b = SiteModes::of(kSiteII);
  const std::size_t al = reg.index_of(a.mem_l), ar = reg.index_of(a.mem_r);
  const std::size_t bl = reg.index_of(b.mem_l), br = reg.index_of(b.mem_r);
  const Eigen::Index d = reg.dim();
  std::vector<bool> in(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) {
    const auto occ = reg.occupations(i);
    in[static_cast<std::size_t>(i)] = occ[al] + occ[ar] == k_I && occ[bl] + occ[br] == k_II;
  }
  CMatrix m = rho.matrix();
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      if (!in[static_cast<std::size_t>(i)] || !in[static_cast<std::size_t>(j)]) m(i, j) = 0;
    }
  }
  return DensityOperator(reg, std::move(m), false);
}

DensityOperator memory_qubits(const DensityOperator& rho_mem) {
  const auto a = SiteModes::of(kSiteI);
  const auto b = SiteModes::of(kSiteII);
  return dual_rail_projection(rho_mem, {{a.mem_r, a.mem_l}, {b.mem_r, b.mem_l}}, {"q_I", "q_II"}).normalized();
}

DensityOperator photon_qubits(const DensityOperator& stokes) {
  const auto a = SiteModes::of(kSiteI);
  const auto b = SiteModes::of(kSiteII);
  return dual_rail_projection(stokes, {{a.s_h, a.s_v}, {b.s_h, b.s_v}}, {"photon_1", "photon_4"}).normalized();
}

// ---------------------------------------------------------------------------
// Storage, retrieval and verification

DensityOperator stokes_state(const DensityOperator& rho_mem, const EnsembleParams& site_I,
                             const EnsembleParams& site_II, const MemoryChannel& ch, double dt_us) {
  auto out = decohere_memory(rho_mem, dt_us, ch);
  out = retrieve(out, site_I, kSiteI);
  return retrieve(out, site_II, kSiteII);
}

std::array<double, 4> verification_probabilities(const DensityOperator& stokes, const VerificationSetting& setting,
                                                 const Detector& site_I_detector, const Detector& site_II_detector) {
  const auto a = SiteModes::of(kSiteI);
  const auto b = SiteModes::of(kSiteII);
  const std::vector<std::string> order{a.s_h, a.s_v, b.s_h, b.s_v};
  const auto reduced = permute(partial_trace(stokes, order), order);
  const Register& reg = reduced.reg();
  const auto p1 = analyzer_outcome_povms(setting.photon1, site_I_detector, site_I_detector, reg[0], reg[1]);
  const auto p4 = analyzer_outcome_povms(setting.photon4, site_II_detector, site_II_detector, reg[2], reg[3]);
  std::array<double, 4> out{};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const CMatrix e = Eigen::kroneckerProduct(p1[static_cast<std::size_t>(i)].op(), p4[static_cast<std::size_t>(j)].op()).eval();
      const double p = (reduced.matrix() * e).trace().real();
      if (p < -kOperatorTolerance) throw NumericalError("negative verification probability");
      out[static_cast<std::size_t>(2 * i + j)] = std::max(p, 0.0);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Derived node quantities

FalseEventReport false_event_analysis(const EnsembleParams& site_I, const EnsembleParams& site_II,
                                      const BSMStation& station, const Detector& site_I_detector,
                                      const Detector& site_II_detector) {
  const auto swap = entanglement_swap_exact(site_I, site_II, station);
  const VerificationSetting setting{Analyzer::linear(0.0), Analyzer::linear(0.0)};
  const MemoryChannel ideal;
  FalseEventReport r;
  r.bsm_success_probability = swap.success_probability;
  const int kmax_I = 2 * site_I.truncation;
  const int kmax_II = 2 * site_II.truncation;
  double bsm_true = 0.0, four_true = 0.0, four_total = 0.0;
  for (int ki = 0; ki <= kmax_I; ++ki) {
    for (int kj = 0; kj <= kmax_II; ++kj) {
      const auto block = excitation_sector(swap.conditional, ki, kj);
      const double pb = block.trace();
      if (pb <= 0.0) continue;
      const auto p = verification_probabilities(stokes_state(block, site_I, site_II, ideal, 0.0), setting,
                                                site_I_detector, site_II_detector);
      const double p4 = p[0] + p[1] + p[2] + p[3];
      four_total += p4;
      if (ki == 1 && kj == 1) {
        bsm_true += pb;
        four_true += p4;
      }
    }
  }
  r.bsm_false_fraction = 1.0 - bsm_true / swap.success_probability;
  r.fourfold_probability = four_total;
  r.fourfold_false_fraction = four_total > 0.0 ? 1.0 - four_true / four_total : 0.0;
  return r;
}

namespace {

FalseEventReport ideal_false_events(double chi_I, double chi_II) {
  EnsembleParams a, b;
  a.chi = chi_I;
  b.chi = chi_II;
  return false_event_analysis(a, b, BSMStation{}, Detector{}, Detector{});
}

}  // namespace

double false_event_fraction(double chi_I, double chi_II) { return ideal_false_events(chi_I, chi_II).bsm_false_fraction; }

double false_event_fraction_fourfold(double chi_I, double chi_II) {
  return ideal_false_events(chi_I, chi_II).fourfold_false_fraction;
}

PrecisionEstimate estimate_local_precision(double v_ap_I, double v_ap_II, double v_aa, double tolerance) {
  for (double v : {v_ap_I, v_ap_II, v_aa}) {
    if (!(v > 0.0 && v <= 1.0)) throw std::invalid_argument("visibilities must lie in (0, 1]");
  }
  PrecisionEstimate e;
  e.unclamped = v_aa / (v_ap_I * v_ap_II);
  e.value = std::clamp(e.unclamped, 0.0, 1.0);
  e.model_violation = v_aa > v_ap_I * v_ap_II + tolerance;
  return e;
}

}  // namespace bdcz
