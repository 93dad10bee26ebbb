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

// Photon-level sampling of the swap experiment.
//
// The joint emitted state is held as a matrix Psi(photon, memory). A
// passive network with Fock transfer A maps it to sum_o |o> (A Psi)(o, :),
// so once the BSM photon numbers o are sampled the memory is in the pure
// state (A Psi)(o, :). Detector loss is binomial thinning of o. The
// Stokes side is sampled the same way, one site after the other.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <numeric>
#include <thread>

#include "bdcz/errors.hpp"
#include "bdcz/experiment.hpp"

namespace bdcz {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum Branch : int { kInterfering = 0, kDistinguishable = 1 };

struct Entry {
  Branch branch;
  int pauli_I;
  int pauli_II;
  /// Interfering: output config and stored row. Distinguishable: per-site configs.
  int out_a;
  int out_b;
  Eigen::Index row;
};

/// Index into a cumulative table; u in [0, total).
std::size_t pick(const std::vector<double>& cumulative, double u) {
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

int level(const Detector& d, int count) { return d.number_resolving ? std::min(count, 2) : (count > 0 ? 1 : 0); }

/// 0 for '+', 1 for '-', -1 otherwise.
int analyzer_outcome(const Detector& d, int plus, int minus) {
  const int p = level(d, plus);
  const int m = level(d, minus);
  if (p == 1 && m == 0) return 0;
  if (p == 0 && m == 1) return 1;
  return -1;
}

/// Pauli unitaries I, X, Y, Z on the one-photon subspace of (h, v).
std::vector<CMatrix> paulis(const ModeLabel& h, const ModeLabel& v) {
  const auto twirl = white_noise_channel(h, v, 0.0);
  std::vector<CMatrix> out;
  for (const auto& k : twirl.operands()) out.push_back(2.0 * k);
  return out;
}

std::vector<double> pauli_weights(double visibility) {
  if (visibility >= 1.0) return {1.0};
  const double q = 1.0 - visibility;
  return {1.0 - 0.75 * q, q / 4, q / 4, q / 4};
}

}  // namespace

std::uint64_t trial_seed(std::uint64_t master_seed, std::uint64_t setting_index, std::uint64_t trial_index) {
  std::uint64_t h = splitmix64(master_seed);
  h = splitmix64(h ^ setting_index);
  return splitmix64(h ^ trial_index);
}

struct MonteCarloModel::Impl {
  ExperimentConfig cfg;
  int cut_I = 0, cut_II = 0;
  Eigen::Index d_I = 0, d_II = 0, dm = 0;

  std::vector<Entry> entries;
  std::vector<double> cum_raw, cum_herald;
  std::array<Detector, 4> herald_detectors{};

  CMatrix rows;                   // interfering branch, one memory row per entry
  std::vector<std::vector<int>> configs;
  FockTransfer split_I, split_II;
  std::vector<CMatrix> dist_d;    // per site-I Pauli: (configs_I x d_II*dm)
  std::vector<CMatrix> dist_b;    // per site-II Pauli: (configs_II x d_II)

  std::vector<int> nl_I, nr_I, nl_II, nr_II;
  std::vector<Eigen::Index> m_row, m_col;

  std::vector<std::array<FockTransfer, 2>> analyzers;
  Detector stokes_I, stokes_II;

  CVector memory_row(const Entry& e) const {
    if (e.branch == kInterfering) return rows.row(e.row).transpose();
    const CMatrix& d = dist_d[static_cast<std::size_t>(e.pauli_I)];
    const CMatrix& b = dist_b[static_cast<std::size_t>(e.pauli_II)];
    CVector out = CVector::Zero(dm);
    for (Eigen::Index j = 0; j < d_II; ++j) {
      const Complex c = b(e.out_b, j);
      if (c == Complex(0)) continue;
      out += c * d.row(e.out_a).segment(j * dm, dm).transpose();
    }
    return out;
  }

  std::array<int, 4> herald_photons(const Entry& e) const {
    std::array<int, 4> n{};
    if (e.branch == kInterfering) {
      for (int k = 0; k < 4; ++k) n[static_cast<std::size_t>(k)] = configs[static_cast<std::size_t>(e.out_a)][static_cast<std::size_t>(k)];
    } else {
      for (int k = 0; k < 4; ++k) {
        n[static_cast<std::size_t>(k)] = split_I.out_configs[static_cast<std::size_t>(e.out_a)][static_cast<std::size_t>(k)] +
                                         split_II.out_configs[static_cast<std::size_t>(e.out_b)][static_cast<std::size_t>(k)];
      }
    }
    return n;
  }
};

MonteCarloModel::MonteCarloModel(const ExperimentConfig& cfg, std::span<const VerificationSetting> settings)
    : impl_(std::make_unique<Impl>()) {
  cfg.validate();
  Impl& m = *impl_;
  m.cfg = cfg;
  if (cfg.site_I.eta_as != cfg.site_II.eta_as) {
    throw ConfigError("sites: the Monte Carlo engine needs equal eta_as at both sites");
  }
  m.cut_I = cfg.site_I.truncation;
  m.cut_II = cfg.site_II.truncation;
  m.d_I = (m.cut_I + 1) * (m.cut_I + 1);
  m.d_II = (m.cut_II + 1) * (m.cut_II + 1);
  m.dm = m.d_I * m.d_II;

  const auto a = SiteModes::of(kSiteI);
  const auto b = SiteModes::of(kSiteII);
  const auto joint = tensor(emitted_state(cfg.site_I, kSiteI), emitted_state(cfg.site_II, kSiteII));
  const std::vector<std::string> order{a.as_h, a.as_v, b.as_h, b.as_v, a.mem_l, a.mem_r, b.mem_l, b.mem_r};
  const auto ordered = permute(joint, order);
  const Eigen::Index dp = m.d_I * m.d_II;
  // Row-major view: psi(p, mem) = amplitude(p * dm + mem).
  using RowMajor = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const RowMajor psi = Eigen::Map<const RowMajor>(ordered.amplitudes().data(), dp, m.dm);

  for (std::size_t k = 0; k < 4; ++k) {
    m.herald_detectors[k] = cfg.station.detectors[k];
    m.herald_detectors[k].eta *= cfg.site_I.eta_as;
  }
  BSMStation table = cfg.station;
  table.detectors = m.herald_detectors;

  const auto pa = paulis(ModeLabel::bosonic(a.as_h, m.cut_I), ModeLabel::bosonic(a.as_v, m.cut_I));
  const auto pb = paulis(ModeLabel::bosonic(b.as_h, m.cut_II), ModeLabel::bosonic(b.as_v, m.cut_II));
  const auto wa = pauli_weights(cfg.site_I.source_visibility);
  const auto wb = pauli_weights(cfg.site_II.source_visibility);

  const double overlap = cfg.station.mode_overlap;
  double raw_total = 0.0, herald_total = 0.0;
  auto push = [&](const Entry& e, double raw, double herald) {
    m.entries.push_back(e);
    raw_total += raw;
    herald_total += herald;
    m.cum_raw.push_back(raw_total);
    m.cum_herald.push_back(herald_total);
  };

  const CMatrix u = bsm_mode_map(cfg.station);
  if (overlap > 0.0) {
    const std::array<int, 4> cut{m.cut_I, m.cut_I, m.cut_II, m.cut_II};
    const auto t = fock_transfer(u, cut);
    m.configs = t.out_configs;
    std::vector<CVector> kept;
    for (std::size_t i = 0; i < wa.size(); ++i) {
      for (std::size_t j = 0; j < wb.size(); ++j) {
        const CMatrix p = Eigen::kroneckerProduct(pa[i], pb[j]).eval();
        const CMatrix c = t.amplitudes * p * psi;
        for (Eigen::Index o = 0; o < c.rows(); ++o) {
          const double n2 = c.row(o).squaredNorm();
          if (n2 <= 0.0) continue;
          const double raw = overlap * wa[i] * wb[j] * n2;
          const double herald = raw * phi_plus_probability(table, m.configs[static_cast<std::size_t>(o)]);
          push({kInterfering, static_cast<int>(i), static_cast<int>(j), static_cast<int>(o), 0,
                static_cast<Eigen::Index>(kept.size())},
               raw, herald);
          kept.push_back(c.row(o).transpose());
        }
      }
    }
    m.rows.resize(static_cast<Eigen::Index>(kept.size()), m.dm);
    for (std::size_t r = 0; r < kept.size(); ++r) m.rows.row(static_cast<Eigen::Index>(r)) = kept[r].transpose();
  }
  if (overlap < 1.0) {
    const std::array<int, 2> ci{m.cut_I, m.cut_I};
    const std::array<int, 2> cii{m.cut_II, m.cut_II};
    m.split_I = fock_transfer(u.leftCols(2), ci);
    m.split_II = fock_transfer(u.rightCols(2), cii);
    const RowMajor psi_r = Eigen::Map<const RowMajor>(ordered.amplitudes().data(), m.d_I, m.d_II * m.dm);
    for (std::size_t i = 0; i < wa.size(); ++i) m.dist_d.push_back(m.split_I.amplitudes * pa[i] * psi_r);
    for (std::size_t j = 0; j < wb.size(); ++j) m.dist_b.push_back(m.split_II.amplitudes * pb[j]);
    for (std::size_t i = 0; i < wa.size(); ++i) {
      for (std::size_t j = 0; j < wb.size(); ++j) {
        const CMatrix& d = m.dist_d[i];
        for (Eigen::Index o2 = 0; o2 < d.rows(); ++o2) {
          const RowMajor block = Eigen::Map<const RowMajor>(RowMajor(d.row(o2)).data(), m.d_II, m.dm);
          const CMatrix c = m.dist_b[j] * block;
          for (Eigen::Index o3 = 0; o3 < c.rows(); ++o3) {
            const double n2 = c.row(o3).squaredNorm();
            if (n2 <= 0.0) continue;
            Entry e{kDistinguishable, static_cast<int>(i), static_cast<int>(j), static_cast<int>(o2),
                    static_cast<int>(o3), 0};
            const auto n = m.herald_photons(e);
            const double raw = (1.0 - overlap) * wa[i] * wb[j] * n2;
            push(e, raw, raw * phi_plus_probability(table, n));
          }
        }
      }
    }
  }

  const Register mem({ModeLabel::bosonic(a.mem_l, m.cut_I), ModeLabel::bosonic(a.mem_r, m.cut_I),
                      ModeLabel::bosonic(b.mem_l, m.cut_II), ModeLabel::bosonic(b.mem_r, m.cut_II)});
  for (Eigen::Index i = 0; i < m.dm; ++i) {
    const auto occ = mem.occupations(i);
    m.nl_I.push_back(occ[0]);
    m.nr_I.push_back(occ[1]);
    m.nl_II.push_back(occ[2]);
    m.nr_II.push_back(occ[3]);
    // Stokes input order per site is (H, V) = (mem_R, mem_L).
    m.m_row.push_back(occ[1] * (m.cut_I + 1) + occ[0]);
    m.m_col.push_back(occ[3] * (m.cut_II + 1) + occ[2]);
  }

  for (const auto& s : settings) {
    const std::array<int, 2> ci{m.cut_I, m.cut_I};
    const std::array<int, 2> cii{m.cut_II, m.cut_II};
    m.analyzers.push_back({fock_transfer(CMatrix(s.photon1.port_amplitudes()), ci),
                           fock_transfer(CMatrix(s.photon4.port_amplitudes()), cii)});
  }
  m.stokes_I = cfg.stokes_detector(cfg.site_I);
  m.stokes_I.eta *= cfg.site_I.eta_ret;
  m.stokes_II = cfg.stokes_detector(cfg.site_II);
  m.stokes_II.eta *= cfg.site_II.eta_ret;
}

MonteCarloModel::~MonteCarloModel() = default;

double MonteCarloModel::herald_probability() const {
  return impl_->cum_herald.empty() ? 0.0 : impl_->cum_herald.back();
}

TrialResult MonteCarloModel::trial(std::size_t setting_index, std::uint64_t trial_index, std::uint64_t master_seed,
                                   double storage_time_us) const {
  const Impl& m = *impl_;
  if (setting_index >= m.analyzers.size()) throw std::invalid_argument("setting index out of range");
  Rng rng(trial_seed(master_seed, setting_index, trial_index));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  TrialResult r;
  r.record.trial_id = trial_index;
  r.record.storage_time_us = storage_time_us;
  NodeStateMachine node;
  node.advance(NodePhase::kWriting);
  node.advance(NodePhase::kAwaitBsm);

  const bool heralded = m.cfg.mc_mode == McMode::kHeralded;
  const auto& cum = heralded ? m.cum_herald : m.cum_raw;
  if (cum.empty() || cum.back() <= 0.0) throw NoEventError("the configuration never heralds a swap");
  const Entry& e = m.entries[pick(cum, unit(rng) * cum.back())];
  if (!heralded) {
    const auto n = m.herald_photons(e);
    const auto clicks = sample_clicks(n, m.herald_detectors, rng);
    BsmOutcome o{};
    for (std::size_t k = 0; k < 4; ++k) o[k] = level(m.herald_detectors[k], clicks.counts[k]);
    if (!is_phi_plus_outcome(o)) {
      node.advance(NodePhase::kWriting);
      r.trace = node.trace();
      return r;
    }
  }
  r.record.bsm_success = true;

  CVector phi = m.memory_row(e);
  phi /= phi.norm();

  const EnsembleParams& si = m.cfg.site_I;
  const EnsembleParams& sii = m.cfg.site_II;
  double th_l_I = 0.0, th_l_II = 0.0, th_d_I = 0.0, th_d_II = 0.0;
  if (si.phase_jitter > 0.0) th_l_I = std::normal_distribution<double>(0.0, si.phase_jitter)(rng);
  if (sii.phase_jitter > 0.0) th_l_II = std::normal_distribution<double>(0.0, sii.phase_jitter)(rng);
  node.advance(NodePhase::kStored, storage_time_us);
  const double lambda = m.cfg.memory.attenuation(storage_time_us);
  if (lambda < 1.0) {
    if (lambda > 0.0) {
      std::normal_distribution<double> g(0.0, std::sqrt(-std::log(lambda) / 2.0));
      th_d_I = g(rng);
      th_d_II = g(rng);
    } else {
      std::uniform_real_distribution<double> full(0.0, 2.0 * std::numbers::pi);
      th_d_I = full(rng);
      th_d_II = full(rng);
    }
  }
  CMatrix mat = CMatrix::Zero(m.d_I, m.d_II);
  for (Eigen::Index i = 0; i < m.dm; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double phase = (th_l_I + si.phi2) * m.nl_I[k] + (th_l_II + sii.phi2) * m.nl_II[k] +
                         th_d_I * (m.nl_I[k] - m.nr_I[k]) + th_d_II * (m.nl_II[k] - m.nr_II[k]);
    mat(m.m_row[k], m.m_col[k]) = phi(i) * std::polar(1.0, phase);
  }
  node.advance(NodePhase::kRetrieved);

  const auto& an = m.analyzers[setting_index];
  const CMatrix m1 = an[0].amplitudes * mat;
  const Eigen::VectorXd p1 = m1.rowwise().squaredNorm();
  std::vector<double> c1(static_cast<std::size_t>(p1.size()));
  std::partial_sum(p1.data(), p1.data() + p1.size(), c1.begin());
  const std::size_t o1 = pick(c1, unit(rng) * c1.back());
  const CVector v4 = an[1].amplitudes * m1.row(static_cast<Eigen::Index>(o1)).transpose();
  const Eigen::VectorXd p4 = v4.cwiseAbs2();
  std::vector<double> c4(static_cast<std::size_t>(p4.size()));
  std::partial_sum(p4.data(), p4.data() + p4.size(), c4.begin());
  const std::size_t o4 = pick(c4, unit(rng) * c4.back());

  const std::array<Detector, 2> di{m.stokes_I, m.stokes_I};
  const std::array<Detector, 2> dii{m.stokes_II, m.stokes_II};
  const auto k1 = sample_clicks(an[0].out_configs[o1], di, rng);
  const auto k4 = sample_clicks(an[1].out_configs[o4], dii, rng);
  const int a1 = analyzer_outcome(m.stokes_I, k1.counts[0], k1.counts[1]);
  const int a4 = analyzer_outcome(m.stokes_II, k4.counts[0], k4.counts[1]);
  node.advance(NodePhase::kVerified);
  node.advance(NodePhase::kIdle);
  if (a1 >= 0 && a4 >= 0) {
    r.outcome = 2 * a1 + a4;
    r.record.fourfold = true;
  }
  r.trace = node.trace();
  return r;
}

CountsTable run_monte_carlo(const ExperimentConfig& cfg, std::span<const VerificationSetting> settings,
                            std::int64_t n_trials, std::uint64_t master_seed, int workers) {
  if (n_trials < 1) throw std::invalid_argument("n_trials must be >= 1");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  const MonteCarloModel model(cfg, settings);
  const double dt = cfg.timing.storage_time_us;
  CountsTable table;
  table.seed = master_seed;
  table.mode = cfg.mc_mode;
  for (std::size_t s = 0; s < settings.size(); ++s) {
    auto run_chunk = [&](std::int64_t begin, std::int64_t end, CountsRow& row) {
      for (std::int64_t t = begin; t < end; ++t) {
        const auto r = model.trial(s, static_cast<std::uint64_t>(t), master_seed, dt);
        ++row.attempts;
        if (r.record.bsm_success) ++row.heralds;
        switch (r.outcome) {
          case 0: ++row.n_pp; break;
          case 1: ++row.n_pm; break;
          case 2: ++row.n_mp; break;
          case 3: ++row.n_mm; break;
          default: break;
        }
      }
    };
    const std::int64_t w = std::min<std::int64_t>(workers, n_trials);
    std::vector<CountsRow> partial(static_cast<std::size_t>(w));
    if (w == 1) {
      run_chunk(0, n_trials, partial[0]);
    } else {
      std::vector<std::thread> pool;
      std::vector<std::exception_ptr> errors(static_cast<std::size_t>(w));
      for (std::int64_t k = 0; k < w; ++k) {
        const std::int64_t begin = n_trials * k / w;
        const std::int64_t end = n_trials * (k + 1) / w;
        pool.emplace_back([&, k, begin, end] {
          try {
            run_chunk(begin, end, partial[static_cast<std::size_t>(k)]);
          } catch (...) {
            errors[static_cast<std::size_t>(k)] = std::current_exception();
          }
        });
      }
      for (auto& th : pool) th.join();
      for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
    }
    CountsRow row;
    row.setting = settings[s];
    for (const auto& p : partial) {
      row.n_pp += p.n_pp;
      row.n_pm += p.n_pm;
      row.n_mp += p.n_mp;
      row.n_mm += p.n_mm;
      row.attempts += p.attempts;
      row.heralds += p.heralds;
    }
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace bdcz
