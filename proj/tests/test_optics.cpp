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

#include "bdcz/optics.hpp"
#include "support.hpp"

namespace bdcz {
namespace {

using testing::Gen;

std::array<ModeLabel, 4> station_modes(int n_max = 2) {
  return {ModeLabel::bosonic("H2", n_max), ModeLabel::bosonic("V2", n_max), ModeLabel::bosonic("H3", n_max),
          ModeLabel::bosonic("V3", n_max)};
}

Register station_register(int n_max = 2) {
  const auto m = station_modes(n_max);
  return Register(std::vector<ModeLabel>(m.begin(), m.end()));
}

/// Two-photon polarization state, one photon in each of (H2, V2) and (H3, V3).
LabeledState two_photon(Complex hh, Complex hv, Complex vh, Complex vv, int n_max = 2) {
  const Register r = station_register(n_max);
  CVector v = CVector::Zero(r.dim());
  const int o_hh[] = {1, 0, 1, 0}, o_hv[] = {1, 0, 0, 1}, o_vh[] = {0, 1, 1, 0}, o_vv[] = {0, 1, 0, 1};
  v(r.basis_index(o_hh)) = hh;
  v(r.basis_index(o_hv)) = hv;
  v(r.basis_index(o_vh)) = vh;
  v(r.basis_index(o_vv)) = vv;
  return LabeledState(r, v / v.norm());
}

double probability(const LinearMap& e, const LabeledState& s) {
  return measure_project(s, e).probability;
}

TEST(Analyzer, PortsAreComplete) {
  Gen g(31);
  for (int i = 0; i < 200; ++i) {
    const Analyzer a = g.coin() ? Analyzer::linear(g.uniform(-180, 180)) : Analyzer::circular();
    const Eigen::Matrix2cd p = a.port_amplitudes();
    const Eigen::Matrix2cd sum = p.row(0).adjoint() * p.row(0) + p.row(1).adjoint() * p.row(1);
    EXPECT_LT((sum - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Analyzer, ParsesAnglesAndCircular) {
  EXPECT_EQ(Analyzer::parse("-22.5"), Analyzer::linear(-22.5));
  EXPECT_EQ(Analyzer::parse("circ"), Analyzer::circular());
  EXPECT_EQ(Analyzer::parse(Analyzer::linear(22.5).label()), Analyzer::linear(22.5));
  EXPECT_THROW(Analyzer::parse("45deg"), std::invalid_argument);
}

TEST(AnalyzerPovm, ClickProbabilities) {
  const auto h = ModeLabel::bosonic("h", 2), v = ModeLabel::bosonic("v", 2);
  const Register r({h, v});
  const int one_h[] = {1, 0}, two_h[] = {2, 0};
  const auto s1 = LabeledState::basis(r, one_h);
  EXPECT_NEAR(probability(analyzer_povm(Analyzer::linear(0), 1.0, h, v).first, s1), 1.0, 1e-12);
  EXPECT_NEAR(probability(analyzer_povm(Analyzer::linear(45), 1.0, h, v).first, s1), 0.5, 1e-12);
  // Brute-force binomial oracle: sum over survivor counts k >= 1 of C(2,k) eta^k (1-eta)^(2-k).
  double oracle = 0.0;
  const double eta = 0.5;
  for (int k = 1; k <= 2; ++k) oracle += (k == 1 ? 2.0 : 1.0) * std::pow(eta, k) * std::pow(1 - eta, 2 - k);
  const double p = probability(analyzer_povm(Analyzer::linear(0), eta, h, v).first, LabeledState::basis(r, two_h));
  EXPECT_NEAR(p, oracle, 1e-12);
  EXPECT_NEAR(p, 0.75, 1e-12);
}

TEST(AnalyzerPovm, ClickAndNoClickAreComplete) {
  Gen g(32);
  const auto h = ModeLabel::bosonic("h", 2), v = ModeLabel::bosonic("v", 2);
  for (int i = 0; i < 100; ++i) {
    const auto [click, none] = analyzer_povm(Analyzer::linear(g.uniform(-90, 90)), g.uniform(), h, v);
    EXPECT_LT((click.op() + none.op() - CMatrix::Identity(9, 9)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(BsmPovm, BellStateResponses) {
  const BSMStation st;
  const auto modes = station_modes();
  const auto e = bsm_phi_plus_povm(st, modes);
  const double r = 1.0 / std::sqrt(2.0);
  // Phi+ always lands on (a+, b+) or (a-, b-).
  EXPECT_NEAR(probability(e, two_photon(r, 0, 0, r)), 1.0, 1e-12);
  EXPECT_NEAR(probability(e, two_photon(0, r, r, 0)), 0.0, 1e-12);
  EXPECT_NEAR(probability(e, two_photon(r, 0, 0, -r)), 0.0, 1e-12);
  EXPECT_NEAR(probability(e, two_photon(0, r, -r, 0)), 0.0, 1e-12);
}

TEST(BsmPovm, PhiMinusGivesMixedPattern) {
  const BSMStation st;
  const auto modes = station_modes();
  const auto povms = bsm_outcome_povms(st, modes);
  const auto outcomes = bsm_outcomes(st);
  const double r = 1.0 / std::sqrt(2.0);
  const auto phi_minus = two_photon(r, 0, 0, -r);
  double mixed = 0.0;
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    const auto& o = outcomes[k];
    if ((o == BsmOutcome{1, 0, 0, 1}) || (o == BsmOutcome{0, 1, 1, 0})) mixed += probability(povms[k], phi_minus);
  }
  EXPECT_NEAR(mixed, 1.0, 1e-12);
}

TEST(BsmPovm, OutcomeElementsSumToIdentity) {
  Gen g(33);
  for (int i = 0; i < 40; ++i) {
    BSMStation st;
    st.analyzers = {Analyzer::linear(g.uniform(-90, 90)), g.coin() ? Analyzer::circular() : Analyzer::linear(45)};
    for (auto& d : st.detectors) d = {g.uniform(), g.uniform(0, 0.1), g.coin()};
    st.mode_overlap = g.coin() ? 1.0 : g.uniform();
    const auto modes = station_modes(g.integer(1, 2));
    const auto povms = bsm_outcome_povms(st, modes);
    CMatrix sum = CMatrix::Zero(povms.front().dim(), povms.front().dim());
    for (const auto& e : povms) sum += e.op();
    EXPECT_LT((sum - CMatrix::Identity(sum.rows(), sum.cols())).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(BsmPovm, SinglePhotonBlockIsProportionalToPhiPlus) {
  Gen g(34);
  const Register r = station_register();
  const int o_hh[] = {1, 0, 1, 0}, o_hv[] = {1, 0, 0, 1}, o_vh[] = {0, 1, 1, 0}, o_vv[] = {0, 1, 0, 1};
  const std::vector<Eigen::Index> idx{r.basis_index(o_hh), r.basis_index(o_hv), r.basis_index(o_vh),
                                      r.basis_index(o_vv)};
  CMatrix phi = CMatrix::Zero(4, 4);
  phi(0, 0) = phi(0, 3) = phi(3, 0) = phi(3, 3) = 0.5;
  for (int i = 0; i < 50; ++i) {
    BSMStation st;
    const double eta = g.uniform();
    for (auto& d : st.detectors) d.eta = eta;
    const CMatrix block = bsm_phi_plus_povm(st, station_modes()).op()(idx, idx);
    EXPECT_LT((block - eta * eta * phi).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Detector, OutcomeProbabilitiesSumToOne) {
  Gen g(35);
  for (int i = 0; i < 200; ++i) {
    const Detector d{g.uniform(), g.uniform(0, 0.5), g.coin()};
    const int n = g.integer(0, 4);
    double s = 0.0;
    for (int o = 0; o < d.outcome_count(); ++o) s += d.outcome_probability(o, n);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(SampleClicks, Limits) {
  Rng rng(36);
  const std::array<int, 1> one{1};
  const std::array<Detector, 1> perfect{Detector{1.0, 0.0, false}};
  const std::array<Detector, 1> blind{Detector{0.0, 0.0, false}};
  for (int i = 0; i < 1000; ++i) {
    EXPECT_TRUE(sample_clicks(one, perfect, rng).clicks[0]);
    EXPECT_FALSE(sample_clicks(one, blind, rng).clicks[0]);
  }
}

TEST(SampleClicks, DarkCountRate) {
  Rng rng(37);
  const std::array<int, 1> none{0};
  const std::array<Detector, 1> dark{Detector{0.0, 0.01, false}};
  const int n = 1000000;
  int clicks = 0;
  for (int i = 0; i < n; ++i) clicks += sample_clicks(none, dark, rng).clicks[0] ? 1 : 0;
  const double f = static_cast<double>(clicks) / n;
  EXPECT_NEAR(f, 0.01, 3.0 * std::sqrt(0.01 * 0.99 / n));
}

TEST(SampleClicks, DeterministicGivenStream) {
  Rng a(38), b(38);
  const std::array<int, 3> photons{2, 0, 1};
  const std::array<Detector, 3> d{Detector{0.5, 0.1, true}, Detector{0.5, 0.1, false}, Detector{0.3, 0.0, false}};
  for (int i = 0; i < 100; ++i) {
    const auto x = sample_clicks(photons, d, a), y = sample_clicks(photons, d, b);
    EXPECT_EQ(x.counts, y.counts);
  }
}

TEST(Coincidence, Logic) {
  ClickPattern p{{true, false}, {1, 0}, 7}, q{{true, true}, {1, 1}, 7};
  const std::vector<ClickPattern> pats{p, q};
  const std::vector<Channel> all{{0, 0}, {1, 0}, {1, 1}};
  const std::vector<Channel> missing{{0, 1}, {1, 0}};
  EXPECT_TRUE(coincidence(pats, all));
  EXPECT_FALSE(coincidence(pats, missing));
  EXPECT_TRUE(coincidence(pats, std::span<const Channel>{}));
  q.window_id = 8;
  const std::vector<ClickPattern> misaligned{p, q};
  EXPECT_THROW(coincidence(misaligned, all), std::invalid_argument);
}

/// Photon numbers at (a+, a-, b+, b-) drawn from |<out|U|in>|^2 for a Fock input.
class OutputSampler {
 public:
  OutputSampler(const BSMStation& st, std::span<const int> input) {
    const std::array<int, 4> cut{2, 2, 2, 2};
    const auto t = fock_transfer(bsm_mode_map(st), cut);
    Eigen::Index col = 0;
    for (int k = 0; k < 4; ++k) col = col * 3 + input[static_cast<std::size_t>(k)];
    configs_ = t.out_configs;
    std::vector<double> w;
    for (std::size_t o = 0; o < configs_.size(); ++o) w.push_back(std::norm(t.amplitudes(static_cast<Eigen::Index>(o), col)));
    dist_ = std::discrete_distribution<std::size_t>(w.begin(), w.end());
  }
  const std::vector<int>& operator()(Rng& rng) { return configs_[dist_(rng)]; }

 private:
  std::vector<std::vector<int>> configs_;
  std::discrete_distribution<std::size_t> dist_;
};

TEST(BsmSampling, ClickFrequenciesMatchPovm) {
  BSMStation st;
  st.detectors = {Detector{0.7, 0.01, false}, Detector{0.6, 0.0, false}, Detector{0.8, 0.02, true},
                  Detector{0.5, 0.0, true}};
  const auto modes = station_modes();
  const auto povms = bsm_outcome_povms(st, modes);
  const auto outcomes = bsm_outcomes(st);
  const Register r = station_register();
  const std::vector<std::array<int, 4>> inputs{{1, 0, 1, 0}, {2, 0, 0, 1}, {1, 1, 2, 0}};
  Rng rng(39);
  const int n = 1000000;
  for (const auto& in : inputs) {
    const auto state = LabeledState::basis(r, in);
    OutputSampler sample(st, in);
    std::vector<std::int64_t> hits(outcomes.size(), 0);
    for (int i = 0; i < n; ++i) {
      const auto c = sample_clicks(sample(rng), st.detectors, rng);
      BsmOutcome o{};
      for (std::size_t k = 0; k < 4; ++k) {
        o[k] = st.detectors[k].number_resolving ? std::min(c.counts[k], 2) : (c.counts[k] > 0 ? 1 : 0);
      }
      ++hits[static_cast<std::size_t>(std::find(outcomes.begin(), outcomes.end(), o) - outcomes.begin())];
    }
    for (std::size_t k = 0; k < outcomes.size(); ++k) {
      const double p = probability(povms[k], state);
      const double se = std::sqrt(std::max(p * (1 - p), 1e-12) / n);
      EXPECT_NEAR(static_cast<double>(hits[k]) / n, p, 4.0 * se) << "outcome " << k;
    }
  }
}

}  // namespace
}  // namespace bdcz
