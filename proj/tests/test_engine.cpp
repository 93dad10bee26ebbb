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
#include <set>

#include "bdcz/analysis.hpp"
#include "bdcz/config.hpp"
#include "bdcz/experiment.hpp"
#include "support.hpp"

namespace bdcz {
namespace {

using testing::fixture;
using testing::Gen;

TimingConfig six_metre() { return TimingConfig{}; }

TimingConfig three_hundred_metre() {
  TimingConfig t;
  t.cycles_per_window = 200;
  t.cycle_us = 20;
  t.writes_per_cycle = 8;
  t.write_interval_us = 1.5;
  t.storage_time_us = 1.23;
  t.fiber_length_m = 150;
  return t;
}

// ---------------------------------------------------------------------------
// Timing

TEST(Timing, WriteSlotsPerWindow) {
  EXPECT_EQ(schedule(six_metre()).count(EventKind::kWrite), 2500u);
  EXPECT_EQ(schedule(three_hundred_metre()).count(EventKind::kWrite), 1600u);
  EXPECT_EQ(six_metre().write_slots(), 2500);
}

TEST(Timing, FiberDelay) {
  EXPECT_NEAR(three_hundred_metre().fiber_delay_ns(), 730.0, 1.0);
  const auto log = schedule(three_hundred_metre());
  EXPECT_NEAR(log.events[1].time_ns - log.events[0].time_ns, 730.0, 1.0);
  EXPECT_EQ(log.events[1].kind, EventKind::kBsmWindow);
}

TEST(Timing, AttemptRate) {
  EXPECT_NEAR(attempt_rate(six_metre()), 1.0e5, 1e-6);
  EXPECT_NEAR(attempt_rate(three_hundred_metre()), 6.4e4, 1e-6);
  TimingConfig idle;
  idle.cycles_per_window = 0;
  EXPECT_EQ(attempt_rate(idle), 0.0);
}

TEST(Timing, InfeasibleTimingNamesTheInequality) {
  TimingConfig t;
  t.writes_per_cycle = 20;
  try {
    t.validate();
    FAIL() << "expected rejection";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("N * write_interval_us <= cycle_us"), std::string::npos);
  }
  t = TimingConfig{};
  t.cycles_per_window = 400;
  try {
    t.validate();
    FAIL() << "expected rejection";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("cycles_per_window * cycle_us <= window_ms * 1000"), std::string::npos);
  }
  t = three_hundred_metre();
  t.storage_time_us = 0.5;
  EXPECT_THROW(schedule(t), std::invalid_argument);
}

TEST(Timing, FeedbackStopsTheCycle) {
  Gen g(51);
  for (int i = 0; i < 200; ++i) {
    TimingConfig t = g.coin() ? six_metre() : three_hundred_metre();
    t.cycles_per_window = g.integer(1, 40);
    const double p = g.uniform(0.0, 0.5);
    std::mt19937_64 rng(static_cast<std::uint64_t>(i));
    std::set<std::int64_t> successes;
    const auto log = schedule(t, [&](std::int64_t slot) {
      const bool ok = std::uniform_real_distribution<double>()(rng) < p;
      if (ok) successes.insert(slot);
      return ok;
    });
    ASSERT_TRUE(log.is_time_ordered());
    ASSERT_TRUE(log.feedback_respected());
    EXPECT_EQ(log.count(EventKind::kFeedbackStop), successes.size());
    EXPECT_EQ(log.count(EventKind::kRetrieve), successes.size());
    EXPECT_EQ(log.count(EventKind::kWrite), log.count(EventKind::kBsmWindow));
    for (const auto& e : log.events) {
      if (e.kind != EventKind::kRetrieve) continue;
      const auto w = std::find_if(log.events.begin(), log.events.end(), [&](const Event& x) {
        return x.kind == EventKind::kWrite && x.slot == e.slot;
      });
      ASSERT_NE(w, log.events.end());
      EXPECT_NEAR(e.time_ns - w->time_ns, t.storage_time_us * 1000.0, 1e-6);
    }
  }
}

TEST(Timing, FeedbackCheckDetectsViolations) {
  EventLog log;
  log.events = {{0, EventKind::kWrite, "I+II", 0, 0},
                {10, EventKind::kBsmWindow, "BSM", 0, 0},
                {10, EventKind::kFeedbackStop, "BSM", 0, 0},
                {1000, EventKind::kWrite, "I+II", 1, 0}};
  EXPECT_FALSE(log.feedback_respected());
  log.events = {{10, EventKind::kFeedbackStop, "BSM", 0, 0}};
  EXPECT_FALSE(log.feedback_respected());
}

// ---------------------------------------------------------------------------
// Exact engine

TEST(ExactEngine, IdealFixtureIsPerfect) {
  const auto cfg = load_config(fixture("ideal.cfg"));
  const auto s = fidelity_settings();
  const auto r = run_exact(cfg, s);
  EXPECT_NEAR(r.fidelity_final, 1.0, 1e-9);
  EXPECT_NEAR(r.fidelity_mem, 1.0, 1e-9);
  EXPECT_NEAR(r.bsm_success_probability, 0.25, 1e-12);
}

TEST(ExactEngine, OutcomeProbabilitiesAreComplete) {
  Gen g(52);
  for (int i = 0; i < 10; ++i) {
    ExperimentConfig c;
    for (auto* s : {&c.site_I, &c.site_II}) {
      s->chi = g.uniform(0.001, 0.03);
      s->eta_as = 0.4;
      s->eta_ret = g.uniform(0.3, 1.0);
      s->eta_s = g.uniform(0.3, 1.0);
    }
    c.verification = {g.uniform(0, 0.01), g.coin()};
    const ExactPipeline p(c);
    const auto& swap = p.swap();
    const auto stokes = stokes_state(swap.conditional, c.site_I, c.site_II, c.memory, 0.0);
    const VerificationSetting setting{Analyzer::linear(g.uniform(-90, 90)), Analyzer::circular()};
    const auto joint = verification_probabilities(stokes, setting, c.stokes_detector(c.site_I),
                                                  c.stokes_detector(c.site_II));
    // All nine (+, -, other) x (+, -, other) outcomes.
    const auto a = SiteModes::of(kSiteI), b = SiteModes::of(kSiteII);
    const std::vector<std::string> order{a.s_h, a.s_v, b.s_h, b.s_v};
    const auto red = permute(partial_trace(stokes, order), order);
    const auto p1 = analyzer_outcome_povms(setting.photon1, c.stokes_detector(c.site_I), c.stokes_detector(c.site_I),
                                           red.reg()[0], red.reg()[1]);
    const auto p4 = analyzer_outcome_povms(setting.photon4, c.stokes_detector(c.site_II),
                                           c.stokes_detector(c.site_II), red.reg()[2], red.reg()[3]);
    double total = 0.0;
    for (int x = 0; x < 3; ++x) {
      for (int y = 0; y < 3; ++y) {
        const CMatrix e = Eigen::kroneckerProduct(p1[x].op(), p4[y].op()).eval();
        const double q = (red.matrix() * e).trace().real();
        if (x < 2 && y < 2) EXPECT_NEAR(q, joint[static_cast<std::size_t>(2 * x + y)], 1e-10 * swap.success_probability);
        total += q;
      }
    }
    EXPECT_NEAR(total, swap.success_probability, 1e-10 * swap.success_probability);
    const auto rep = p.report(std::span<const VerificationSetting>(&setting, 1), 0.0);
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(rep.settings[0].joint[k], joint[k], 1e-10 * swap.success_probability);
  }
}

TEST(ExactEngine, SixMetreFixtureTargets) {
  const auto cfg = load_config(fixture("paper_6m.cfg"));
  const ExactPipeline p(cfg);
  std::vector<CorrelationEstimate> e;
  const auto r = p.report(cfg.chsh_settings, 0.5);
  for (const auto& s : r.settings) e.push_back(exact_correlation(s.joint));
  const auto chsh = chsh_s(std::span<const CorrelationEstimate, 4>(e.data(), 4),
                           std::span<const VerificationSetting, 4>(cfg.chsh_settings.data(), 4));
  EXPECT_GE(chsh.s, 2.11);
  EXPECT_LE(chsh.s, 2.41);
}

// ---------------------------------------------------------------------------
// Monte Carlo engine

ExperimentConfig lossy_single_excitation() {
  ExperimentConfig c;
  for (auto* s : {&c.site_I, &c.site_II}) {
    s->kind = SourceKind::kSingleExcitation;
    s->eta_as = 0.6;
    s->eta_ret = 0.5;
    s->eta_s = 0.8;
    s->source_visibility = 0.9;
  }
  c.memory = {MemoryModel::kExponential, 20.0, 0.95};
  c.timing.storage_time_us = 1.0;
  return c;
}

TEST(MonteCarlo, DeterministicAndPartitionIndependent) {
  const auto cfg = load_config(fixture("paper_6m.cfg"));
  const auto& s = cfg.chsh_settings;
  const auto one = run_monte_carlo(cfg, s, 20000, 99, 1);
  EXPECT_EQ(run_monte_carlo(cfg, s, 20000, 99, 1), one);
  EXPECT_EQ(run_monte_carlo(cfg, s, 20000, 99, 3), one);
  EXPECT_EQ(run_monte_carlo(cfg, s, 20000, 99, 8), one);
  EXPECT_NE(run_monte_carlo(cfg, s, 20000, 100, 1), one);
}

TEST(MonteCarlo, CountsAreConsistent) {
  auto cfg = lossy_single_excitation();
  for (auto mode : {McMode::kHeralded, McMode::kRaw}) {
    cfg.mc_mode = mode;
    const auto t = run_monte_carlo(cfg, cfg.chsh_settings, 5000, 3, 2);
    for (const auto& r : t.rows) {
      EXPECT_EQ(r.attempts, 5000);
      EXPECT_LE(r.fourfold(), r.heralds);
      EXPECT_LE(r.heralds, r.attempts);
      for (auto n : {r.n_pp, r.n_pm, r.n_mp, r.n_mm}) EXPECT_GE(n, 0);
      if (mode == McMode::kHeralded) EXPECT_EQ(r.heralds, r.attempts);
    }
  }
}

TEST(MonteCarlo, TrialTracesAreLegal) {
  auto cfg = lossy_single_excitation();
  for (auto mode : {McMode::kHeralded, McMode::kRaw}) {
    cfg.mc_mode = mode;
    const MonteCarloModel m(cfg, cfg.chsh_settings);
    for (std::uint64_t i = 0; i < 2000; ++i) {
      const auto r = m.trial(i % 4, i, 5, 1.0);
      ASSERT_TRUE(is_legal_trace(r.trace));
      EXPECT_TRUE(!r.record.fourfold || r.record.bsm_success);
      EXPECT_EQ(r.record.fourfold, r.outcome >= 0);
      if (!r.record.bsm_success) EXPECT_EQ(r.trace.back().phase, NodePhase::kWriting);
    }
  }
}

TEST(MonteCarlo, RawHeraldRateMatchesExact) {
  auto cfg = lossy_single_excitation();
  cfg.mc_mode = McMode::kRaw;
  const MonteCarloModel m(cfg, cfg.chsh_settings);
  const double p = ExactPipeline(cfg).swap().success_probability;
  EXPECT_NEAR(m.herald_probability(), p, 1e-12);
  const std::int64_t n = 200000;
  const auto t = run_monte_carlo(cfg, std::span<const VerificationSetting>(cfg.chsh_settings).first(1), n, 8, 1);
  EXPECT_NEAR(static_cast<double>(t.rows[0].heralds) / n, p, 4.0 * std::sqrt(p * (1 - p) / n));
}

/// Every MC outcome frequency within 4 binomial standard errors of the exact value.
void expect_agreement(const ExperimentConfig& cfg, std::int64_t n, int workers) {
  const auto& s = cfg.chsh_settings;
  const auto ex = ExactPipeline(cfg).report(s, cfg.timing.storage_time_us);
  const auto mc = run_monte_carlo(cfg, s, n, cfg.master_seed, workers);
  const double norm = cfg.mc_mode == McMode::kHeralded ? ex.bsm_success_probability : 1.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const std::int64_t counts[] = {mc.rows[i].n_pp, mc.rows[i].n_pm, mc.rows[i].n_mp, mc.rows[i].n_mm};
    for (int k = 0; k < 4; ++k) {
      const double p = ex.settings[i].joint[static_cast<std::size_t>(k)] / norm;
      const double se = std::sqrt(p * (1 - p) / static_cast<double>(n));
      EXPECT_NEAR(static_cast<double>(counts[k]) / static_cast<double>(n), p, 4.0 * se)
          << cfg.scenario << " setting " << i << " outcome " << k;
    }
  }
}

TEST(MonteCarlo, AgreesWithExactOnNoisyHardware) {
  auto cfg = lossy_single_excitation();
  cfg.scenario = "noisy";
  cfg.site_I.kind = cfg.site_II.kind = SourceKind::kThermal;
  cfg.site_I.chi = cfg.site_II.chi = 0.05;
  cfg.site_I.truncation = cfg.site_II.truncation = 3;
  cfg.site_I.phi1 = 0.3;
  cfg.site_II.phi2 = -0.2;
  cfg.site_I.phase_jitter = 0.2;
  cfg.station.mode_overlap = 0.8;
  for (auto& d : cfg.station.detectors) d = {0.9, 0.002, false};
  cfg.station.detectors[2].number_resolving = true;
  cfg.verification = {0.001, true};
  expect_agreement(cfg, 200000, 2);
}

TEST(MonteCarlo, AgreesWithExactInRawMode) {
  auto cfg = lossy_single_excitation();
  cfg.scenario = "raw";
  cfg.mc_mode = McMode::kRaw;
  expect_agreement(cfg, 200000, 2);
}

TEST(MonteCarlo, AgreesWithExactOnLongFiberFixture) {
  expect_agreement(load_config(fixture("paper_300m.cfg")), 200000, 2);
}

TEST(MonteCarlo, IdealCorrelation) {
  const auto cfg = load_config(fixture("ideal.cfg"));
  const VerificationSetting s{Analyzer::linear(0), Analyzer::linear(22.5)};
  const auto t = run_monte_carlo(cfg, std::span<const VerificationSetting>(&s, 1), 1000000, 17, 1);
  const auto e = correlation(t.rows[0]);
  EXPECT_NEAR(e.value, std::numbers::sqrt2 / 2, 4.0 * e.std_error);
}

TEST(MonteCarlo, RejectsUnequalAntiStokesEfficiency) {
  auto cfg = lossy_single_excitation();
  cfg.site_II.eta_as = 0.5;
  EXPECT_THROW(MonteCarloModel(cfg, cfg.chsh_settings), ConfigError);
}

TEST(MonteCarlo, TrialSeedsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 4; ++s) {
    for (std::uint64_t i = 0; i < 5000; ++i) seen.insert(trial_seed(1, s, i));
  }
  EXPECT_EQ(seen.size(), 20000u);
  EXPECT_NE(trial_seed(1, 0, 0), trial_seed(2, 0, 0));
}

}  // namespace
}  // namespace bdcz
