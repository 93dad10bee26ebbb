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

#include "bdcz/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <sstream>

#include "bdcz/analysis.hpp"
#include "bdcz/calibration.hpp"
#include "bdcz/config.hpp"
#include "bdcz/errors.hpp"
#include "bdcz/report.hpp"

namespace bdcz {
namespace {

using Json = nlohmann::ordered_json;

struct Options {
  std::string config;
  std::optional<std::string> engine;
  std::optional<std::int64_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> workers;
  std::vector<double> times;
  std::vector<double> anchor_first{0.5, 0.799};
  std::vector<double> anchor_second{4.5, 0.707};
};

struct Context {
  ExperimentConfig cfg;
  std::string digest;
  std::uint64_t seed = 0;
};

Context load(const Options& o) {
  Context c;
  c.cfg = load_config(o.config);
  if (o.engine) {
    if (*o.engine == "exact") {
      c.cfg.engine = EngineKind::kExact;
    } else if (*o.engine == "mc") {
      c.cfg.engine = EngineKind::kMonteCarlo;
    } else {
      throw ConfigError("--engine: expected 'exact' or 'mc'");
    }
  }
  if (o.trials) c.cfg.n_trials = *o.trials;
  if (o.seed) c.cfg.master_seed = *o.seed;
  if (o.out) c.cfg.output_dir = *o.out;
  if (o.workers) c.cfg.workers = *o.workers;
  c.cfg.validate();
  // Worker count and output location never change results.
  ExperimentConfig keyed = c.cfg;
  keyed.workers = 1;
  keyed.output_dir = "out";
  c.digest = config_digest(keyed);
  c.seed = c.cfg.engine == EngineKind::kExact ? 0 : c.cfg.master_seed;
  return c;
}

bool exact(const Context& c) { return c.cfg.engine == EngineKind::kExact; }

Json header(const Context& c, const char* kind) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = kind;
  j["scenario"] = c.cfg.scenario;
  j["engine"] = exact(c) ? "exact" : "mc";
  j["inputs_digest"] = c.digest;
  j["seed"] = c.seed;
  return j;
}

ResultRecord record(const Context& c, const std::string& quantity, double value, double se) {
  return {c.cfg.scenario, quantity, value, se, c.digest, c.seed};
}

Json setting_json(const VerificationSetting& s) { return Json::array({s.photon1.label(), s.photon4.label()}); }

Json correlation_json(const VerificationSetting& s, const CorrelationEstimate& e) {
  Json j;
  j["setting"] = setting_json(s);
  j["E"] = e.value;
  j["stderr"] = e.std_error;
  j["n_total"] = e.n_total;
  return j;
}

Json fidelity_json(const FidelityEstimate& f) {
  Json j;
  j["F"] = f.f;
  j["stderr"] = f.std_error;
  j["E_xx"] = f.e_xx;
  j["E_yy"] = f.e_yy;
  j["E_zz"] = f.e_zz;
  return j;
}

std::vector<VerificationSetting> with_fidelity_settings(std::vector<VerificationSetting> s) {
  for (const auto& f : fidelity_settings()) {
    if (std::find(s.begin(), s.end(), f) == s.end()) s.push_back(f);
  }
  return s;
}

std::vector<CorrelationEstimate> correlations(const Context& c, std::span<const VerificationSetting> settings,
                                              double storage_time_us, std::vector<SettingProbabilities>* exact_rows,
                                              CountsTable* counts) {
  std::vector<CorrelationEstimate> out;
  if (exact(c)) {
    const auto r = ExactPipeline(c.cfg).report(settings, storage_time_us);
    for (const auto& s : r.settings) out.push_back(exact_correlation(s.joint));
    if (exact_rows) *exact_rows = r.settings;
  } else {
    ExperimentConfig cfg = c.cfg;
    cfg.timing.storage_time_us = storage_time_us;
    const auto t = run_monte_carlo(cfg, settings, cfg.n_trials, cfg.master_seed, cfg.workers);
    for (const auto& row : t.rows) out.push_back(correlation(row));
    if (counts) *counts = t;
  }
  return out;
}

// ---------------------------------------------------------------------------

OutputSet cmd_swap(const Context& c, std::ostream& out) {
  OutputSet files(c.cfg.output_dir);
  const auto settings = with_fidelity_settings(c.cfg.chsh_settings);
  Json j = header(c, "state_report");
  j["storage_time_us"] = c.cfg.timing.storage_time_us;
  Json records = Json::array();
  if (exact(c)) {
    const auto r = ExactPipeline(c.cfg).report(settings, c.cfg.timing.storage_time_us);
    const auto f = fidelity_from_settings(std::span<const SettingProbabilities>(r.settings));
    j["bsm_success_probability"] = r.bsm_success_probability;
    j["fidelity_memory"] = r.fidelity_mem;
    j["fidelity_final"] = r.fidelity_final;
    j["fidelity_estimate"] = fidelity_json(f);
    j["rho_memory_qubits"] = to_json(r.rho_mem_qubits);
    j["rho_final"] = to_json(r.rho_final);
    Json rows = Json::array();
    for (const auto& s : r.settings) {
      Json row;
      row["setting"] = setting_json(s.setting);
      row["joint"] = s.joint;
      row["fourfold"] = s.fourfold();
      rows.push_back(row);
    }
    j["settings"] = rows;
    records.push_back(to_json(record(c, "F", r.fidelity_final, 0.0)));
    files.add("probabilities.csv", probabilities_csv(r.settings));
    out << "F = " << format_double(r.fidelity_final) << " (BSM success " << format_double(r.bsm_success_probability)
        << ")\n";
  } else {
    const MonteCarloModel model(c.cfg, settings);
    const auto t = run_monte_carlo(c.cfg, settings, c.cfg.n_trials, c.cfg.master_seed, c.cfg.workers);
    const auto f = fidelity_from_settings(std::span<const CountsRow>(t.rows));
    j["n_trials"] = c.cfg.n_trials;
    j["mc_mode"] = c.cfg.mc_mode == McMode::kHeralded ? "heralded" : "raw";
    j["herald_probability"] = model.herald_probability();
    j["fidelity_estimate"] = fidelity_json(f);
    Json rows = Json::array();
    for (const auto& r : t.rows) {
      Json row;
      row["setting"] = setting_json(r.setting);
      row["counts"] = {r.n_pp, r.n_pm, r.n_mp, r.n_mm};
      row["attempts"] = r.attempts;
      row["heralds"] = r.heralds;
      rows.push_back(row);
    }
    j["settings"] = rows;
    records.push_back(to_json(record(c, "F", f.f, f.std_error)));
    files.add("counts.csv", counts_csv(t));
    out << "F = " << format_double(f.f) << " +- " << format_double(f.std_error) << "\n";
  }
  j["records"] = records;
  files.add("state_report.json", j.dump(2) + "\n");
  return files;
}

OutputSet cmd_scan(const Context& c, std::vector<double> times, std::ostream& out) {
  if (times.empty()) times = c.cfg.scan_times_us;
  for (double t : times) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw ConfigError("--times: storage times must be finite and >= 0");
  }
  std::sort(times.begin(), times.end());
  const VerificationSetting s = visibility_setting();
  const std::span<const VerificationSetting> one(&s, 1);
  std::vector<ScanRow> rows;
  std::optional<ExactPipeline> pipeline;
  if (exact(c)) pipeline.emplace(c.cfg);
  for (double t : times) {
    if (pipeline) {
      const auto r = pipeline->report(one, t);
      const auto e = exact_correlation(r.settings.front().joint);
      rows.push_back({t, e.value, 0.0});
    } else {
      ExperimentConfig cfg = c.cfg;
      cfg.timing.storage_time_us = t;
      const auto table = run_monte_carlo(cfg, one, cfg.n_trials, cfg.master_seed, cfg.workers);
      const auto v = visibility(table.rows.front());
      rows.push_back({t, v.value, v.std_error});
    }
    out << format_double(t) << " us: V = " << format_double(rows.back().visibility) << "\n";
  }
  OutputSet files(c.cfg.output_dir);
  files.add("scan.csv", scan_csv(rows));
  return files;
}

OutputSet cmd_chsh(const Context& c, std::ostream& out) {
  const auto& settings = c.cfg.chsh_settings;
  const auto e = correlations(c, settings, c.cfg.timing.storage_time_us, nullptr, nullptr);
  const auto r = chsh_s(std::span<const CorrelationEstimate, 4>(e.data(), 4),
                        std::span<const VerificationSetting, 4>(settings.data(), 4));
  Json j = header(c, "chsh");
  j["storage_time_us"] = c.cfg.timing.storage_time_us;
  j["S"] = r.s;
  j["stderr"] = r.std_error;
  const double sigma = r.sigma();
  j["sigma"] = std::isfinite(sigma) ? Json(sigma) : Json(nullptr);
  j["sign_pattern"] = r.sign_pattern;
  j["negated_setting"] = setting_json(settings[static_cast<std::size_t>(r.sign_pattern)]);
  j["classical_bound"] = 2.0;
  Json corr = Json::array();
  Json records = Json::array();
  records.push_back(to_json(record(c, "S", r.s, r.std_error)));
  for (std::size_t i = 0; i < 4; ++i) {
    corr.push_back(correlation_json(settings[i], e[i]));
    records.push_back(to_json(record(c, "E", e[i].value, e[i].std_error)));
  }
  j["correlations"] = corr;
  j["records"] = records;
  OutputSet files(c.cfg.output_dir);
  files.add("chsh.json", j.dump(2) + "\n");
  out << "S = " << format_double(r.s) << " +- " << format_double(r.std_error) << "\n";
  return files;
}

OutputSet cmd_fidelity(const Context& c, std::ostream& out) {
  const auto fs = fidelity_settings();
  std::vector<VerificationSetting> settings(fs.begin(), fs.end());
  std::vector<SettingProbabilities> exact_rows;
  CountsTable counts;
  const auto e = correlations(c, settings, c.cfg.timing.storage_time_us, &exact_rows, &counts);
  const auto f = fidelity_from_correlations(e[0], e[2], e[1]);
  const double threshold = werner_chsh_threshold();
  // v_aa: the +/- visibility of photons 1 and 4, i.e. the (45, 45) correlation.
  const double v_aa = e[0].value;
  Json j = header(c, "fidelity");
  j["storage_time_us"] = c.cfg.timing.storage_time_us;
  j["F"] = f.f;
  j["stderr"] = f.std_error;
  j["E_xx"] = f.e_xx;
  j["E_yy"] = f.e_yy;
  j["E_zz"] = f.e_zz;
  j["werner_threshold"] = threshold;
  j["above_threshold"] = f.f > threshold;
  if (exact(c)) {
    const auto r = ExactPipeline(c.cfg).report(settings, c.cfg.timing.storage_time_us);
    j["fidelity_pure"] = r.fidelity_final;
  }
  Json precision;
  precision["v_ap_I"] = c.cfg.site_I.source_visibility;
  precision["v_ap_II"] = c.cfg.site_II.source_visibility;
  precision["v_aa"] = v_aa;
  if (v_aa > 0.0) {
    const auto p = estimate_local_precision(c.cfg.site_I.source_visibility, c.cfg.site_II.source_visibility,
                                            std::min(v_aa, 1.0), 3.0 * e[0].std_error);
    precision["value"] = p.value;
    precision["unclamped"] = p.unclamped;
    precision["model_violation"] = p.model_violation;
  } else {
    precision["value"] = nullptr;
  }
  j["local_precision"] = precision;
  Json records = Json::array();
  records.push_back(to_json(record(c, "F", f.f, f.std_error)));
  records.push_back(to_json(record(c, "V", v_aa, e[0].std_error)));
  j["records"] = records;
  OutputSet files(c.cfg.output_dir);
  files.add("fidelity.json", j.dump(2) + "\n");
  out << "F = " << format_double(f.f) << " +- " << format_double(f.std_error) << " (threshold "
      << format_double(threshold) << ")\n";
  return files;
}

OutputSet cmd_rate(const Context& c, std::ostream& out) {
  const auto& tc = c.cfg.timing;
  const double rate = attempt_rate(tc);
  const double p = ExactPipeline(c.cfg).swap().success_probability;
  std::uint64_t draw = 0;
  const auto log = schedule(tc, [&](std::int64_t slot) {
    // Independent Bernoulli(p) per slot, reproducible from the seed.
    draw = trial_seed(c.cfg.master_seed, 0xfeedULL, static_cast<std::uint64_t>(slot));
    return static_cast<double>(draw >> 11) * 0x1.0p-53 < p;
  });
  Json j = header(c, "rate");
  j["write_slots_per_window"] = tc.write_slots();
  j["fiber_delay_ns"] = tc.fiber_delay_ns();
  j["attempt_rate_per_s"] = rate;
  j["bsm_success_probability"] = p;
  j["heralded_swap_rate_per_s"] = rate * p;
  Json ev;
  for (auto k : {EventKind::kWrite, EventKind::kBsmWindow, EventKind::kFeedbackStop, EventKind::kRetrieve,
                 EventKind::kDetect}) {
    ev[to_string(k)] = log.count(k);
  }
  j["scheduled_events"] = ev;
  Json records = Json::array();
  records.push_back(to_json(record(c, "rate", rate, 0.0)));
  j["records"] = records;
  OutputSet files(c.cfg.output_dir);
  files.add("rate.json", j.dump(2) + "\n");
  out << "attempt rate = " << format_double(rate) << " /s, fiber delay = " << format_double(tc.fiber_delay_ns())
      << " ns\n";
  return files;
}

OutputSet cmd_calibrate(const Context& c, const Options& o, std::ostream& out) {
  if (o.anchor_first.size() != 2 || o.anchor_second.size() != 2) {
    throw ConfigError("--anchor: expected 't_us,visibility'");
  }
  const auto cal = calibrate_memory(c.cfg, {o.anchor_first[0], o.anchor_first[1]},
                                    {o.anchor_second[0], o.anchor_second[1]});
  Json j = header(c, "calibration");
  j["model"] = cal.channel.model == MemoryModel::kExponential ? "exponential" : "gaussian";
  j["tau_us"] = cal.channel.tau_us;
  j["v0"] = cal.channel.v0;
  j["lambda_at_anchors"] = {cal.lambda_first, cal.lambda_second};
  j["v0_bounded"] = cal.v0_bounded;
  j["visibility_at_first_anchor"] = cal.visibility_first;
  OutputSet files(c.cfg.output_dir);
  files.add("calibration.json", j.dump(2) + "\n");
  out << "memory:\n  model: " << j["model"].get<std::string>() << "\n  tau_us: " << format_double(cal.channel.tau_us)
      << "\n  v0: " << format_double(cal.channel.v0) << "\n";
  return files;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulator of a two-ensemble quantum-repeater node", "bdcz_node"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "experiment config file")->required();
    sub->add_option("--engine", o.engine, "exact or mc");
    sub->add_option("--trials", o.trials, "Monte Carlo trials per setting");
    sub->add_option("--seed", o.seed, "Monte Carlo master seed");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--workers", o.workers, "Monte Carlo worker threads");
  };
  auto* swap = app.add_subcommand("swap", "heralded swap: state report and counts or probabilities");
  auto* scan = app.add_subcommand("scan-storage", "+/- visibility against storage time");
  auto* chsh = app.add_subcommand("chsh", "CHSH S parameter");
  auto* fid = app.add_subcommand("fidelity", "fidelity to phi+ from three bases");
  auto* rate = app.add_subcommand("rate", "write-attempt rate and schedule summary");
  auto* cal = app.add_subcommand("calibrate", "fit memory decay to two visibility anchors");
  for (auto* s : {swap, scan, chsh, fid, rate, cal}) common(s);
  scan->add_option("--times", o.times, "storage times in us")->delimiter(',');
  cal->add_option("--anchor1", o.anchor_first, "t_us,visibility")->delimiter(',');
  cal->add_option("--anchor2", o.anchor_second, "t_us,visibility")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    const Context c = load(o);
    std::optional<OutputSet> files;
    if (*swap) files = cmd_swap(c, out);
    if (*scan) files = cmd_scan(c, o.times, out);
    if (*chsh) files = cmd_chsh(c, out);
    if (*fid) files = cmd_fidelity(c, out);
    if (*rate) files = cmd_rate(c, out);
    if (*cal) files = cmd_calibrate(c, o, out);
    if (files) files->commit();
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace bdcz
