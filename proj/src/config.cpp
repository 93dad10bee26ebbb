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

#include "bdcz/config.hpp"

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "bdcz/errors.hpp"

namespace bdcz {
namespace {

class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError(path_ + ": expected a mapping");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return node_ && node_.IsMap() && node_[key] && !node_[key].IsNull();
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = node_[key].as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(path(key) + ": cannot read value '" + YAML::Dump(node_[key]) + "'");
    }
  }

  YAML::Node child(const std::string& key) {
    seen_.insert(key);
    return node_ && node_.IsMap() ? node_[key] : YAML::Node();
  }

  std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  /// Rejects keys never asked for.
  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto k = kv.first.as<std::string>();
      if (!seen_.count(k)) throw ConfigError(path(k) + ": unknown key");
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

EnsembleParams read_site(YAML::Node node, const std::string& path) {
  if (!node || node.IsNull()) throw ConfigError(path + ": section missing");
  Section s(node, path);
  EnsembleParams p;
  s.get("chi", p.chi);
  if (s.has("chi_l")) {
    double v = 0;
    s.get("chi_l", v);
    p.chi_l = v;
  }
  if (s.has("chi_r")) {
    double v = 0;
    s.get("chi_r", v);
    p.chi_r = v;
  }
  s.get("phi1", p.phi1);
  s.get("phi2", p.phi2);
  s.get("eta_as", p.eta_as);
  s.get("eta_ret", p.eta_ret);
  s.get("eta_s", p.eta_s);
  s.get("truncation", p.truncation);
  s.get("source_visibility", p.source_visibility);
  s.get("phase_jitter", p.phase_jitter);
  std::string kind = "thermal";
  s.get("source", kind);
  if (kind == "thermal") {
    p.kind = SourceKind::kThermal;
  } else if (kind == "single_excitation") {
    p.kind = SourceKind::kSingleExcitation;
  } else {
    throw ConfigError(s.path("source") + ": expected 'thermal' or 'single_excitation', got '" + kind + "'");
  }
  s.finish();
  return p;
}

Detector read_detector(YAML::Node node, const std::string& path) {
  Section s(node, path);
  Detector d;
  s.get("eta", d.eta);
  s.get("dark_prob", d.dark_prob);
  s.get("number_resolving", d.number_resolving);
  s.finish();
  return d;
}

Analyzer read_analyzer(const YAML::Node& node, const std::string& path) {
  try {
    return Analyzer::parse(node.as<std::string>());
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

void emit_double(YAML::Emitter& out, const std::string& key, double v) {
  out << YAML::Key << key << YAML::Value << format_double(v);
}

void emit_site(YAML::Emitter& out, const EnsembleParams& p) {
  out << YAML::BeginMap;
  emit_double(out, "chi", p.chi);
  if (p.chi_l) emit_double(out, "chi_l", *p.chi_l);
  if (p.chi_r) emit_double(out, "chi_r", *p.chi_r);
  emit_double(out, "phi1", p.phi1);
  emit_double(out, "phi2", p.phi2);
  emit_double(out, "eta_as", p.eta_as);
  emit_double(out, "eta_ret", p.eta_ret);
  emit_double(out, "eta_s", p.eta_s);
  out << YAML::Key << "truncation" << YAML::Value << p.truncation;
  emit_double(out, "source_visibility", p.source_visibility);
  emit_double(out, "phase_jitter", p.phase_jitter);
  out << YAML::Key << "source" << YAML::Value
      << (p.kind == SourceKind::kThermal ? "thermal" : "single_excitation");
  out << YAML::EndMap;
}

void emit_detector(YAML::Emitter& out, const Detector& d) {
  out << YAML::Flow << YAML::BeginMap;
  emit_double(out, "eta", d.eta);
  emit_double(out, "dark_prob", d.dark_prob);
  out << YAML::Key << "number_resolving" << YAML::Value << d.number_resolving;
  out << YAML::EndMap;
}

}  // namespace

std::string format_double(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("cannot format double");
  return std::string(buf, ptr);
}

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  if (!root.IsMap()) throw ConfigError("config: top level must be a mapping");
  Section top(root, "");
  ExperimentConfig c;
  top.get("scenario", c.scenario);
  std::string engine = "exact";
  top.get("engine", engine);
  if (engine == "exact") {
    c.engine = EngineKind::kExact;
  } else if (engine == "mc") {
    c.engine = EngineKind::kMonteCarlo;
  } else {
    throw ConfigError("engine: expected 'exact' or 'mc', got '" + engine + "'");
  }
  top.get("n_trials", c.n_trials);
  top.get("master_seed", c.master_seed);
  std::string mode = "heralded";
  top.get("mc_mode", mode);
  if (mode == "heralded") {
    c.mc_mode = McMode::kHeralded;
  } else if (mode == "raw") {
    c.mc_mode = McMode::kRaw;
  } else {
    throw ConfigError("mc_mode: expected 'heralded' or 'raw', got '" + mode + "'");
  }
  top.get("workers", c.workers);

  {
    Section s(top.child("sites"), "sites");
    if (!s.has("I")) throw ConfigError("sites.I: section missing");
    if (!s.has("II")) throw ConfigError("sites.II: section missing");
    c.site_I = read_site(s.child("I"), "sites.I");
    c.site_II = read_site(s.child("II"), "sites.II");
    s.finish();
  }
  {
    Section s(top.child("station"), "station");
    s.get("mode_overlap", c.station.mode_overlap);
    if (s.has("analyzers")) {
      const auto a = s.child("analyzers");
      if (!a.IsSequence() || a.size() != 2) throw ConfigError("station.analyzers: expected two settings");
      c.station.analyzers = {read_analyzer(a[0], "station.analyzers[0]"), read_analyzer(a[1], "station.analyzers[1]")};
    }
    if (s.has("detectors")) {
      const auto d = s.child("detectors");
      if (d.IsMap()) {
        const auto one = read_detector(d, "station.detectors");
        c.station.detectors = {one, one, one, one};
      } else if (d.IsSequence() && d.size() == 4) {
        for (std::size_t k = 0; k < 4; ++k) {
          c.station.detectors[k] = read_detector(d[k], "station.detectors[" + std::to_string(k) + "]");
        }
      } else {
        throw ConfigError("station.detectors: expected one detector mapping or a list of four");
      }
    }
    s.finish();
  }
  {
    Section s(top.child("verification"), "verification");
    s.get("dark_prob", c.verification.dark_prob);
    s.get("number_resolving", c.verification.number_resolving);
    s.finish();
  }
  {
    Section s(top.child("memory"), "memory");
    std::string model = "exponential";
    s.get("model", model);
    if (model == "exponential") {
      c.memory.model = MemoryModel::kExponential;
    } else if (model == "gaussian") {
      c.memory.model = MemoryModel::kGaussian;
    } else {
      throw ConfigError("memory.model: expected 'exponential' or 'gaussian', got '" + model + "'");
    }
    s.get("tau_us", c.memory.tau_us);
    s.get("v0", c.memory.v0);
    s.finish();
  }
  {
    Section s(top.child("timing"), "timing");
    auto& t = c.timing;
    s.get("mot_load_ms", t.mot_load_ms);
    s.get("window_ms", t.window_ms);
    s.get("cycles_per_window", t.cycles_per_window);
    s.get("cycle_us", t.cycle_us);
    s.get("writes_per_cycle", t.writes_per_cycle);
    s.get("write_interval_us", t.write_interval_us);
    s.get("storage_time_us", t.storage_time_us);
    s.get("fiber_length_m", t.fiber_length_m);
    s.get("fiber_index", t.fiber_index);
    s.finish();
  }
  {
    Section s(top.child("analysis"), "analysis");
    if (s.has("chsh_settings")) {
      const auto list = s.child("chsh_settings");
      if (!list.IsSequence()) throw ConfigError("analysis.chsh_settings: expected a list of [photon1, photon4] pairs");
      c.chsh_settings.clear();
      for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string p = "analysis.chsh_settings[" + std::to_string(i) + "]";
        if (!list[i].IsSequence() || list[i].size() != 2) throw ConfigError(p + ": expected [photon1, photon4]");
        c.chsh_settings.push_back({read_analyzer(list[i][0], p), read_analyzer(list[i][1], p)});
      }
    }
    s.get("scan_times_us", c.scan_times_us);
    s.finish();
  }
  {
    Section s(top.child("output"), "output");
    s.get("dir", c.output_dir);
    s.finish();
  }
  top.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string canonical_config(const ExperimentConfig& c) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "scenario" << YAML::Value << YAML::DoubleQuoted << c.scenario;
  out << YAML::Key << "engine" << YAML::Value << (c.engine == EngineKind::kExact ? "exact" : "mc");
  out << YAML::Key << "n_trials" << YAML::Value << c.n_trials;
  out << YAML::Key << "master_seed" << YAML::Value << c.master_seed;
  out << YAML::Key << "mc_mode" << YAML::Value << (c.mc_mode == McMode::kHeralded ? "heralded" : "raw");
  out << YAML::Key << "workers" << YAML::Value << c.workers;

  out << YAML::Key << "sites" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "I" << YAML::Value;
  emit_site(out, c.site_I);
  out << YAML::Key << "II" << YAML::Value;
  emit_site(out, c.site_II);
  out << YAML::EndMap;

  out << YAML::Key << "station" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "analyzers" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const auto& a : c.station.analyzers) out << YAML::DoubleQuoted << a.label();
  out << YAML::EndSeq;
  emit_double(out, "mode_overlap", c.station.mode_overlap);
  out << YAML::Key << "detectors" << YAML::Value << YAML::BeginSeq;
  for (const auto& d : c.station.detectors) emit_detector(out, d);
  out << YAML::EndSeq << YAML::EndMap;

  out << YAML::Key << "verification" << YAML::Value << YAML::BeginMap;
  emit_double(out, "dark_prob", c.verification.dark_prob);
  out << YAML::Key << "number_resolving" << YAML::Value << c.verification.number_resolving;
  out << YAML::EndMap;

  out << YAML::Key << "memory" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "model" << YAML::Value
      << (c.memory.model == MemoryModel::kExponential ? "exponential" : "gaussian");
  emit_double(out, "tau_us", c.memory.tau_us);
  emit_double(out, "v0", c.memory.v0);
  out << YAML::EndMap;

  const auto& t = c.timing;
  out << YAML::Key << "timing" << YAML::Value << YAML::BeginMap;
  emit_double(out, "mot_load_ms", t.mot_load_ms);
  emit_double(out, "window_ms", t.window_ms);
  out << YAML::Key << "cycles_per_window" << YAML::Value << t.cycles_per_window;
  emit_double(out, "cycle_us", t.cycle_us);
  out << YAML::Key << "writes_per_cycle" << YAML::Value << t.writes_per_cycle;
  emit_double(out, "write_interval_us", t.write_interval_us);
  emit_double(out, "storage_time_us", t.storage_time_us);
  emit_double(out, "fiber_length_m", t.fiber_length_m);
  emit_double(out, "fiber_index", t.fiber_index);
  out << YAML::EndMap;

  out << YAML::Key << "analysis" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "chsh_settings" << YAML::Value << YAML::BeginSeq;
  for (const auto& s : c.chsh_settings) {
    out << YAML::Flow << YAML::BeginSeq << YAML::DoubleQuoted << s.photon1.label() << YAML::DoubleQuoted
        << s.photon4.label() << YAML::EndSeq;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "scan_times_us" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (double v : c.scan_times_us) out << format_double(v);
  out << YAML::EndSeq << YAML::EndMap;

  out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "dir" << YAML::Value << YAML::DoubleQuoted << c.output_dir;
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string config_digest(const ExperimentConfig& cfg) {
  const std::string text = canonical_config(cfg);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex.push_back(kHex[md[i] >> 4]);
    hex.push_back(kHex[md[i] & 15]);
  }
  return hex;
}

}  // namespace bdcz
