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

#include "bdcz/report.hpp"

#include <fstream>
#include <stdexcept>

#include "bdcz/config.hpp"

namespace bdcz {

nlohmann::ordered_json to_json(const ResultRecord& r) {
  nlohmann::ordered_json j;
  j["scenario"] = r.scenario;
  j["quantity"] = r.quantity;
  j["value"] = r.value;
  j["stderr"] = r.std_error;
  j["inputs_digest"] = r.inputs_digest;
  j["seed"] = r.seed;
  return j;
}

nlohmann::ordered_json to_json(const DensityOperator& rho) {
  nlohmann::ordered_json j;
  j["register"] = rho.reg().names();
  auto re = nlohmann::ordered_json::array();
  auto im = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < rho.matrix().rows(); ++r) {
    auto rr = nlohmann::ordered_json::array();
    auto ri = nlohmann::ordered_json::array();
    for (Eigen::Index c = 0; c < rho.matrix().cols(); ++c) {
      rr.push_back(rho.matrix()(r, c).real());
      ri.push_back(rho.matrix()(r, c).imag());
    }
    re.push_back(rr);
    im.push_back(ri);
  }
  j["real"] = re;
  j["imag"] = im;
  return j;
}

std::string counts_csv(const CountsTable& table) {
  std::string out = std::string(kCountsHeader) + "\n";
  for (const auto& r : table.rows) {
    out += r.setting.photon1.label() + "," + r.setting.photon4.label() + "," + std::to_string(r.n_pp) + "," +
           std::to_string(r.n_pm) + "," + std::to_string(r.n_mp) + "," + std::to_string(r.n_mm) + "," +
           std::to_string(r.attempts) + "\n";
  }
  return out;
}

std::string probabilities_csv(const std::vector<SettingProbabilities>& rows) {
  std::string out = std::string(kProbabilitiesHeader) + "\n";
  for (const auto& r : rows) {
    out += r.setting.photon1.label() + "," + r.setting.photon4.label();
    for (double p : r.joint) out += "," + format_double(p);
    out += "," + format_double(r.fourfold()) + "\n";
  }
  return out;
}

std::string scan_csv(const std::vector<ScanRow>& rows) {
  std::string out = std::string(kScanHeader) + "\n";
  for (const auto& r : rows) {
    out += format_double(r.t_us) + "," + format_double(r.visibility) + "," + format_double(r.std_error) + "\n";
  }
  return out;
}

void OutputSet::add(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }

void OutputSet::commit() const {
  std::filesystem::create_directories(dir_);
  std::vector<std::filesystem::path> staged;
  try {
    for (const auto& [name, content] : files_) {
      const auto tmp = dir_ / ("." + name + ".tmp");
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << content;
      out.close();
      if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
      staged.push_back(tmp);
    }
  } catch (...) {
    for (const auto& p : staged) std::filesystem::remove(p);
    throw;
  }
  for (std::size_t i = 0; i < files_.size(); ++i) std::filesystem::rename(staged[i], dir_ / files_[i].first);
}

}  // namespace bdcz
