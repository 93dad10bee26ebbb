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

/**
 * @file report.hpp
 * Result files: JSON records and CSV tables with fixed columns.
 *
 * CSV: comma separated, header line first, '.' decimal point, shortest
 * round-trip doubles, trailing newline. JSON documents carry
 * "schema_version": 1.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bdcz/experiment.hpp"

namespace bdcz {

inline constexpr int kSchemaVersion = 1;

struct ResultRecord {
  std::string scenario;
  /// One of S, F, V, E, rate.
  std::string quantity;
  double value = 0.0;
  double std_error = 0.0;
  std::string inputs_digest;
  std::uint64_t seed = 0;
};

nlohmann::ordered_json to_json(const ResultRecord& r);
nlohmann::ordered_json to_json(const DensityOperator& rho);

inline constexpr const char* kCountsHeader = "setting_1,setting_4,n_pp,n_pm,n_mp,n_mm,attempts";
inline constexpr const char* kProbabilitiesHeader = "setting_1,setting_4,p_pp,p_pm,p_mp,p_mm,fourfold";
inline constexpr const char* kScanHeader = "t_us,visibility,stderr";

std::string counts_csv(const CountsTable& table);
std::string probabilities_csv(const std::vector<SettingProbabilities>& rows);

struct ScanRow {
  double t_us;
  double visibility;
  double std_error;
};
std::string scan_csv(const std::vector<ScanRow>& rows);

/// Files staged in memory and written only by commit(): each goes to a
/// temporary name in the target directory, then is renamed into place.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}
  void add(const std::string& name, std::string content);
  void commit() const;
  const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

}  // namespace bdcz
