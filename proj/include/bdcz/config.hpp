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
 * @file config.hpp
 * Experiment configuration files (YAML) and their canonical form.
 *
 * Absent keys take their defaults; unknown keys are errors. The canonical
 * form lists every key in a fixed order with shortest round-trip decimals,
 * so it is stable across platforms and reloads to an equal config.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "bdcz/experiment.hpp"

namespace bdcz {

/// Throws ConfigError with the offending key or violated invariant.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

std::string canonical_config(const ExperimentConfig& cfg);
/// Hex SHA-256 of canonical_config().
std::string config_digest(const ExperimentConfig& cfg);

/// Shortest decimal that reads back to the same double, '.' separator.
std::string format_double(double v);

}  // namespace bdcz
