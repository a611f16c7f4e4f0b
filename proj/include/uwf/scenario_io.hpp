// Copyright (c) 2026 The uwfusion Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * @file scenario_io.hpp
 * @brief JSON scenario files. See docs/scenario_format.md for the key reference.
 *
 * Unknown keys anywhere in the document are rejected with InvalidScenario so
 * that typos never silently fall back to defaults.
 */

#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "uwf/simulator.hpp"

namespace uwf {

Scenario scenario_from_json(const nlohmann::json& doc);

/// Reads and parses a scenario file. Throws InvalidScenario on I/O or schema errors.
Scenario load_scenario(const std::string& path);

nlohmann::json read_json_file(const std::string& path);

}  // namespace uwf
