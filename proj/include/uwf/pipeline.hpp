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
 * @file pipeline.hpp
 * @brief Simulator → estimator → evaluation runs and their on-disk artifacts.
 *
 * A run directory holds
 *
 *   estimate.txt, groundtruth.txt   "timestamp tx ty tz qx qy qz qw" per line
 *   metrics.csv                     run_id, mode, ate_rmse_m, rot_rmse_deg, t0_err ... tn_err
 *   run.json                        everything needed to regenerate the directory
 */

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uwf/estimator.hpp"
#include "uwf/evaluation.hpp"
#include "uwf/simulator.hpp"

namespace uwf {

inline constexpr const char* kVersion = "uwfusion 0.1.0";

struct RunConfig {
  nlohmann::json scenario;  ///< scenario document
  std::string scenario_path;
  Mode mode = Mode::kFull;
  bool disable_sonar_prior = false;
  bool eq21_as_printed = false;
  std::optional<std::uint64_t> seed;
  nlohmann::json overrides = nlohmann::json::object();  ///< estimator/solver settings
  double interval = 20.0;                               ///< seconds per interval_translation_error bin
};

/// Estimator settings for `scenario`, with `overrides` applied. Throws InvalidConfig on unknown keys.
EstimatorConfig make_estimator_config(const Scenario& scenario, const RunConfig& run);
SensorSetup make_sensor_setup(const Scenario& scenario);

struct FrameRecord {
  int frame_id = 0;
  double timestamp = 0.0;
  StepResult step;
};

struct RunResult {
  std::string run_id;
  Scenario scenario;
  Trajectory estimate;  ///< expressed in the ground-truth world frame
  Trajectory truth;     ///< ground truth at every frame
  std::vector<FrameRecord> frames;
  double ate_rmse = 0.0;
  double rot_rmse = 0.0;
  std::vector<IntervalError> intervals;
};

/// Scenario document with the seed override applied.
Scenario resolve_scenario(const RunConfig& run);

std::string make_run_id(const Scenario& scenario, const RunConfig& run);

/// Runs the full pipeline in memory. The estimator's world frame is tied to the
/// ground truth at the first published state.
RunResult run_pipeline(const RunConfig& run);

std::string format_trajectory(const Trajectory& trajectory);
Trajectory parse_trajectory(const std::string& text);
std::string format_metrics(const RunResult& result, Mode mode);
nlohmann::json run_record(const RunConfig& run, const RunResult& result);
RunConfig run_config_from_record(const nlohmann::json& record);

/// Writes the four artifacts into `dir`, creating it when needed.
void write_run(const RunConfig& run, const RunResult& result, const std::string& dir);

struct MetricsRow {
  std::string directory;
  std::string run_id;
  std::string mode;
  double ate_rmse = 0.0;
  double rot_rmse = 0.0;
  std::vector<double> intervals;
};

/// Throws MissingMetrics naming the directory.
MetricsRow read_metrics(const std::string& dir);

/// Rows sorted by ATE with the interval series padded to a common width.
std::vector<MetricsRow> compare_runs(const std::vector<std::string>& dirs);
std::string format_comparison_table(const std::vector<MetricsRow>& rows);
std::string format_comparison_csv(const std::vector<MetricsRow>& rows);

}  // namespace uwf
