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

// uwf: run simulated scenarios through the estimator and compare the results.
//
//   uwf run --scenario F --mode {full|vi|sonar-inertial} [--disable-sonar-prior]
//           [--eq21-as-printed] [--seed N] [--config FILE] [--interval S] --out DIR
//   uwf replay RUN_JSON --out DIR
//   uwf compare DIR... [--csv FILE]
//
// Exit codes: 0 success, 2 configuration, 3 scenario, 4 solver.
// UWF_OUTPUT_ROOT, when set, is prepended to relative output directories.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "uwf/errors.hpp"
#include "uwf/pipeline.hpp"
#include "uwf/scenario_io.hpp"

namespace {

int exit_code(uwf::ErrorKind kind) {
  switch (kind) {
    case uwf::ErrorKind::kInvalidScenario:
      return 3;
    case uwf::ErrorKind::kSolverDiverged:
      return 4;
    default:
      return 2;
  }
}

int report(uwf::ErrorKind kind, const std::string& message) {
  nlohmann::json rec;
  rec["error"] = uwf::to_string(kind);
  rec["message"] = message;
  rec["exit_code"] = exit_code(kind);
  std::cerr << rec.dump() << "\n";
  return exit_code(kind);
}

std::string output_dir(const std::string& dir) {
  const char* root = std::getenv("UWF_OUTPUT_ROOT");
  if (!root || !*root || std::filesystem::path(dir).is_absolute()) return dir;
  return (std::filesystem::path(root) / dir).string();
}

void execute(const uwf::RunConfig& run, const std::string& out) {
  const uwf::RunResult result = uwf::run_pipeline(run);
  const std::string dir = output_dir(out);
  uwf::write_run(run, result, dir);
  std::cout << result.run_id << "  ate_rmse_m=" << result.ate_rmse << "  rot_rmse_deg=" << result.rot_rmse
            << "  -> " << dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Underwater camera/sonar/IMU fusion runner"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string mode = "full";
  bool disable_prior = false;
  bool eq21_printed = false;
  std::uint64_t seed = 0;
  std::string config_path;
  std::string out;
  double interval = 20.0;
  CLI::App* run = app.add_subcommand("run", "Simulate a scenario and estimate its trajectory");
  run->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
  run->add_option("--mode", mode, "full, vi or sonar-inertial")
      ->check(CLI::IsMember({"full", "vi", "sonar-inertial"}));
  run->add_flag("--disable-sonar-prior", disable_prior, "Do not seed IMU propagation from sonar odometry");
  run->add_flag("--eq21-as-printed", eq21_printed, "Sonar prior without the trailing sonar-to-body inverse");
  CLI::Option* seed_opt = run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--config", config_path, "JSON file with estimator and solver overrides");
  run->add_option("--interval", interval, "Seconds per interval error bin")->check(CLI::PositiveNumber);
  run->add_option("--out", out, "Output directory")->required();

  std::string record_path;
  std::string replay_out;
  CLI::App* replay = app.add_subcommand("replay", "Regenerate a run directory from its run.json");
  replay->add_option("record", record_path, "run.json")->required();
  replay->add_option("--out", replay_out, "Output directory")->required();

  std::vector<std::string> dirs;
  std::string csv_path;
  CLI::App* compare = app.add_subcommand("compare", "Tabulate metrics of several run directories");
  compare->add_option("dirs", dirs, "Run directories")->required();
  compare->add_option("--csv", csv_path, "Also write the merged table as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      uwf::RunConfig cfg;
      cfg.scenario_path = scenario_path;
      cfg.scenario = uwf::read_json_file(scenario_path);
      cfg.mode = uwf::parse_mode(mode);
      cfg.disable_sonar_prior = disable_prior;
      cfg.eq21_as_printed = eq21_printed;
      if (*seed_opt) cfg.seed = seed;
      cfg.interval = interval;
      if (!config_path.empty()) {
        try {
          cfg.overrides = uwf::read_json_file(config_path);
        } catch (const uwf::Error& e) {
          throw uwf::Error(uwf::ErrorKind::kInvalidConfig, e.what());
        }
      }
      execute(cfg, out);
    } else if (*replay) {
      uwf::RunConfig cfg;
      try {
        cfg = uwf::run_config_from_record(uwf::read_json_file(record_path));
      } catch (const uwf::Error& e) {
        throw uwf::Error(uwf::ErrorKind::kInvalidConfig, e.what());
      }
      execute(cfg, replay_out);
    } else if (*compare) {
      const std::vector<uwf::MetricsRow> rows = uwf::compare_runs(dirs);
      std::cout << uwf::format_comparison_table(rows);
      if (!csv_path.empty()) {
        std::ofstream csv(csv_path);
        csv << uwf::format_comparison_csv(rows);
        if (!csv) throw uwf::Error(uwf::ErrorKind::kInvalidConfig, "cannot write " + csv_path);
      }
    }
  } catch (const uwf::Error& e) {
    return report(e.kind(), e.what());
  } catch (const std::exception& e) {
    return report(uwf::ErrorKind::kInvalidConfig, e.what());
  }
  return 0;
}
