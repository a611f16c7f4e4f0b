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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "support/expect_error.hpp"
#include "support/scenarios.hpp"
#include "uwf/pipeline.hpp"

namespace uwf {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("uwf_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig config(const nlohmann::json& doc, Mode mode = Mode::kFull) {
  RunConfig run;
  run.scenario = doc;
  run.mode = mode;
  return run;
}

void write_metrics(const fs::path& dir, const std::string& id, double ate) {
  fs::create_directories(dir);
  std::ofstream(dir / "metrics.csv") << "run_id,mode,ate_rmse_m,rot_rmse_deg,t0_err,t1_err\n"
                                     << id << ",full," << ate << ",0.5,0.1,0.2\n";
}

TEST(Pipeline, NoiseFreeFullRunIsAccurate) {
  const RunConfig run = config(testing::noise_free_circle(30.0));
  const RunResult result = run_pipeline(run);
  EXPECT_LT(result.ate_rmse, 1e-4);
  EXPECT_LT(result.rot_rmse, 1e-2);
  const fs::path dir = scratch("noise_free");
  write_run(run, result, dir.string());
  EXPECT_LT(read_metrics(dir.string()).ate_rmse, 1e-4);
}

TEST(Pipeline, RepeatedRunsAreByteIdentical) {
  const RunConfig run = config(testing::noisy_circle(20.0));
  const fs::path a = scratch("repeat_a"), b = scratch("repeat_b");
  write_run(run, run_pipeline(run), a.string());
  write_run(run, run_pipeline(run), b.string());
  for (const char* f : {"estimate.txt", "groundtruth.txt", "metrics.csv", "run.json"}) {
    const std::string x = slurp(a / f);
    EXPECT_FALSE(x.empty()) << f;
    EXPECT_EQ(x, slurp(b / f)) << f;
  }
}

TEST(Pipeline, RunRecordRegeneratesDirectory) {
  RunConfig run = config(testing::noisy_circle(15.0), Mode::kSonarInertial);
  run.seed = 42;
  run.overrides = {{"alpha_high", 10.0}, {"solver", {{"max_iterations", 20}}}};
  run.interval = 5.0;
  const fs::path a = scratch("record_a"), b = scratch("record_b");
  write_run(run, run_pipeline(run), a.string());
  const RunConfig again = run_config_from_record(nlohmann::json::parse(slurp(a / "run.json")));
  EXPECT_EQ(again.mode, Mode::kSonarInertial);
  EXPECT_EQ(again.seed, std::optional<std::uint64_t>(42));
  write_run(again, run_pipeline(again), b.string());
  for (const char* f : {"estimate.txt", "groundtruth.txt", "metrics.csv", "run.json"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const auto record = nlohmann::json::parse(slurp(a / "run.json"));
  EXPECT_EQ(record.at("version"), kVersion);
  EXPECT_EQ(record.at("seed"), 42);
}

TEST(Pipeline, SeedOverrideChangesRun) {
  RunConfig run = config(testing::noisy_circle(10.0));
  const RunResult a = run_pipeline(run);
  run.seed = 99;
  const RunResult b = run_pipeline(run);
  EXPECT_NE(format_trajectory(a.estimate), format_trajectory(b.estimate));
  EXPECT_EQ(b.scenario.seed, 99u);
  EXPECT_NE(a.run_id, b.run_id);
}

TEST(Pipeline, RunIdNamesVariant) {
  RunConfig run = config(testing::noisy_circle(10.0), Mode::kVisualInertial);
  run.disable_sonar_prior = true;
  run.eq21_as_printed = true;
  EXPECT_EQ(make_run_id(resolve_scenario(run), run), "noisy-vi-noprior-eq21printed-s7");
}

TEST(Pipeline, OverridesAreStrict) {
  const Scenario sc = resolve_scenario(config(testing::noisy_circle(10.0)));
  RunConfig run = config(testing::noisy_circle(10.0));
  run.overrides = {{"window_size", 6}, {"init", {{"min_rotation_deg", 1.0}}}};
  const EstimatorConfig c = make_estimator_config(sc, run);
  EXPECT_EQ(c.window_size, 6);
  EXPECT_NEAR(c.init.min_rotation, M_PI / 180.0, 1e-15);
  run.overrides = {{"windowsize", 6}};
  EXPECT_UWF_ERROR(ErrorKind::kInvalidConfig, make_estimator_config(sc, run));
  run.overrides = {{"solver", {{"lambda", 1.0}}}};
  EXPECT_UWF_ERROR(ErrorKind::kInvalidConfig, make_estimator_config(sc, run));
}

TEST(Pipeline, NeverInitializedIsNoOverlap) {
  nlohmann::json doc = testing::noise_free_circle(10.0);
  doc["trajectory"] = {{"waypoints", {{0.0, 0.0, 0.0, 0.0, 0.0}, {10.0, 0.0, 0.0, 0.0, 0.0}}}};
  doc["degradation"] = {{"windows", {{0.0, 10.0}}}};
  EXPECT_UWF_ERROR(ErrorKind::kNoOverlap, run_pipeline(config(doc)));
}

TEST(TrajectoryFile, RoundTripAndLayout) {
  Trajectory t;
  t.push_back({0.5, Posed(ypr_quat(0.3, 0.1, -0.2), Vec3d(1.0, -2.0, 3.5))});
  t.push_back({1.0, Posed(Quatd::Identity(), Vec3d(0.0, 0.0, 0.0))});
  const std::string text = format_trajectory(t);
  std::istringstream lines(text);
  std::string first;
  std::getline(lines, first);
  std::istringstream cells(first);
  std::vector<double> v;
  for (double x; cells >> x;) v.push_back(x);
  ASSERT_EQ(v.size(), 8u);
  EXPECT_EQ(v[0], 0.5);
  EXPECT_NEAR(v[3], 3.5, 1e-9);
  EXPECT_NEAR(v[7], t[0].pose.rotation().w(), 1e-9);
  const Trajectory back = parse_trajectory(text);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_LT((back[0].pose.translation() - t[0].pose.translation()).norm(), 1e-8);
  EXPECT_LT(rotation_angle(Quatd(back[0].pose.rotation().conjugate() * t[0].pose.rotation())), 1e-8);
}

TEST(MetricsFile, HeaderLayout) {
  RunConfig run = config(testing::noisy_circle(45.0));
  const RunResult result = run_pipeline(run);
  const std::string text = format_metrics(result, Mode::kFull);
  EXPECT_EQ(text.substr(0, text.find('\n')), "run_id,mode,ate_rmse_m,rot_rmse_deg,t0_err,t1_err,t2_err");
}

TEST(Compare, OneAndThreeRows) {
  const fs::path root = scratch("compare");
  write_metrics(root / "a", "run-a", 0.3);
  EXPECT_EQ(compare_runs({(root / "a").string()}).size(), 1u);
  write_metrics(root / "b", "run-b", 0.1);
  write_metrics(root / "c", "run-c", 0.2);
  const auto rows = compare_runs({(root / "a").string(), (root / "b").string(), (root / "c").string()});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].run_id, "run-b");
  EXPECT_EQ(rows[1].run_id, "run-c");
  EXPECT_EQ(rows[2].run_id, "run-a");
  EXPECT_EQ(rows[0].intervals, (std::vector<double>{0.1, 0.2}));
  const std::string table = format_comparison_table(rows);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 4);
  const std::string csv = format_comparison_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "directory,run_id,mode,ate_rmse_m,rot_rmse_deg,t0_err,t1_err");
}

TEST(Compare, MissingMetricsNamesDirectory) {
  const fs::path root = scratch("missing");
  try {
    compare_runs({(root / "nowhere").string()});
    FAIL() << "expected MissingMetrics";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMissingMetrics);
    EXPECT_NE(std::string(e.what()).find("nowhere"), std::string::npos);
  }
}

int cli(const std::string& args) {
  const int status = std::system((std::string(UWF_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodesAndArtifacts) {
  const fs::path root = scratch("cli");
  {
    std::ofstream(root / "ok.json") << testing::noisy_circle(8.0).dump();
    nlohmann::json bad = testing::noisy_circle(8.0);
    bad["colour"] = "blue";
    std::ofstream(root / "bad.json") << bad.dump();
    std::ofstream(root / "diverge.json") << nlohmann::json{{"solver", {{"max_lambda", 1e-6}}}}.dump();
    std::ofstream(root / "typo.json") << nlohmann::json{{"window", 3}}.dump();
  }
  const std::string scen = "--scenario " + (root / "ok.json").string();
  EXPECT_EQ(cli("run " + scen + " --mode full --out " + (root / "full").string()), 0);
  for (const char* f : {"estimate.txt", "groundtruth.txt", "metrics.csv", "run.json"}) {
    EXPECT_TRUE(fs::exists(root / "full" / f)) << f;
  }
  EXPECT_EQ(cli("run --scenario " + (root / "bad.json").string() + " --out " + (root / "x").string()), 3);
  EXPECT_EQ(cli("run --scenario " + (root / "none.json").string() + " --out " + (root / "x").string()), 3);
  EXPECT_EQ(cli("run " + scen + " --mode lidar --out " + (root / "x").string()), 2);
  EXPECT_EQ(cli("run " + scen + " --config " + (root / "typo.json").string() + " --out " + (root / "x").string()), 2);
  EXPECT_EQ(cli("run " + scen + " --config " + (root / "diverge.json").string() + " --out " + (root / "x").string()),
            4);
  EXPECT_EQ(cli("replay " + (root / "full" / "run.json").string() + " --out " + (root / "again").string()), 0);
  EXPECT_EQ(slurp(root / "full" / "estimate.txt"), slurp(root / "again" / "estimate.txt"));
  EXPECT_EQ(cli("compare " + (root / "full").string() + " " + (root / "again").string() + " --csv " +
                (root / "cmp.csv").string()),
            0);
  EXPECT_TRUE(fs::exists(root / "cmp.csv"));
  EXPECT_EQ(cli("compare " + (root / "nowhere").string()), 2);
  EXPECT_EQ(cli("frobnicate"), 2);

  const std::string env = "UWF_OUTPUT_ROOT=" + root.string() + " ";
  const int status = std::system((env + UWF_CLI_PATH + " run " + scen + " --out rooted >/dev/null 2>&1").c_str());
  EXPECT_EQ(WEXITSTATUS(status), 0);
  EXPECT_TRUE(fs::exists(root / "rooted" / "metrics.csv"));
}

}  // namespace
}  // namespace uwf
