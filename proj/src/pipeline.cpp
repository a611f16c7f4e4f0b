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

#include "uwf/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "uwf/errors.hpp"
#include "uwf/scenario_io.hpp"

namespace uwf {
namespace {

using nlohmann::json;

constexpr std::uint64_t kStreamRansac = 200;

[[noreturn]] void bad_config(const std::string& what) { throw Error(ErrorKind::kInvalidConfig, what); }

template <typename T>
void take(const json& obj, const std::string& key, T& target, std::set<std::string>& seen) {
  if (!obj.contains(key)) return;
  seen.insert(key);
  try {
    target = obj.at(key).get<T>();
  } catch (const json::exception&) {
    bad_config("override '" + key + "' has the wrong type");
  }
}

void reject_unknown(const json& obj, const std::set<std::string>& seen, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!seen.count(it.key())) bad_config("unknown " + where + " key '" + it.key() + "'");
  }
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) bad_config("cannot write " + path.string());
}

}  // namespace

SensorSetup make_sensor_setup(const Scenario& scenario) {
  SensorSetup s;
  s.t_cb = {scenario.camera.t_cb(0), scenario.camera.t_cb(1)};
  s.t_bs = scenario.t_bs;
  s.sonar = scenario.sonar;
  const ImuNoiseParams& n = scenario.imu.params;
  s.imu.sigma_a = std::max(n.sigma_a, 5e-3);
  s.imu.sigma_g = std::max(n.sigma_g, 5e-4);
  s.imu.sigma_ba = std::max(n.sigma_ba, 1e-4);
  s.imu.sigma_bg = std::max(n.sigma_bg, 1e-5);
  s.imu.gravity = n.gravity;
  return s;
}

EstimatorConfig make_estimator_config(const Scenario& scenario, const RunConfig& run) {
  EstimatorConfig c;
  c.mode = run.mode;
  c.sonar_prior = !run.disable_sonar_prior;
  c.eq21_as_printed = run.eq21_as_printed;
  c.sonar_odometry = SonarOdometryConfig::FromIntrinsics(scenario.sonar);
  c.sonar_odometry.seed = derive_seed(scenario.seed, kStreamRansac);
  // A sonar residual differences two independently noisy points.
  c.sonar_sigma = std::max(std::sqrt(2.0) * scenario.sonar_sigma, 0.01);

  const json& o = run.overrides;
  if (o.is_null()) return c;
  if (!o.is_object()) bad_config("overrides must be an object");
  std::set<std::string> seen;
  take(o, "window_size", c.window_size, seen);
  take(o, "degradation_threshold", c.degradation_threshold, seen);
  take(o, "alpha_high", c.alpha_high, seen);
  take(o, "camera_sigma_floor", c.camera_sigma_floor, seen);
  take(o, "sonar_sigma", c.sonar_sigma, seen);
  if (o.contains("init")) {
    seen.insert("init");
    const json& i = o.at("init");
    std::set<std::string> s;
    double rot_deg = c.init.min_rotation * 180.0 / M_PI;
    take(i, "min_camera_matches", c.init.min_camera_matches, s);
    take(i, "min_rotation_deg", rot_deg, s);
    take(i, "min_translation", c.init.min_translation, s);
    c.init.min_rotation = rot_deg * M_PI / 180.0;
    reject_unknown(i, s, "init");
  }
  if (o.contains("solver")) {
    seen.insert("solver");
    const json& i = o.at("solver");
    std::set<std::string> s;
    take(i, "max_iterations", c.solver.max_iterations, s);
    take(i, "relative_decrease_tol", c.solver.relative_decrease_tol, s);
    take(i, "gradient_tol", c.solver.gradient_tol, s);
    take(i, "initial_lambda", c.solver.initial_lambda, s);
    take(i, "max_lambda", c.solver.max_lambda, s);
    take(i, "huber_k", c.solver.huber_k, s);
    take(i, "sonar_w_z", c.solver.sonar_w_z, s);
    reject_unknown(i, s, "solver");
  }
  reject_unknown(o, seen, "override");
  if (c.window_size < 2 || c.alpha_high <= 0.0 || c.sonar_sigma <= 0.0 || c.camera_sigma_floor <= 0.0 ||
      c.solver.max_iterations < 0) {
    bad_config("override values out of range");
  }
  return c;
}

Scenario resolve_scenario(const RunConfig& run) {
  json doc = run.scenario;
  if (run.seed) doc["seed"] = *run.seed;
  return scenario_from_json(doc);
}

std::string make_run_id(const Scenario& scenario, const RunConfig& run) {
  std::string id = scenario.name + "-" + to_string(run.mode);
  if (run.disable_sonar_prior) id += "-noprior";
  if (run.eq21_as_printed) id += "-eq21printed";
  return id + "-s" + std::to_string(scenario.seed);
}

RunResult run_pipeline(const RunConfig& run) {
  RunResult result;
  result.scenario = resolve_scenario(run);
  result.run_id = make_run_id(result.scenario, run);
  const Simulator sim(result.scenario);
  const std::vector<FrameBundle> frames = sim.generate();

  Estimator estimator(make_estimator_config(result.scenario, run), make_sensor_setup(result.scenario),
                      sim.correspondence_provider());
  std::optional<Posed> anchor;
  for (const FrameBundle& f : frames) {
    result.truth.push_back({f.timestamp, f.truth.pose});
    FrameRecord rec{f.frame_id, f.timestamp, estimator.step(f)};
    if (rec.step.published) {
      const Posed& est = rec.step.published->pose;
      if (!anchor) anchor = compose(f.truth.pose, inverse(est));
      result.estimate.push_back({f.timestamp, compose(*anchor, est)});
    }
    result.frames.push_back(std::move(rec));
  }
  if (result.estimate.empty()) throw Error(ErrorKind::kNoOverlap, "estimator never initialized");
  result.ate_rmse = ate_rmse(result.estimate, result.truth);
  result.rot_rmse = rotation_rmse(result.estimate, result.truth);
  result.intervals = interval_translation_error(result.estimate, result.truth, run.interval);
  return result;
}

std::string format_trajectory(const Trajectory& trajectory) {
  std::string out;
  char buf[256];
  for (const TrajectorySample& s : trajectory) {
    const Vec3d& p = s.pose.translation();
    const Quatd& q = s.pose.rotation();
    std::snprintf(buf, sizeof buf, "%.6f %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n", s.timestamp, p.x(), p.y(), p.z(),
                  q.x(), q.y(), q.z(), q.w());
    out += buf;
  }
  return out;
}

Trajectory parse_trajectory(const std::string& text) {
  Trajectory out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double v[8];
    for (double& x : v) {
      if (!(ls >> x)) bad_config("malformed trajectory line: " + line);
    }
    out.push_back({v[0], Posed(Quatd(v[7], v[4], v[5], v[6]), Vec3d(v[1], v[2], v[3]))});
  }
  check_trajectory(out);
  return out;
}

std::string format_metrics(const RunResult& result, Mode mode) {
  std::string header = "run_id,mode,ate_rmse_m,rot_rmse_deg";
  std::string row = result.run_id + "," + to_string(mode) + "," + fmt("%.9f", result.ate_rmse) + "," +
                    fmt("%.9f", result.rot_rmse);
  for (std::size_t i = 0; i < result.intervals.size(); ++i) {
    header += ",t" + std::to_string(i) + "_err";
    row += "," + fmt("%.9f", result.intervals[i].error);
  }
  return header + "\n" + row + "\n";
}

json run_record(const RunConfig& run, const RunResult& result) {
  json j;
  j["version"] = kVersion;
  j["run_id"] = result.run_id;
  j["mode"] = to_string(run.mode);
  j["disable_sonar_prior"] = run.disable_sonar_prior;
  j["eq21_as_printed"] = run.eq21_as_printed;
  j["seed"] = result.scenario.seed;
  j["interval"] = run.interval;
  j["scenario_path"] = run.scenario_path;
  j["scenario"] = run.scenario;
  j["overrides"] = run.overrides;
  return j;
}

RunConfig run_config_from_record(const json& record) {
  RunConfig run;
  try {
    run.scenario = record.at("scenario");
    run.scenario_path = record.value("scenario_path", "");
    run.mode = parse_mode(record.at("mode").get<std::string>());
    run.disable_sonar_prior = record.at("disable_sonar_prior").get<bool>();
    run.eq21_as_printed = record.at("eq21_as_printed").get<bool>();
    run.seed = record.at("seed").get<std::uint64_t>();
    run.interval = record.value("interval", 20.0);
    run.overrides = record.value("overrides", json::object());
  } catch (const json::exception& e) {
    bad_config(std::string("malformed run record: ") + e.what());
  }
  return run;
}

void write_run(const RunConfig& run, const RunResult& result, const std::string& dir) {
  const std::filesystem::path root(dir);
  std::filesystem::create_directories(root);
  write_text(root / "estimate.txt", format_trajectory(result.estimate));
  write_text(root / "groundtruth.txt", format_trajectory(result.truth));
  write_text(root / "metrics.csv", format_metrics(result, run.mode));
  write_text(root / "run.json", run_record(run, result).dump(2) + "\n");
}

MetricsRow read_metrics(const std::string& dir) {
  const std::filesystem::path path = std::filesystem::path(dir) / "metrics.csv";
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(ErrorKind::kMissingMetrics, "no metrics.csv in " + dir);
  }
  std::istringstream in(read_text(path));
  std::string header;
  std::string line;
  if (!std::getline(in, header) || !std::getline(in, line)) {
    throw Error(ErrorKind::kMissingMetrics, "empty metrics.csv in " + dir);
  }
  std::vector<std::string> cells;
  std::stringstream ls(line);
  for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
  if (cells.size() < 4) throw Error(ErrorKind::kMissingMetrics, "malformed metrics.csv in " + dir);
  MetricsRow row;
  row.directory = dir;
  row.run_id = cells[0];
  row.mode = cells[1];
  try {
    row.ate_rmse = std::stod(cells[2]);
    row.rot_rmse = std::stod(cells[3]);
    for (std::size_t i = 4; i < cells.size(); ++i) row.intervals.push_back(std::stod(cells[i]));
  } catch (const std::exception&) {
    throw Error(ErrorKind::kMissingMetrics, "malformed metrics.csv in " + dir);
  }
  return row;
}

std::vector<MetricsRow> compare_runs(const std::vector<std::string>& dirs) {
  std::vector<MetricsRow> rows;
  for (const std::string& d : dirs) rows.push_back(read_metrics(d));
  std::stable_sort(rows.begin(), rows.end(),
                   [](const MetricsRow& a, const MetricsRow& b) { return a.ate_rmse < b.ate_rmse; });
  return rows;
}

std::string format_comparison_table(const std::vector<MetricsRow>& rows) {
  std::size_t width = 6;
  for (const MetricsRow& r : rows) width = std::max(width, r.run_id.size());
  char buf[512];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-*s  %-14s  %12s  %14s\n", static_cast<int>(width), "run_id", "mode",
                "ate_rmse_m", "rot_rmse_deg");
  out += buf;
  for (const MetricsRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %-14s  %12.6f  %14.6f\n", static_cast<int>(width), r.run_id.c_str(),
                  r.mode.c_str(), r.ate_rmse, r.rot_rmse);
    out += buf;
  }
  return out;
}

std::string format_comparison_csv(const std::vector<MetricsRow>& rows) {
  std::size_t n = 0;
  for (const MetricsRow& r : rows) n = std::max(n, r.intervals.size());
  std::string out = "directory,run_id,mode,ate_rmse_m,rot_rmse_deg";
  for (std::size_t i = 0; i < n; ++i) out += ",t" + std::to_string(i) + "_err";
  out += "\n";
  for (const MetricsRow& r : rows) {
    out += r.directory + "," + r.run_id + "," + r.mode + "," + fmt("%.9f", r.ate_rmse) + "," +
           fmt("%.9f", r.rot_rmse);
    for (std::size_t i = 0; i < n; ++i) out += i < r.intervals.size() ? "," + fmt("%.9f", r.intervals[i]) : ",";
    out += "\n";
  }
  return out;
}

}  // namespace uwf
