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

#include "uwf/scenario_io.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "uwf/errors.hpp"

namespace uwf {
namespace {

using nlohmann::json;

constexpr double kDeg = M_PI / 180.0;
constexpr std::uint64_t kStreamLandmarks = 100;
constexpr std::uint64_t kStreamTargets = 101;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::kInvalidScenario, path + ": " + what);
}

/// Reads keys from one JSON object and rejects whatever was not read.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(path_, "expected an object");
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  const json& at(const std::string& key) {
    if (!obj_.contains(key)) fail(path_, "missing key '" + key + "'");
    seen_.insert(key);
    return obj_.at(key);
  }

  template <typename T>
  T get(const std::string& key, const T& fallback) {
    if (!obj_.contains(key)) return fallback;
    return convert<T>(at(key), key);
  }

  template <typename T>
  T require(const std::string& key) {
    return convert<T>(at(key), key);
  }

  ObjectReader child(const std::string& key) { return ObjectReader(at(key), path_ + "." + key); }

  std::string path(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) fail(path_, "unknown key '" + it.key() + "'");
    }
  }

 private:
  template <typename T>
  T convert(const json& v, const std::string& key) const {
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      fail(path_ + "." + key, "wrong type");
    }
  }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

Vec3d vec3(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3) fail(path, "expected [x, y, z]");
  try {
    return Vec3d(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
  } catch (const json::exception&) {
    fail(path, "expected numbers");
  }
}

std::vector<Waypoint> circle_waypoints(ObjectReader r, double duration) {
  const Vec3d center = vec3(r.at("center"), r.path("center"));
  const double radius = r.require<double>("radius");
  const double speed = r.require<double>("speed");
  const double ramp = r.get<double>("ramp", 4.0);
  const double hold = r.get<double>("hold", 0.0);
  const double dt = r.get<double>("waypoint_dt", 0.5);
  r.finish();
  if (!(radius > 0.0 && speed >= 0.0 && ramp > 0.0 && hold >= 0.0 && dt > 0.0)) {
    fail("trajectory.circle", "radius, ramp and waypoint_dt must be positive");
  }

  std::vector<Waypoint> out;
  const int n = static_cast<int>(std::ceil(duration / dt)) + 1;
  for (int k = 0; k <= n; ++k) {
    const double t = k * dt;
    const double tau = std::max(0.0, t - hold);
    const double s = tau <= ramp ? speed * tau * tau / (2.0 * ramp) : speed * (0.5 * ramp + (tau - ramp));
    const double phase = s / radius;
    Waypoint w;
    w.t = t;
    w.position = center + radius * Vec3d(std::sin(phase), -std::cos(phase), 0.0);
    w.yaw = phase;
    out.push_back(w);
  }
  return out;
}

std::vector<Vec3d> cylinder_points(ObjectReader r, std::uint64_t seed) {
  const json& c = r.at("center");
  if (!c.is_array() || c.size() != 2) fail(r.path("center"), "expected [x, y]");
  const double cx = c[0].get<double>();
  const double cy = c[1].get<double>();
  const double radius = r.require<double>("radius");
  const double z_min = r.require<double>("z_min");
  const double z_max = r.require<double>("z_max");
  const int count = r.require<int>("count");
  r.finish();
  if (!(radius > 0.0) || z_min > z_max || count < 0) fail("cylinder", "invalid cylinder");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(-M_PI, M_PI);
  std::uniform_real_distribution<double> height(z_min, z_max);
  std::vector<Vec3d> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double a = angle(rng);
    const double z = z_min == z_max ? z_min : height(rng);
    out.emplace_back(cx + radius * std::cos(a), cy + radius * std::sin(a), z);
  }
  return out;
}

/// Points from an optional "cylinder" generator followed by explicit "points".
/// Explicit points may carry a fourth "textured" flag (boolean or 0/1).
std::vector<SceneLandmark> read_point_set(ObjectReader r, std::uint64_t seed, bool allow_texture_flag) {
  std::vector<SceneLandmark> out;
  if (r.has("cylinder")) {
    for (const Vec3d& p : cylinder_points(r.child("cylinder"), seed)) out.push_back({p, true});
  }
  if (r.has("points")) {
    const json& pts = r.at("points");
    if (!pts.is_array()) fail(r.path("points"), "expected an array");
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const json& p = pts[i];
      const std::string path = r.path("points") + "[" + std::to_string(i) + "]";
      if (allow_texture_flag && p.is_array() && p.size() == 4) {
        const json& flag = p[3];
        if (!flag.is_boolean() && !flag.is_number()) fail(path, "textured flag must be a boolean or 0/1");
        const bool textured = flag.is_boolean() ? flag.get<bool>() : flag.get<double>() != 0.0;
        out.push_back({vec3(json::array({p[0], p[1], p[2]}), path), textured});
      } else {
        out.push_back({vec3(p, path), true});
      }
    }
  }
  r.finish();
  return out;
}

Scenario parse_scenario(const json& doc) {
  ObjectReader root(doc, "scenario");
  Scenario sc;
  sc.name = root.get<std::string>("name", "scenario");
  sc.seed = root.get<std::uint64_t>("seed", 1);
  sc.duration = root.require<double>("duration");
  sc.imu.params.gravity = root.get<double>("gravity", 9.81);

  {
    ObjectReader r = root.child("trajectory");
    sc.trajectory.start_at_rest = r.get<bool>("start_at_rest", true);
    if (r.has("circle") == r.has("waypoints")) fail("scenario.trajectory", "give exactly one of circle or waypoints");
    if (r.has("circle")) {
      sc.trajectory.waypoints = circle_waypoints(r.child("circle"), sc.duration);
    } else {
      const json& wps = r.at("waypoints");
      if (!wps.is_array()) fail("scenario.trajectory.waypoints", "expected an array");
      for (const json& w : wps) {
        if (!w.is_array() || w.size() != 5) fail("scenario.trajectory.waypoints", "expected [t, x, y, z, yaw_deg]");
        sc.trajectory.waypoints.push_back(
            {w[0].get<double>(), Vec3d(w[1].get<double>(), w[2].get<double>(), w[3].get<double>()),
             w[4].get<double>() * kDeg});
      }
    }
    if (r.has("attitude_excitation")) {
      ObjectReader a = r.child("attitude_excitation");
      sc.trajectory.attitude.roll_amplitude = a.get<double>("roll_amplitude_deg", 0.0) * kDeg;
      sc.trajectory.attitude.pitch_amplitude = a.get<double>("pitch_amplitude_deg", 0.0) * kDeg;
      sc.trajectory.attitude.period = a.get<double>("period", 10.0);
      a.finish();
      if (!(sc.trajectory.attitude.period > 0.0)) fail("scenario.trajectory.attitude_excitation", "bad period");
    }
    r.finish();
  }

  if (root.has("landmarks")) {
    sc.landmarks = read_point_set(root.child("landmarks"), derive_seed(sc.seed, kStreamLandmarks), true);
  }
  if (root.has("sonar_targets")) {
    for (const SceneLandmark& p : read_point_set(root.child("sonar_targets"), derive_seed(sc.seed, kStreamTargets),
                                                 false)) {
      sc.sonar_targets.push_back(p.position);
    }
  }

  if (root.has("degradation")) {
    ObjectReader r = root.child("degradation");
    if (r.has("windows")) {
      for (const json& w : r.at("windows")) {
        if (!w.is_array() || w.size() != 2) fail("scenario.degradation.windows", "expected [t_start, t_end]");
        sc.degradation_windows.emplace_back(w[0].get<double>(), w[1].get<double>());
      }
    }
    sc.degraded_survivors = r.get<int>("survivors", 5);
    r.finish();
  }

  if (root.has("rates")) {
    ObjectReader r = root.child("rates");
    sc.camera_hz = r.get<double>("camera", sc.camera_hz);
    sc.sonar_hz = r.get<double>("sonar", sc.sonar_hz);
    sc.imu_hz = r.get<double>("imu", sc.imu_hz);
    r.finish();
  }

  if (root.has("noise")) {
    ObjectReader r = root.child("noise");
    sc.pixel_sigma = r.get<double>("pixel_sigma", 0.0);
    sc.sonar_sigma = r.get<double>("sonar_sigma", 0.0);
    sc.sonar_outlier_fraction = r.get<double>("sonar_outlier_fraction", 0.0);
    if (r.has("imu")) {
      ObjectReader n = r.child("imu");
      sc.imu.params.sigma_a = n.get<double>("sigma_a", 0.0);
      sc.imu.params.sigma_g = n.get<double>("sigma_g", 0.0);
      sc.imu.params.sigma_ba = n.get<double>("sigma_ba", 0.0);
      sc.imu.params.sigma_bg = n.get<double>("sigma_bg", 0.0);
      sc.imu.initial_bias_a = n.get<double>("initial_bias_a", 0.0);
      sc.imu.initial_bias_g = n.get<double>("initial_bias_g", 0.0);
      n.finish();
    }
    r.finish();
  }

  if (root.has("camera")) {
    ObjectReader r = root.child("camera");
    sc.camera.focal_px = r.get<double>("focal_px", sc.camera.focal_px);
    sc.camera.fov_h = r.get<double>("fov_h_deg", sc.camera.fov_h / kDeg) * kDeg;
    sc.camera.fov_v = r.get<double>("fov_v_deg", sc.camera.fov_v / kDeg) * kDeg;
    sc.camera.max_range = r.get<double>("max_range", sc.camera.max_range);
    sc.camera.baseline = r.get<double>("baseline", sc.camera.baseline);
    if (r.has("offset")) sc.camera.offset = vec3(r.at("offset"), r.path("offset"));
    r.finish();
  }

  if (root.has("sonar")) {
    ObjectReader r = root.child("sonar");
    SonarIntrinsics& s = sc.sonar;
    s.theta_min = r.get<double>("theta_min_deg", s.theta_min / kDeg) * kDeg;
    s.theta_max = r.get<double>("theta_max_deg", s.theta_max / kDeg) * kDeg;
    s.phi_min = r.get<double>("phi_min_deg", s.phi_min / kDeg) * kDeg;
    s.phi_max = r.get<double>("phi_max_deg", s.phi_max / kDeg) * kDeg;
    s.r_max = r.get<double>("r_max", s.r_max);
    s.width = r.get<double>("width", s.width);
    s.height = r.get<double>("height", s.height);
    Vec3d offset = Vec3d::Zero();
    Vec3d ypr = Vec3d::Zero();
    if (r.has("offset")) offset = vec3(r.at("offset"), r.path("offset"));
    if (r.has("ypr_deg")) ypr = vec3(r.at("ypr_deg"), r.path("ypr_deg")) * kDeg;
    sc.t_bs = Posed(ypr_quat(ypr(0), ypr(1), ypr(2)), offset);
    r.finish();
  }

  root.finish();
  sc.validate();
  return sc;
}

}  // namespace

Scenario scenario_from_json(const json& doc) {
  try {
    return parse_scenario(doc);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kInvalidScenario, e.what());
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kInvalidScenario, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kInvalidScenario, path + ": " + e.what());
  }
}

Scenario load_scenario(const std::string& path) { return scenario_from_json(read_json_file(path)); }

}  // namespace uwf
