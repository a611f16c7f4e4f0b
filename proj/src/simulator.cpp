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

#include "uwf/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <unordered_map>

#include "uwf/errors.hpp"

namespace uwf {
namespace {

// RNG stream identifiers.
constexpr std::uint64_t kStreamImu = 1;
constexpr std::uint64_t kStreamBias = 2;
constexpr std::uint64_t kStreamCamera = 3;
constexpr std::uint64_t kStreamSurvivors = 4;
constexpr std::uint64_t kStreamSonar = 5;
constexpr std::uint64_t kStreamOutliers = 6;

bool is_integer_ratio(double a, double b) {
  const double r = a / b;
  return std::abs(r - std::round(r)) < 1e-9 && std::round(r) >= 1.0;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(seed);
  h = mix(h ^ a);
  h = mix(h ^ b);
  return mix(h ^ c);
}

// ---------------------------------------------------------------------------
// CubicSpline

CubicSpline::CubicSpline(std::vector<double> t, std::vector<double> y, double start_slope, double end_slope)
    : t_(std::move(t)), y_(std::move(y)) {
  const std::size_t n = t_.size();
  if (n < 2 || y_.size() != n) throw Error(ErrorKind::kInvalidScenario, "spline needs at least two knots");
  for (std::size_t i = 1; i < n; ++i) {
    if (!(t_[i] > t_[i - 1])) throw Error(ErrorKind::kInvalidScenario, "waypoint times must strictly increase");
  }

  // Tridiagonal system for knot second derivatives.
  std::vector<double> lower(n, 0.0), diag(n, 0.0), upper(n, 0.0), rhs(n, 0.0);
  auto h = [&](std::size_t i) { return t_[i + 1] - t_[i]; };
  auto slope = [&](std::size_t i) { return (y_[i + 1] - y_[i]) / h(i); };

  if (std::isnan(start_slope)) {
    diag[0] = 1.0;
  } else {
    diag[0] = 2.0 * h(0);
    upper[0] = h(0);
    rhs[0] = 6.0 * (slope(0) - start_slope);
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    lower[i] = h(i - 1);
    diag[i] = 2.0 * (h(i - 1) + h(i));
    upper[i] = h(i);
    rhs[i] = 6.0 * (slope(i) - slope(i - 1));
  }
  if (std::isnan(end_slope)) {
    diag[n - 1] = 1.0;
  } else {
    lower[n - 1] = h(n - 2);
    diag[n - 1] = 2.0 * h(n - 2);
    rhs[n - 1] = 6.0 * (end_slope - slope(n - 2));
  }

  // Thomas algorithm.
  for (std::size_t i = 1; i < n; ++i) {
    const double w = lower[i] / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  m_.assign(n, 0.0);
  m_[n - 1] = rhs[n - 1] / diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) m_[i] = (rhs[i] - upper[i] * m_[i + 1]) / diag[i];
}

std::size_t CubicSpline::segment(double t) const {
  auto it = std::upper_bound(t_.begin(), t_.end(), t);
  std::size_t i = it == t_.begin() ? 0 : static_cast<std::size_t>(it - t_.begin()) - 1;
  return std::min(i, t_.size() - 2);
}

double CubicSpline::value(double t) const {
  t = std::clamp(t, t_.front(), t_.back());
  const std::size_t i = segment(t);
  const double h = t_[i + 1] - t_[i];
  const double a = t_[i + 1] - t;
  const double b = t - t_[i];
  return m_[i] * a * a * a / (6.0 * h) + m_[i + 1] * b * b * b / (6.0 * h) + (y_[i] / h - m_[i] * h / 6.0) * a +
         (y_[i + 1] / h - m_[i + 1] * h / 6.0) * b;
}

double CubicSpline::derivative(double t) const {
  t = std::clamp(t, t_.front(), t_.back());
  const std::size_t i = segment(t);
  const double h = t_[i + 1] - t_[i];
  const double a = t_[i + 1] - t;
  const double b = t - t_[i];
  return -m_[i] * a * a / (2.0 * h) + m_[i + 1] * b * b / (2.0 * h) - (y_[i] / h - m_[i] * h / 6.0) +
         (y_[i + 1] / h - m_[i + 1] * h / 6.0);
}

double CubicSpline::second_derivative(double t) const {
  t = std::clamp(t, t_.front(), t_.back());
  const std::size_t i = segment(t);
  const double h = t_[i + 1] - t_[i];
  return (m_[i] * (t_[i + 1] - t) + m_[i + 1] * (t - t_[i])) / h;
}

double CubicSpline::third_derivative(double t) const {
  t = std::clamp(t, t_.front(), t_.back());
  const std::size_t i = segment(t);
  return (m_[i + 1] - m_[i]) / (t_[i + 1] - t_[i]);
}

// ---------------------------------------------------------------------------
// GroundTruthTrajectory

GroundTruthTrajectory::GroundTruthTrajectory(const TrajectorySpec& spec) : attitude_(spec.attitude) {
  if (spec.waypoints.size() < 2) throw Error(ErrorKind::kInvalidScenario, "trajectory needs two waypoints");
  std::vector<double> t;
  std::array<std::vector<double>, 3> xyz;
  std::vector<double> yaw;
  for (const Waypoint& w : spec.waypoints) {
    t.push_back(w.t);
    for (int k = 0; k < 3; ++k) xyz[k].push_back(w.position(k));
    double y = w.yaw;
    if (!yaw.empty()) {
      // Unwrap onto the branch nearest the previous waypoint.
      while (y - yaw.back() > M_PI) y -= 2.0 * M_PI;
      while (y - yaw.back() < -M_PI) y += 2.0 * M_PI;
    }
    yaw.push_back(y);
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double start = spec.start_at_rest ? 0.0 : nan;
  for (int k = 0; k < 3; ++k) pos_[k] = CubicSpline(t, xyz[k], start, nan);
  yaw_ = CubicSpline(t, yaw, start, nan);
  t_begin_ = t.front();
  t_end_ = t.back();
}

Vec3d GroundTruthTrajectory::ypr(double t) const {
  const double w = 2.0 * M_PI / attitude_.period;
  return Vec3d(yaw_.value(t), attitude_.pitch_amplitude * std::sin(2.0 * w * t),
               attitude_.roll_amplitude * std::sin(w * t));
}

Vec3d GroundTruthTrajectory::ypr_rate(double t) const {
  const double w = 2.0 * M_PI / attitude_.period;
  return Vec3d(yaw_.derivative(t), 2.0 * w * attitude_.pitch_amplitude * std::cos(2.0 * w * t),
               w * attitude_.roll_amplitude * std::cos(w * t));
}

Posed GroundTruthTrajectory::pose(double t) const {
  const Vec3d a = ypr(t);
  return Posed(ypr_quat(a(0), a(1), a(2)), Vec3d(pos_[0].value(t), pos_[1].value(t), pos_[2].value(t)));
}

Vec3d GroundTruthTrajectory::velocity(double t) const {
  return Vec3d(pos_[0].derivative(t), pos_[1].derivative(t), pos_[2].derivative(t));
}

Vec3d GroundTruthTrajectory::acceleration(double t) const {
  return Vec3d(pos_[0].second_derivative(t), pos_[1].second_derivative(t), pos_[2].second_derivative(t));
}

Vec3d GroundTruthTrajectory::angular_velocity(double t) const {
  const Vec3d a = ypr(t);
  const Vec3d r = ypr_rate(t);
  const double pitch = a(1);
  const double roll = a(2);
  return Vec3d(r(2) - r(0) * std::sin(pitch),
               r(1) * std::cos(roll) + r(0) * std::sin(roll) * std::cos(pitch),
               -r(1) * std::sin(roll) + r(0) * std::cos(roll) * std::cos(pitch));
}

// ---------------------------------------------------------------------------
// Scenario

Posed CameraRig::t_cb(int camera_index) const {
  Mat3d r_cb;
  r_cb << 0.0, -1.0, 0.0,
          0.0, 0.0, -1.0,
          1.0, 0.0, 0.0;
  const double side = camera_index == 0 ? 0.5 * baseline : -0.5 * baseline;
  const Vec3d c_b = offset + Vec3d(0.0, side, 0.0);
  return Posed(Quatd(r_cb), -(r_cb * c_b));
}

void Scenario::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::kInvalidScenario, what); };
  if (!(camera_hz > 0.0 && sonar_hz > 0.0 && imu_hz > 0.0)) fail("rates must be positive");
  if (!is_integer_ratio(imu_hz, camera_hz)) fail("imu rate must be an integer multiple of the camera rate");
  if (!is_integer_ratio(camera_hz, sonar_hz)) fail("camera rate must be an integer multiple of the sonar rate");
  if (trajectory.waypoints.size() < 2) fail("trajectory needs at least two waypoints");
  const double t0 = trajectory.waypoints.front().t;
  const double t1 = trajectory.waypoints.back().t;
  if (std::abs(t0) > 1e-12) fail("trajectory must start at t = 0");
  if (!(duration > 0.0) || duration > t1 + 1e-9) fail("duration must lie within the trajectory span");
  for (const auto& [a, b] : degradation_windows) {
    if (!(a <= b) || a < 0.0 || b > duration + 1e-9) fail("degradation window outside the trajectory span");
  }
  if (degraded_survivors < 0) fail("degraded survivors must be non-negative");
  if (pixel_sigma < 0.0 || sonar_sigma < 0.0) fail("noise must be non-negative");
  if (sonar_outlier_fraction < 0.0 || sonar_outlier_fraction > 1.0) fail("outlier fraction must be in [0, 1]");
  const ImuNoiseParams& n = imu.params;
  if (n.sigma_a < 0.0 || n.sigma_g < 0.0 || n.sigma_ba < 0.0 || n.sigma_bg < 0.0 || !(n.gravity > 0.0)) {
    fail("invalid IMU noise");
  }
  if (imu.initial_bias_a < 0.0 || imu.initial_bias_g < 0.0) fail("invalid initial bias spread");
  if (!sonar.valid()) fail("invalid sonar intrinsics");
  if (!(camera.focal_px > 0.0 && camera.max_range > 0.0 && camera.baseline > 0.0)) fail("invalid camera rig");
}

bool Scenario::degraded_at(double t) const {
  return std::any_of(degradation_windows.begin(), degradation_windows.end(),
                     [t](const auto& w) { return t >= w.first && t <= w.second; });
}

// ---------------------------------------------------------------------------
// Correspondences

SonarCorrespondenceSet correspond_by_id(const FrameBundle& frame, const FrameBundle& keyframe,
                                        double outlier_fraction, const SonarIntrinsics& intr, std::uint64_t seed) {
  SonarCorrespondenceSet set;
  set.source_frame_id = frame.frame_id;
  set.keyframe_id = keyframe.frame_id;
  set.source_time = frame.timestamp;
  set.keyframe_time = keyframe.timestamp;

  std::unordered_map<int, const SonarPoint*> by_id;
  for (const SonarDetection& d : keyframe.sonar) by_id.emplace(d.target_id, &d.point);
  for (const SonarDetection& d : frame.sonar) {
    auto it = by_id.find(d.target_id);
    if (it != by_id.end()) set.pairs.push_back({*it->second, d.point});
  }

  const int n = static_cast<int>(set.pairs.size());
  const int outliers = static_cast<int>(std::lround(outlier_fraction * n));
  if (outliers > 0) {
    std::mt19937_64 rng(derive_seed(seed, kStreamOutliers, static_cast<std::uint64_t>(frame.frame_id),
                                    static_cast<std::uint64_t>(keyframe.frame_id)));
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::uniform_real_distribution<double> range(0.2 * intr.r_max, 0.9 * intr.r_max);
    std::uniform_real_distribution<double> bearing(intr.theta_min, intr.theta_max);
    for (int k = 0; k < outliers; ++k) {
      set.pairs[order[k]].current = planar_project(range(rng), bearing(rng), intr);
    }
  }
  return set;
}

// ---------------------------------------------------------------------------
// Simulator

Simulator::Simulator(Scenario scenario) : scenario_(std::move(scenario)), truth_(scenario_.trajectory) {
  scenario_.validate();
}

CorrespondenceProvider Simulator::correspondence_provider() const {
  const double fraction = scenario_.sonar_outlier_fraction;
  const SonarIntrinsics intr = scenario_.sonar;
  const std::uint64_t seed = scenario_.seed;
  return [fraction, intr, seed](const FrameBundle& frame, const FrameBundle& keyframe) {
    return correspond_by_id(frame, keyframe, fraction, intr, seed);
  };
}

std::vector<FrameBundle> Simulator::generate() const {
  const Scenario& sc = scenario_;
  const ImuNoiseParams& noise = sc.imu.params;
  const double imu_dt = 1.0 / sc.imu_hz;
  const int imu_per_frame = static_cast<int>(std::lround(sc.imu_hz / sc.camera_hz));
  const int frames_per_sonar = static_cast<int>(std::lround(sc.camera_hz / sc.sonar_hz));
  const int frame_count = static_cast<int>(std::floor(sc.duration * sc.camera_hz + 1e-9)) + 1;
  const int imu_count = (frame_count - 1) * imu_per_frame + 1;

  // IMU stream with a random-walk bias.
  std::mt19937_64 bias_rng(derive_seed(sc.seed, kStreamBias));
  std::mt19937_64 imu_rng(derive_seed(sc.seed, kStreamImu));
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto gvec = [&](std::mt19937_64& rng) { return Vec3d(gauss(rng), gauss(rng), gauss(rng)); };

  ImuBias bias;
  bias.accel = sc.imu.initial_bias_a * gvec(bias_rng);
  bias.gyro = sc.imu.initial_bias_g * gvec(bias_rng);

  std::vector<ImuSample> imu(imu_count);
  std::vector<ImuBias> biases(imu_count);
  const Vec3d g = noise.gravity_vector();
  for (int m = 0; m < imu_count; ++m) {
    const double t = m * imu_dt;
    if (m > 0) {
      bias.accel += noise.sigma_ba * std::sqrt(imu_dt) * gvec(bias_rng);
      bias.gyro += noise.sigma_bg * std::sqrt(imu_dt) * gvec(bias_rng);
    }
    const Posed pose = truth_.pose(t);
    ImuSample& s = imu[m];
    s.timestamp = t;
    s.accel = pose.rotation().conjugate() * (truth_.acceleration(t) + g) + bias.accel +
              (noise.sigma_a / std::sqrt(imu_dt)) * gvec(imu_rng);
    s.gyro = truth_.angular_velocity(t) + bias.gyro + (noise.sigma_g / std::sqrt(imu_dt)) * gvec(imu_rng);
    biases[m] = bias;
  }

  const std::array<Posed, 2> t_cb{sc.camera.t_cb(0), sc.camera.t_cb(1)};
  const double tan_h = std::tan(0.5 * sc.camera.fov_h);
  const double tan_v = std::tan(0.5 * sc.camera.fov_v);
  const double sigma_norm = sc.pixel_sigma / sc.camera.focal_px;

  std::vector<FrameBundle> frames(frame_count);
  for (int k = 0; k < frame_count; ++k) {
    FrameBundle& f = frames[k];
    const int m_end = k * imu_per_frame;
    f.frame_id = k;
    f.timestamp = imu[m_end].timestamp;
    const Posed t_wb = truth_.pose(f.timestamp);
    f.truth.timestamp = f.timestamp;
    f.truth.pose = t_wb;
    f.truth.velocity = truth_.velocity(f.timestamp);
    f.truth.bias = biases[m_end];

    const int m_begin = k == 0 ? 0 : (k - 1) * imu_per_frame + 1;
    f.imu.assign(imu.begin() + m_begin, imu.begin() + m_end + 1);

    // Stereo features.
    const Posed t_bw = inverse(t_wb);
    std::vector<int> matched;
    std::vector<std::array<Vec3d, 2>> points;
    for (int j = 0; j < static_cast<int>(sc.landmarks.size()); ++j) {
      if (!sc.landmarks[j].textured) continue;
      const Vec3d p_b = transform_point(t_bw, sc.landmarks[j].position);
      std::array<Vec3d, 2> p_c;
      bool visible = true;
      for (int c = 0; c < 2 && visible; ++c) {
        p_c[c] = transform_point(t_cb[c], p_b);
        visible = p_c[c].z() > 0.1 && p_c[c].norm() <= sc.camera.max_range &&
                  std::abs(p_c[c].x() / p_c[c].z()) <= tan_h && std::abs(p_c[c].y() / p_c[c].z()) <= tan_v;
      }
      if (visible) {
        matched.push_back(j);
        points.push_back(p_c);
      }
    }
    std::vector<int> keep(matched.size());
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = static_cast<int>(i);
    if (sc.degraded_at(f.timestamp) && static_cast<int>(keep.size()) > sc.degraded_survivors) {
      std::mt19937_64 rng(derive_seed(sc.seed, kStreamSurvivors, static_cast<std::uint64_t>(k)));
      std::shuffle(keep.begin(), keep.end(), rng);
      keep.resize(sc.degraded_survivors);
      std::sort(keep.begin(), keep.end());
    }
    std::mt19937_64 cam_rng(derive_seed(sc.seed, kStreamCamera, static_cast<std::uint64_t>(k)));
    for (int i : keep) {
      for (int c = 0; c < 2; ++c) {
        CameraObservation obs;
        obs.camera_index = c;
        obs.landmark_id = matched[i];
        obs.frame_id = k;
        obs.z = points[i][c].head<2>() / points[i][c].z();
        obs.z += sigma_norm * Eigen::Vector2d(gauss(cam_rng), gauss(cam_rng));
        obs.sigma = sigma_norm;
        f.camera.push_back(obs);
      }
    }
    f.matched_camera_features = static_cast<int>(keep.size());

    // Sonar detections through the pixel pathway.
    if (k % frames_per_sonar == 0) {
      f.has_sonar = true;
      std::mt19937_64 sonar_rng(derive_seed(sc.seed, kStreamSonar, static_cast<std::uint64_t>(k)));
      const Posed t_sw = inverse(compose(t_wb, sc.t_bs));
      for (int j = 0; j < static_cast<int>(sc.sonar_targets.size()); ++j) {
        const Vec3d p_s = transform_point(t_sw, sc.sonar_targets[j]);
        const double nx = gauss(sonar_rng);
        const double ny = gauss(sonar_rng);
        if (!in_fov(p_s, sc.sonar)) continue;
        const Vec3d sph = euclidean_to_spherical(p_s);
        const SonarPoint projected = planar_project(sph(0), sph(1), sc.sonar);
        SonarPoint decoded;
        try {
          decoded = pixel_to_point(projected.pixel.x(), projected.pixel.y(), sc.sonar);
        } catch (const Error&) {
          continue;
        }
        if (sc.sonar_sigma > 0.0) {
          decoded = point_from_planar(decoded.planar.x() + sc.sonar_sigma * nx,
                                      decoded.planar.y() + sc.sonar_sigma * ny, sc.sonar);
        }
        f.sonar.push_back({j, decoded});
      }
    }
  }
  return frames;
}

}  // namespace uwf
