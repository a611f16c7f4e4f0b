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
 * @file simulator.hpp
 * @brief Deterministic synthetic underwater world.
 *
 * A Scenario describes a spline trajectory, camera landmarks, sonar targets,
 * sensor rates, noise and time windows of visual degradation. generate()
 * turns it into a stream of FrameBundles. Sonar matching is not part of the
 * bundle: the estimator asks a CorrespondenceProvider for the pairs between
 * any frame and its current sonar keyframe, which is where a real feature
 * front end would plug in.
 */

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "uwf/factors.hpp"
#include "uwf/geometry.hpp"
#include "uwf/imu.hpp"
#include "uwf/sonar_model.hpp"
#include "uwf/sonar_odometry.hpp"

namespace uwf {

/// Clamped/natural cubic spline through scalar knots.
class CubicSpline {
 public:
  CubicSpline() = default;
  /// `start_slope` / `end_slope` clamp the first derivative; NaN selects a natural end.
  CubicSpline(std::vector<double> t, std::vector<double> y, double start_slope, double end_slope);

  double value(double t) const;
  double derivative(double t) const;
  double second_derivative(double t) const;
  double third_derivative(double t) const;

 private:
  std::size_t segment(double t) const;

  std::vector<double> t_;
  std::vector<double> y_;
  std::vector<double> m_;  // second derivatives at knots
};

struct Waypoint {
  double t = 0.0;
  Vec3d position = Vec3d::Zero();
  double yaw = 0.0;  ///< radians
};

struct AttitudeExcitation {
  double roll_amplitude = 0.0;   ///< radians
  double pitch_amplitude = 0.0;  ///< radians
  double period = 10.0;          ///< seconds
};

struct TrajectorySpec {
  std::vector<Waypoint> waypoints;
  bool start_at_rest = true;
  AttitudeExcitation attitude;
};

/// Smooth ground-truth motion with analytic derivatives.
class GroundTruthTrajectory {
 public:
  explicit GroundTruthTrajectory(const TrajectorySpec& spec);

  Posed pose(double t) const;
  Vec3d velocity(double t) const;
  Vec3d acceleration(double t) const;
  /// Angular velocity in the body frame.
  Vec3d angular_velocity(double t) const;
  double start_time() const { return t_begin_; }
  double end_time() const { return t_end_; }

 private:
  Vec3d ypr(double t) const;
  Vec3d ypr_rate(double t) const;

  std::array<CubicSpline, 3> pos_;
  CubicSpline yaw_;
  AttitudeExcitation attitude_;
  double t_begin_ = 0.0;
  double t_end_ = 0.0;
};

struct CameraRig {
  double focal_px = 450.0;
  double fov_h = 90.0 * M_PI / 180.0;
  double fov_v = 70.0 * M_PI / 180.0;
  double max_range = 8.0;
  double baseline = 0.12;
  Vec3d offset = Vec3d(0.2, 0.0, 0.0);  ///< rig centre in the body frame

  /// T_cib for camera 0 (left) or 1 (right). Optical axis along body x.
  Posed t_cb(int camera_index) const;
};

struct SceneLandmark {
  Vec3d position = Vec3d::Zero();
  bool textured = true;  ///< untextured landmarks never produce camera features
};

struct ImuSimNoise {
  ImuNoiseParams params{0.0, 0.0, 0.0, 0.0, 9.81};
  double initial_bias_a = 0.0;  ///< per-axis standard deviation, m/s²
  double initial_bias_g = 0.0;  ///< per-axis standard deviation, rad/s
};

struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  double duration = 0.0;
  TrajectorySpec trajectory;
  std::vector<SceneLandmark> landmarks;
  std::vector<Vec3d> sonar_targets;
  std::vector<std::pair<double, double>> degradation_windows;
  int degraded_survivors = 5;
  double camera_hz = 2.0;
  double sonar_hz = 2.0;
  double imu_hz = 100.0;
  double pixel_sigma = 0.0;   ///< pixels
  double sonar_sigma = 0.0;   ///< metres, planar
  double sonar_outlier_fraction = 0.0;
  ImuSimNoise imu;
  CameraRig camera;
  SonarIntrinsics sonar;
  Posed t_bs;  ///< sonar → body

  /// Throws InvalidScenario describing the first violated constraint.
  void validate() const;
  bool degraded_at(double t) const;
};

struct SonarDetection {
  int target_id = -1;
  SonarPoint point;
};

struct FrameBundle {
  int frame_id = 0;
  double timestamp = 0.0;
  std::vector<CameraObservation> camera;  ///< landmark ids are ground truth
  int matched_camera_features = 0;        ///< landmarks seen by both cameras
  bool has_sonar = false;
  std::vector<SonarDetection> sonar;
  /// IMU samples in (previous frame, this frame]; the first frame holds one sample.
  std::vector<ImuSample> imu;
  RobotState truth;
};

/// Matched sonar pairs between `frame` and `keyframe`.
using CorrespondenceProvider = std::function<SonarCorrespondenceSet(const FrameBundle& frame, const FrameBundle& keyframe)>;

/// Pairs detections by target id and turns round(outlier_fraction · n) of the
/// pairs into random mismatches. Deterministic in (seed, frame ids).
SonarCorrespondenceSet correspond_by_id(const FrameBundle& frame, const FrameBundle& keyframe,
                                        double outlier_fraction, const SonarIntrinsics& intr, std::uint64_t seed);

class Simulator {
 public:
  explicit Simulator(Scenario scenario);

  const Scenario& scenario() const { return scenario_; }
  const GroundTruthTrajectory& truth() const { return truth_; }

  std::vector<FrameBundle> generate() const;
  CorrespondenceProvider correspondence_provider() const;

 private:
  Scenario scenario_;
  GroundTruthTrajectory truth_;
};

/// Mixes a base seed with stream identifiers (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

}  // namespace uwf
