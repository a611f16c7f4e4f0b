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
 * @file sonar_odometry.hpp
 * @brief Planar relative pose between a sonar keyframe and the current sonar
 * frame from matched detections.
 *
 * The model is the 2D rigid transform that maps current-frame points onto
 * keyframe points, P_sk = T_sksi · P_si, embedded in SE(3) with zero roll,
 * pitch and z. Outliers are rejected by RANSAC over two-point minimal samples.
 */

#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "uwf/geometry.hpp"
#include "uwf/sonar_model.hpp"

namespace uwf {

/// Matched detections between the sonar keyframe and the current sonar frame.
struct SonarCorrespondenceSet {
  struct Pair {
    SonarPoint keyframe;  ///< P_sk
    SonarPoint current;   ///< P_si
  };
  std::vector<Pair> pairs;
  int source_frame_id = -1;
  int keyframe_id = -1;
  double source_time = 0.0;
  double keyframe_time = 0.0;
};

/// 2D rigid transform a = R(yaw) b + t.
struct Rigid2d {
  double yaw = 0.0;
  Eigen::Vector2d t = Eigen::Vector2d::Zero();

  Eigen::Vector2d apply(const Eigen::Vector2d& b) const {
    return Eigen::Rotation2Dd(yaw) * b + t;
  }
  /// SE(2) → SE(3) embedding acting on (x, y, 0, 1).
  Posed to_pose() const {
    return Posed(yaw_quat(yaw), Vec3d(t.x(), t.y(), 0.0));
  }
};

/// Least-squares 2D alignment of `current` onto `keyframe` (centroids and the
/// cross-covariance angle). Throws DegenerateConfiguration when every
/// current point coincides within 1e-9.
Rigid2d fit_rigid_2d(std::span<const Eigen::Vector2d> keyframe, std::span<const Eigen::Vector2d> current);

class PlanarPoseEstimate {
 public:
  PlanarPoseEstimate() = default;
  PlanarPoseEstimate(const Rigid2d& transform, std::vector<int> inliers, double inlier_rms, bool valid)
      : transform_(transform), pose_(transform.to_pose()), inliers_(std::move(inliers)),
        inlier_rms_(inlier_rms), valid_(valid) {}

  /// T_sksi. Always has zero roll, pitch and z translation.
  const Posed& pose() const { return pose_; }
  const Rigid2d& transform() const { return transform_; }
  const std::vector<int>& inliers() const { return inliers_; }
  double inlier_rms() const { return inlier_rms_; }
  bool valid() const { return valid_; }

 private:
  Rigid2d transform_;
  Posed pose_;
  std::vector<int> inliers_;
  double inlier_rms_ = 0.0;
  bool valid_ = false;
};

struct SonarOdometryConfig {
  double ransac_threshold = 0.06;  ///< metres
  int max_iters = 200;
  std::uint64_t seed = 0;
  int min_inliers = 6;
  double rms_max = 0.06;  ///< metres

  // Keyframe promotion.
  double promote_inlier_ratio = 0.4;
  double promote_yaw = 10.0 * M_PI / 180.0;
  double promote_translation_fraction = 0.25;  ///< of r_max
  double r_max = 15.0;

  /// Threshold and rms gate at two range-resolution units.
  static SonarOdometryConfig FromIntrinsics(const SonarIntrinsics& intr);
};

/// Indices of pairs consistent with the best two-point model. Deterministic for a given seed.
std::vector<int> ransac_filter(const SonarCorrespondenceSet& set, double threshold, int max_iters,
                               std::uint64_t seed);

PlanarPoseEstimate estimate_planar_pose(const SonarCorrespondenceSet& set, const SonarOdometryConfig& config);

enum class KeyframeDecision { kKeep, kPromoteCurrent };

KeyframeDecision keyframe_policy(const PlanarPoseEstimate& estimate, int pair_count,
                                 const SonarOdometryConfig& config);

}  // namespace uwf
