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
 * @file imu.hpp
 * @brief IMU measurement model, pre-integration between keyframes, state
 * propagation and the pre-integration residual.
 *
 * Measurements follow
 *
 *   ω̂ = ω + b_g + n_g
 *   â = a + R_bw g_w + b_a + n_a,     g_w = (0, 0, g)
 *
 * so a resting, level IMU reads â = (0, 0, g).
 *
 * Pre-integrated terms (α, β, δq) are accumulated with the midpoint rule. The
 * 15×15 covariance is ordered (δα, δβ, δθ, δb_a, δb_g) and propagated with the
 * first-order discrete update P ← (I + F δt) P (I + F δt)ᵀ + δt G Q Gᵀ.
 *
 * There is no first-order bias correction of (α, β, δq). When a state's bias
 * leaves the trust region around the linearization point the buffer must be
 * re-integrated (see reintegrate()).
 */

#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "uwf/geometry.hpp"

namespace uwf {

using Vector15d = Eigen::Matrix<double, 15, 1>;
using Matrix15d = Eigen::Matrix<double, 15, 15>;

struct ImuSample {
  double timestamp = 0.0;
  Vec3d gyro = Vec3d::Zero();   ///< ω̂, rad/s
  Vec3d accel = Vec3d::Zero();  ///< â, m/s²
};

struct ImuNoiseParams {
  double sigma_a = 0.01;     ///< accelerometer white noise, m/s²/√Hz
  double sigma_g = 0.001;    ///< gyroscope white noise, rad/s/√Hz
  double sigma_ba = 1e-4;    ///< accelerometer bias random walk, m/s³/√Hz
  double sigma_bg = 1e-5;    ///< gyroscope bias random walk, rad/s²/√Hz
  double gravity = 9.81;     ///< m/s²

  Vec3d gravity_vector() const { return Vec3d(0.0, 0.0, gravity); }
  bool valid() const {
    return sigma_a > 0.0 && sigma_g > 0.0 && sigma_ba > 0.0 && sigma_bg > 0.0 && gravity > 0.0;
  }
};

struct ImuBias {
  Vec3d accel = Vec3d::Zero();
  Vec3d gyro = Vec3d::Zero();
};

/// Bias distance beyond which a pre-integration must be recomputed.
struct BiasTrustRegion {
  double accel = 0.05;  ///< m/s²
  double gyro = 0.01;   ///< rad/s
};

struct RobotState {
  double timestamp = 0.0;
  Posed pose;                      ///< T_wb
  Vec3d velocity = Vec3d::Zero();  ///< v_wb
  ImuBias bias;
};

struct PreintegratedImu {
  Vec3d alpha = Vec3d::Zero();
  Vec3d beta = Vec3d::Zero();
  Quatd delta_q = Quatd::Identity();
  Matrix15d covariance = Matrix15d::Zero();
  double dt_total = 0.0;
  double t_start = 0.0;
  double t_end = 0.0;
  ImuBias bias_lin;
  std::vector<ImuSample> samples;  ///< kept for re-integration

  /// Inverse covariance with 1e-12 diagonal jitter.
  Matrix15d information() const;
};

/// Requires ≥ 2 samples with strictly increasing timestamps.
PreintegratedImu preintegrate(std::span<const ImuSample> samples, const ImuBias& bias_lin,
                              const ImuNoiseParams& noise);

PreintegratedImu reintegrate(const PreintegratedImu& pre, const ImuBias& bias_lin, const ImuNoiseParams& noise);

bool bias_within_trust_region(const ImuBias& a, const ImuBias& b, const BiasTrustRegion& region = {});

/// Predicts the state at the end of `pre`. Throws BiasTrustRegionExceeded when
/// `prior`'s biases are too far from the pre-integration linearization point.
RobotState propagate_state(const RobotState& prior, const PreintegratedImu& pre, const ImuNoiseParams& noise,
                           const BiasTrustRegion& region = {});

/// Residual (e_p, e_v, e_q, e_ba, e_bg) with Jacobians with respect to the
/// error states (δθ, δp, δv, δb_a, δb_g) of both endpoints.
struct ImuResidual {
  Vector15d residual = Vector15d::Zero();
  Matrix15d jac_i = Matrix15d::Zero();
  Matrix15d jac_j = Matrix15d::Zero();
};

/// When `prior_pose_override` is set it replaces state_i's pose in the
/// residual; the Jacobian with respect to state_i's pose is then zero.
ImuResidual imu_residual(const RobotState& state_i, const RobotState& state_j, const PreintegratedImu& pre,
                         const ImuNoiseParams& noise, const std::optional<Posed>& prior_pose_override = std::nullopt);

}  // namespace uwf
