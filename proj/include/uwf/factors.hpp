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
 * @file factors.hpp
 * @brief Camera reprojection and sonar residuals with analytic Jacobians and
 * their information matrices.
 *
 * Jacobians are taken with respect to the right perturbation of the body pose,
 * T_wb ← (q ⊗ exp(δθ), p + δp), columns ordered (δθ, δp).
 */

#pragma once

#include <Eigen/Core>

#include "uwf/geometry.hpp"
#include "uwf/imu.hpp"
#include "uwf/sonar_model.hpp"

namespace uwf {

/// Minimum camera-frame depth for a valid projection, metres.
inline constexpr double kMinDepth = 1e-3;

struct CameraObservation {
  int camera_index = 0;  ///< 0 left, 1 right
  int landmark_id = -1;
  int frame_id = -1;
  Eigen::Vector2d z = Eigen::Vector2d::Zero();  ///< normalized image coordinates
  double sigma = 1e-3;                          ///< normalized units
};

struct Landmark {
  int id = -1;
  Vec3d position = Vec3d::Zero();  ///< P_w
};

struct CameraResidual {
  Eigen::Vector2d residual = Eigen::Vector2d::Zero();
  Eigen::Matrix<double, 2, 6> jac_pose = Eigen::Matrix<double, 2, 6>::Zero();
  Eigen::Matrix<double, 2, 3> jac_landmark = Eigen::Matrix<double, 2, 3>::Zero();
  Vec3d point_camera = Vec3d::Zero();
};

/// Pinhole projection Jacobian d(x/z, y/z)/d(x, y, z).
Eigen::Matrix<double, 2, 3> projection_jacobian(const Vec3d& p_c);

/// e = z - h(P_c) with P_c = R_cb R_wbᵀ (P_w - p_wb) + p_cb. Throws BehindCamera.
CameraResidual camera_residual(const RobotState& state, const Landmark& landmark, const CameraObservation& obs,
                               const Posed& t_cb);

/// Isotropic whitening (σ² I)⁻¹.
Eigen::Matrix2d camera_information(const CameraObservation& obs);

struct SonarFactorObservation {
  int keyframe_id = -1;
  int frame_id = -1;
  SonarPoint keyframe_point;  ///< P_sk
  SonarPoint current_point;   ///< P_si
  double sigma = 0.03;        ///< metres
};

struct SonarResidual {
  Vec3d residual = Vec3d::Zero();
  Eigen::Matrix<double, 3, 6> jac_keyframe = Eigen::Matrix<double, 3, 6>::Zero();  ///< w.r.t. T_wbk
  Eigen::Matrix<double, 3, 6> jac_current = Eigen::Matrix<double, 3, 6>::Zero();   ///< w.r.t. T_wbi
};

/// e_s = T_wbi T_bs P_si - T_wbk T_bs P_sk, planar points lifted to z = 0.
SonarResidual sonar_residual(const RobotState& state_k, const RobotState& state_i, const SonarFactorObservation& obs,
                             const Posed& t_bs);

/// diag(σ⁻², σ⁻², w_z σ⁻²). The default w_z = 0 drops the unobserved elevation.
Eigen::Matrix3d sonar_information(const SonarFactorObservation& obs, double w_z = 0.0);

/// d(T_wb T_bs P)/d(δθ, δp) for a world-frame (left) perturbation
/// T_wb ← (exp(δθ) R, exp(δθ) p + δp): the matrix [ -[T_wb T_bs P]_× | I ].
Eigen::Matrix<double, 3, 6> transported_point_jacobian_world(const Posed& t_wb, const Posed& t_bs,
                                                             const SonarPoint& point);

/// Huber loss on a squared whitened residual s, with threshold k on √s.
struct HuberLoss {
  double k = 1.345;

  double rho(double s) const { return s <= k * k ? s : 2.0 * k * std::sqrt(s) - k * k; }
  /// ρ'(s), the IRLS weight applied to the whitened residual's normal equations.
  double weight(double s) const { return s <= k * k ? 1.0 : k / std::sqrt(s); }
};

}  // namespace uwf
