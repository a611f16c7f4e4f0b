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

#include "uwf/factors.hpp"

#include "uwf/errors.hpp"

namespace uwf {

Eigen::Matrix<double, 2, 3> projection_jacobian(const Vec3d& p_c) {
  const double inv_z = 1.0 / p_c.z();
  Eigen::Matrix<double, 2, 3> h;
  h << inv_z, 0.0, -p_c.x() * inv_z * inv_z,
       0.0, inv_z, -p_c.y() * inv_z * inv_z;
  return h;
}

CameraResidual camera_residual(const RobotState& state, const Landmark& landmark, const CameraObservation& obs,
                               const Posed& t_cb) {
  const Mat3d r_bw = state.pose.rotation_matrix().transpose();
  const Mat3d r_cb = t_cb.rotation_matrix();
  const Vec3d p_b = r_bw * (landmark.position - state.pose.translation());
  const Vec3d p_c = r_cb * p_b + t_cb.translation();
  if (p_c.z() <= kMinDepth) throw Error(ErrorKind::kBehindCamera, "landmark behind camera");

  CameraResidual out;
  out.point_camera = p_c;
  out.residual = obs.z - p_c.head<2>() / p_c.z();

  const Eigen::Matrix<double, 2, 3> h_proj_r = projection_jacobian(p_c) * r_cb;
  // The residual subtracts the projection, hence the leading minus.
  out.jac_pose.leftCols<3>() = -h_proj_r * skew(p_b);
  out.jac_pose.rightCols<3>() = h_proj_r * r_bw;
  out.jac_landmark = -h_proj_r * r_bw;
  return out;
}

Eigen::Matrix2d camera_information(const CameraObservation& obs) {
  return Eigen::Matrix2d::Identity() / (obs.sigma * obs.sigma);
}

SonarResidual sonar_residual(const RobotState& state_k, const RobotState& state_i, const SonarFactorObservation& obs,
                             const Posed& t_bs) {
  const Vec3d x_b = transform_point(t_bs, obs.keyframe_point.lifted());
  const Vec3d y_b = transform_point(t_bs, obs.current_point.lifted());
  const Mat3d r_k = state_k.pose.rotation_matrix();
  const Mat3d r_i = state_i.pose.rotation_matrix();

  SonarResidual out;
  out.residual = (r_i * y_b + state_i.pose.translation()) - (r_k * x_b + state_k.pose.translation());
  out.jac_current.leftCols<3>() = -r_i * skew(y_b);
  out.jac_current.rightCols<3>() = Mat3d::Identity();
  out.jac_keyframe.leftCols<3>() = r_k * skew(x_b);
  out.jac_keyframe.rightCols<3>() = -Mat3d::Identity();
  return out;
}

Eigen::Matrix3d sonar_information(const SonarFactorObservation& obs, double w_z) {
  const double inv_var = 1.0 / (obs.sigma * obs.sigma);
  return Eigen::Vector3d(inv_var, inv_var, w_z * inv_var).asDiagonal();
}

Eigen::Matrix<double, 3, 6> transported_point_jacobian_world(const Posed& t_wb, const Posed& t_bs,
                                                             const SonarPoint& point) {
  const Vec3d w = transform_point(compose(t_wb, t_bs), point.lifted());
  Eigen::Matrix<double, 3, 6> j;
  j.leftCols<3>() = -skew(w);
  j.rightCols<3>() = Mat3d::Identity();
  return j;
}

}  // namespace uwf
