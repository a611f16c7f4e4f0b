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
 * @file geometry.hpp
 * @brief Rigid-body algebra used by every factor and by the simulator.
 *
 * Conventions
 * -----------
 * Rotations are Hamilton unit quaternions (Eigen::Quaternion, coefficient
 * storage x y z w). A Pose maps points from its child frame into its parent
 * frame: p_parent = R * p_child + t.
 *
 * Perturbations are applied on the right for rotation and additively for
 * translation:
 *
 *   q <- q ⊗ exp(δθ),   t <- t + δp
 *
 * so δθ lives in the body (child) frame.
 */

#pragma once

#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace uwf {

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Quat = Eigen::Quaternion<Scalar>;

/// Below this rotation angle exp/log switch to their Taylor expansions.
inline constexpr double kSmallAngle = 1e-8;

template <typename Derived>
Mat3<typename Derived::Scalar> skew(const Eigen::MatrixBase<Derived>& v) {
  using S = typename Derived::Scalar;
  Mat3<S> m;
  m << S(0), -v(2), v(1),
       v(2), S(0), -v(0),
       -v(1), v(0), S(0);
  return m;
}

template <typename Derived>
Quat<typename Derived::Scalar> quat_exp(const Eigen::MatrixBase<Derived>& rotvec) {
  using S = typename Derived::Scalar;
  const S angle = rotvec.norm();
  Quat<S> q;
  if (angle < S(kSmallAngle)) {
    q.w() = S(1) - angle * angle / S(8);
    q.vec() = S(0.5) * rotvec;
  } else {
    const S half = S(0.5) * angle;
    q.w() = std::cos(half);
    q.vec() = (std::sin(half) / angle) * rotvec;
  }
  q.normalize();
  return q;
}

/// Rotation vector of q, with the angle taken in [0, π].
template <typename Scalar>
Vec3<Scalar> quat_log(const Quat<Scalar>& q_in) {
  Quat<Scalar> q = q_in.normalized();
  if (q.w() < Scalar(0)) q.coeffs() = -q.coeffs();
  const Scalar n = q.vec().norm();
  if (n < Scalar(kSmallAngle)) {
    return Scalar(2) * q.vec() / q.w();
  }
  return (Scalar(2) * std::atan2(n, q.w()) / n) * q.vec();
}

/// Geodesic angle of a rotation, radians in [0, π].
template <typename Scalar>
Scalar rotation_angle(const Quat<Scalar>& q) {
  return quat_log(q).norm();
}

/// Minimal right perturbation of a pose: rotation δθ (rad) and translation δp (m).
template <typename Scalar>
struct AxisAnglePerturbation {
  Vec3<Scalar> dtheta = Vec3<Scalar>::Zero();
  Vec3<Scalar> dp = Vec3<Scalar>::Zero();
};

template <typename Scalar>
class Pose {
 public:
  Pose() : q_(Quat<Scalar>::Identity()), t_(Vec3<Scalar>::Zero()) {}
  Pose(const Quat<Scalar>& q, const Vec3<Scalar>& t) : q_(q.normalized()), t_(t) {}

  static Pose Identity() { return Pose(); }
  static Pose FromTranslation(const Vec3<Scalar>& t) { return Pose(Quat<Scalar>::Identity(), t); }
  static Pose FromRotation(const Quat<Scalar>& q) { return Pose(q, Vec3<Scalar>::Zero()); }

  const Quat<Scalar>& rotation() const { return q_; }
  const Vec3<Scalar>& translation() const { return t_; }
  Mat3<Scalar> rotation_matrix() const { return q_.toRotationMatrix(); }

  Eigen::Matrix<Scalar, 4, 4> matrix() const {
    Eigen::Matrix<Scalar, 4, 4> m = Eigen::Matrix<Scalar, 4, 4>::Identity();
    m.template topLeftCorner<3, 3>() = rotation_matrix();
    m.template topRightCorner<3, 1>() = t_;
    return m;
  }

  template <typename Other>
  Pose<Other> cast() const {
    return Pose<Other>(q_.template cast<Other>(), t_.template cast<Other>());
  }

 private:
  Quat<Scalar> q_;
  Vec3<Scalar> t_;
};

using Posed = Pose<double>;
using Vec3d = Vec3<double>;
using Mat3d = Mat3<double>;
using Quatd = Quat<double>;

template <typename Scalar>
Pose<Scalar> compose(const Pose<Scalar>& a, const Pose<Scalar>& b) {
  return Pose<Scalar>(a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation());
}

template <typename Scalar>
Pose<Scalar> inverse(const Pose<Scalar>& a) {
  const Quat<Scalar> qi = a.rotation().conjugate();
  return Pose<Scalar>(qi, -(qi * a.translation()));
}

template <typename Scalar>
Pose<Scalar> operator*(const Pose<Scalar>& a, const Pose<Scalar>& b) {
  return compose(a, b);
}

template <typename Scalar, typename Derived>
Vec3<Scalar> transform_point(const Pose<Scalar>& a, const Eigen::MatrixBase<Derived>& p) {
  return a.rotation() * p + a.translation();
}

/// Right-perturbed pose: q ⊗ exp(δθ), t + δp. A zero perturbation returns `a` unchanged.
template <typename Scalar>
Pose<Scalar> boxplus(const Pose<Scalar>& a, const AxisAnglePerturbation<Scalar>& d) {
  if (d.dtheta.isZero(0) && d.dp.isZero(0)) return a;
  return Pose<Scalar>(a.rotation() * quat_exp(d.dtheta), a.translation() + d.dp);
}

/// Inverse of boxplus: the perturbation taking `a` to `b`.
template <typename Scalar>
AxisAnglePerturbation<Scalar> boxminus(const Pose<Scalar>& b, const Pose<Scalar>& a) {
  AxisAnglePerturbation<Scalar> d;
  d.dtheta = quat_log(Quat<Scalar>(a.rotation().conjugate() * b.rotation()));
  d.dp = b.translation() - a.translation();
  return d;
}

/// Rotation about world z by `yaw` radians.
template <typename Scalar>
Quat<Scalar> yaw_quat(Scalar yaw) {
  return Quat<Scalar>(Eigen::AngleAxis<Scalar>(yaw, Vec3<Scalar>::UnitZ()));
}

/// Z-Y-X (yaw, pitch, roll) composition: R = Rz(yaw) Ry(pitch) Rx(roll).
template <typename Scalar>
Quat<Scalar> ypr_quat(Scalar yaw, Scalar pitch, Scalar roll) {
  return Quat<Scalar>(Eigen::AngleAxis<Scalar>(yaw, Vec3<Scalar>::UnitZ()) *
                      Eigen::AngleAxis<Scalar>(pitch, Vec3<Scalar>::UnitY()) *
                      Eigen::AngleAxis<Scalar>(roll, Vec3<Scalar>::UnitX()));
}

/// Yaw of the rotated x axis projected onto the x-y plane.
template <typename Scalar>
Scalar yaw_of(const Quat<Scalar>& q) {
  const Vec3<Scalar> x = q * Vec3<Scalar>::UnitX();
  return std::atan2(x.y(), x.x());
}

/// Left and right quaternion product matrices in (w, x, y, z) ordering:
/// p ⊗ q = quat_left(p) * [q] = quat_right(q) * [p].
template <typename Scalar>
Eigen::Matrix<Scalar, 4, 4> quat_left(const Quat<Scalar>& p) {
  Eigen::Matrix<Scalar, 4, 4> m;
  m(0, 0) = p.w();
  m.template block<1, 3>(0, 1) = -p.vec().transpose();
  m.template block<3, 1>(1, 0) = p.vec();
  m.template block<3, 3>(1, 1) = p.w() * Mat3<Scalar>::Identity() + skew(p.vec());
  return m;
}

template <typename Scalar>
Eigen::Matrix<Scalar, 4, 4> quat_right(const Quat<Scalar>& q) {
  Eigen::Matrix<Scalar, 4, 4> m;
  m(0, 0) = q.w();
  m.template block<1, 3>(0, 1) = -q.vec().transpose();
  m.template block<3, 1>(1, 0) = q.vec();
  m.template block<3, 3>(1, 1) = q.w() * Mat3<Scalar>::Identity() - skew(q.vec());
  return m;
}

}  // namespace uwf
