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
 * @file sonar_model.hpp
 * @brief Forward-looking imaging sonar geometry.
 *
 * The sonar frame has x forward, y to the side and z up. A return at range r,
 * bearing θ and elevation φ sits at (r cosφ cosθ, r cosφ sinθ, r sinφ). The
 * image is a fan: the sonar origin maps to the bottom-centre pixel
 * (W/2, H), range grows towards v = 0 at r_max / H metres per pixel, and the
 * bearing is measured from the image's vertical centre line,
 *
 *   θ = atan2(u - W/2, H - v).
 *
 * Elevation is lost in the image, so a pixel decodes to the planar point
 * (r cosθ, r sinθ).
 */

#pragma once

#include <algorithm>
#include <cmath>

#include "uwf/errors.hpp"
#include "uwf/geometry.hpp"

namespace uwf {

template <typename Scalar>
struct SonarIntrinsicsT {
  Scalar theta_min = Scalar(-60.0 * M_PI / 180.0);
  Scalar theta_max = Scalar(60.0 * M_PI / 180.0);
  Scalar phi_min = Scalar(-10.0 * M_PI / 180.0);
  Scalar phi_max = Scalar(10.0 * M_PI / 180.0);
  Scalar r_max = Scalar(15);
  Scalar width = Scalar(1024);   ///< W_s, pixels
  Scalar height = Scalar(512);   ///< H_img, pixels

  Scalar range_resolution() const { return r_max / height; }

  bool valid() const {
    return theta_min < theta_max && phi_min < phi_max && r_max > Scalar(0) &&
           width > Scalar(0) && height > Scalar(0);
  }
};

using SonarIntrinsics = SonarIntrinsicsT<double>;

/// A sonar detection in all three of its representations.
template <typename Scalar>
struct SonarPointT {
  Eigen::Matrix<Scalar, 2, 1> pixel = Eigen::Matrix<Scalar, 2, 1>::Zero();  ///< (u_s, v_s)
  Scalar range = Scalar(0);
  Scalar bearing = Scalar(0);
  Vec3<Scalar> planar = Vec3<Scalar>(Scalar(0), Scalar(0), Scalar(1));  ///< (x_s, y_s, 1)

  /// Planar point lifted onto the zero-elevation plane as a metric 3-vector.
  Vec3<Scalar> lifted() const { return Vec3<Scalar>(planar.x(), planar.y(), Scalar(0)); }
};

using SonarPoint = SonarPointT<double>;

template <typename Scalar>
Vec3<Scalar> spherical_to_euclidean(Scalar r, Scalar theta, Scalar phi) {
  return Vec3<Scalar>(r * std::cos(phi) * std::cos(theta), r * std::cos(phi) * std::sin(theta),
                      r * std::sin(phi));
}

/// (r, θ, φ) of a point in the sonar frame.
template <typename Scalar>
Vec3<Scalar> euclidean_to_spherical(const Vec3<Scalar>& p) {
  const Scalar r = p.norm();
  if (r == Scalar(0)) return Vec3<Scalar>::Zero();
  return Vec3<Scalar>(r, std::atan2(p.y(), p.x()), std::asin(std::clamp(p.z() / r, Scalar(-1), Scalar(1))));
}

template <typename Scalar>
bool pixel_in_image(Scalar u, Scalar v, const SonarIntrinsicsT<Scalar>& intr) {
  return u >= Scalar(0) && u <= intr.width && v >= Scalar(0) && v <= intr.height;
}

/// Range of a pixel, r = |(u - W/2, H - v)| · r_max / H. Only the range is
/// checked; pixel_to_point also rejects pixels outside the image.
template <typename Scalar>
Scalar pixel_to_range(Scalar u, Scalar v, const SonarIntrinsicsT<Scalar>& intr) {
  const Scalar du = u - intr.width / Scalar(2);
  const Scalar dv = intr.height - v;
  const Scalar r = std::sqrt(du * du + dv * dv) * intr.range_resolution();
  if (r > intr.r_max) throw Error(ErrorKind::kOutOfRange, "pixel beyond maximum range");
  return r;
}

template <typename Scalar>
Scalar pixel_to_bearing(Scalar u, Scalar v, const SonarIntrinsicsT<Scalar>& intr) {
  return std::atan2(u - intr.width / Scalar(2), intr.height - v);
}

template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> polar_to_pixel(Scalar r, Scalar theta, const SonarIntrinsicsT<Scalar>& intr) {
  const Scalar rho = r / intr.range_resolution();
  return Eigen::Matrix<Scalar, 2, 1>(intr.width / Scalar(2) + rho * std::sin(theta),
                                     intr.height - rho * std::cos(theta));
}

template <typename Scalar>
bool polar_in_fov(Scalar r, Scalar theta, const SonarIntrinsicsT<Scalar>& intr) {
  return r >= Scalar(0) && r <= intr.r_max && theta >= intr.theta_min && theta <= intr.theta_max;
}

/// Builds the planar sonar point for a return at (r, θ); elevation is discarded.
template <typename Scalar>
SonarPointT<Scalar> planar_project(Scalar r, Scalar theta, const SonarIntrinsicsT<Scalar>& intr) {
  if (!polar_in_fov(r, theta, intr)) throw Error(ErrorKind::kOutOfFov, "polar point outside sonar FOV");
  SonarPointT<Scalar> s;
  s.range = r;
  s.bearing = theta;
  s.pixel = polar_to_pixel(r, theta, intr);
  s.planar = Vec3<Scalar>(r * std::cos(theta), r * std::sin(theta), Scalar(1));
  return s;
}

/// Decodes a pixel through pixel_to_range / pixel_to_bearing.
template <typename Scalar>
SonarPointT<Scalar> pixel_to_point(Scalar u, Scalar v, const SonarIntrinsicsT<Scalar>& intr) {
  if (!pixel_in_image(u, v, intr)) {
    throw Error(ErrorKind::kOutOfRange, "pixel outside sonar image");
  }
  const Scalar r = pixel_to_range(u, v, intr);
  const Scalar theta = pixel_to_bearing(u, v, intr);
  SonarPointT<Scalar> s;
  s.pixel = Eigen::Matrix<Scalar, 2, 1>(u, v);
  s.range = r;
  s.bearing = theta;
  s.planar = Vec3<Scalar>(r * std::cos(theta), r * std::sin(theta), Scalar(1));
  return s;
}

/// Rebuilds polar and pixel fields from a planar (x, y) position.
template <typename Scalar>
SonarPointT<Scalar> point_from_planar(Scalar x, Scalar y, const SonarIntrinsicsT<Scalar>& intr) {
  SonarPointT<Scalar> s;
  s.range = std::hypot(x, y);
  s.bearing = std::atan2(y, x);
  s.pixel = polar_to_pixel(s.range, s.bearing, intr);
  s.planar = Vec3<Scalar>(x, y, Scalar(1));
  return s;
}

template <typename Scalar>
bool in_fov(const Vec3<Scalar>& p, const SonarIntrinsicsT<Scalar>& intr) {
  const Scalar r = p.norm();
  if (r == Scalar(0)) return true;
  if (r > intr.r_max) return false;
  const Vec3<Scalar> sph = euclidean_to_spherical(p);
  return sph(1) >= intr.theta_min && sph(1) <= intr.theta_max && sph(2) >= intr.phi_min &&
         sph(2) <= intr.phi_max;
}

}  // namespace uwf
