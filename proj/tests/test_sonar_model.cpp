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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "support/expect_error.hpp"
#include "uwf/sonar_model.hpp"

namespace uwf {
namespace {

SonarIntrinsics intrinsics(double width, double height, double r_max) {
  SonarIntrinsics intr;
  intr.width = width;
  intr.height = height;
  intr.r_max = r_max;
  return intr;
}

TEST(SphericalToEuclidean, Examples) {
  EXPECT_LT((spherical_to_euclidean(1.0, 0.0, 0.0) - Vec3d(1, 0, 0)).norm(), 1e-15);
  EXPECT_LT((spherical_to_euclidean(2.0, M_PI / 2, 0.0) - Vec3d(0, 2, 0)).norm(), 1e-15);
  EXPECT_NEAR(spherical_to_euclidean(1.0, M_PI / 4, M_PI / 6).norm(), 1.0, 1e-15);
}

TEST(SphericalToEuclidean, InvertsSphericalDecomposition) {
  const Vec3d p = spherical_to_euclidean(3.0, 0.4, -0.1);
  const Vec3d s = euclidean_to_spherical(p);
  EXPECT_NEAR(s(0), 3.0, 1e-14);
  EXPECT_NEAR(s(1), 0.4, 1e-14);
  EXPECT_NEAR(s(2), -0.1, 1e-14);
}

TEST(PixelToRange, Examples) {
  const SonarIntrinsics a = intrinsics(512, 1000, 10);
  EXPECT_EQ(pixel_to_range(256.0, 1000.0, a), 0.0);
  EXPECT_NEAR(pixel_to_range(256.0, 0.0, a), 10.0, 1e-12);
  // 300² + 400² = 500² pixels at 0.01 m per pixel.
  EXPECT_NEAR(pixel_to_range(256.0 + 300.0, 600.0, a), 5.0, 1e-12);
}

TEST(PixelToRange, BeyondMaxRangeIsAnError) {
  const SonarIntrinsics a = intrinsics(512, 1000, 10);
  EXPECT_UWF_ERROR(ErrorKind::kOutOfRange, pixel_to_range(0.0, 0.0, a));
  EXPECT_UWF_ERROR(ErrorKind::kOutOfRange, pixel_to_point(-5.0, 900.0, a));
}

TEST(SonarIntrinsics, RangeResolutionIsExact) {
  const SonarIntrinsics a = intrinsics(512, 1000, 10);
  EXPECT_EQ(a.range_resolution(), 10.0 / 1000.0);
  EXPECT_TRUE(a.valid());
  EXPECT_FALSE(intrinsics(512, 0, 10).valid());
}

TEST(PlanarProject, Examples) {
  const SonarIntrinsics a = intrinsics(512, 1000, 10);
  SonarIntrinsics wide = a;
  wide.theta_min = -M_PI;
  wide.theta_max = M_PI;
  EXPECT_LT((planar_project(1.0, 0.0, wide).planar - Vec3d(1, 0, 1)).norm(), 1e-15);
  EXPECT_LT((planar_project(2.0, M_PI / 2, wide).planar - Vec3d(0, 2, 1)).norm(), 1e-15);
  EXPECT_UWF_ERROR(ErrorKind::kOutOfFov, planar_project(2.0, M_PI / 2, a));
  EXPECT_UWF_ERROR(ErrorKind::kOutOfFov, planar_project(11.0, 0.0, a));
}

TEST(PlanarProject, DropsElevationInsteadOfFlattening) {
  const SonarIntrinsics a = intrinsics(512, 1000, 10);
  const double r = 4.0, theta = 0.3;
  for (double phi : {-0.15, 0.0, 0.1}) {
    const Vec3d p = spherical_to_euclidean(r, theta, phi);
    const SonarPoint s = planar_project(r, theta, a);
    EXPECT_NEAR(p.x(), r * std::cos(phi) * std::cos(theta), 1e-14);
    EXPECT_NEAR(s.planar.head<2>().norm(), r, 1e-14);
    if (phi != 0.0) {
      EXPECT_GT((s.planar.head<2>() - p.head<2>()).norm(), 1e-3);
    } else {
      EXPECT_LT((s.planar.head<2>() - p.head<2>()).norm(), 1e-14);
    }
  }
}

TEST(PlanarProject, HomogeneousCoordinateIsOne) {
  const SonarIntrinsics a = intrinsics(1024, 512, 15);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ur(0.0, a.r_max), ut(a.theta_min, a.theta_max);
  for (int i = 0; i < 200; ++i) EXPECT_EQ(planar_project(ur(rng), ut(rng), a).planar.z(), 1.0);
}

TEST(InFov, Examples) {
  const SonarIntrinsics a = intrinsics(1024, 512, 15);
  EXPECT_TRUE(in_fov(Vec3d(Vec3d::Zero()), a));
  EXPECT_FALSE(in_fov(Vec3d(2.0 * a.r_max, 0, 0), a));
  EXPECT_FALSE(in_fov(spherical_to_euclidean(5.0, a.theta_max + 0.01, 0.0), a));
  EXPECT_TRUE(in_fov(spherical_to_euclidean(5.0, a.theta_max - 0.01, 0.0), a));
  EXPECT_FALSE(in_fov(spherical_to_euclidean(5.0, 0.0, a.phi_max + 0.01), a));
  EXPECT_TRUE(in_fov(spherical_to_euclidean(5.0, 0.0, a.phi_min + 0.01), a));
}

TEST(SonarRoundTrip, PolarPixelRangeWithinOneResolutionUnit) {
  const SonarIntrinsics a = intrinsics(1024, 512, 15);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ur(0.0, a.r_max), ut(a.theta_min, a.theta_max),
      up(a.phi_min, a.phi_max);
  for (int i = 0; i < 500; ++i) {
    const double r = ur(rng), theta = ut(rng);
    const Vec3d p = spherical_to_euclidean(r, theta, up(rng));
    ASSERT_TRUE(in_fov(p, a));
    const Eigen::Vector2d px = polar_to_pixel(r, theta, a);
    // Pixels are read at integer resolution.
    const double u = std::round(px.x()), v = std::round(px.y());
    if (!pixel_in_image(u, v, a)) continue;
    double decoded = 0.0;
    try {
      decoded = pixel_to_range(u, v, a);
    } catch (const Error&) {
      EXPECT_GT(r, a.r_max - a.range_resolution());
      continue;
    }
    EXPECT_LE(std::abs(decoded - r), a.range_resolution());
    EXPECT_NEAR(pixel_to_bearing(px.x(), px.y(), a), theta, 1e-12);
  }
}

TEST(PixelToPoint, DecodesPlanarPoint) {
  const SonarIntrinsics a = intrinsics(1024, 512, 15);
  const Eigen::Vector2d px = polar_to_pixel(6.0, -0.5, a);
  const SonarPoint s = pixel_to_point(px.x(), px.y(), a);
  EXPECT_NEAR(s.range, 6.0, 1e-12);
  EXPECT_NEAR(s.bearing, -0.5, 1e-12);
  EXPECT_LT((s.planar - Vec3d(6.0 * std::cos(-0.5), 6.0 * std::sin(-0.5), 1.0)).norm(), 1e-12);
  EXPECT_EQ(s.lifted().z(), 0.0);
}

}  // namespace
}  // namespace uwf
