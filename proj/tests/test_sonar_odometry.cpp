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

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <Eigen/SVD>
#include <gtest/gtest.h>

#include "support/expect_error.hpp"
#include "support/oracles.hpp"
#include "uwf/sonar_odometry.hpp"

namespace uwf {
namespace {

using Vec2 = Eigen::Vector2d;

SonarIntrinsics test_intrinsics() {
  SonarIntrinsics intr;
  intr.r_max = 15.0;
  intr.height = 512;
  intr.width = 1024;
  return intr;
}

SonarOdometryConfig test_config() {
  SonarOdometryConfig c = SonarOdometryConfig::FromIntrinsics(test_intrinsics());
  c.seed = 42;
  return c;
}

std::vector<Vec2> scatter(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> ux(1.0, 10.0), uy(-5.0, 5.0);
  std::vector<Vec2> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(ux(rng), uy(rng));
  return pts;
}

/// Current-frame points c with keyframe points k = R(yaw) c + t.
SonarCorrespondenceSet make_set(const std::vector<Vec2>& current, double yaw, const Vec2& t) {
  const SonarIntrinsics intr = test_intrinsics();
  SonarCorrespondenceSet set;
  const Eigen::Rotation2Dd r(yaw);
  for (const Vec2& c : current) {
    const Vec2 k = r * c + t;
    set.pairs.push_back({point_from_planar(k.x(), k.y(), intr), point_from_planar(c.x(), c.y(), intr)});
  }
  return set;
}

/// Independent least-squares 2D rigid fit through the SVD of the cross-covariance.
Rigid2d kabsch_2d(const std::vector<Vec2>& k, const std::vector<Vec2>& c) {
  Vec2 mk = Vec2::Zero(), mc = Vec2::Zero();
  for (std::size_t i = 0; i < k.size(); ++i) {
    mk += k[i];
    mc += c[i];
  }
  mk /= k.size();
  mc /= c.size();
  Eigen::Matrix2d h = Eigen::Matrix2d::Zero();
  for (std::size_t i = 0; i < k.size(); ++i) h += (c[i] - mc) * (k[i] - mk).transpose();
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix2d d = Eigen::Matrix2d::Identity();
  d(1, 1) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0 ? -1.0 : 1.0;
  const Eigen::Matrix2d r = svd.matrixV() * d * svd.matrixU().transpose();
  Rigid2d out;
  out.yaw = std::atan2(r(1, 0), r(0, 0));
  out.t = mk - r * mc;
  return out;
}

double wrap(double a) { return std::atan2(std::sin(a), std::cos(a)); }

TEST(EstimatePlanarPose, IdentityTransform) {
  std::mt19937_64 rng(1);
  const auto set = make_set(scatter(rng, 20), 0.0, Vec2::Zero());
  const PlanarPoseEstimate est = estimate_planar_pose(set, test_config());
  EXPECT_LT(rotation_angle(est.pose().rotation()), 1e-12);
  EXPECT_LT(est.pose().translation().norm(), 1e-12);
  EXPECT_EQ(est.inliers().size(), 20u);
  EXPECT_TRUE(est.valid());
}

TEST(EstimatePlanarPose, RecoversYawAndTranslation) {
  std::mt19937_64 rng(2);
  const double yaw = 30.0 * M_PI / 180.0;
  const auto set = make_set(scatter(rng, 20), yaw, Vec2(0.5, -0.2));
  const PlanarPoseEstimate est = estimate_planar_pose(set, test_config());
  EXPECT_NEAR(est.transform().yaw, yaw, 1e-9);
  EXPECT_NEAR(est.pose().translation().x(), 0.5, 1e-9);
  EXPECT_NEAR(est.pose().translation().y(), -0.2, 1e-9);
  EXPECT_NEAR(yaw_of(est.pose().rotation()), yaw, 1e-9);
}

TEST(EstimatePlanarPose, FlagsPlantedOutliers) {
  std::mt19937_64 rng(3);
  const double yaw = 30.0 * M_PI / 180.0;
  auto set = make_set(scatter(rng, 20), yaw, Vec2(0.5, -0.2));
  const SonarIntrinsics intr = test_intrinsics();
  std::uniform_real_distribution<double> ux(1.0, 10.0), uy(-5.0, 5.0);
  for (int i = 0; i < 8; ++i) {
    set.pairs.push_back({point_from_planar(ux(rng), uy(rng), intr), point_from_planar(ux(rng), uy(rng), intr)});
  }
  const PlanarPoseEstimate est = estimate_planar_pose(set, test_config());
  EXPECT_NEAR(est.transform().yaw, yaw, 1e-6);
  EXPECT_NEAR(est.transform().t.x(), 0.5, 1e-6);
  EXPECT_NEAR(est.transform().t.y(), -0.2, 1e-6);
  std::vector<int> want(20);
  for (int i = 0; i < 20; ++i) want[i] = i;
  EXPECT_EQ(est.inliers(), want);
}

TEST(EstimatePlanarPose, MatchesSvdAlignmentUnderNoise) {
  std::mt19937_64 rng(4);
  const auto current = scatter(rng, 30);
  auto set = make_set(current, 0.2, Vec2(-0.3, 0.7));
  std::normal_distribution<double> n(0.0, 0.005);
  std::vector<Vec2> k, c;
  for (auto& pair : set.pairs) {
    const Vec2 kk = pair.keyframe.planar.head<2>() + Vec2(n(rng), n(rng));
    pair.keyframe = point_from_planar(kk.x(), kk.y(), test_intrinsics());
    k.push_back(kk);
    c.push_back(pair.current.planar.head<2>());
  }
  SonarOdometryConfig cfg = test_config();
  cfg.ransac_threshold = 1.0;
  const PlanarPoseEstimate est = estimate_planar_pose(set, cfg);
  ASSERT_EQ(est.inliers().size(), 30u);
  const Rigid2d oracle = kabsch_2d(k, c);
  EXPECT_NEAR(est.transform().yaw, oracle.yaw, 1e-12);
  EXPECT_LT((est.transform().t - oracle.t).norm(), 1e-12);
}

TEST(EstimatePlanarPose, Errors) {
  const SonarIntrinsics intr = test_intrinsics();
  SonarCorrespondenceSet set;
  set.pairs.push_back({point_from_planar(1.0, 1.0, intr), point_from_planar(1.0, 1.0, intr)});
  EXPECT_UWF_ERROR(ErrorKind::kInsufficientPairs, estimate_planar_pose(set, test_config()));
  EXPECT_UWF_ERROR(ErrorKind::kInsufficientPairs, ransac_filter(set, 0.1, 10, 0));
  set.pairs.push_back(set.pairs.front());
  set.pairs.push_back(set.pairs.front());
  EXPECT_UWF_ERROR(ErrorKind::kDegenerateConfiguration, estimate_planar_pose(set, test_config()));
  const std::vector<Vec2> same{Vec2(1, 1), Vec2(1, 1)};
  EXPECT_UWF_ERROR(ErrorKind::kDegenerateConfiguration, fit_rigid_2d(same, same));
}

TEST(EstimatePlanarPose, ValidityGate) {
  std::mt19937_64 rng(5);
  const auto few = make_set(scatter(rng, 5), 0.1, Vec2(0.1, 0.1));
  EXPECT_FALSE(estimate_planar_pose(few, test_config()).valid());
  const auto enough = make_set(scatter(rng, 6), 0.1, Vec2(0.1, 0.1));
  EXPECT_TRUE(estimate_planar_pose(enough, test_config()).valid());
}

TEST(EstimatePlanarPose, OutputIsAlwaysPlanar) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 0.05);
  for (int trial = 0; trial < 20; ++trial) {
    auto set = make_set(scatter(rng, 15), n(rng) * 5, Vec2(n(rng), n(rng)));
    for (auto& pair : set.pairs) {
      pair.current = point_from_planar(pair.current.planar.x() + n(rng), pair.current.planar.y() + n(rng),
                                       test_intrinsics());
    }
    SonarOdometryConfig cfg = test_config();
    cfg.ransac_threshold = 0.2;
    const PlanarPoseEstimate est = estimate_planar_pose(set, cfg);
    const Vec3d w = quat_log(est.pose().rotation());
    EXPECT_LT(std::abs(w.x()), 1e-12);
    EXPECT_LT(std::abs(w.y()), 1e-12);
    EXPECT_EQ(est.pose().translation().z(), 0.0);
  }
}

TEST(RansacFilter, AllInliersAndTwoPairs) {
  std::mt19937_64 rng(7);
  const auto set = make_set(scatter(rng, 12), 0.3, Vec2(1, 0));
  const auto idx = ransac_filter(set, 0.01, 200, 9);
  EXPECT_EQ(idx.size(), 12u);
  const auto two = make_set(scatter(rng, 2), 0.3, Vec2(1, 0));
  EXPECT_EQ(ransac_filter(two, 0.01, 200, 9), (std::vector<int>{0, 1}));
}

TEST(RansacFilter, DeterministicForSeed) {
  std::mt19937_64 rng(8);
  auto set = make_set(scatter(rng, 10), 0.1, Vec2(0.2, 0.0));
  const auto outliers = make_set(scatter(rng, 10), -0.4, Vec2(1.0, 2.0));
  set.pairs.insert(set.pairs.end(), outliers.pairs.begin(), outliers.pairs.end());
  EXPECT_EQ(ransac_filter(set, 0.05, 50, 77), ransac_filter(set, 0.05, 50, 77));
}

TEST(RansacFilter, HalfOutliersMatchesExhaustiveSearch) {
  // Two-point samples at 50% outliers: 200 draws fail with probability 0.75^200.
  int agree = 0;
  const int trials = 40;
  for (int trial = 0; trial < trials; ++trial) {
    std::mt19937_64 rng(100 + trial);
    const auto current = scatter(rng, 10);
    auto set = make_set(current, 0.4, Vec2(0.3, -0.6));
    std::uniform_real_distribution<double> ux(1.0, 10.0), uy(-5.0, 5.0);
    const SonarIntrinsics intr = test_intrinsics();
    for (int i = 0; i < 10; ++i) {
      set.pairs.push_back({point_from_planar(ux(rng), uy(rng), intr), point_from_planar(ux(rng), uy(rng), intr)});
    }
    std::vector<Vec2> k, c;
    for (const auto& p : set.pairs) {
      k.push_back(p.keyframe.planar.head<2>());
      c.push_back(p.current.planar.head<2>());
    }
    const std::vector<bool> mask = testing::exhaustive_rigid_inliers(k, c, 0.05);
    std::vector<int> want;
    for (int i = 0; i < static_cast<int>(mask.size()); ++i) {
      if (mask[i]) want.push_back(i);
    }
    std::vector<int> planted(10);
    for (int i = 0; i < 10; ++i) planted[i] = i;
    EXPECT_EQ(want, planted);
    if (ransac_filter(set, 0.05, 200, 1000 + trial) == want) ++agree;
  }
  EXPECT_EQ(agree, trials);
}

TEST(KeyframePolicy, Examples) {
  const SonarOdometryConfig cfg = test_config();
  std::vector<int> all(10);
  for (int i = 0; i < 10; ++i) all[i] = i;
  EXPECT_EQ(keyframe_policy(PlanarPoseEstimate(Rigid2d{}, all, 0.0, true), 10, cfg), KeyframeDecision::kKeep);
  Rigid2d yawed;
  yawed.yaw = 15.0 * M_PI / 180.0;
  EXPECT_EQ(keyframe_policy(PlanarPoseEstimate(yawed, all, 0.0, true), 10, cfg),
            KeyframeDecision::kPromoteCurrent);
  EXPECT_EQ(keyframe_policy(PlanarPoseEstimate(Rigid2d{}, {0, 1, 2}, 0.0, true), 10, cfg),
            KeyframeDecision::kPromoteCurrent);
  Rigid2d far;
  far.t = Vec2(0.26 * cfg.r_max, 0.0);
  EXPECT_EQ(keyframe_policy(PlanarPoseEstimate(far, all, 0.0, true), 10, cfg), KeyframeDecision::kPromoteCurrent);
  far.t = Vec2(0.24 * cfg.r_max, 0.0);
  EXPECT_EQ(keyframe_policy(PlanarPoseEstimate(far, all, 0.0, true), 10, cfg), KeyframeDecision::kKeep);
}

TEST(PlanarPoseProperties, RigidTransformConjugation) {
  std::mt19937_64 rng(9);
  const auto current = scatter(rng, 15);
  const auto set = make_set(current, 0.25, Vec2(0.4, 0.1));
  Rigid2d g;
  g.yaw = -0.7;
  g.t = Vec2(2.0, -1.0);
  SonarCorrespondenceSet moved;
  const SonarIntrinsics intr = test_intrinsics();
  for (const auto& p : set.pairs) {
    const Vec2 k = g.apply(p.keyframe.planar.head<2>());
    const Vec2 c = g.apply(p.current.planar.head<2>());
    moved.pairs.push_back({point_from_planar(k.x(), k.y(), intr), point_from_planar(c.x(), c.y(), intr)});
  }
  const Posed a = estimate_planar_pose(set, test_config()).pose();
  const Posed b = estimate_planar_pose(moved, test_config()).pose();
  const Posed want = compose(compose(g.to_pose(), a), inverse(g.to_pose()));
  EXPECT_LT((b.translation() - want.translation()).norm(), 1e-9);
  EXPECT_LT(rotation_angle(Quatd(b.rotation().conjugate() * want.rotation())), 1e-9);
}

TEST(PlanarPoseProperties, InverseConsistency) {
  std::mt19937_64 rng(10);
  const auto forward = make_set(scatter(rng, 15), -0.35, Vec2(0.8, 0.3));
  SonarCorrespondenceSet backward;
  for (const auto& p : forward.pairs) backward.pairs.push_back({p.current, p.keyframe});
  const Posed ab = estimate_planar_pose(forward, test_config()).pose();
  const Posed ba = estimate_planar_pose(backward, test_config()).pose();
  const Posed e = compose(ab, ba);
  EXPECT_LT(e.translation().norm(), 1e-8);
  EXPECT_LT(rotation_angle(e.rotation()), 1e-8);
  EXPECT_NEAR(wrap(estimate_planar_pose(forward, test_config()).transform().yaw), -0.35, 1e-12);
}

}  // namespace
}  // namespace uwf
