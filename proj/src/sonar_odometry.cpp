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

#include "uwf/sonar_odometry.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <random>

#include "uwf/errors.hpp"

namespace uwf {
namespace {

constexpr double kCoincident = 1e-9;

Eigen::Vector2d xy(const SonarPoint& p) { return p.planar.head<2>(); }

double residual(const Rigid2d& model, const SonarCorrespondenceSet::Pair& pair) {
  return (xy(pair.keyframe) - model.apply(xy(pair.current))).norm();
}

}  // namespace

SonarOdometryConfig SonarOdometryConfig::FromIntrinsics(const SonarIntrinsics& intr) {
  SonarOdometryConfig config;
  config.ransac_threshold = 2.0 * intr.range_resolution();
  config.rms_max = 2.0 * intr.range_resolution();
  config.r_max = intr.r_max;
  return config;
}

Rigid2d fit_rigid_2d(std::span<const Eigen::Vector2d> keyframe, std::span<const Eigen::Vector2d> current) {
  if (keyframe.size() != current.size() || keyframe.size() < 2) {
    throw Error(ErrorKind::kInsufficientPairs, "rigid alignment needs at least two pairs");
  }
  const double n = static_cast<double>(keyframe.size());
  Eigen::Vector2d mean_k = Eigen::Vector2d::Zero();
  Eigen::Vector2d mean_c = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < keyframe.size(); ++i) {
    mean_k += keyframe[i];
    mean_c += current[i];
  }
  mean_k /= n;
  mean_c /= n;

  double dot = 0.0;
  double cross = 0.0;
  double spread = 0.0;
  for (std::size_t i = 0; i < keyframe.size(); ++i) {
    const Eigen::Vector2d a = keyframe[i] - mean_k;
    const Eigen::Vector2d b = current[i] - mean_c;
    dot += b.dot(a);
    cross += b.x() * a.y() - b.y() * a.x();
    spread = std::max(spread, b.norm());
  }
  if (spread < kCoincident) {
    throw Error(ErrorKind::kDegenerateConfiguration, "all points coincide; rotation unobservable");
  }
  Rigid2d model;
  model.yaw = std::atan2(cross, dot);
  model.t = mean_k - Eigen::Rotation2Dd(model.yaw) * mean_c;
  return model;
}

std::vector<int> ransac_filter(const SonarCorrespondenceSet& set, double threshold, int max_iters,
                               std::uint64_t seed) {
  const int n = static_cast<int>(set.pairs.size());
  if (n < 2) throw Error(ErrorKind::kInsufficientPairs, "RANSAC needs at least two pairs");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, n - 1);

  std::vector<int> best;
  double best_sse = std::numeric_limits<double>::infinity();
  std::vector<int> inliers;
  inliers.reserve(n);

  for (int iter = 0; iter < max_iters; ++iter) {
    int i = 0;
    int j = 0;
    if (n == 2) {
      j = 1;
    } else {
      i = pick(rng);
      do {
        j = pick(rng);
      } while (j == i);
    }
    const std::array<Eigen::Vector2d, 2> k{xy(set.pairs[i].keyframe), xy(set.pairs[j].keyframe)};
    const std::array<Eigen::Vector2d, 2> c{xy(set.pairs[i].current), xy(set.pairs[j].current)};
    if ((k[0] - k[1]).norm() < kCoincident || (c[0] - c[1]).norm() < kCoincident) continue;

    const Rigid2d model = fit_rigid_2d(k, c);
    inliers.clear();
    double sse = 0.0;
    for (int p = 0; p < n; ++p) {
      const double r = residual(model, set.pairs[p]);
      if (r <= threshold) {
        inliers.push_back(p);
        sse += r * r;
      }
    }
    if (inliers.size() > best.size() || (inliers.size() == best.size() && sse < best_sse)) {
      best = inliers;
      best_sse = sse;
    }
    if (n == 2) break;
  }
  return best;
}

PlanarPoseEstimate estimate_planar_pose(const SonarCorrespondenceSet& set, const SonarOdometryConfig& config) {
  if (set.pairs.size() < 2) throw Error(ErrorKind::kInsufficientPairs, "planar pose needs at least two pairs");

  std::vector<int> inliers = ransac_filter(set, config.ransac_threshold, config.max_iters, config.seed);
  if (inliers.size() < 2) {
    throw Error(ErrorKind::kDegenerateConfiguration, "no non-degenerate minimal sample");
  }

  // Refit on the consensus set, then re-select inliers under the refined model.
  Rigid2d model;
  for (int round = 0; round < 2; ++round) {
    std::vector<Eigen::Vector2d> k;
    std::vector<Eigen::Vector2d> c;
    k.reserve(inliers.size());
    c.reserve(inliers.size());
    for (int idx : inliers) {
      k.push_back(xy(set.pairs[idx].keyframe));
      c.push_back(xy(set.pairs[idx].current));
    }
    model = fit_rigid_2d(k, c);
    if (round == 1) break;
    std::vector<int> refined;
    for (int p = 0; p < static_cast<int>(set.pairs.size()); ++p) {
      if (residual(model, set.pairs[p]) <= config.ransac_threshold) refined.push_back(p);
    }
    if (refined.size() < 2 || refined == inliers) break;
    inliers = std::move(refined);
  }

  double sse = 0.0;
  for (int idx : inliers) sse += std::pow(residual(model, set.pairs[idx]), 2);
  const double rms = std::sqrt(sse / static_cast<double>(inliers.size()));
  const bool valid = static_cast<int>(inliers.size()) >= config.min_inliers && rms <= config.rms_max;
  return PlanarPoseEstimate(model, std::move(inliers), rms, valid);
}

KeyframeDecision keyframe_policy(const PlanarPoseEstimate& estimate, int pair_count,
                                 const SonarOdometryConfig& config) {
  if (!estimate.valid()) return KeyframeDecision::kPromoteCurrent;
  if (static_cast<double>(estimate.inliers().size()) < config.promote_inlier_ratio * pair_count) {
    return KeyframeDecision::kPromoteCurrent;
  }
  if (std::abs(estimate.transform().yaw) > config.promote_yaw) return KeyframeDecision::kPromoteCurrent;
  if (estimate.transform().t.norm() > config.promote_translation_fraction * config.r_max) {
    return KeyframeDecision::kPromoteCurrent;
  }
  return KeyframeDecision::kKeep;
}

}  // namespace uwf
