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

#include "uwf/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include "uwf/errors.hpp"

namespace uwf {
namespace {

double default_tolerance(const Trajectory& truth) {
  if (truth.size() < 2) return 1e-6;
  std::vector<double> gaps;
  gaps.reserve(truth.size() - 1);
  for (std::size_t i = 1; i < truth.size(); ++i) gaps.push_back(truth[i].timestamp - truth[i - 1].timestamp);
  std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
  return 0.5 * gaps[gaps.size() / 2];
}

std::vector<Association> associate_or_throw(const Trajectory& estimate, const Trajectory& truth, double max_dt) {
  std::vector<Association> pairs = associate(estimate, truth, max_dt);
  if (pairs.empty()) throw Error(ErrorKind::kNoOverlap, "no associated samples between trajectories");
  return pairs;
}

}  // namespace

void check_trajectory(const Trajectory& trajectory) {
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    if (!(trajectory[i].timestamp > trajectory[i - 1].timestamp)) {
      throw Error(ErrorKind::kInvalidConfig, "trajectory timestamps must strictly increase");
    }
  }
}

std::vector<Association> associate(const Trajectory& estimate, const Trajectory& truth, double max_dt) {
  std::vector<Association> out;
  if (estimate.empty() || truth.empty()) return out;
  const double tol = max_dt < 0.0 ? default_tolerance(truth) : max_dt;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const double t = estimate[i].timestamp;
    auto it = std::lower_bound(truth.begin(), truth.end(), t,
                               [](const TrajectorySample& s, double v) { return s.timestamp < v; });
    int best = -1;
    double best_dt = tol;
    for (auto cand : {it, it == truth.begin() ? truth.end() : std::prev(it)}) {
      if (cand == truth.end()) continue;
      const double dt = std::abs(cand->timestamp - t);
      if (dt <= best_dt) {
        best_dt = dt;
        best = static_cast<int>(cand - truth.begin());
      }
    }
    if (best >= 0) out.push_back({static_cast<int>(i), best});
  }
  return out;
}

double ate_rmse(const Trajectory& estimate, const Trajectory& truth, Alignment align, double max_dt) {
  const std::vector<Association> pairs = associate_or_throw(estimate, truth, max_dt);
  const Eigen::Index n = static_cast<Eigen::Index>(pairs.size());
  Eigen::Matrix3Xd est(3, n);
  Eigen::Matrix3Xd gt(3, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    est.col(k) = estimate[pairs[k].estimate_index].pose.translation();
    gt.col(k) = truth[pairs[k].truth_index].pose.translation();
  }
  if (align == Alignment::kSE3 && n >= 3) {
    const Eigen::Matrix4d t = Eigen::umeyama(est, gt, false);
    est = (t.topLeftCorner<3, 3>() * est).colwise() + t.topRightCorner<3, 1>();
  }
  return std::sqrt((est - gt).colwise().squaredNorm().sum() / static_cast<double>(n));
}

double rotation_rmse(const Trajectory& estimate, const Trajectory& truth, double max_dt) {
  const std::vector<Association> pairs = associate_or_throw(estimate, truth, max_dt);
  double sum = 0.0;
  for (const Association& a : pairs) {
    const Quatd d = truth[a.truth_index].pose.rotation().conjugate() * estimate[a.estimate_index].pose.rotation();
    const double deg = rotation_angle(d) * 180.0 / M_PI;
    sum += deg * deg;
  }
  return std::sqrt(sum / static_cast<double>(pairs.size()));
}

std::vector<IntervalError> interval_translation_error(const Trajectory& estimate, const Trajectory& truth,
                                                      double interval, double max_dt) {
  if (!(interval > 0.0)) throw Error(ErrorKind::kInvalidConfig, "interval must be positive");
  const std::vector<Association> pairs = associate_or_throw(estimate, truth, max_dt);
  const double t0 = estimate[pairs.front().estimate_index].timestamp;

  std::vector<IntervalError> out;
  std::size_t k = 0;
  while (k < pairs.size()) {
    const double t_first = estimate[pairs[k].estimate_index].timestamp;
    const long bucket = static_cast<long>(std::floor((t_first - t0) / interval));
    const double start = t0 + static_cast<double>(bucket) * interval;
    const Vec3d anchor_est = estimate[pairs[k].estimate_index].pose.translation();
    const Vec3d anchor_gt = truth[pairs[k].truth_index].pose.translation();
    double sum = 0.0;
    int count = 0;
    while (k < pairs.size() && estimate[pairs[k].estimate_index].timestamp < start + interval) {
      const Vec3d d_est = estimate[pairs[k].estimate_index].pose.translation() - anchor_est;
      const Vec3d d_gt = truth[pairs[k].truth_index].pose.translation() - anchor_gt;
      sum += (d_est - d_gt).norm();
      ++count;
      ++k;
    }
    out.push_back({start, sum / count});
  }
  return out;
}

PoseError relative_pose_error(const Posed& t_gt, const Posed& t_est) {
  PoseError e;
  e.error = compose(inverse(t_gt), t_est);
  e.angle = rotation_angle(e.error.rotation());
  e.translation = e.error.translation();
  return e;
}

std::vector<PositionError> position_errors(const Trajectory& estimate, const Trajectory& truth, double max_dt) {
  std::vector<PositionError> out;
  for (const Association& a : associate(estimate, truth, max_dt)) {
    out.push_back({estimate[a.estimate_index].timestamp,
                   estimate[a.estimate_index].pose.translation() - truth[a.truth_index].pose.translation()});
  }
  return out;
}

}  // namespace uwf
