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
 * @file evaluation.hpp
 * @brief Trajectory accuracy metrics.
 *
 * Estimated samples are associated with the ground-truth sample nearest in
 * time; pairs further apart than the association tolerance are ignored. The
 * default tolerance is half of the median ground-truth sampling period.
 */

#pragma once

#include <vector>

#include "uwf/geometry.hpp"

namespace uwf {

struct TrajectorySample {
  double timestamp = 0.0;
  Posed pose;
};

/// Samples ordered by strictly increasing timestamp.
using Trajectory = std::vector<TrajectorySample>;

/// Throws InvalidConfig when timestamps are not strictly increasing.
void check_trajectory(const Trajectory& trajectory);

enum class Alignment { kNone, kSE3 };

struct Association {
  int estimate_index = -1;
  int truth_index = -1;
};

/// Nearest-timestamp association. `max_dt` < 0 selects the default tolerance.
std::vector<Association> associate(const Trajectory& estimate, const Trajectory& truth, double max_dt = -1.0);

/// RMS translation error in metres. Throws NoOverlap when nothing associates.
double ate_rmse(const Trajectory& estimate, const Trajectory& truth, Alignment align = Alignment::kNone,
                double max_dt = -1.0);

/// RMS geodesic rotation error in degrees.
double rotation_rmse(const Trajectory& estimate, const Trajectory& truth, double max_dt = -1.0);

struct IntervalError {
  double window_start = 0.0;
  double error = 0.0;  ///< metres
};

/// Mean translation error per fixed-length interval. Within each interval the
/// estimate is re-anchored to the ground truth at the interval's first
/// associated sample, so each value reports the error accrued inside that
/// interval. Intervals start at the first associated timestamp.
std::vector<IntervalError> interval_translation_error(const Trajectory& estimate, const Trajectory& truth,
                                                      double interval = 20.0, double max_dt = -1.0);

struct PoseError {
  Posed error;              ///< T_gt⁻¹ T_est
  double angle = 0.0;       ///< radians
  Vec3d translation = Vec3d::Zero();
};

PoseError relative_pose_error(const Posed& t_gt, const Posed& t_est);

/// Per-sample world-frame position error (estimate minus truth) of associated pairs.
struct PositionError {
  double timestamp = 0.0;
  Vec3d error = Vec3d::Zero();
};
std::vector<PositionError> position_errors(const Trajectory& estimate, const Trajectory& truth,
                                           double max_dt = -1.0);

}  // namespace uwf
