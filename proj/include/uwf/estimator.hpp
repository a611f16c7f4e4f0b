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
 * @file estimator.hpp
 * @brief Sliding-window camera / sonar / IMU estimator.
 *
 * Every frame becomes a window state (θ, p, v with biases held at their
 * initial value). The cost is
 *
 *   J(X) = α Σ ρ(e_sᵀ P_s e_s) + Σ e_Iᵀ P_I e_I + Σ ρ(e_cᵀ P_c e_c)
 *
 * minimized by Levenberg-Marquardt with landmarks eliminated through the
 * Schur complement. The first window pose is the gauge and never changes.
 */

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "uwf/factors.hpp"
#include "uwf/geometry.hpp"
#include "uwf/imu.hpp"
#include "uwf/simulator.hpp"
#include "uwf/sonar_model.hpp"
#include "uwf/sonar_odometry.hpp"

namespace uwf {

enum class Mode { kFull, kVisualInertial, kSonarInertial };

const char* to_string(Mode mode);
/// Parses "full", "vi" or "sonar-inertial". Throws InvalidConfig.
Mode parse_mode(const std::string& name);

enum class InitSource { kNone, kVisual, kSonar };
enum class InitDecision { kVisualInit, kSonarInit, kNotYet };

struct InitThresholds {
  int min_camera_matches = 20;                 ///< δ_c
  double min_rotation = 0.5 * M_PI / 180.0;    ///< ε_rot, radians
  double min_translation = 0.05;               ///< ε_trans, metres
};

InitDecision initialize(int camera_matches, const PlanarPoseEstimate& sonar_estimate,
                        const InitThresholds& thresholds = {});

struct DegradationStatus {
  int matched_camera_features = 0;
  bool degraded = false;
};

DegradationStatus detect_degradation(int matched_camera_features, int threshold = 10);

/// α_high only when degraded and the sonar estimate can be trusted.
double select_alpha(const DegradationStatus& status, bool sonar_estimate_valid, double alpha_high = 20.0);

/// T̂_wi = T_wbk T_bs T_sksi T_bs⁻¹, or T_wbk T_bs T_sksi when `as_printed`.
/// Throws InvalidSonarEstimate.
Posed apply_sonar_prior(const Posed& t_wbk, const Posed& t_bs, const PlanarPoseEstimate& sonar_estimate,
                        bool as_printed = false);

/// Known extrinsics shared by every factor.
struct SensorSetup {
  std::array<Posed, 2> t_cb;  ///< body → camera 0 / 1
  Posed t_bs;                 ///< sonar → body
  SonarIntrinsics sonar;
  ImuNoiseParams imu;
};

struct SolverConfig {
  int max_iterations = 50;
  double relative_decrease_tol = 1e-8;
  double gradient_tol = 1e-10;
  double initial_lambda = 1e-4;
  double max_lambda = 1e12;
  double huber_k = 1.345;
  double sonar_w_z = 0.0;
};

/// Links an IMU factor's start state to the sonar keyframe that predicts it.
struct SonarPriorLink {
  int keyframe_id = -1;
  PlanarPoseEstimate estimate;
  Posed frozen_keyframe_pose;  ///< used once the keyframe has left the window
};

struct WindowEntry {
  int frame_id = -1;
  RobotState state;
  bool degraded = false;
  std::optional<SonarPriorLink> prior;
};

struct ImuFactor {
  int from_frame = -1;
  int to_frame = -1;
  PreintegratedImu pre;
  Eigen::Matrix<double, 9, 9> information = Eigen::Matrix<double, 9, 9>::Identity();
  std::optional<Posed> override_pose;
};

struct WindowState {
  std::vector<WindowEntry> keyframes;
  std::map<int, Landmark> landmarks;
  std::vector<CameraObservation> camera_factors;
  std::vector<SonarFactorObservation> sonar_factors;
  std::vector<ImuFactor> imu_factors;
  double alpha = 1.0;
  bool initialized = false;
  InitSource init_source = InitSource::kNone;

  /// Index of `frame_id` in `keyframes`, or -1.
  int index_of(int frame_id) const;
};

/// Builds the factor for `pre` with information from its (p, v, θ) covariance block.
ImuFactor make_imu_factor(int from_frame, int to_frame, PreintegratedImu pre);

struct OptimizeSummary {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  std::vector<double> accepted_costs;
};

/// Total robust cost of the window, ½ J(X).
double window_cost(const WindowState& window, const SensorSetup& sensors, const SolverConfig& config);

/// Levenberg-Marquardt over the window in place. Throws SolverDiverged.
OptimizeSummary optimize(WindowState& window, const SensorSetup& sensors, const SolverConfig& config = {});

struct NormalTerms {
  bool camera = true;
  bool sonar = true;
  bool imu = true;
};

/// Gauge-fixed normal matrix over the window states, landmarks eliminated.
/// Columns: v of the first state, then (θ, p, v) of every other state.
Eigen::MatrixXd normal_matrix(const WindowState& window, const SensorSetup& sensors, const SolverConfig& config,
                              const NormalTerms& terms);

/// Body-frame landmark from a stereo pair of normalized observations.
std::optional<Vec3d> triangulate_stereo(const Eigen::Vector2d& z_left, const Eigen::Vector2d& z_right,
                                        const std::array<Posed, 2>& t_cb);

struct EstimatorConfig {
  Mode mode = Mode::kFull;
  bool sonar_prior = true;
  bool eq21_as_printed = false;
  int window_size = 10;
  int degradation_threshold = 10;
  double alpha_high = 20.0;
  double camera_sigma_floor = 1e-3;  ///< normalized image units
  double sonar_sigma = 0.02;         ///< metres, per factor axis
  InitThresholds init;
  SolverConfig solver;
  SonarOdometryConfig sonar_odometry;
};

struct StepResult {
  InitDecision init_decision = InitDecision::kNotYet;
  bool initialized = false;
  bool optimized = false;
  DegradationStatus degradation;
  std::optional<PlanarPoseEstimate> sonar_estimate;
  std::optional<RobotState> published;
  OptimizeSummary summary;
};

class Estimator {
 public:
  Estimator(EstimatorConfig config, SensorSetup sensors, CorrespondenceProvider provider);

  StepResult step(const FrameBundle& frame);

  const WindowState& window() const { return window_; }
  const EstimatorConfig& config() const { return config_; }
  std::optional<int> sonar_keyframe() const;

 private:
  bool uses_camera() const { return config_.mode != Mode::kSonarInertial; }
  bool uses_sonar() const { return config_.mode != Mode::kVisualInertial; }

  std::optional<PlanarPoseEstimate> estimate_sonar(const FrameBundle& frame, SonarCorrespondenceSet& pairs) const;
  void start_visual(const FrameBundle& frame, StepResult& result);
  void start_sonar(const FrameBundle& frame, const PlanarPoseEstimate& estimate,
                   const SonarCorrespondenceSet& pairs, StepResult& result);
  void track(const FrameBundle& frame, const DegradationStatus& status,
             const std::optional<PlanarPoseEstimate>& estimate, const SonarCorrespondenceSet& pairs,
             StepResult& result);
  void add_camera(const FrameBundle& frame);
  void add_sonar(const PlanarPoseEstimate& estimate, const SonarCorrespondenceSet& pairs, int frame_id);
  void update_keyframe(const FrameBundle& frame, const std::optional<PlanarPoseEstimate>& estimate, int pair_count);
  void slide();
  void refresh_prior_overrides();
  void run_solver(StepResult& result);

  EstimatorConfig config_;
  SensorSetup sensors_;
  CorrespondenceProvider provider_;
  WindowState window_;
  std::optional<FrameBundle> keyframe_;
  std::vector<ImuSample> imu_buffer_;
};

}  // namespace uwf
