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

#include "uwf/imu.hpp"

#include <cmath>

#include "uwf/errors.hpp"

namespace uwf {
namespace {

constexpr double kIntervalTolerance = 1e-9;

// Block offsets of the pre-integration error state.
constexpr int kAlpha = 0;
constexpr int kBeta = 3;
constexpr int kTheta = 6;
constexpr int kBa = 9;
constexpr int kBg = 12;

}  // namespace

Matrix15d PreintegratedImu::information() const {
  Matrix15d jittered = covariance + 1e-12 * Matrix15d::Identity();
  Matrix15d info = jittered.ldlt().solve(Matrix15d::Identity());
  return 0.5 * (info + info.transpose());
}

PreintegratedImu preintegrate(std::span<const ImuSample> samples, const ImuBias& bias_lin,
                              const ImuNoiseParams& noise) {
  if (samples.size() < 2) throw Error(ErrorKind::kEmptyBuffer, "pre-integration needs at least two samples");
  for (std::size_t k = 1; k < samples.size(); ++k) {
    if (!(samples[k].timestamp > samples[k - 1].timestamp)) {
      throw Error(ErrorKind::kNonMonotonicTimestamps, "IMU timestamps must strictly increase");
    }
  }

  PreintegratedImu pre;
  pre.bias_lin = bias_lin;
  pre.t_start = samples.front().timestamp;
  pre.t_end = samples.back().timestamp;
  pre.samples.assign(samples.begin(), samples.end());

  Eigen::Matrix<double, 12, 12> q_noise = Eigen::Matrix<double, 12, 12>::Zero();
  q_noise.block<3, 3>(0, 0) = noise.sigma_a * noise.sigma_a * Mat3d::Identity();
  q_noise.block<3, 3>(3, 3) = noise.sigma_g * noise.sigma_g * Mat3d::Identity();
  q_noise.block<3, 3>(6, 6) = noise.sigma_ba * noise.sigma_ba * Mat3d::Identity();
  q_noise.block<3, 3>(9, 9) = noise.sigma_bg * noise.sigma_bg * Mat3d::Identity();

  Matrix15d& cov = pre.covariance;
  for (std::size_t k = 0; k + 1 < samples.size(); ++k) {
    const ImuSample& s0 = samples[k];
    const ImuSample& s1 = samples[k + 1];
    const double dt = s1.timestamp - s0.timestamp;

    const Vec3d omega = 0.5 * (s0.gyro + s1.gyro) - bias_lin.gyro;
    const Quatd q0 = pre.delta_q;
    const Quatd q1 = (q0 * quat_exp(Vec3d(omega * dt))).normalized();
    const Vec3d a0 = q0 * (s0.accel - bias_lin.accel);
    const Vec3d a1 = q1 * (s1.accel - bias_lin.accel);
    const Vec3d a_mid = 0.5 * (a0 + a1);

    pre.alpha += pre.beta * dt + 0.5 * a_mid * dt * dt;
    pre.beta += a_mid * dt;
    pre.delta_q = q1;

    const Mat3d r0 = q0.toRotationMatrix();
    const Vec3d a_body = 0.5 * (s0.accel + s1.accel) - bias_lin.accel;

    Matrix15d f = Matrix15d::Zero();
    f.block<3, 3>(kAlpha, kBeta) = Mat3d::Identity();
    f.block<3, 3>(kBeta, kTheta) = -r0 * skew(a_body);
    f.block<3, 3>(kBeta, kBa) = -r0;
    f.block<3, 3>(kTheta, kTheta) = -skew(omega);
    f.block<3, 3>(kTheta, kBg) = -Mat3d::Identity();

    Eigen::Matrix<double, 15, 12> g = Eigen::Matrix<double, 15, 12>::Zero();
    g.block<3, 3>(kBeta, 0) = -r0;
    g.block<3, 3>(kTheta, 3) = -Mat3d::Identity();
    g.block<3, 3>(kBa, 6) = Mat3d::Identity();
    g.block<3, 3>(kBg, 9) = Mat3d::Identity();

    const Matrix15d a = Matrix15d::Identity() + f * dt;
    cov = a * cov * a.transpose() + dt * g * q_noise * g.transpose();
    cov = (0.5 * (cov + cov.transpose())).eval();

    pre.dt_total += dt;
  }
  return pre;
}

PreintegratedImu reintegrate(const PreintegratedImu& pre, const ImuBias& bias_lin, const ImuNoiseParams& noise) {
  return preintegrate(pre.samples, bias_lin, noise);
}

bool bias_within_trust_region(const ImuBias& a, const ImuBias& b, const BiasTrustRegion& region) {
  return (a.accel - b.accel).norm() <= region.accel && (a.gyro - b.gyro).norm() <= region.gyro;
}

RobotState propagate_state(const RobotState& prior, const PreintegratedImu& pre, const ImuNoiseParams& noise,
                           const BiasTrustRegion& region) {
  if (!bias_within_trust_region(prior.bias, pre.bias_lin, region)) {
    throw Error(ErrorKind::kBiasTrustRegionExceeded, "re-integrate at the updated bias");
  }
  const double dt = pre.dt_total;
  const Vec3d g = noise.gravity_vector();
  const Quatd& q = prior.pose.rotation();

  RobotState next;
  next.timestamp = prior.timestamp + dt;
  next.pose = Posed(q * pre.delta_q,
                    prior.pose.translation() + prior.velocity * dt - 0.5 * g * dt * dt + q * pre.alpha);
  next.velocity = prior.velocity - g * dt + q * pre.beta;
  next.bias = prior.bias;
  return next;
}

ImuResidual imu_residual(const RobotState& state_i, const RobotState& state_j, const PreintegratedImu& pre,
                         const ImuNoiseParams& noise, const std::optional<Posed>& prior_pose_override) {
  if (std::abs(state_i.timestamp - pre.t_start) > kIntervalTolerance ||
      std::abs(state_j.timestamp - pre.t_end) > kIntervalTolerance) {
    throw Error(ErrorKind::kIntervalMismatch, "pre-integration does not span the two states");
  }

  const Posed& pose_i = prior_pose_override ? *prior_pose_override : state_i.pose;
  const double dt = pre.dt_total;
  const Vec3d g = noise.gravity_vector();
  const Mat3d r_iw = pose_i.rotation_matrix().transpose();

  const Vec3d dp = state_j.pose.translation() - pose_i.translation() - state_i.velocity * dt + 0.5 * g * dt * dt;
  const Vec3d dv = state_j.velocity - state_i.velocity + g * dt;
  Quatd q_ij = pose_i.rotation().conjugate() * state_j.pose.rotation();
  if ((pre.delta_q.conjugate() * q_ij).w() < 0.0) q_ij.coeffs() = -q_ij.coeffs();
  const Quatd err_q = pre.delta_q.conjugate() * q_ij;

  ImuResidual out;
  out.residual.segment<3>(0) = r_iw * dp - pre.alpha;
  out.residual.segment<3>(3) = r_iw * dv - pre.beta;
  out.residual.segment<3>(6) = 2.0 * err_q.vec();
  out.residual.segment<3>(9) = state_j.bias.accel - state_i.bias.accel;
  out.residual.segment<3>(12) = state_j.bias.gyro - state_i.bias.gyro;

  // Error-state columns: θ 0, p 3, v 6, b_a 9, b_g 12.
  Matrix15d& ji = out.jac_i;
  if (!prior_pose_override) {
    ji.block<3, 3>(0, 0) = skew(Vec3d(r_iw * dp));
    ji.block<3, 3>(0, 3) = -r_iw;
    ji.block<3, 3>(3, 0) = skew(Vec3d(r_iw * dv));
    ji.block<3, 3>(6, 0) =
        -(quat_left(Quatd(pre.delta_q.conjugate())) * quat_right(q_ij)).block<3, 3>(1, 1);
  }
  ji.block<3, 3>(0, 6) = -r_iw * dt;
  ji.block<3, 3>(3, 6) = -r_iw;
  ji.block<3, 3>(9, 9) = -Mat3d::Identity();
  ji.block<3, 3>(12, 12) = -Mat3d::Identity();

  Matrix15d& jj = out.jac_j;
  jj.block<3, 3>(0, 3) = r_iw;
  jj.block<3, 3>(3, 6) = r_iw;
  jj.block<3, 3>(6, 0) = quat_left(err_q).block<3, 3>(1, 1);
  jj.block<3, 3>(9, 9) = Mat3d::Identity();
  jj.block<3, 3>(12, 12) = Mat3d::Identity();
  return out;
}

}  // namespace uwf
