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

#include "uwf/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "uwf/errors.hpp"

namespace uwf {

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::kFull: return "full";
    case Mode::kVisualInertial: return "vi";
    case Mode::kSonarInertial: return "sonar-inertial";
  }
  return "unknown";
}

Mode parse_mode(const std::string& name) {
  if (name == "full") return Mode::kFull;
  if (name == "vi") return Mode::kVisualInertial;
  if (name == "sonar-inertial") return Mode::kSonarInertial;
  throw Error(ErrorKind::kInvalidConfig, "unknown mode '" + name + "'");
}

InitDecision initialize(int camera_matches, const PlanarPoseEstimate& sonar_estimate,
                        const InitThresholds& thresholds) {
  if (camera_matches > thresholds.min_camera_matches) return InitDecision::kVisualInit;
  if (sonar_estimate.valid()) {
    const Posed& t = sonar_estimate.pose();
    if (rotation_angle(t.rotation()) > thresholds.min_rotation ||
        t.translation().norm() > thresholds.min_translation) {
      return InitDecision::kSonarInit;
    }
  }
  return InitDecision::kNotYet;
}

DegradationStatus detect_degradation(int matched_camera_features, int threshold) {
  return {matched_camera_features, matched_camera_features < threshold};
}

double select_alpha(const DegradationStatus& status, bool sonar_estimate_valid, double alpha_high) {
  return status.degraded && sonar_estimate_valid ? alpha_high : 1.0;
}

Posed apply_sonar_prior(const Posed& t_wbk, const Posed& t_bs, const PlanarPoseEstimate& sonar_estimate,
                        bool as_printed) {
  if (!sonar_estimate.valid()) {
    throw Error(ErrorKind::kInvalidSonarEstimate, "sonar prior needs a valid planar estimate");
  }
  const Posed t_wsi = t_wbk * t_bs * sonar_estimate.pose();
  return as_printed ? t_wsi : t_wsi * inverse(t_bs);
}

int WindowState::index_of(int frame_id) const {
  for (std::size_t i = 0; i < keyframes.size(); ++i) {
    if (keyframes[i].frame_id == frame_id) return static_cast<int>(i);
  }
  return -1;
}

ImuFactor make_imu_factor(int from_frame, int to_frame, PreintegratedImu pre) {
  ImuFactor f;
  f.from_frame = from_frame;
  f.to_frame = to_frame;
  Eigen::Matrix<double, 9, 9> cov = pre.covariance.topLeftCorner<9, 9>();
  cov = (0.5 * (cov + cov.transpose())).eval();
  cov.diagonal().array() += 1e-12;
  f.information = cov.inverse();
  f.information = (0.5 * (f.information + f.information.transpose())).eval();
  f.pre = std::move(pre);
  return f;
}

std::optional<Vec3d> triangulate_stereo(const Eigen::Vector2d& z_left, const Eigen::Vector2d& z_right,
                                        const std::array<Posed, 2>& t_cb) {
  // Closest points of the two viewing rays, expressed in the body frame.
  std::array<Vec3d, 2> origin;
  std::array<Vec3d, 2> dir;
  const std::array<Eigen::Vector2d, 2> z{z_left, z_right};
  for (int c = 0; c < 2; ++c) {
    const Posed t_bc = inverse(t_cb[c]);
    origin[c] = t_bc.translation();
    dir[c] = (t_bc.rotation() * Vec3d(z[c].x(), z[c].y(), 1.0)).normalized();
  }
  const Vec3d w0 = origin[0] - origin[1];
  const double b = dir[0].dot(dir[1]);
  const double d = dir[0].dot(w0);
  const double e = dir[1].dot(w0);
  const double denom = 1.0 - b * b;
  if (denom < 1e-12) return std::nullopt;
  const double s = (b * e - d) / denom;
  const double t = (e - b * d) / denom;
  if (s <= 0.0 || t <= 0.0) return std::nullopt;
  const Vec3d p = 0.5 * (origin[0] + s * dir[0] + origin[1] + t * dir[1]);
  for (int c = 0; c < 2; ++c) {
    if (transform_point(t_cb[c], p).z() <= kMinDepth) return std::nullopt;
  }
  return p;
}

namespace {

using Mat9 = Eigen::Matrix<double, 9, 9>;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat93 = Eigen::Matrix<double, 9, 3>;

/// Column layout of the free parameters. The first state contributes only
/// its velocity.
struct Layout {
  std::vector<int> offset;
  std::map<int, int> landmark_index;
  std::vector<int> landmark_ids;
  std::map<int, int> entry_of_frame;
  int dim = 0;

  explicit Layout(const WindowState& w) {
    for (std::size_t e = 0; e < w.keyframes.size(); ++e) {
      offset.push_back(dim);
      entry_of_frame[w.keyframes[e].frame_id] = static_cast<int>(e);
      dim += e == 0 ? 3 : 9;
    }
    for (const auto& [id, lm] : w.landmarks) {
      landmark_index[id] = static_cast<int>(landmark_ids.size());
      landmark_ids.push_back(id);
    }
  }

  int entry(int frame_id) const {
    const auto it = entry_of_frame.find(frame_id);
    return it == entry_of_frame.end() ? -1 : it->second;
  }
  int first_local(int e) const { return e == 0 ? 6 : 0; }
  int column(int e, int local) const { return offset[e] + local - first_local(e); }

  Vec9 entry_step(const Eigen::VectorXd& dx, int e) const {
    Vec9 out = Vec9::Zero();
    for (int c = first_local(e); c < 9; ++c) out(c) = dx(column(e, c));
    return out;
  }
};

struct LandmarkBlock {
  Eigen::Matrix3d hll = Eigen::Matrix3d::Zero();
  Vec3d gl = Vec3d::Zero();
  std::vector<std::pair<int, Mat93>> hsl;  // (entry, block)

  Mat93& block(int e) {
    for (auto& [entry, b] : hsl) {
      if (entry == e) return b;
    }
    hsl.emplace_back(e, Mat93::Zero());
    return hsl.back().second;
  }
};

struct NormalSystem {
  Eigen::MatrixXd hss;
  Eigen::VectorXd gs;
  std::vector<LandmarkBlock> lm;

  NormalSystem(int dim, int landmarks)
      : hss(Eigen::MatrixXd::Zero(dim, dim)), gs(Eigen::VectorXd::Zero(dim)), lm(landmarks) {}
};

void add_hessian(const Layout& layout, Eigen::MatrixXd& m, int a, int b, const Mat9& h) {
  const int ra = layout.first_local(a);
  const int rb = layout.first_local(b);
  m.block(layout.offset[a], layout.offset[b], 9 - ra, 9 - rb) += h.block(ra, rb, 9 - ra, 9 - rb);
}

void add_gradient(const Layout& layout, Eigen::VectorXd& g, int a, const Vec9& v) {
  const int ra = layout.first_local(a);
  g.segment(layout.offset[a], 9 - ra) += v.tail(9 - ra);
}

/// Residual of dimension M touching two states (b may equal -1).
template <int M>
void add_pair(const Layout& layout, NormalSystem& sys, const Eigen::Matrix<double, M, 1>& r,
              const Eigen::Matrix<double, M, M>& w, int a, const Eigen::Matrix<double, M, 9>& ja, int b,
              const Eigen::Matrix<double, M, 9>& jb) {
  const Eigen::Matrix<double, 9, M> jaw = ja.transpose().lazyProduct(w);
  add_hessian(layout, sys.hss, a, a, jaw.lazyProduct(ja));
  add_gradient(layout, sys.gs, a, jaw * r);
  if (b < 0) return;
  const Eigen::Matrix<double, 9, M> jbw = jb.transpose().lazyProduct(w);
  const Mat9 hab = jaw.lazyProduct(jb);
  add_hessian(layout, sys.hss, a, b, hab);
  add_hessian(layout, sys.hss, b, a, hab.transpose());
  add_hessian(layout, sys.hss, b, b, jbw.lazyProduct(jb));
  add_gradient(layout, sys.gs, b, jbw * r);
}

/// Robust cost ½ Σ ρ and, when `sys` is set, the IRLS normal equations.
double evaluate(const WindowState& w, const SensorSetup& sensors, const SolverConfig& cfg, const NormalTerms& terms,
                const Layout& layout, NormalSystem* sys) {
  const HuberLoss huber{cfg.huber_k};
  double cost = 0.0;

  if (terms.camera) {
    for (const CameraObservation& obs : w.camera_factors) {
      const int e = layout.entry(obs.frame_id);
      const auto lm = w.landmarks.find(obs.landmark_id);
      if (e < 0 || lm == w.landmarks.end()) continue;
      CameraResidual res;
      try {
        res = camera_residual(w.keyframes[e].state, lm->second, obs, sensors.t_cb[obs.camera_index]);
      } catch (const Error&) {
        continue;
      }
      const Eigen::Matrix2d info = camera_information(obs);
      const double s = res.residual.dot(info * res.residual);
      cost += 0.5 * huber.rho(s);
      if (!sys) continue;
      const Eigen::Matrix2d wt = huber.weight(s) * info;
      Eigen::Matrix<double, 2, 9> j = Eigen::Matrix<double, 2, 9>::Zero();
      j.leftCols<6>() = res.jac_pose;
      add_pair<2>(layout, *sys, res.residual, wt, e, j, -1, j);
      LandmarkBlock& lb = sys->lm[layout.landmark_index.at(lm->first)];
      const Eigen::Matrix<double, 3, 2> jlw = res.jac_landmark.transpose() * wt;
      lb.hll += jlw * res.jac_landmark;
      lb.gl += jlw * res.residual;
      lb.block(e) += (j.transpose() * wt).lazyProduct(res.jac_landmark);
    }
  }

  if (terms.sonar) {
    for (const SonarFactorObservation& obs : w.sonar_factors) {
      const int k = layout.entry(obs.keyframe_id);
      const int i = layout.entry(obs.frame_id);
      if (k < 0 || i < 0) continue;
      const SonarResidual res = sonar_residual(w.keyframes[k].state, w.keyframes[i].state, obs, sensors.t_bs);
      const Eigen::Matrix3d info = sonar_information(obs, cfg.sonar_w_z);
      const double s = res.residual.dot(info * res.residual);
      cost += 0.5 * w.alpha * huber.rho(s);
      if (!sys) continue;
      Eigen::Matrix<double, 3, 9> jk = Eigen::Matrix<double, 3, 9>::Zero();
      Eigen::Matrix<double, 3, 9> ji = Eigen::Matrix<double, 3, 9>::Zero();
      jk.leftCols<6>() = res.jac_keyframe;
      ji.leftCols<6>() = res.jac_current;
      const Eigen::Matrix3d wt = w.alpha * huber.weight(s) * info;
      add_pair<3>(layout, *sys, res.residual, wt, k, jk, i, ji);
    }
  }

  if (terms.imu) {
    for (const ImuFactor& f : w.imu_factors) {
      const int i = layout.entry(f.from_frame);
      const int j = layout.entry(f.to_frame);
      if (i < 0 || j < 0) continue;
      const ImuResidual res =
          imu_residual(w.keyframes[i].state, w.keyframes[j].state, f.pre, sensors.imu, f.override_pose);
      const Vec9 r = res.residual.head<9>();
      cost += 0.5 * r.dot(f.information * r);
      if (!sys) continue;
      add_pair<9>(layout, *sys, r, f.information, i, res.jac_i.topLeftCorner<9, 9>(), j,
                  res.jac_j.topLeftCorner<9, 9>());
    }
  }
  return cost;
}

/// Schur complement over the landmarks.
void reduce(const Layout& layout, const NormalSystem& sys, const std::vector<Eigen::Matrix3d>& hll_inv,
            Eigen::MatrixXd& s, Eigen::VectorXd& g) {
  s = sys.hss;
  g = sys.gs;
  for (std::size_t l = 0; l < sys.lm.size(); ++l) {
    const LandmarkBlock& lb = sys.lm[l];
    for (std::size_t i = 0; i < lb.hsl.size(); ++i) {
      const auto& [a, ba] = lb.hsl[i];
      const Mat93 t = ba * hll_inv[l];
      add_gradient(layout, g, a, -(t * lb.gl));
      for (std::size_t j = i; j < lb.hsl.size(); ++j) {
        const auto& [b, bb] = lb.hsl[j];
        const Mat9 h = -t.lazyProduct(bb.transpose());
        add_hessian(layout, s, a, b, h);
        if (j != i) add_hessian(layout, s, b, a, h.transpose());
      }
    }
  }
}

struct Snapshot {
  std::vector<RobotState> states;
  std::map<int, Landmark> landmarks;
};

Snapshot snapshot(const WindowState& w) {
  Snapshot s;
  for (const WindowEntry& e : w.keyframes) s.states.push_back(e.state);
  s.landmarks = w.landmarks;
  return s;
}

void restore(WindowState& w, const Snapshot& s) {
  for (std::size_t e = 0; e < w.keyframes.size(); ++e) w.keyframes[e].state = s.states[e];
  w.landmarks = s.landmarks;
}

void apply_step(WindowState& w, const Layout& layout, const Eigen::VectorXd& dx, const std::vector<Vec3d>& dl) {
  for (std::size_t e = 0; e < w.keyframes.size(); ++e) {
    RobotState& st = w.keyframes[e].state;
    const Vec9 d = layout.entry_step(dx, static_cast<int>(e));
    if (e > 0) st.pose = boxplus(st.pose, AxisAnglePerturbation<double>{d.head<3>(), d.segment<3>(3)});
    st.velocity += d.tail<3>();
  }
  for (std::size_t l = 0; l < dl.size(); ++l) w.landmarks[layout.landmark_ids[l]].position += dl[l];
}

}  // namespace

double window_cost(const WindowState& window, const SensorSetup& sensors, const SolverConfig& config) {
  const Layout layout(window);
  return evaluate(window, sensors, config, NormalTerms{}, layout, nullptr);
}

Eigen::MatrixXd normal_matrix(const WindowState& window, const SensorSetup& sensors, const SolverConfig& config,
                              const NormalTerms& terms) {
  const Layout layout(window);
  NormalSystem sys(layout.dim, static_cast<int>(layout.landmark_ids.size()));
  evaluate(window, sensors, config, terms, layout, &sys);
  std::vector<Eigen::Matrix3d> inv(sys.lm.size());
  for (std::size_t l = 0; l < sys.lm.size(); ++l) {
    inv[l] = sys.lm[l].hll.completeOrthogonalDecomposition().pseudoInverse();
  }
  Eigen::MatrixXd s;
  Eigen::VectorXd g;
  reduce(layout, sys, inv, s, g);
  return 0.5 * (s + s.transpose());
}

OptimizeSummary optimize(WindowState& window, const SensorSetup& sensors, const SolverConfig& config) {
  OptimizeSummary summary;
  const Layout layout(window);
  const int nl = static_cast<int>(layout.landmark_ids.size());
  const NormalTerms all;

  NormalSystem sys(layout.dim, nl);
  double cost = evaluate(window, sensors, config, all, layout, &sys);
  summary.initial_cost = cost;
  summary.final_cost = cost;
  if (window.keyframes.size() < 2) return summary;

  double lambda = config.initial_lambda;
  double nu = 2.0;
  bool rebuild = false;

  while (summary.iterations < config.max_iterations) {
    if (rebuild) {
      sys = NormalSystem(layout.dim, nl);
      evaluate(window, sensors, config, all, layout, &sys);
      rebuild = false;
    }
    double gmax = sys.gs.size() ? sys.gs.cwiseAbs().maxCoeff() : 0.0;
    for (const LandmarkBlock& lb : sys.lm) gmax = std::max(gmax, lb.gl.cwiseAbs().maxCoeff());
    if (cost == 0.0 || gmax < config.gradient_tol) break;
    if (lambda > config.max_lambda) {
      throw Error(ErrorKind::kSolverDiverged, "damping exceeded " + std::to_string(config.max_lambda));
    }

    ++summary.iterations;
    // Marquardt damping on the clamped diagonal.
    auto damp = [&](double d) { return lambda * std::clamp(d, 1e-6, 1e32); };
    NormalSystem damped = sys;
    for (int i = 0; i < layout.dim; ++i) damped.hss(i, i) += damp(sys.hss(i, i));
    std::vector<Eigen::Matrix3d> hll_inv(nl);
    for (int l = 0; l < nl; ++l) {
      for (int i = 0; i < 3; ++i) damped.lm[l].hll(i, i) += damp(sys.lm[l].hll(i, i));
      hll_inv[l] = damped.lm[l].hll.inverse();
    }
    Eigen::MatrixXd s;
    Eigen::VectorXd g;
    reduce(layout, damped, hll_inv, s, g);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
    const Eigen::VectorXd dx = ldlt.solve(-g);
    std::vector<Vec3d> dl(nl);
    for (int l = 0; l < nl; ++l) {
      Vec3d rhs = -sys.lm[l].gl;
      for (const auto& [e, b] : sys.lm[l].hsl) rhs -= b.transpose() * layout.entry_step(dx, e);
      dl[l] = hll_inv[l] * rhs;
    }

    // Predicted decrease of the damped quadratic model.
    double predicted = -0.5 * sys.gs.dot(dx);
    for (int i = 0; i < layout.dim; ++i) predicted += 0.5 * damp(sys.hss(i, i)) * dx(i) * dx(i);
    for (int l = 0; l < nl; ++l) {
      predicted -= 0.5 * sys.lm[l].gl.dot(dl[l]);
      for (int i = 0; i < 3; ++i) predicted += 0.5 * damp(sys.lm[l].hll(i, i)) * dl[l](i) * dl[l](i);
    }

    bool finite = ldlt.info() == Eigen::Success && dx.allFinite();
    for (const Vec3d& d : dl) finite = finite && d.allFinite();

    double new_cost = std::numeric_limits<double>::quiet_NaN();
    const Snapshot before = snapshot(window);
    if (finite) {
      apply_step(window, layout, dx, dl);
      new_cost = evaluate(window, sensors, config, all, layout, nullptr);
    }

    if (finite && std::isfinite(new_cost) && new_cost < cost && predicted > 0.0) {
      const double rho = (cost - new_cost) / predicted;
      const double decrease = (cost - new_cost) / cost;
      cost = new_cost;
      summary.accepted_costs.push_back(cost);
      lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
      nu = 2.0;
      rebuild = true;
      if (decrease < config.relative_decrease_tol) break;
      continue;
    }
    restore(window, before);
    // A model that predicts no meaningful decrease means we are at the minimum.
    if (finite && predicted >= 0.0 && predicted <= config.relative_decrease_tol * cost) break;
    lambda *= nu;
    nu *= 2.0;
  }
  summary.final_cost = cost;
  return summary;
}

// ---------------------------------------------------------------------------
// Estimator

Estimator::Estimator(EstimatorConfig config, SensorSetup sensors, CorrespondenceProvider provider)
    : config_(std::move(config)), sensors_(std::move(sensors)), provider_(std::move(provider)) {
  if (config_.window_size < 2) throw Error(ErrorKind::kInvalidConfig, "window size must be at least 2");
}

std::optional<int> Estimator::sonar_keyframe() const {
  if (!keyframe_) return std::nullopt;
  return keyframe_->frame_id;
}

std::optional<PlanarPoseEstimate> Estimator::estimate_sonar(const FrameBundle& frame,
                                                           SonarCorrespondenceSet& pairs) const {
  if (!uses_sonar() || !frame.has_sonar || !keyframe_ || keyframe_->frame_id == frame.frame_id) {
    return std::nullopt;
  }
  if (window_.initialized && window_.index_of(keyframe_->frame_id) < 0) return std::nullopt;
  pairs = provider_(frame, *keyframe_);
  try {
    return estimate_planar_pose(pairs, config_.sonar_odometry);
  } catch (const Error&) {
    return PlanarPoseEstimate{};
  }
}

StepResult Estimator::step(const FrameBundle& frame) {
  StepResult result;
  if (imu_buffer_.empty()) {
    if (!frame.imu.empty()) imu_buffer_.push_back(frame.imu.back());
  } else {
    imu_buffer_.insert(imu_buffer_.end(), frame.imu.begin(), frame.imu.end());
  }

  const int matches = uses_camera() ? frame.matched_camera_features : 0;
  const DegradationStatus status = detect_degradation(matches, config_.degradation_threshold);
  result.degradation = status;

  SonarCorrespondenceSet pairs;
  const std::optional<PlanarPoseEstimate> estimate = estimate_sonar(frame, pairs);
  result.sonar_estimate = estimate;

  if (!window_.initialized) {
    result.init_decision = initialize(matches, estimate.value_or(PlanarPoseEstimate{}), config_.init);
    switch (result.init_decision) {
      case InitDecision::kVisualInit:
        start_visual(frame, result);
        break;
      case InitDecision::kSonarInit:
        start_sonar(frame, *estimate, pairs, result);
        break;
      case InitDecision::kNotYet:
        if (uses_sonar() && frame.has_sonar) {
          update_keyframe(frame, estimate, static_cast<int>(pairs.pairs.size()));
        }
        // IMU is kept from the sonar keyframe, or from this frame when there is none.
        if (!keyframe_ || keyframe_->frame_id == frame.frame_id) {
          imu_buffer_.clear();
          if (!frame.imu.empty()) imu_buffer_.push_back(frame.imu.back());
        }
        break;
    }
    result.initialized = window_.initialized;
    if (window_.initialized) result.published = window_.keyframes.back().state;
    return result;
  }

  track(frame, status, estimate, pairs, result);
  result.initialized = true;
  result.published = window_.keyframes.back().state;
  return result;
}

void Estimator::start_visual(const FrameBundle& frame, StepResult& result) {
  WindowEntry entry;
  entry.frame_id = frame.frame_id;
  entry.state.timestamp = frame.timestamp;
  window_.keyframes.push_back(entry);
  window_.initialized = true;
  window_.init_source = InitSource::kVisual;
  add_camera(frame);
  if (uses_sonar() && frame.has_sonar) keyframe_ = frame;
  imu_buffer_.clear();
  if (!frame.imu.empty()) imu_buffer_.push_back(frame.imu.back());
  result.optimized = false;
}

void Estimator::start_sonar(const FrameBundle& frame, const PlanarPoseEstimate& estimate,
                            const SonarCorrespondenceSet& pairs, StepResult& result) {
  WindowEntry first;
  first.frame_id = keyframe_->frame_id;
  first.state.timestamp = keyframe_->timestamp;

  WindowEntry second;
  second.frame_id = frame.frame_id;
  second.state.timestamp = frame.timestamp;
  second.state.pose = apply_sonar_prior(Posed::Identity(), sensors_.t_bs, estimate, config_.eq21_as_printed);
  const double dt = frame.timestamp - keyframe_->timestamp;
  const Vec3d v = second.state.pose.translation() / dt;
  first.state.velocity = v;
  second.state.velocity = v;
  second.degraded = true;

  window_.keyframes = {first, second};
  window_.initialized = true;
  window_.init_source = InitSource::kSonar;
  window_.imu_factors.push_back(
      make_imu_factor(first.frame_id, second.frame_id, preintegrate(imu_buffer_, ImuBias{}, sensors_.imu)));
  add_sonar(estimate, pairs, frame.frame_id);
  if (uses_camera() && frame.matched_camera_features >= config_.degradation_threshold) add_camera(frame);
  window_.alpha = select_alpha(result.degradation, true, config_.alpha_high);

  update_keyframe(frame, estimate, static_cast<int>(pairs.pairs.size()));
  imu_buffer_.clear();
  if (!frame.imu.empty()) imu_buffer_.push_back(frame.imu.back());
  run_solver(result);
}

void Estimator::track(const FrameBundle& frame, const DegradationStatus& status,
                      const std::optional<PlanarPoseEstimate>& estimate, const SonarCorrespondenceSet& pairs,
                      StepResult& result) {
  const WindowEntry& last = window_.keyframes.back();
  PreintegratedImu pre = preintegrate(imu_buffer_, last.state.bias, sensors_.imu);
  ImuFactor factor = make_imu_factor(last.frame_id, frame.frame_id, std::move(pre));

  RobotState seed = last.state;
  if (last.prior) {
    refresh_prior_overrides();
    const int k = window_.index_of(last.prior->keyframe_id);
    const Posed t_wbk = k >= 0 ? window_.keyframes[k].state.pose : last.prior->frozen_keyframe_pose;
    seed.pose = apply_sonar_prior(t_wbk, sensors_.t_bs, last.prior->estimate, config_.eq21_as_printed);
    factor.override_pose = seed.pose;
  }

  WindowEntry entry;
  entry.frame_id = frame.frame_id;
  entry.state = propagate_state(seed, factor.pre, sensors_.imu);
  entry.state.timestamp = frame.timestamp;
  entry.degraded = status.degraded;
  window_.keyframes.push_back(entry);
  window_.imu_factors.push_back(std::move(factor));

  if (uses_camera() && !status.degraded) add_camera(frame);

  const bool valid = estimate && estimate->valid();
  if (valid) {
    add_sonar(*estimate, pairs, frame.frame_id);
    if (status.degraded && config_.sonar_prior) {
      const int k = window_.index_of(keyframe_->frame_id);
      window_.keyframes.back().prior =
          SonarPriorLink{keyframe_->frame_id, *estimate, window_.keyframes[k].state.pose};
    }
  }
  window_.alpha = select_alpha(status, valid, config_.alpha_high);

  if (uses_sonar() && frame.has_sonar) update_keyframe(frame, estimate, static_cast<int>(pairs.pairs.size()));
  slide();
  // The keyframe would fall out of the window with the next slide.
  if (uses_sonar() && frame.has_sonar && keyframe_ &&
      static_cast<int>(window_.keyframes.size()) >= config_.window_size &&
      window_.keyframes.front().frame_id == keyframe_->frame_id) {
    keyframe_ = frame;
  }

  imu_buffer_.clear();
  if (!frame.imu.empty()) imu_buffer_.push_back(frame.imu.back());

  if (frame.camera.empty() && frame.sonar.empty()) return;
  run_solver(result);
}

void Estimator::add_camera(const FrameBundle& frame) {
  const WindowEntry& entry = window_.keyframes.back();
  std::map<int, std::array<const CameraObservation*, 2>> stereo;
  for (const CameraObservation& obs : frame.camera) {
    auto& slot = stereo[obs.landmark_id];
    slot[obs.camera_index] = &obs;
  }
  for (const auto& [id, pair] : stereo) {
    if (!pair[0] || !pair[1]) continue;
    if (!window_.landmarks.count(id)) {
      const std::optional<Vec3d> p_b = triangulate_stereo(pair[0]->z, pair[1]->z, sensors_.t_cb);
      if (!p_b) continue;
      window_.landmarks[id] = Landmark{id, transform_point(entry.state.pose, *p_b)};
    }
    for (const CameraObservation* obs : pair) {
      CameraObservation o = *obs;
      o.frame_id = entry.frame_id;
      o.sigma = std::max(o.sigma, config_.camera_sigma_floor);
      window_.camera_factors.push_back(o);
    }
  }
}

void Estimator::add_sonar(const PlanarPoseEstimate& estimate, const SonarCorrespondenceSet& pairs, int frame_id) {
  for (int idx : estimate.inliers()) {
    SonarFactorObservation obs;
    obs.keyframe_id = pairs.keyframe_id;
    obs.frame_id = frame_id;
    obs.keyframe_point = pairs.pairs[idx].keyframe;
    obs.current_point = pairs.pairs[idx].current;
    obs.sigma = config_.sonar_sigma;
    window_.sonar_factors.push_back(obs);
  }
}

void Estimator::update_keyframe(const FrameBundle& frame, const std::optional<PlanarPoseEstimate>& estimate,
                                int pair_count) {
  if (!keyframe_ || !estimate) {
    if (!keyframe_ || (window_.initialized && window_.index_of(keyframe_->frame_id) < 0)) keyframe_ = frame;
    return;
  }
  if (keyframe_policy(*estimate, pair_count, config_.sonar_odometry) == KeyframeDecision::kPromoteCurrent) {
    keyframe_ = frame;
  }
}

void Estimator::slide() {
  while (static_cast<int>(window_.keyframes.size()) > config_.window_size) {
    const int dropped = window_.keyframes.front().frame_id;
    window_.keyframes.erase(window_.keyframes.begin());
    std::erase_if(window_.imu_factors, [&](const ImuFactor& f) {
      return f.from_frame == dropped || f.to_frame == dropped;
    });
    std::erase_if(window_.camera_factors, [&](const CameraObservation& o) { return o.frame_id == dropped; });
    std::erase_if(window_.sonar_factors, [&](const SonarFactorObservation& o) {
      return o.keyframe_id == dropped || o.frame_id == dropped;
    });
  }
  std::map<int, int> seen;
  for (const CameraObservation& o : window_.camera_factors) ++seen[o.landmark_id];
  std::erase_if(window_.landmarks, [&](const auto& kv) { return !seen.count(kv.first); });
}

void Estimator::refresh_prior_overrides() {
  for (ImuFactor& f : window_.imu_factors) {
    const int i = window_.index_of(f.from_frame);
    if (i < 0 || !window_.keyframes[i].prior) continue;
    const SonarPriorLink& link = *window_.keyframes[i].prior;
    const int k = window_.index_of(link.keyframe_id);
    const Posed t_wbk = k >= 0 ? window_.keyframes[k].state.pose : link.frozen_keyframe_pose;
    f.override_pose = apply_sonar_prior(t_wbk, sensors_.t_bs, link.estimate, config_.eq21_as_printed);
  }
}

void Estimator::run_solver(StepResult& result) {
  if (window_.keyframes.size() < 2) return;
  refresh_prior_overrides();
  result.summary = optimize(window_, sensors_, config_.solver);
  result.optimized = true;
}

}  // namespace uwf
