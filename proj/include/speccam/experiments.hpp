#pragma once

// Synthetic experiments built on the fitter: random bodies seen by random
// everyday cameras, fitted under different camera assumptions and scored with
// the world-frame metrics.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "speccam/bodykin.hpp"
#include "speccam/camgeom.hpp"
#include "speccam/fitter.hpp"
#include "speccam/metrics.hpp"
#include "speccam/panosample.hpp"
#include "speccam/rng.hpp"
#include "speccam/so3.hpp"

namespace speccam {

/// Knobs of the synthetic scene generator.
struct SceneConfig {
  ImageFrame frame{1280, 720};
  double depth_lo = 3.0;         // meters, camera-frame depth of the pelvis
  double depth_hi = 8.0;
  double pose_sigma = 0.25;      // rad, ground-truth joint rotations
  double shape_sigma = 0.05;     // ground-truth bone log-scales
  double keypoint_noise = 1.0;   // px, detector noise on the 2D targets
  double init_pose_sigma = deg2rad(3.0);
  double init_orient_sigma = deg2rad(3.0);
  double init_depth_rel_sigma = 0.03;
};

/// One body in front of one camera. `gt` carries the world-frame body
/// orientation in rb and the camera-frame pelvis position in tb.
struct SyntheticScene {
  CameraAngles angles;
  Intrinsics intrinsics;
  Eigen::Matrix3d rc = Eigen::Matrix3d::Identity();
  BodyParams gt;
  JointSet2D observed;
  BodyParams init_camera_frame;  // regressor-style estimate in camera coordinates
};

/// Random joint rotations; the root stays at identity because the global
/// orientation lives in rb.
inline std::vector<Eigen::Vector3d> random_pose(Rng& rng, std::size_t joints, double sigma) {
  std::vector<Eigen::Vector3d> theta(joints, Eigen::Vector3d::Zero());
  for (std::size_t j = 1; j < joints; ++j) {
    theta[j] = Eigen::Vector3d(rng.normal(0.0, sigma), rng.normal(0.0, sigma), rng.normal(0.0, sigma));
  }
  return theta;
}

/// Upright body (body +y mapped to world up, which is -y) turned about the
/// vertical by `heading`.
inline Eigen::Matrix3d upright_orientation(double heading) { return rot_y(heading) * rot_x(std::numbers::pi); }

inline Eigen::Matrix3d perturb_rotation(Rng& rng, const Eigen::Matrix3d& r, double sigma) {
  const Eigen::Vector3d w(rng.normal(0.0, sigma), rng.normal(0.0, sigma), rng.normal(0.0, sigma));
  return so3::exp(w) * r;
}

inline SyntheticScene make_scene(Rng& rng, const SceneConfig& cfg = {},
                                 const SkeletonTemplate& skeleton = default_template()) {
  SyntheticScene s;
  s.angles = sample_specsyn_camera(rng);
  s.intrinsics = intrinsics_from_vfov(s.angles.vfov, cfg.frame);
  s.rc = angles_to_rotation(s.angles);

  const std::size_t k = skeleton.joint_count();
  s.gt.theta = random_pose(rng, k, cfg.pose_sigma);
  s.gt.beta.resize(k - 1);
  for (double& b : s.gt.beta) b = rng.normal(0.0, cfg.shape_sigma);
  s.gt.rb = upright_orientation(rng.uniform(-std::numbers::pi, std::numbers::pi));

  // Pelvis somewhere in the central half of the image.
  const double depth = rng.uniform(cfg.depth_lo, cfg.depth_hi);
  const double u = rng.uniform(0.25, 0.75) * cfg.frame.width;
  const double v = rng.uniform(0.3, 0.7) * cfg.frame.height;
  s.gt.tb = depth * Eigen::Vector3d((u - s.intrinsics.ox) / s.intrinsics.fx,
                                    (v - s.intrinsics.oy) / s.intrinsics.fy, 1.0);

  Points3 body = forward_kinematics(skeleton, {s.gt.theta, s.gt.beta, s.gt.rb, Eigen::Vector3d::Zero()});
  const Points2 px = project(body, s.intrinsics, s.rc, s.gt.tb);
  s.observed.coords = px;
  for (auto& p : s.observed.coords) p += Eigen::Vector2d(rng.normal(0.0, cfg.keypoint_noise), rng.normal(0.0, cfg.keypoint_noise));
  s.observed.confidence.assign(k, 1.0);

  s.init_camera_frame.theta = s.gt.theta;
  for (std::size_t j = 1; j < k; ++j) {
    s.init_camera_frame.theta[j] += Eigen::Vector3d(rng.normal(0.0, cfg.init_pose_sigma),
                                                    rng.normal(0.0, cfg.init_pose_sigma),
                                                    rng.normal(0.0, cfg.init_pose_sigma));
  }
  s.init_camera_frame.beta.assign(k - 1, 0.0);
  s.init_camera_frame.rb = perturb_rotation(rng, s.rc * s.gt.rb, cfg.init_orient_sigma);
  s.init_camera_frame.tb = s.gt.tb;
  s.init_camera_frame.tb.z() *= 1.0 + rng.normal(0.0, cfg.init_depth_rel_sigma);
  return s;
}

/// Camera assumed by a fit.
struct CameraHypothesis {
  Intrinsics intrinsics;
  Eigen::Matrix3d rc = Eigen::Matrix3d::Identity();
};

inline CameraHypothesis ground_truth_camera(const SyntheticScene& s) { return {s.intrinsics, s.rc}; }

/// Identity rotation and a fixed focal length at the image centre.
inline CameraHypothesis fixed_focal_camera(double focal, const ImageFrame& frame) {
  return {intrinsics_from_focal(focal, frame), Eigen::Matrix3d::Identity()};
}

/// Builds the fit problem for `hyp`. The camera-frame initial estimate is
/// expressed in the hypothesised camera: the orientation is rotated by the
/// assumed Rc^T and the depth follows the focal length, as a weak-perspective
/// estimate converted with that focal would.
inline FitProblem problem_for(const SyntheticScene& s, const CameraHypothesis& hyp,
                              const SkeletonTemplate& skeleton = default_template()) {
  FitProblem p;
  p.observed = s.observed;
  p.intrinsics = hyp.intrinsics;
  p.rc = hyp.rc;
  p.skeleton = skeleton;
  p.init = s.init_camera_frame;
  p.init.rb = so3::orthonormalize(hyp.rc.transpose() * s.init_camera_frame.rb);
  p.init.tb.z() *= hyp.intrinsics.fy / s.intrinsics.fy;
  return p;
}

struct FitScore {
  double w_mpjpe_mm = 0.0;
  double pa_mpjpe_mm = 0.0;
};

inline FitScore score_fit(const SyntheticScene& s, const CameraHypothesis& hyp, const BodyParams& fitted,
                          const SkeletonTemplate& skeleton = default_template(), bool root_align = true) {
  BodyParams gt = s.gt;
  gt.tb.setZero();
  BodyParams est = fitted;
  EvalSample sample;
  sample.ground_truth = forward_kinematics(skeleton, gt);
  // Camera-frame prediction, rotated back with the hypothesised rotation.
  est.rb = hyp.rc * fitted.rb;
  sample.predicted = forward_kinematics(skeleton, est);
  sample.frame = PredictionFrame::kCamera;
  sample.estimated_rc = hyp.rc;
  return {w_mpjpe(sample, root_align), pa_mpjpe(sample.predicted, sample.ground_truth)};
}

// Estimated-camera comparison.

struct CameraComparison {
  double gt_w_mpjpe = 0.0;
  double gt_pa_mpjpe = 0.0;
  double fixed_w_mpjpe = 0.0;
  double fixed_pa_mpjpe = 0.0;
  std::size_t bodies = 0;
};

/// Fits every body twice, with the true K and Rc and with a fixed focal
/// length and identity rotation, and averages both metrics.
inline CameraComparison compare_camera_models(std::uint64_t seed, std::size_t bodies,
                                              double fixed_focal = 5000.0,
                                              const FitConfig& config = {},
                                              const SceneConfig& scene = {}) {
  Rng rng(seed);
  CameraComparison c;
  const SkeletonTemplate skeleton = default_template();
  for (std::size_t i = 0; i < bodies; ++i) {
    const SyntheticScene s = make_scene(rng, scene, skeleton);
    const CameraHypothesis gt = ground_truth_camera(s);
    const CameraHypothesis fixed = fixed_focal_camera(fixed_focal, scene.frame);
    const FitScore a = score_fit(s, gt, fit_single(problem_for(s, gt, skeleton), config).params, skeleton);
    const FitScore b = score_fit(s, fixed, fit_single(problem_for(s, fixed, skeleton), config).params, skeleton);
    c.gt_w_mpjpe += a.w_mpjpe_mm;
    c.gt_pa_mpjpe += a.pa_mpjpe_mm;
    c.fixed_w_mpjpe += b.w_mpjpe_mm;
    c.fixed_pa_mpjpe += b.pa_mpjpe_mm;
  }
  const double n = static_cast<double>(std::max<std::size_t>(bodies, 1));
  c.gt_w_mpjpe /= n;
  c.gt_pa_mpjpe /= n;
  c.fixed_w_mpjpe /= n;
  c.fixed_pa_mpjpe /= n;
  c.bodies = bodies;
  return c;
}

// Focal-length sensitivity.

inline std::vector<double> default_focal_factors() { return {0.4, 0.6, 0.8, 1.0, 1.3, 1.6, 2.0}; }

struct SensitivityRow {
  double factor = 1.0;
  double mean_w_mpjpe_mm = 0.0;
  std::size_t trials = 0;
};

/// Refits each synthetic body with the true rotation and the focal length
/// scaled by every factor; reports the mean W-MPJPE per factor.
inline std::vector<SensitivityRow> focal_sensitivity(std::uint64_t seed, std::size_t trials,
                                                     const std::vector<double>& factors,
                                                     const FitConfig& config = {},
                                                     const SceneConfig& scene = {}) {
  for (double f : factors) {
    if (!(f > 0.0)) throw DomainError("focal factors must be positive");
  }
  std::vector<SensitivityRow> rows;
  for (double f : factors) rows.push_back({f, 0.0, trials});
  Rng rng(seed);
  const SkeletonTemplate skeleton = default_template();
  for (std::size_t t = 0; t < trials; ++t) {
    const SyntheticScene s = make_scene(rng, scene, skeleton);
    for (auto& row : rows) {
      CameraHypothesis hyp = ground_truth_camera(s);
      hyp.intrinsics.fx *= row.factor;
      hyp.intrinsics.fy *= row.factor;
      const FitResult r = fit_single(problem_for(s, hyp, skeleton), config);
      row.mean_w_mpjpe_mm += score_fit(s, hyp, r.params, skeleton).w_mpjpe_mm;
    }
  }
  for (auto& row : rows) row.mean_w_mpjpe_mm /= static_cast<double>(std::max<std::size_t>(trials, 1));
  return rows;
}

// Multi-view shape recovery.

struct MultiViewScene {
  MultiFrameProblem problem;
  std::vector<FrameCamera> gt_cameras;
  std::vector<Eigen::Vector3d> gt_theta;
  std::vector<double> gt_beta;
};

struct MultiViewConfig {
  ImageFrame frame{1280, 720};
  double yaw_spread = deg2rad(120.0);  // views spread evenly over this arc
  double pose_sigma = 0.25;
  double presented_sigma = 0.0;        // how far the subject's pose is from the presented one
  double shape_sigma = 0.08;
  double keypoint_noise = 0.0;
  double init_angle_sigma = deg2rad(2.0);
  double init_translation_sigma = 0.05;
};

/// A static body filmed from `frames` viewpoints around it.
inline MultiViewScene make_multiview_scene(Rng& rng, std::size_t frames, const MultiViewConfig& cfg = {},
                                           const SkeletonTemplate& skeleton = default_template()) {
  MultiViewScene m;
  const std::size_t k = skeleton.joint_count();
  m.gt_theta = random_pose(rng, k, cfg.pose_sigma);
  m.gt_beta.resize(k - 1);
  for (double& b : m.gt_beta) b = rng.normal(0.0, cfg.shape_sigma);
  m.problem.skeleton = skeleton;
  m.problem.presented_theta = m.gt_theta;
  for (std::size_t j = 1; j < k; ++j) {
    m.problem.presented_theta[j] += Eigen::Vector3d(rng.normal(0.0, cfg.presented_sigma),
                                                    rng.normal(0.0, cfg.presented_sigma),
                                                    rng.normal(0.0, cfg.presented_sigma));
  }
  m.problem.target_height = body_height(skeleton, m.gt_beta);

  const Points3 body = forward_kinematics(skeleton, {m.gt_theta, m.gt_beta, Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero()});
  const double heading0 = rng.uniform(-std::numbers::pi, std::numbers::pi);
  for (std::size_t i = 0; i < frames; ++i) {
    CameraAngles a = sample_specsyn_camera(rng);
    const double offset = frames > 1 ? cfg.yaw_spread * (static_cast<double>(i) / (frames - 1) - 0.5) : 0.0;
    a.yaw = heading0 + offset;
    // The body frame has +y up; flip it into the y-down camera convention.
    const Eigen::Matrix3d r = angles_to_rotation(a) * rot_x(std::numbers::pi);
    const AngleDecomposition d = rotation_to_angles(r);
    FrameCamera gt{d.angles.pitch, d.angles.roll, d.angles.yaw, Eigen::Vector3d::Zero()};
    const Intrinsics k_i = intrinsics_from_vfov(a.vfov, cfg.frame);
    const double depth = rng.uniform(3.0, 5.0);
    gt.tc = depth * Eigen::Vector3d(rng.normal(0.0, 0.1), rng.normal(0.0, 0.1), 1.0);

    FrameObservation f;
    f.intrinsics = k_i;
    f.observed.coords = project(body, k_i, gt.rotation(), gt.tc);
    for (auto& p : f.observed.coords) p += Eigen::Vector2d(rng.normal(0.0, cfg.keypoint_noise), rng.normal(0.0, cfg.keypoint_noise));
    f.observed.confidence.assign(k, 1.0);
    f.init_camera = gt;
    f.init_camera.pitch += rng.normal(0.0, cfg.init_angle_sigma);
    f.init_camera.roll += rng.normal(0.0, cfg.init_angle_sigma);
    f.init_camera.yaw += rng.normal(0.0, cfg.init_angle_sigma);
    f.init_camera.tc += Eigen::Vector3d(rng.normal(0.0, cfg.init_translation_sigma),
                                        rng.normal(0.0, cfg.init_translation_sigma),
                                        rng.normal(0.0, cfg.init_translation_sigma));
    m.problem.frames.push_back(f);
    m.gt_cameras.push_back(gt);
  }
  return m;
}

/// Mean absolute bone log-scale error.
inline double beta_error(const std::vector<double>& est, const std::vector<double>& gt) {
  if (est.size() != gt.size()) throw ShapeError("beta sizes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) s += std::abs(est[i] - gt[i]);
  return est.empty() ? 0.0 : s / static_cast<double>(est.size());
}

}  // namespace speccam
