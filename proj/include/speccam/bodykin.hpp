#pragma once

// Articulated skeleton standing in for a parametric body mesh. Pose is one
// axis-angle rotation per joint, shape is one log-scale per bone.

#include <array>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "speccam/camgeom.hpp"
#include "speccam/error.hpp"
#include "speccam/so3.hpp"

namespace speccam {

/// Kinematic tree. Parents must precede their children; joint 0 is the root
/// and sits at the origin of the body frame.
struct SkeletonTemplate {
  std::vector<int> parent;
  Points3 rest_offset;
  std::vector<std::string> names;

  std::size_t joint_count() const { return parent.size(); }
  std::size_t bone_count() const { return parent.empty() ? 0 : parent.size() - 1; }
};

inline void validate(const SkeletonTemplate& t) {
  if (t.parent.empty()) throw ShapeError("skeleton has no joints");
  if (t.rest_offset.size() != t.parent.size()) {
    throw ShapeError("skeleton has " + std::to_string(t.parent.size()) + " parents but " +
                     std::to_string(t.rest_offset.size()) + " offsets");
  }
  if (t.parent[0] != -1) throw DomainError("joint 0 must be the root (parent -1)");
  if (!t.rest_offset[0].isZero()) throw DomainError("root rest offset must be the origin");
  for (std::size_t j = 1; j < t.parent.size(); ++j) {
    if (t.parent[j] < 0 || t.parent[j] >= static_cast<int>(j)) {
      throw DomainError("joint " + std::to_string(j) +
                        " must have a parent with a smaller index (single root, no cycles)");
    }
  }
}

/// Pose, shape and rigid placement of one body.
struct BodyParams {
  std::vector<Eigen::Vector3d> theta;  // per joint, axis-angle
  std::vector<double> beta;            // per bone (joint j >= 1 owns bone j-1), log scale
  Eigen::Matrix3d rb = Eigen::Matrix3d::Identity();
  Eigen::Vector3d tb = Eigen::Vector3d::Zero();
};

inline BodyParams rest_params(const SkeletonTemplate& t) {
  BodyParams p;
  p.theta.assign(t.joint_count(), Eigen::Vector3d::Zero());
  p.beta.assign(t.bone_count(), 0.0);
  return p;
}

inline void check_dimensions(const SkeletonTemplate& t, const BodyParams& p) {
  if (p.theta.size() != t.joint_count()) {
    throw ShapeError("theta has " + std::to_string(p.theta.size()) + " joints, template has " +
                     std::to_string(t.joint_count()));
  }
  if (p.beta.size() != t.bone_count()) {
    throw ShapeError("beta has " + std::to_string(p.beta.size()) + " bones, template has " +
                     std::to_string(t.bone_count()));
  }
}

struct JointSet2D {
  Points2 coords;
  std::vector<double> confidence;
};

inline void validate(const JointSet2D& j) {
  if (j.coords.size() != j.confidence.size()) {
    throw ShapeError("2D joint set has mismatched coordinate and confidence counts");
  }
  for (std::size_t i = 0; i < j.coords.size(); ++i) {
    if (!j.coords[i].allFinite()) throw DomainError("2D joint " + std::to_string(i) + " not finite");
    if (!(j.confidence[i] >= 0.0 && j.confidence[i] <= 1.0)) {
      throw DomainError("confidence of joint " + std::to_string(i) + " outside [0, 1]");
    }
  }
}

/// Body-frame chain state shared by the forward pass and the gradients.
struct KinematicState {
  Points3 local;                          // joint positions before rb, tb
  std::vector<Eigen::Matrix3d> global;    // accumulated joint rotations
  std::vector<Eigen::Vector3d> bone;      // scaled rest offset of each joint
};

inline KinematicState kinematic_state(const SkeletonTemplate& t,
                                      const std::vector<Eigen::Vector3d>& theta,
                                      const std::vector<double>& beta) {
  const std::size_t k = t.joint_count();
  KinematicState s;
  s.local.resize(k);
  s.global.resize(k);
  s.bone.resize(k);
  s.local[0].setZero();
  s.bone[0].setZero();
  s.global[0] = so3::exp(theta[0]);
  for (std::size_t j = 1; j < k; ++j) {
    const auto p = static_cast<std::size_t>(t.parent[j]);
    s.bone[j] = std::exp(beta[j - 1]) * t.rest_offset[j];
    s.local[j] = s.local[p] + s.global[p] * s.bone[j];
    s.global[j] = s.global[p] * so3::exp(theta[j]);
  }
  return s;
}

inline Points3 forward_kinematics(const SkeletonTemplate& t, const BodyParams& p) {
  check_dimensions(t, p);
  const KinematicState s = kinematic_state(t, p.theta, p.beta);
  Points3 out(s.local.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = p.rb * s.local[j] + p.tb;
  return out;
}

/// Vertical extent of the unposed body with the given bone scales.
inline double body_height(const SkeletonTemplate& t, const std::vector<double>& beta) {
  BodyParams p = rest_params(t);
  if (beta.size() != t.bone_count()) {
    throw ShapeError("beta has " + std::to_string(beta.size()) + " bones, template has " +
                     std::to_string(t.bone_count()));
  }
  p.beta = beta;
  const Points3 j = forward_kinematics(t, p);
  double lo = j[0].y(), hi = j[0].y();
  for (const auto& q : j) {
    lo = std::min(lo, q.y());
    hi = std::max(hi, q.y());
  }
  return hi - lo;
}

namespace joint {
enum : int {
  kPelvis, kSpine, kThorax, kNeck, kHead,
  kLeftHip, kLeftKnee, kLeftAnkle,
  kRightHip, kRightKnee, kRightAnkle,
  kLeftShoulder, kLeftElbow, kLeftWrist,
  kRightShoulder, kRightElbow, kRightWrist,
  kCount
};
}  // namespace joint

/// 17-joint human skeleton in a T-pose, 1.70 m from ankles to head top,
/// facing +z with +y up and the body's left on +x. The thorax-to-shoulder
/// bones play the role of the clavicles.
inline SkeletonTemplate default_template() {
  SkeletonTemplate t;
  t.names = {"pelvis",     "spine",      "thorax",      "neck",          "head",
             "l_hip",      "l_knee",     "l_ankle",     "r_hip",         "r_knee",
             "r_ankle",    "l_shoulder", "l_elbow",     "l_wrist",       "r_shoulder",
             "r_elbow",    "r_wrist"};
  t.parent = {-1, 0, 1, 2, 3, 0, 5, 6, 0, 8, 9, 2, 11, 12, 2, 14, 15};
  t.rest_offset = {
      {0.0, 0.0, 0.0},      // pelvis
      {0.0, 0.22, -0.02},   // spine
      {0.0, 0.25, 0.0},     // thorax
      {0.0, 0.13, 0.03},    // neck
      {0.0, 0.20, -0.01},   // head top
      {0.10, -0.05, 0.0},   // l_hip
      {0.0, -0.42, 0.03},   // l_knee
      {0.0, -0.43, -0.04},  // l_ankle
      {-0.10, -0.05, 0.0},  // r_hip
      {0.0, -0.42, 0.03},   // r_knee
      {0.0, -0.43, -0.04},  // r_ankle
      {0.18, 0.0, -0.02},   // l_shoulder
      {0.28, 0.0, 0.0},     // l_elbow
      {0.25, 0.0, 0.0},     // l_wrist
      {-0.18, 0.0, -0.02},  // r_shoulder
      {-0.28, 0.0, 0.0},    // r_elbow
      {-0.25, 0.0, 0.0},    // r_wrist
  };
  return t;
}

}  // namespace speccam
