#pragma once

// Perspective camera model: intrinsics from field of view, camera rotation
// from pitch/roll/yaw, pinhole projection, weak-perspective conversion and
// horizon/ground-plane helpers.
//
// Conventions
//   X_cam = Rc * X_world + t, pixel = (fx * x / z + ox, fy * y / z + oy).
//   Image v grows downwards, so the camera y axis points down.
//   Rc = Rx(pitch) * Rz(roll) * Ry(yaw). Positive pitch tilts the optical
//   axis towards +y (down), which moves the horizon into the upper half.
//   Yaw is the rightmost factor, i.e. a rotation about the world vertical.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include "speccam/error.hpp"

namespace speccam {

using Points3 = std::vector<Eigen::Vector3d>;
using Points2 = std::vector<Eigen::Vector2d>;

constexpr double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

struct ImageFrame {
  int width = 1;
  int height = 1;
};

inline void validate(const ImageFrame& frame) {
  if (frame.width < 1 || frame.height < 1) {
    throw DomainError("image frame must be at least 1x1, got " + std::to_string(frame.width) +
                      "x" + std::to_string(frame.height));
  }
}

/// Camera orientation and vertical field of view, radians.
struct CameraAngles {
  double pitch = 0.0;
  double roll = 0.0;
  double yaw = 0.0;
  double vfov = std::numbers::pi / 2.0;
};

inline void validate(const CameraAngles& a) {
  if (!(a.vfov > 0.0 && a.vfov < std::numbers::pi)) {
    throw DomainError("vfov must lie in (0, pi), got " + std::to_string(a.vfov));
  }
  for (double v : {a.pitch, a.roll, a.yaw}) {
    if (!std::isfinite(v)) throw DomainError("camera angles must be finite");
  }
}

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double ox = 0.0;
  double oy = 0.0;

  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d k;
    k << fx, 0.0, ox, 0.0, fy, oy, 0.0, 0.0, 1.0;
    return k;
  }
};

inline void validate(const Intrinsics& k) {
  if (!(k.fx > 0.0 && k.fy > 0.0)) throw DomainError("focal lengths must be positive");
}

struct RigidCamera {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

inline bool is_rotation(const Eigen::Matrix3d& r, double tol = 1e-9) {
  return (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(r.determinant() - 1.0) <= tol;
}

inline void validate(const RigidCamera& cam) {
  if (!is_rotation(cam.rotation)) throw DomainError("camera rotation is not orthonormal");
}

struct WeakPerspectiveCam {
  double scale = 1.0;
  double tx = 0.0;
  double ty = 0.0;
};

struct BBox {
  double cx = 0.0;
  double cy = 0.0;
  double wbox = 1.0;
  double hbox = 1.0;
};

// Field of view <-> focal length.

inline double vfov_to_focal(double vfov, double image_height) {
  if (!(vfov > 0.0 && vfov < std::numbers::pi)) {
    throw DomainError("vfov must lie in (0, pi), got " + std::to_string(vfov));
  }
  if (!(image_height >= 1.0)) throw DomainError("image height must be >= 1");
  return 0.5 * image_height / std::tan(0.5 * vfov);
}

inline double focal_to_vfov(double focal, double image_height) {
  if (!(focal > 0.0)) throw DomainError("focal length must be positive");
  if (!(image_height >= 1.0)) throw DomainError("image height must be >= 1");
  return 2.0 * std::atan(0.5 * image_height / focal);
}

/// Square-pixel intrinsics with the principal point at the image centre.
inline Intrinsics intrinsics_from_vfov(double vfov, const ImageFrame& frame) {
  validate(frame);
  const double f = vfov_to_focal(vfov, frame.height);
  return {f, f, 0.5 * frame.width, 0.5 * frame.height};
}

inline Intrinsics intrinsics_from_focal(double focal, const ImageFrame& frame) {
  validate(frame);
  if (!(focal > 0.0)) throw DomainError("focal length must be positive");
  return {focal, focal, 0.5 * frame.width, 0.5 * frame.height};
}

// Elementary rotations.

inline Eigen::Matrix3d rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  r << 1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c;
  return r;
}

inline Eigen::Matrix3d rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  r << c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c;
  return r;
}

inline Eigen::Matrix3d rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return r;
}

inline Eigen::Matrix3d angles_to_rotation(const CameraAngles& a) {
  return rot_x(a.pitch) * rot_z(a.roll) * rot_y(a.yaw);
}

/// Partial derivatives of angles_to_rotation w.r.t. (pitch, roll, yaw).
inline std::array<Eigen::Matrix3d, 3> rotation_angle_derivatives(const CameraAngles& a) {
  const Eigen::Matrix3d rx = rot_x(a.pitch), rz = rot_z(a.roll), ry = rot_y(a.yaw);
  Eigen::Matrix3d hx, hy, hz;
  hx << 0, 0, 0, 0, 0, -1, 0, 1, 0;
  hy << 0, 0, 1, 0, 0, 0, -1, 0, 0;
  hz << 0, -1, 0, 1, 0, 0, 0, 0, 0;
  return {rx * hx * rz * ry, rx * rz * hz * ry, rx * rz * ry * hy};
}

struct AngleDecomposition {
  CameraAngles angles;  // vfov left at NaN
  bool degenerate = false;
};

inline constexpr double kGimbalThreshold = deg2rad(89.0);

/// Inverse of angles_to_rotation. Flagged degenerate at |pitch| >= 89 deg and
/// near the true singularity of this factor order, |roll| >= 89 deg.
inline AngleDecomposition rotation_to_angles(const Eigen::Matrix3d& r) {
  AngleDecomposition out;
  out.angles.pitch = std::atan2(r(2, 1), r(1, 1));
  out.angles.roll = std::atan2(-r(0, 1), std::hypot(r(1, 1), r(2, 1)));
  out.angles.yaw = std::atan2(r(0, 2), r(0, 0));
  out.angles.vfov = std::numeric_limits<double>::quiet_NaN();
  out.degenerate = std::abs(out.angles.pitch) >= kGimbalThreshold ||
                   std::abs(out.angles.roll) >= kGimbalThreshold;
  return out;
}

// Projection.

inline Eigen::Vector2d project_camera_point(const Eigen::Vector3d& cam, const Intrinsics& k) {
  return {k.fx * cam.x() / cam.z() + k.ox, k.fy * cam.y() / cam.z() + k.oy};
}

/// Pinhole projection of cam = rc * X + tb. Throws BehindCameraError naming the
/// first point with non-positive depth.
inline Points2 project(std::span<const Eigen::Vector3d> points, const Intrinsics& k,
                       const Eigen::Matrix3d& rc, const Eigen::Vector3d& tb) {
  Points2 out;
  out.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Eigen::Vector3d cam = rc * points[i] + tb;
    if (!(cam.z() > 0.0)) throw BehindCameraError(i, cam.z());
    out.push_back(project_camera_point(cam, k));
  }
  return out;
}

/// Converts bbox-relative weak-perspective parameters into a camera-frame
/// body translation for the full image.
inline Eigen::Vector3d weak_to_full_translation(const WeakPerspectiveCam& cam, const BBox& bbox,
                                                const ImageFrame& frame, double focal) {
  if (!(cam.scale > 0.0)) throw DomainError("weak-perspective scale must be positive");
  if (!(bbox.wbox > 0.0 && bbox.hbox > 0.0)) throw DomainError("bbox size must be positive");
  if (!(focal > 0.0)) throw DomainError("focal length must be positive");
  return {cam.tx + 2.0 * (bbox.cx - 0.5 * frame.width) / (cam.scale * bbox.wbox),
          cam.ty + 2.0 * (bbox.cy - 0.5 * frame.height) / (cam.scale * bbox.hbox),
          2.0 * focal / (bbox.hbox * cam.scale)};
}

// Horizon.

struct HorizonLine {
  Eigen::Vector2d start{0.0, 0.0};  // at u = 0
  Eigen::Vector2d end{0.0, 0.0};    // at u = width
  bool on_screen = false;

  double v_at(double u) const {
    const double t = (u - start.x()) / (end.x() - start.x());
    return start.y() + t * (end.y() - start.y());
  }
};

/// Image of the world-horizontal directions at infinity. A direction r in
/// camera coordinates is horizontal iff r . (Rc * e_y) = 0.
inline HorizonLine horizon_line(const Intrinsics& k, const Eigen::Matrix3d& rc,
                                const ImageFrame& frame) {
  validate(frame);
  HorizonLine line;
  const Eigen::Vector3d n = rc.col(1);
  if (std::abs(n.y()) < 1e-12) return line;  // vertical or undefined in the image
  const auto v_of = [&](double u) {
    return k.oy - k.fy * (n.z() + n.x() * (u - k.ox) / k.fx) / n.y();
  };
  const double w = frame.width;
  line.start = {0.0, v_of(0.0)};
  line.end = {w, v_of(w)};
  const double lo = std::min(line.start.y(), line.end.y());
  const double hi = std::max(line.start.y(), line.end.y());
  line.on_screen = hi >= 0.0 && lo <= frame.height;
  return line;
}

inline HorizonLine horizon_line(const CameraAngles& angles, const ImageFrame& frame) {
  validate(angles);
  return horizon_line(intrinsics_from_vfov(angles.vfov, frame), angles_to_rotation(angles), frame);
}

/// Row-major rotation followed by the vertical field of view.
inline std::array<double, 10> camera_conditioning_vector(const Eigen::Matrix3d& rc, double vfov) {
  std::array<double, 10> v{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) v[3 * r + c] = rc(r, c);
  v[9] = vfov;
  return v;
}

/// Height of a ground plane parallel to the xz-plane touching the lowest point.
inline double ground_plane_height(std::span<const Eigen::Vector3d> joints) {
  if (joints.empty()) throw DomainError("ground plane needs at least one point");
  double y = joints.front().y();
  for (const auto& p : joints) y = std::min(y, p.y());
  return y;
}

}  // namespace speccam
