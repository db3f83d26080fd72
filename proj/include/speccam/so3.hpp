#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

namespace speccam::so3 {

inline Eigen::Matrix3d hat(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

/// Rodrigues formula; Taylor branch below 1e-8 rad.
inline Eigen::Matrix3d exp(const Eigen::Vector3d& w) {
  const double t2 = w.squaredNorm();
  const Eigen::Matrix3d k = hat(w);
  double a, b;
  if (t2 < 1e-16) {
    a = 1.0 - t2 / 6.0;
    b = 0.5 - t2 / 24.0;
  } else {
    const double t = std::sqrt(t2);
    a = std::sin(t) / t;
    b = (1.0 - std::cos(t)) / t2;
  }
  return Eigen::Matrix3d::Identity() + a * k + b * k * k;
}

/// Right Jacobian: exp(w + dw) = exp(w) * exp(Jr(w) * dw) to first order.
inline Eigen::Matrix3d right_jacobian(const Eigen::Vector3d& w) {
  const double t2 = w.squaredNorm();
  const Eigen::Matrix3d k = hat(w);
  double a, b;
  if (t2 < 1e-10) {
    a = 0.5 - t2 / 24.0;
    b = 1.0 / 6.0 - t2 / 120.0;
  } else {
    const double t = std::sqrt(t2);
    a = (1.0 - std::cos(t)) / t2;
    b = (t - std::sin(t)) / (t2 * t);
  }
  return Eigen::Matrix3d::Identity() - a * k + b * k * k;
}

inline Eigen::Vector3d log(const Eigen::Matrix3d& r) {
  const double c = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double t = std::acos(c);
  const Eigen::Vector3d v(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  if (t < 1e-8) return 0.5 * v;
  if (std::numbers::pi - t < 1e-6) {
    // Near pi: axis from the symmetric part.
    const Eigen::Matrix3d s = 0.5 * (r + Eigen::Matrix3d::Identity());
    int i = 0;
    s.diagonal().maxCoeff(&i);
    Eigen::Vector3d axis = s.col(i) / std::sqrt(std::max(s(i, i), 1e-300));
    if (axis.dot(v) < 0.0) axis = -axis;
    return t * axis.normalized();
  }
  return t / (2.0 * std::sin(t)) * v;
}

/// Nearest rotation (polar factor) of a nearly orthonormal matrix.
inline Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

}  // namespace speccam::so3
