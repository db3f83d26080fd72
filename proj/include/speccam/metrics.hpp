#pragma once

// Joint-error metrics. Inputs are in meters, every error is reported in
// millimeters. With a skeleton body model the vertex set is the joint set,
// so the vertex-error variants are aliases of the joint-error ones.

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "speccam/camgeom.hpp"
#include "speccam/error.hpp"

namespace speccam {

inline constexpr double kMillimetersPerMeter = 1000.0;

struct Similarity {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return scale * (rotation * p) + translation; }
};

namespace detail {

inline void check_same_size(std::span<const Eigen::Vector3d> a, std::span<const Eigen::Vector3d> b) {
  if (a.size() != b.size()) {
    throw ShapeError("joint counts differ: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
}

inline double mean_distance(std::span<const Eigen::Vector3d> a, std::span<const Eigen::Vector3d> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]).norm();
  return a.empty() ? 0.0 : s / static_cast<double>(a.size());
}

}  // namespace detail

/// Similarity transform minimizing |s R X + t - Y|_F^2 (closed form with
/// reflection correction).
inline Similarity procrustes_align(std::span<const Eigen::Vector3d> x,
                                   std::span<const Eigen::Vector3d> y) {
  detail::check_same_size(x, y);
  if (x.size() < 3) throw DegenerateError("Procrustes alignment needs at least three points");
  const auto n = static_cast<double>(x.size());
  Eigen::Vector3d mx = Eigen::Vector3d::Zero(), my = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();   // sum (y - my)(x - mx)^T
  Eigen::Matrix3d xx = Eigen::Matrix3d::Zero();    // scatter of x
  double var_x = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Eigen::Vector3d xc = x[i] - mx;
    cov += (y[i] - my) * xc.transpose();
    xx += xc * xc.transpose();
    var_x += xc.squaredNorm();
  }
  const Eigen::Vector3d spread = Eigen::JacobiSVD<Eigen::Matrix3d>(xx).singularValues();
  if (!(spread[0] > 0.0) || spread[1] <= 1e-12 * spread[0]) {
    throw DegenerateError("source points have rank < 2 after centering");
  }

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d d(1.0, 1.0, 1.0);
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d[2] = -1.0;
  Similarity s;
  s.rotation = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
  s.scale = svd.singularValues().dot(d) / var_x;
  s.translation = my - s.scale * s.rotation * mx;
  return s;
}

/// Mean per-joint position error, no alignment.
inline double mpjpe(std::span<const Eigen::Vector3d> pred, std::span<const Eigen::Vector3d> gt) {
  detail::check_same_size(pred, gt);
  return kMillimetersPerMeter * detail::mean_distance(pred, gt);
}

inline double pa_mpjpe(std::span<const Eigen::Vector3d> pred, std::span<const Eigen::Vector3d> gt) {
  const Similarity s = procrustes_align(pred, gt);
  Points3 aligned(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) aligned[i] = s.apply(pred[i]);
  return kMillimetersPerMeter * detail::mean_distance(aligned, gt);
}

enum class PredictionFrame { kWorld, kCamera };

struct EvalSample {
  Points3 predicted;
  PredictionFrame frame = PredictionFrame::kWorld;
  Points3 ground_truth;  // world frame
  std::optional<Eigen::Matrix3d> estimated_rc;
  double focal_px = 0.0;
  double pitch_deg = 0.0;
};

inline void validate(const EvalSample& s) {
  detail::check_same_size(s.predicted, s.ground_truth);
  if (s.predicted.empty()) throw ShapeError("sample has no joints");
}

/// World-frame prediction: as given, or rotated back by the estimated camera
/// rotation for camera-frame predictions.
inline Points3 world_prediction(const EvalSample& s) {
  if (s.frame == PredictionFrame::kWorld) return s.predicted;
  if (!s.estimated_rc) throw SchemaError("camera-frame prediction without estimated rotation");
  Points3 out(s.predicted.size());
  const Eigen::Matrix3d rt = s.estimated_rc->transpose();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = rt * s.predicted[i];
  return out;
}

/// World-frame MPJPE. With root_align the root (joint 0) offset is removed first.
inline double w_mpjpe(const EvalSample& sample, bool root_align = true) {
  validate(sample);
  Points3 p = world_prediction(sample);
  if (root_align) {
    const Eigen::Vector3d shift = p[0] - sample.ground_truth[0];
    for (auto& q : p) q -= shift;
  }
  return kMillimetersPerMeter * detail::mean_distance(p, sample.ground_truth);
}

/// Vertex-error aliases; a skeleton's vertex set is its joint set.
inline double w_pve(const EvalSample& sample, bool root_align = true) { return w_mpjpe(sample, root_align); }
inline double pve(std::span<const Eigen::Vector3d> pred, std::span<const Eigen::Vector3d> gt) {
  return mpjpe(pred, gt);
}

/// |pred - gt| in degrees after wrapping the difference into (-180, 180].
inline double angular_error(double pred_deg, double gt_deg) {
  double d = std::fmod(pred_deg - gt_deg, 360.0);
  if (d > 180.0) d -= 360.0;
  if (d <= -180.0) d += 360.0;
  return std::abs(d);
}

struct BucketSpec {
  std::vector<double> focal_edges;  // pixels
  std::vector<double> pitch_edges;  // degrees
};

inline void validate(const BucketSpec& spec) {
  for (const auto* edges : {&spec.focal_edges, &spec.pitch_edges}) {
    if (edges->size() < 2) throw DomainError("bucket edges need at least two entries");
    for (std::size_t i = 1; i < edges->size(); ++i) {
      if (!((*edges)[i] > (*edges)[i - 1])) throw DomainError("bucket edges must increase strictly");
    }
  }
}

struct BucketRow {
  std::string label;
  double lo = 0.0;  // -inf for the lower overflow bucket
  double hi = 0.0;  // +inf for the upper overflow bucket
  std::size_t count = 0;
  std::optional<double> mean;  // absent for empty buckets
};

struct BucketTable {
  std::vector<BucketRow> focal;
  std::vector<BucketRow> pitch;
};

namespace detail {

inline std::string edge_text(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

inline std::vector<BucketRow> bucketize(const std::vector<double>& keys,
                                        std::span<const double> values,
                                        const std::vector<double>& edges) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<BucketRow> rows;
  rows.push_back({"<" + edge_text(edges.front()), -inf, edges.front(), 0, std::nullopt});
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    rows.push_back({"[" + edge_text(edges[i]) + "," + edge_text(edges[i + 1]) + ")",
                    edges[i], edges[i + 1], 0, std::nullopt});
  }
  rows.push_back({">=" + edge_text(edges.back()), edges.back(), inf, 0, std::nullopt});
  std::vector<double> sums(rows.size(), 0.0);
  for (std::size_t s = 0; s < keys.size(); ++s) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (keys[s] >= rows[r].lo && keys[s] < rows[r].hi) {
        ++rows[r].count;
        sums[r] += values[s];
        break;
      }
    }
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].count > 0) rows[r].mean = sums[r] / static_cast<double>(rows[r].count);
  }
  return rows;
}

}  // namespace detail

/// Groups per-sample metric values by focal length and by pitch using
/// half-open [lo, hi) buckets plus one overflow bucket on each side.
inline BucketTable bucket_breakdown(std::span<const EvalSample> samples,
                                    std::span<const double> values, const BucketSpec& spec) {
  validate(spec);
  if (samples.size() != values.size()) throw ShapeError("one metric value per sample required");
  std::vector<double> focal, pitch;
  for (const auto& s : samples) {
    focal.push_back(s.focal_px);
    pitch.push_back(s.pitch_deg);
  }
  return {detail::bucketize(focal, values, spec.focal_edges),
          detail::bucketize(pitch, values, spec.pitch_edges)};
}

}  // namespace speccam
