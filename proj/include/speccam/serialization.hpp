#pragma once

// JSON schemas for cameras, skeletons, body parameters, fit problems and
// results, and evaluation samples. Parse failures throw SchemaError with the
// path of the offending field.

#include <algorithm>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "speccam/bodykin.hpp"
#include "speccam/camgeom.hpp"
#include "speccam/error.hpp"
#include "speccam/fitter.hpp"
#include "speccam/metrics.hpp"

namespace speccam::schema {

using nlohmann::json;

namespace detail {

inline const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + ": expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw SchemaError(where + ": missing \"" + key + "\"");
  return *it;
}

inline double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw SchemaError(where + ": expected a number");
  return j.get<double>();
}

inline double number(const json& j, const char* key, const std::string& where) {
  return number(field(j, key, where), where + "." + key);
}

inline std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) throw SchemaError(where + ": expected an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

inline Eigen::Vector3d vec3(const json& j, const std::string& where) {
  const auto v = numbers(j, where);
  if (v.size() != 3) throw SchemaError(where + ": expected 3 numbers");
  return {v[0], v[1], v[2]};
}

inline Points3 points3(const json& j, const std::string& where) {
  if (!j.is_array()) throw SchemaError(where + ": expected an array of [x,y,z]");
  Points3 out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(vec3(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

inline Eigen::Matrix3d mat3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw SchemaError(where + ": expected a 3x3 nested array");
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r) m.row(r) = vec3(j[static_cast<std::size_t>(r)], where + "[" + std::to_string(r) + "]");
  return m;
}

}  // namespace detail

inline json to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

inline json to_json(const Eigen::Matrix3d& m) {
  json out = json::array();
  for (int r = 0; r < 3; ++r) out.push_back(json::array({m(r, 0), m(r, 1), m(r, 2)}));
  return out;
}

inline json to_json(const Points3& pts) {
  json out = json::array();
  for (const auto& p : pts) out.push_back(to_json(p));
  return out;
}

// Cameras: {"pitch_deg", "roll_deg", "yaw_deg", "vfov_deg", "width", "height"}
// with optional "fx", "fy", "ox", "oy" overriding the vfov-derived intrinsics.

struct CameraSpec {
  CameraAngles angles;
  ImageFrame frame;
  Intrinsics intrinsics;

  Eigen::Matrix3d rotation() const { return angles_to_rotation(angles); }
};

inline CameraSpec camera_from_json(const json& j, const std::string& where = "camera") {
  CameraSpec c;
  c.angles.pitch = deg2rad(detail::number(j, "pitch_deg", where));
  c.angles.roll = deg2rad(detail::number(j, "roll_deg", where));
  c.angles.yaw = j.contains("yaw_deg") ? deg2rad(detail::number(j, "yaw_deg", where)) : 0.0;
  c.frame.width = static_cast<int>(detail::number(j, "width", where));
  c.frame.height = static_cast<int>(detail::number(j, "height", where));
  try {
    validate(c.frame);
    if (j.contains("fx")) {
      c.intrinsics = {detail::number(j, "fx", where), detail::number(j, "fy", where),
                      j.contains("ox") ? detail::number(j, "ox", where) : 0.5 * c.frame.width,
                      j.contains("oy") ? detail::number(j, "oy", where) : 0.5 * c.frame.height};
      validate(c.intrinsics);
      c.angles.vfov = focal_to_vfov(c.intrinsics.fy, c.frame.height);
    } else {
      c.angles.vfov = deg2rad(detail::number(j, "vfov_deg", where));
      validate(c.angles);
      c.intrinsics = intrinsics_from_vfov(c.angles.vfov, c.frame);
    }
  } catch (const DomainError& e) {
    throw SchemaError(where + ": " + e.what());
  }
  return c;
}

inline json to_json(const Intrinsics& k) { return {{"fx", k.fx}, {"fy", k.fy}, {"ox", k.ox}, {"oy", k.oy}}; }

// Skeleton: {"parents": [...], "offsets": [[x,y,z], ...], "names"?: [...]}.

inline SkeletonTemplate template_from_json(const json& j, const std::string& where = "template") {
  SkeletonTemplate t;
  const json& parents = detail::field(j, "parents", where);
  if (!parents.is_array()) throw SchemaError(where + ".parents: expected an array");
  for (const auto& p : parents) {
    if (!p.is_number_integer()) throw SchemaError(where + ".parents: expected integers");
    t.parent.push_back(p.get<int>());
  }
  t.rest_offset = detail::points3(detail::field(j, "offsets", where), where + ".offsets");
  if (j.contains("names")) {
    t.names = j.at("names").get<std::vector<std::string>>();
  } else {
    for (std::size_t i = 0; i < t.parent.size(); ++i) t.names.push_back("joint" + std::to_string(i));
  }
  try {
    validate(t);
  } catch (const std::exception& e) {
    throw SchemaError(where + ": " + e.what());
  }
  return t;
}

inline json to_json(const SkeletonTemplate& t) {
  return {{"parents", t.parent}, {"offsets", to_json(t.rest_offset)}, {"names", t.names}};
}

// Body parameters: {"theta": [[x,y,z] per joint], "beta": [...],
// "rb": 3x3 or "rb_angles_deg": [pitch, roll, yaw], "tb": [x,y,z]}.

inline BodyParams params_from_json(const json& j, const SkeletonTemplate& t,
                                   const std::string& where = "params") {
  BodyParams p = rest_params(t);
  if (j.contains("theta")) p.theta = detail::points3(j.at("theta"), where + ".theta");
  if (j.contains("beta")) p.beta = detail::numbers(j.at("beta"), where + ".beta");
  if (j.contains("rb")) {
    p.rb = detail::mat3(j.at("rb"), where + ".rb");
  } else if (j.contains("rb_angles_deg")) {
    const Eigen::Vector3d a = detail::vec3(j.at("rb_angles_deg"), where + ".rb_angles_deg");
    p.rb = angles_to_rotation({deg2rad(a[0]), deg2rad(a[1]), deg2rad(a[2]), 1.0});
  }
  if (j.contains("tb")) p.tb = detail::vec3(j.at("tb"), where + ".tb");
  try {
    check_dimensions(t, p);
  } catch (const std::exception& e) {
    throw SchemaError(where + ": " + e.what());
  }
  if (!is_rotation(p.rb, 1e-6)) throw SchemaError(where + ".rb: not a rotation");
  return p;
}

inline json to_json(const BodyParams& p) {
  return {{"theta", to_json(p.theta)}, {"beta", p.beta}, {"rb", to_json(p.rb)}, {"tb", to_json(p.tb)}};
}

// Keypoints: [[u, v, w], ...] with w the per-joint weight in [0, 1].

inline JointSet2D keypoints_from_json(const json& j, const std::string& where = "keypoints") {
  if (!j.is_array()) throw SchemaError(where + ": expected an array of [u,v,w]");
  JointSet2D out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string at = where + "[" + std::to_string(i) + "]";
    const auto v = detail::numbers(j[i], at);
    if (v.size() != 3) throw SchemaError(at + ": expected [u, v, w]");
    out.coords.emplace_back(v[0], v[1]);
    out.confidence.push_back(v[2]);
  }
  try {
    validate(out);
  } catch (const std::exception& e) {
    throw SchemaError(where + ": " + e.what());
  }
  return out;
}

/// Upright body facing the camera, placed from the weighted keypoints' bounding
/// box assuming a 1.7 m tall subject. Returned in the world frame of `rc`.
inline BodyParams default_init(const SkeletonTemplate& t, const JointSet2D& kp, const Intrinsics& k,
                               const Eigen::Matrix3d& rc) {
  BodyParams p = rest_params(t);
  double umin = 0, umax = 0, vmin = 0, vmax = 0;
  bool any = false;
  for (std::size_t i = 0; i < kp.coords.size(); ++i) {
    if (kp.confidence[i] <= 0.0) continue;
    const auto& c = kp.coords[i];
    if (!any) {
      umin = umax = c.x();
      vmin = vmax = c.y();
      any = true;
    }
    umin = std::min(umin, c.x());
    umax = std::max(umax, c.x());
    vmin = std::min(vmin, c.y());
    vmax = std::max(vmax, c.y());
  }
  if (!any || vmax - vmin < 1.0) throw SchemaError("keypoints: cannot place a default initialization");
  const double depth = k.fy * 1.7 / (vmax - vmin);
  const double cu = 0.5 * (umin + umax), cv = 0.5 * (vmin + vmax);
  p.tb = depth * Eigen::Vector3d((cu - k.ox) / k.fx, (cv - k.oy) / k.fy, 1.0);
  p.rb = rc.transpose() * rot_x(std::numbers::pi);
  return p;
}

/// Single-frame problem: {"camera", "keypoints", "init"?, "template"?}.
/// The camera is returned separately so callers can swap it before the
/// default initialization is computed.
struct ProblemFile {
  CameraSpec camera;
  SkeletonTemplate skeleton;
  JointSet2D keypoints;
  std::optional<json> init;
};

inline ProblemFile problem_file_from_json(const json& j) {
  ProblemFile f;
  f.camera = camera_from_json(detail::field(j, "camera", "problem"), "problem.camera");
  f.skeleton = j.contains("template") ? template_from_json(j.at("template"), "problem.template") : default_template();
  f.keypoints = keypoints_from_json(detail::field(j, "keypoints", "problem"), "problem.keypoints");
  if (f.keypoints.coords.size() != f.skeleton.joint_count()) {
    throw SchemaError("problem.keypoints: " + std::to_string(f.keypoints.coords.size()) +
                      " joints, template has " + std::to_string(f.skeleton.joint_count()));
  }
  if (j.contains("init")) f.init = j.at("init");
  return f;
}

inline FitProblem make_fit_problem(const ProblemFile& f, const Intrinsics& k, const Eigen::Matrix3d& rc) {
  FitProblem p;
  p.observed = f.keypoints;
  p.intrinsics = k;
  p.rc = rc;
  p.skeleton = f.skeleton;
  p.init = f.init ? params_from_json(*f.init, f.skeleton, "problem.init")
                  : default_init(f.skeleton, f.keypoints, k, rc);
  return p;
}

/// Multi-frame problem: {"frames": [{"camera", "keypoints", "init_tc"}],
/// "presented_theta", "target_height", "init_beta"?, "template"?}.
inline MultiFrameProblem multiframe_from_json(const json& j) {
  MultiFrameProblem p;
  p.skeleton = j.contains("template") ? template_from_json(j.at("template"), "problem.template") : default_template();
  const json& frames = detail::field(j, "frames", "problem");
  if (!frames.is_array() || frames.empty()) throw SchemaError("problem.frames: expected a non-empty array");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::string at = "problem.frames[" + std::to_string(i) + "]";
    const CameraSpec cam = camera_from_json(detail::field(frames[i], "camera", at), at + ".camera");
    FrameObservation f;
    f.intrinsics = cam.intrinsics;
    f.observed = keypoints_from_json(detail::field(frames[i], "keypoints", at), at + ".keypoints");
    f.init_camera = {cam.angles.pitch, cam.angles.roll, cam.angles.yaw,
                     detail::vec3(detail::field(frames[i], "init_tc", at), at + ".init_tc")};
    p.frames.push_back(f);
  }
  p.presented_theta = detail::points3(detail::field(j, "presented_theta", "problem"), "problem.presented_theta");
  p.target_height = detail::number(j, "target_height", "problem");
  if (j.contains("init_beta")) p.init_beta = detail::numbers(j.at("init_beta"), "problem.init_beta");
  try {
    validate(p);
  } catch (const std::exception& e) {
    throw SchemaError(std::string("problem: ") + e.what());
  }
  return p;
}

inline json to_json(const EnergyTerms& t) {
  return {{"data", t.data}, {"theta", t.theta},   {"beta", t.beta},
          {"presented", t.presented}, {"shape", t.shape}, {"total", t.total}};
}

inline json to_json(const StageReport& s) {
  return {{"name", s.name},
          {"initial", to_json(s.initial)},
          {"best", to_json(s.best)},
          {"best_iteration", s.best_iteration},
          {"trace", s.trace}};
}

inline json to_json(const FrameCamera& c) {
  return {{"pitch_deg", rad2deg(c.pitch)}, {"roll_deg", rad2deg(c.roll)}, {"yaw_deg", rad2deg(c.yaw)},
          {"tc", to_json(c.tc)}};
}

inline json to_json(const FitResult& r) {
  json out = {{"params", to_json(r.params)}};
  json stages = json::array();
  for (const auto& s : r.stages) stages.push_back(to_json(s));
  out["stages"] = stages;
  if (!r.cameras.empty()) {
    json cams = json::array();
    for (const auto& c : r.cameras) cams.push_back(to_json(c));
    out["cameras"] = cams;
  }
  return out;
}

// Evaluation samples: a list of {"pred", "pred_frame": "world"|"camera",
// "gt", "est_rc"? (3x3) or "est_rc_angles_deg"? ([pitch, roll, yaw]),
// "focal_px", "pitch_deg"}. The list may also be wrapped as {"samples": [...]}.

inline std::vector<EvalSample> samples_from_json(const json& j) {
  const json& list = j.is_object() ? detail::field(j, "samples", "input") : j;
  if (!list.is_array()) throw SchemaError("samples: expected an array");
  std::vector<EvalSample> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string at = "sample " + std::to_string(i);
    const json& s = list[i];
    EvalSample e;
    e.predicted = detail::points3(detail::field(s, "pred", at), at + ".pred");
    e.ground_truth = detail::points3(detail::field(s, "gt", at), at + ".gt");
    const json& frame = detail::field(s, "pred_frame", at);
    if (frame == "world") {
      e.frame = PredictionFrame::kWorld;
    } else if (frame == "camera") {
      e.frame = PredictionFrame::kCamera;
    } else {
      throw SchemaError(at + ".pred_frame: expected \"world\" or \"camera\"");
    }
    if (s.contains("est_rc")) {
      e.estimated_rc = detail::mat3(s.at("est_rc"), at + ".est_rc");
      if (!is_rotation(*e.estimated_rc, 1e-6)) throw SchemaError(at + ".est_rc: not a rotation");
    } else if (s.contains("est_rc_angles_deg")) {
      const Eigen::Vector3d a = detail::vec3(s.at("est_rc_angles_deg"), at + ".est_rc_angles_deg");
      e.estimated_rc = angles_to_rotation({deg2rad(a[0]), deg2rad(a[1]), deg2rad(a[2]), 1.0});
    }
    if (e.frame == PredictionFrame::kCamera && !e.estimated_rc) {
      throw SchemaError(at + ": camera-frame prediction without est_rc or est_rc_angles_deg");
    }
    e.focal_px = detail::number(s, "focal_px", at);
    e.pitch_deg = detail::number(s, "pitch_deg", at);
    if (e.predicted.size() != e.ground_truth.size() || e.predicted.empty()) {
      throw SchemaError(at + ": pred and gt must have the same non-zero joint count");
    }
    out.push_back(std::move(e));
  }
  return out;
}

inline BucketSpec buckets_from_json(const json& j) {
  BucketSpec b;
  b.focal_edges = detail::numbers(detail::field(j, "focal_edges", "buckets"), "buckets.focal_edges");
  b.pitch_edges = detail::numbers(detail::field(j, "pitch_edges", "buckets"), "buckets.pitch_edges");
  try {
    validate(b);
  } catch (const DomainError& e) {
    throw SchemaError(std::string("buckets: ") + e.what());
  }
  return b;
}

inline json to_json(const BucketRow& r) {
  return {{"bucket", r.label},
          {"count", r.count},
          {"mean", r.mean ? json(*r.mean) : json(nullptr)}};
}

}  // namespace speccam::schema
