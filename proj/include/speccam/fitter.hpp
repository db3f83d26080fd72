#pragma once

// Optimization-based body fitting under a full perspective camera.
//
// Single frame: E = E_J + lambda_theta |theta|^2 + lambda_beta |beta|^2,
// minimized in two Adam stages, (beta, tb) then (theta, beta, Rb, tb).
// Multi frame: one body seen by F cameras with unknown pitch/roll/yaw and
// translation. Stage 1 fits (beta, cameras) against a height target with the
// pose held at the presented pose, stages 2 and 3 fit (theta, cameras) with a
// pull towards the presented pose whose weight is halved for stage 3.
//
// All gradients are analytic. The kinematic chain is differentiated in
// reverse: per-joint position gradients are accumulated over subtrees, which
// yields the rotation gradient of every joint in one backward sweep.

#include <array>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "speccam/bodykin.hpp"
#include "speccam/camgeom.hpp"
#include "speccam/error.hpp"
#include "speccam/so3.hpp"

namespace speccam {

struct FitConfig {
  int steps = 100;
  double step_size = 1e-2;
  double lambda_theta = 1e-3;
  double lambda_beta = 1e-2;
  double lambda_m = 1e3;
  double lambda_presented = 1.0;
  double gamma = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

inline void validate(const FitConfig& c) {
  if (c.steps < 1) throw DomainError("steps per stage must be >= 1");
  if (!(c.step_size > 0.0)) throw DomainError("step size must be positive");
  for (double w : {c.lambda_theta, c.lambda_beta, c.lambda_m, c.lambda_presented, c.gamma}) {
    if (!(w >= 0.0)) throw DomainError("energy weights must be non-negative");
  }
}

struct FitProblem {
  JointSet2D observed;
  Intrinsics intrinsics;
  Eigen::Matrix3d rc = Eigen::Matrix3d::Identity();
  SkeletonTemplate skeleton = default_template();
  BodyParams init;
};

inline void validate(const FitProblem& p) {
  validate(p.skeleton);
  validate(p.observed);
  validate(p.intrinsics);
  if (p.observed.coords.size() != p.skeleton.joint_count()) {
    throw ShapeError("observed " + std::to_string(p.observed.coords.size()) +
                     " joints, template has " + std::to_string(p.skeleton.joint_count()));
  }
  check_dimensions(p.skeleton, p.init);
}

/// Camera of one view in a multi-frame problem: X_cam = R(angles) X + tc.
struct FrameCamera {
  double pitch = 0.0;
  double roll = 0.0;
  double yaw = 0.0;
  Eigen::Vector3d tc = Eigen::Vector3d::Zero();

  Eigen::Matrix3d rotation() const { return angles_to_rotation({pitch, roll, yaw, 1.0}); }
};

struct FrameObservation {
  JointSet2D observed;
  Intrinsics intrinsics;
  FrameCamera init_camera;
};

struct MultiFrameProblem {
  std::vector<FrameObservation> frames;
  std::vector<Eigen::Vector3d> presented_theta;
  double target_height = 1.7;
  SkeletonTemplate skeleton = default_template();
  std::vector<double> init_beta;  // empty means zeros
};

inline void validate(const MultiFrameProblem& p) {
  validate(p.skeleton);
  if (p.frames.empty()) throw DomainError("multi-frame problem needs at least one frame");
  for (std::size_t i = 0; i < p.frames.size(); ++i) {
    validate(p.frames[i].observed);
    validate(p.frames[i].intrinsics);
    if (p.frames[i].observed.coords.size() != p.skeleton.joint_count()) {
      throw ShapeError("frame " + std::to_string(i) + " has " +
                       std::to_string(p.frames[i].observed.coords.size()) +
                       " joints, template has " + std::to_string(p.skeleton.joint_count()));
    }
  }
  if (p.presented_theta.size() != p.skeleton.joint_count()) {
    throw ShapeError("presented pose has wrong joint count");
  }
  if (!p.init_beta.empty() && p.init_beta.size() != p.skeleton.bone_count()) {
    throw ShapeError("initial beta has wrong bone count");
  }
}

struct EnergyTerms {
  double data = 0.0;
  double theta = 0.0;      // unweighted |theta|^2
  double beta = 0.0;       // unweighted |beta|^2
  double presented = 0.0;  // unweighted |theta - presented|^2
  double shape = 0.0;      // unweighted (height - target)^2
  double total = 0.0;
};

struct StageReport {
  std::string name;
  EnergyTerms initial;
  EnergyTerms best;
  std::size_t best_iteration = 0;
  std::vector<double> trace;  // total energy at every evaluated iterate
};

struct FitResult {
  BodyParams params;
  std::vector<FrameCamera> cameras;  // multi-frame fits only
  std::vector<StageReport> stages;
};

// ---------------------------------------------------------------------------
// Reprojection term and its gradient.

struct ChainGradient {
  double value = 0.0;
  std::vector<Eigen::Vector3d> theta;
  std::vector<double> beta;
  Eigen::Vector3d rb = Eigen::Vector3d::Zero();  // left increment Rb <- exp(w) Rb
  Eigen::Vector3d tb = Eigen::Vector3d::Zero();
  Eigen::Matrix3d rc = Eigen::Matrix3d::Zero();  // dE/dRc entrywise
};

/// Backpropagates body-frame joint gradients through the kinematic chain.
inline void backprop_chain(const SkeletonTemplate& t, const KinematicState& s,
                           const std::vector<Eigen::Vector3d>& theta, const Points3& g_local,
                           std::vector<Eigen::Vector3d>& d_theta, std::vector<double>& d_beta) {
  const std::size_t k = t.joint_count();
  std::vector<Eigen::Vector3d> sum_g(g_local);  // subtree sums of g
  std::vector<Eigen::Vector3d> sum_m(k);        // subtree sums of q x g
  for (std::size_t j = 0; j < k; ++j) sum_m[j] = s.local[j].cross(g_local[j]);
  for (std::size_t j = k; j-- > 1;) {
    const auto p = static_cast<std::size_t>(t.parent[j]);
    sum_g[p] += sum_g[j];
    sum_m[p] += sum_m[j];
  }
  d_theta.assign(k, Eigen::Vector3d::Zero());
  d_beta.assign(t.bone_count(), 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    const Eigen::Vector3d d_incr = s.global[j].transpose() * (sum_m[j] - s.local[j].cross(sum_g[j]));
    d_theta[j] = so3::right_jacobian(theta[j]).transpose() * d_incr;
    if (j > 0) {
      const auto p = static_cast<std::size_t>(t.parent[j]);
      d_beta[j - 1] = sum_g[j].dot(s.global[p] * s.bone[j]);
    }
  }
}

/// Weighted squared reprojection error of one view and its gradient.
/// frame_index only labels behind-camera errors.
inline ChainGradient reprojection_gradient(const SkeletonTemplate& t, const KinematicState& s,
                                           const std::vector<Eigen::Vector3d>& theta,
                                           const Eigen::Matrix3d& rb, const Eigen::Vector3d& tb,
                                           const Intrinsics& k, const Eigen::Matrix3d& rc,
                                           const JointSet2D& observed, double gamma,
                                           long frame_index = -1) {
  const std::size_t n = t.joint_count();
  ChainGradient out;
  const Eigen::Matrix3d m = rc * rb;
  Points3 g_local(n);
  for (std::size_t j = 0; j < n; ++j) {
    const Eigen::Vector3d body = rb * s.local[j];
    const Eigen::Vector3d cam = rc * body + tb;
    if (!(cam.z() > 0.0)) throw BehindCameraError(j, cam.z(), frame_index);
    const double iz = 1.0 / cam.z();
    const double ru = k.fx * cam.x() * iz + k.ox - observed.coords[j].x();
    const double rv = k.fy * cam.y() * iz + k.oy - observed.coords[j].y();
    const double w = observed.confidence[j] * gamma;
    const double w2 = w * w;
    out.value += w2 * (ru * ru + rv * rv);
    const Eigen::Vector3d a(2.0 * w2 * ru * k.fx * iz, 2.0 * w2 * rv * k.fy * iz,
                            -2.0 * w2 * (ru * k.fx * cam.x() + rv * k.fy * cam.y()) * iz * iz);
    out.tb += a;
    const Eigen::Vector3d a_body = rc.transpose() * a;
    out.rb += body.cross(a_body);
    out.rc += a * body.transpose();
    g_local[j] = m.transpose() * a;
  }
  backprop_chain(t, s, theta, g_local, out.theta, out.beta);
  return out;
}

/// sum_j |w_j * gamma * (proj_j - observed_j)|^2 with the camera-frame body
/// placement cam = Rc * (Rb * chain) + tb.
inline ChainGradient reprojection_energy(const BodyParams& params, const FitProblem& problem,
                                         double gamma) {
  check_dimensions(problem.skeleton, params);
  const KinematicState s = kinematic_state(problem.skeleton, params.theta, params.beta);
  return reprojection_gradient(problem.skeleton, s, params.theta, params.rb, params.tb,
                               problem.intrinsics, problem.rc, problem.observed, gamma);
}

struct PriorEnergies {
  double theta = 0.0;
  double beta = 0.0;
  double presented = 0.0;
};

inline PriorEnergies prior_energies(
    const BodyParams& params, const FitConfig& /*config*/,
    const std::optional<std::vector<Eigen::Vector3d>>& presented_theta = std::nullopt) {
  PriorEnergies e;
  for (const auto& th : params.theta) e.theta += th.squaredNorm();
  for (double b : params.beta) e.beta += b * b;
  if (presented_theta) {
    if (presented_theta->size() != params.theta.size()) {
      throw ShapeError("presented pose has wrong joint count");
    }
    for (std::size_t j = 0; j < params.theta.size(); ++j) {
      e.presented += (params.theta[j] - (*presented_theta)[j]).squaredNorm();
    }
  }
  return e;
}

/// Height of the unposed body and its gradient w.r.t. the bone log-scales.
inline std::pair<double, std::vector<double>> body_height_with_gradient(
    const SkeletonTemplate& t, const std::vector<double>& beta) {
  const std::size_t k = t.joint_count();
  std::vector<double> y(k, 0.0);
  for (std::size_t j = 1; j < k; ++j) {
    y[j] = y[static_cast<std::size_t>(t.parent[j])] + std::exp(beta[j - 1]) * t.rest_offset[j].y();
  }
  std::size_t hi = 0, lo = 0;
  for (std::size_t j = 0; j < k; ++j) {
    if (y[j] > y[hi]) hi = j;
    if (y[j] < y[lo]) lo = j;
  }
  std::vector<double> grad(t.bone_count(), 0.0);
  for (std::size_t j = hi; j != 0; j = static_cast<std::size_t>(t.parent[j])) {
    grad[j - 1] += std::exp(beta[j - 1]) * t.rest_offset[j].y();
  }
  for (std::size_t j = lo; j != 0; j = static_cast<std::size_t>(t.parent[j])) {
    grad[j - 1] -= std::exp(beta[j - 1]) * t.rest_offset[j].y();
  }
  return {y[hi] - y[lo], grad};
}

// ---------------------------------------------------------------------------
// Parameter packing.

/// Flat layout of the single-frame variables:
/// [theta (3K) | beta (K-1) | rb increment (3) | tb (3)].
struct SingleFrameLayout {
  std::size_t joints = 0;

  std::size_t theta() const { return 0; }
  std::size_t beta() const { return 3 * joints; }
  std::size_t rb() const { return beta() + joints - 1; }
  std::size_t tb() const { return rb() + 3; }
  std::size_t size() const { return tb() + 3; }
};

/// Flat layout of the multi-frame variables:
/// [theta (3K) | beta (K-1) | per frame (pitch, roll, yaw, tc(3))].
struct MultiFrameLayout {
  std::size_t joints = 0;
  std::size_t frames = 0;

  std::size_t theta() const { return 0; }
  std::size_t beta() const { return 3 * joints; }
  std::size_t camera(std::size_t i) const { return beta() + joints - 1 + 6 * i; }
  std::size_t size() const { return camera(frames); }
};

struct Evaluation {
  double value = 0.0;
  Eigen::VectorXd grad;
  EnergyTerms terms;
};

/// Single-frame objective over a flat vector. The rb slot holds an increment
/// applied on the left of an anchor rotation; retract() folds it in.
class SingleFrameObjective {
 public:
  SingleFrameObjective(const FitProblem& problem, const FitConfig& config,
                       const Eigen::Matrix3d& rb_anchor)
      : problem_(problem), config_(config), layout_{problem.skeleton.joint_count()},
        rb_anchor_(rb_anchor) {}

  const SingleFrameLayout& layout() const { return layout_; }

  Eigen::VectorXd pack(const BodyParams& p) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout_.size()));
    for (std::size_t j = 0; j < layout_.joints; ++j) x.segment<3>(idx(layout_.theta() + 3 * j)) = p.theta[j];
    for (std::size_t b = 0; b + 1 < layout_.joints; ++b) x[idx(layout_.beta() + b)] = p.beta[b];
    x.segment<3>(idx(layout_.tb())) = p.tb;
    return x;
  }

  BodyParams unpack(const Eigen::VectorXd& x) const {
    BodyParams p;
    p.theta.resize(layout_.joints);
    p.beta.resize(layout_.joints - 1);
    for (std::size_t j = 0; j < layout_.joints; ++j) p.theta[j] = x.segment<3>(idx(layout_.theta() + 3 * j));
    for (std::size_t b = 0; b + 1 < layout_.joints; ++b) p.beta[b] = x[idx(layout_.beta() + b)];
    p.rb = so3::exp(x.segment<3>(idx(layout_.rb()))) * rb_anchor_;
    p.tb = x.segment<3>(idx(layout_.tb()));
    return p;
  }

  Evaluation evaluate(const Eigen::VectorXd& x) const {
    const BodyParams p = unpack(x);
    const ChainGradient g = reprojection_energy(p, problem_, config_.gamma);
    const PriorEnergies pr = prior_energies(p, config_);
    Evaluation e;
    e.terms.data = g.value;
    e.terms.theta = pr.theta;
    e.terms.beta = pr.beta;
    e.terms.total = g.value + config_.lambda_theta * pr.theta + config_.lambda_beta * pr.beta;
    e.value = e.terms.total;
    e.grad = Eigen::VectorXd::Zero(x.size());
    for (std::size_t j = 0; j < layout_.joints; ++j) {
      e.grad.segment<3>(idx(layout_.theta() + 3 * j)) =
          g.theta[j] + 2.0 * config_.lambda_theta * p.theta[j];
    }
    for (std::size_t b = 0; b + 1 < layout_.joints; ++b) {
      e.grad[idx(layout_.beta() + b)] = g.beta[b] + 2.0 * config_.lambda_beta * p.beta[b];
    }
    // Gradient of the left increment is exact only at zero increment, which
    // is where the optimizer always evaluates after retract().
    e.grad.segment<3>(idx(layout_.rb())) = g.rb;
    e.grad.segment<3>(idx(layout_.tb())) = g.tb;
    return e;
  }

  void retract(Eigen::VectorXd& x) {
    auto w = x.segment<3>(idx(layout_.rb()));
    rb_anchor_ = so3::orthonormalize(so3::exp(w) * rb_anchor_);
    w.setZero();
  }

  Eigen::Matrix3d snapshot() const { return rb_anchor_; }
  void restore(const Eigen::Matrix3d& r) { rb_anchor_ = r; }

 private:
  static Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

  const FitProblem& problem_;
  const FitConfig& config_;
  SingleFrameLayout layout_;
  Eigen::Matrix3d rb_anchor_;
};

/// Which stage of the multi-frame routine an objective evaluates.
enum class MultiFrameStage { kShape, kPose };

class MultiFrameObjective {
 public:
  MultiFrameObjective(const MultiFrameProblem& problem, const FitConfig& config,
                      MultiFrameStage stage, double lambda_presented)
      : problem_(problem), config_(config), stage_(stage), lambda_presented_(lambda_presented),
        layout_{problem.skeleton.joint_count(), problem.frames.size()} {}

  const MultiFrameLayout& layout() const { return layout_; }

  Eigen::VectorXd pack(const std::vector<Eigen::Vector3d>& theta, const std::vector<double>& beta,
                       const std::vector<FrameCamera>& cams) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(idx(layout_.size()));
    for (std::size_t j = 0; j < layout_.joints; ++j) x.segment<3>(idx(3 * j)) = theta[j];
    for (std::size_t b = 0; b + 1 < layout_.joints; ++b) x[idx(layout_.beta() + b)] = beta[b];
    for (std::size_t i = 0; i < layout_.frames; ++i) {
      const auto o = idx(layout_.camera(i));
      x[o] = cams[i].pitch;
      x[o + 1] = cams[i].roll;
      x[o + 2] = cams[i].yaw;
      x.segment<3>(o + 3) = cams[i].tc;
    }
    return x;
  }

  void unpack(const Eigen::VectorXd& x, std::vector<Eigen::Vector3d>& theta,
              std::vector<double>& beta, std::vector<FrameCamera>& cams) const {
    theta.resize(layout_.joints);
    beta.resize(layout_.joints - 1);
    cams.resize(layout_.frames);
    for (std::size_t j = 0; j < layout_.joints; ++j) theta[j] = x.segment<3>(idx(3 * j));
    for (std::size_t b = 0; b + 1 < layout_.joints; ++b) beta[b] = x[idx(layout_.beta() + b)];
    for (std::size_t i = 0; i < layout_.frames; ++i) {
      const auto o = idx(layout_.camera(i));
      cams[i] = {x[o], x[o + 1], x[o + 2], x.segment<3>(o + 3)};
    }
  }

  Evaluation evaluate(const Eigen::VectorXd& x) const {
    std::vector<Eigen::Vector3d> theta;
    std::vector<double> beta;
    std::vector<FrameCamera> cams;
    unpack(x, theta, beta, cams);
    const SkeletonTemplate& t = problem_.skeleton;
    const KinematicState s = kinematic_state(t, theta, beta);

    Evaluation e;
    e.grad = Eigen::VectorXd::Zero(x.size());
    for (std::size_t i = 0; i < layout_.frames; ++i) {
      const FrameObservation& f = problem_.frames[i];
      const CameraAngles angles{cams[i].pitch, cams[i].roll, cams[i].yaw, 1.0};
      const Eigen::Matrix3d rc = angles_to_rotation(angles);
      const ChainGradient g =
          reprojection_gradient(t, s, theta, Eigen::Matrix3d::Identity(), cams[i].tc,
                                f.intrinsics, rc, f.observed, config_.gamma, static_cast<long>(i));
      e.terms.data += g.value;
      for (std::size_t j = 0; j < layout_.joints; ++j) e.grad.segment<3>(idx(3 * j)) += g.theta[j];
      for (std::size_t b = 0; b + 1 < layout_.joints; ++b) e.grad[idx(layout_.beta() + b)] += g.beta[b];
      const auto d_rot = rotation_angle_derivatives(angles);
      const auto o = idx(layout_.camera(i));
      for (int a = 0; a < 3; ++a) e.grad[o + a] = g.rc.cwiseProduct(d_rot[static_cast<std::size_t>(a)]).sum();
      e.grad.segment<3>(o + 3) = g.tb;
    }
    if (stage_ == MultiFrameStage::kShape) {
      const auto [height, d_height] = body_height_with_gradient(t, beta);
      const double r = height - problem_.target_height;
      e.terms.shape = r * r;
      for (std::size_t b = 0; b + 1 < layout_.joints; ++b) {
        e.grad[idx(layout_.beta() + b)] += config_.lambda_m * 2.0 * r * d_height[b];
      }
      e.terms.total = e.terms.data + config_.lambda_m * e.terms.shape;
    } else {
      for (std::size_t j = 0; j < layout_.joints; ++j) {
        const Eigen::Vector3d d = theta[j] - problem_.presented_theta[j];
        e.terms.presented += d.squaredNorm();
        e.grad.segment<3>(idx(3 * j)) += 2.0 * lambda_presented_ * d;
      }
      e.terms.total = e.terms.data + lambda_presented_ * e.terms.presented;
    }
    e.value = e.terms.total;
    return e;
  }

  void retract(Eigen::VectorXd&) {}
  int snapshot() const { return 0; }
  void restore(int) {}

 private:
  static Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

  const MultiFrameProblem& problem_;
  const FitConfig& config_;
  MultiFrameStage stage_;
  double lambda_presented_;
  MultiFrameLayout layout_;
};

/// First multi-frame stage energy, lambda_M (height - target)^2 + sum_i E_J_i,
/// with the pose held at the presented pose. The gradient is laid out as
/// MultiFrameLayout; the theta block is left zero.
inline Evaluation multiframe_stage1_energy(const std::vector<double>& beta,
                                           const std::vector<FrameCamera>& cameras,
                                           const MultiFrameProblem& problem,
                                           const FitConfig& config) {
  validate(problem);
  if (cameras.size() != problem.frames.size()) throw ShapeError("one camera per frame required");
  MultiFrameObjective obj(problem, config, MultiFrameStage::kShape, 0.0);
  Evaluation e = obj.evaluate(obj.pack(problem.presented_theta, beta, cameras));
  e.grad.head(static_cast<Eigen::Index>(3 * problem.skeleton.joint_count())).setZero();
  return e;
}

// ---------------------------------------------------------------------------
// Optimizer.

/// Runs Adam on `objective` over the coordinates where `mask` is 1 and keeps
/// the best iterate. A step that puts a point behind the camera is halved
/// once; a second failure propagates.
template <typename Objective, typename OnBest>
StageReport run_adam_stage(Objective& objective, Eigen::VectorXd& x, const Eigen::VectorXd& mask,
                           const FitConfig& config, std::string name, OnBest on_best) {
  StageReport report;
  report.name = std::move(name);
  Evaluation current = objective.evaluate(x);
  report.initial = current.terms;
  report.best = current.terms;
  report.trace.reserve(static_cast<std::size_t>(config.steps) + 1);
  report.trace.push_back(current.value);
  on_best(x);

  Eigen::VectorXd m = Eigen::VectorXd::Zero(x.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(x.size());
  double b1t = 1.0, b2t = 1.0;
  for (int t = 1; t <= config.steps; ++t) {
    const Eigen::VectorXd g = current.grad.cwiseProduct(mask);
    m = config.adam_beta1 * m + (1.0 - config.adam_beta1) * g;
    v = config.adam_beta2 * v + (1.0 - config.adam_beta2) * g.cwiseProduct(g);
    b1t *= config.adam_beta1;
    b2t *= config.adam_beta2;
    const Eigen::VectorXd step =
        config.step_size * (m / (1.0 - b1t)).cwiseQuotient(
                               ((v / (1.0 - b2t)).cwiseSqrt().array() + config.adam_epsilon).matrix());

    const auto saved = objective.snapshot();
    Eigen::VectorXd candidate = x - step;
    objective.retract(candidate);
    try {
      current = objective.evaluate(candidate);
    } catch (const BehindCameraError&) {
      objective.restore(saved);
      candidate = x - 0.5 * step;
      objective.retract(candidate);
      current = objective.evaluate(candidate);
    }
    x = candidate;
    report.trace.push_back(current.value);
    if (current.value < report.best.total) {
      report.best = current.terms;
      report.best_iteration = static_cast<std::size_t>(t);
      on_best(x);
    }
  }
  return report;
}

inline Eigen::VectorXd stage_mask(std::size_t size, std::initializer_list<std::pair<std::size_t, std::size_t>> ranges) {
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size));
  for (const auto& [begin, count] : ranges) {
    mask.segment(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count)).setOnes();
  }
  return mask;
}

/// Two-stage single-frame fit. Deterministic: no randomness, fixed order.
inline FitResult fit_single(const FitProblem& problem, const FitConfig& config) {
  validate(problem);
  validate(config);
  if (!is_rotation(problem.init.rb, 1e-6)) throw DomainError("initial body rotation is not a rotation");

  SingleFrameObjective objective(problem, config, problem.init.rb);
  const SingleFrameLayout& lay = objective.layout();
  Eigen::VectorXd x = objective.pack(problem.init);
  const std::size_t k = lay.joints;

  FitResult result;
  BodyParams best;
  auto keep = [&](const Eigen::VectorXd& at) { best = objective.unpack(at); };

  const Eigen::VectorXd shape_mask = stage_mask(lay.size(), {{lay.beta(), k - 1}, {lay.tb(), 3}});
  result.stages.push_back(run_adam_stage(objective, x, shape_mask, config, "shape", keep));

  // Stage 2 restarts from the best stage-1 iterate.
  objective.restore(best.rb);
  x = objective.pack(best);
  const Eigen::VectorXd full_mask = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(lay.size()));
  result.stages.push_back(run_adam_stage(objective, x, full_mask, config, "pose", keep));
  result.params = best;
  return result;
}

/// Three-stage multi-frame fit (shape, pose, pose with halved presented-pose weight).
inline FitResult fit_multiframe(const MultiFrameProblem& problem, const FitConfig& config) {
  validate(problem);
  validate(config);
  const std::size_t k = problem.skeleton.joint_count();
  const std::size_t frames = problem.frames.size();

  std::vector<Eigen::Vector3d> theta = problem.presented_theta;
  std::vector<double> beta =
      problem.init_beta.empty() ? std::vector<double>(k - 1, 0.0) : problem.init_beta;
  std::vector<FrameCamera> cams;
  for (const auto& f : problem.frames) cams.push_back(f.init_camera);

  FitResult result;
  const auto run = [&](MultiFrameStage stage, double lambda_presented, const char* name,
                       bool fit_theta) {
    MultiFrameObjective objective(problem, config, stage, lambda_presented);
    const MultiFrameLayout& lay = objective.layout();
    Eigen::VectorXd x = objective.pack(theta, beta, cams);
    const Eigen::VectorXd mask =
        fit_theta ? stage_mask(lay.size(), {{lay.theta(), 3 * k}, {lay.camera(0), 6 * frames}})
                  : stage_mask(lay.size(), {{lay.beta(), k - 1}, {lay.camera(0), 6 * frames}});
    auto keep = [&](const Eigen::VectorXd& at) { objective.unpack(at, theta, beta, cams); };
    result.stages.push_back(run_adam_stage(objective, x, mask, config, name, keep));
  };
  run(MultiFrameStage::kShape, 0.0, "shape", false);
  run(MultiFrameStage::kPose, config.lambda_presented, "pose", true);
  run(MultiFrameStage::kPose, 0.5 * config.lambda_presented, "pose_refine", true);

  result.params.theta = theta;
  result.params.beta = beta;
  result.cameras = cams;
  return result;
}

// ---------------------------------------------------------------------------
// Gradient verification.

enum class FdScheme {
  kCentral,     // (f(x+h) - f(x-h)) / 2h
  kRichardson,  // (4 D(h/2) - D(h)) / 3 from two central differences, O(h^4)
};

/// Max over coordinates of |g_analytic - g_fd| / max(|g_fd|, 1e-8).
inline double finite_difference_check(
    const std::function<double(const Eigen::VectorXd&)>& energy,
    const Eigen::VectorXd& analytic_grad, const Eigen::VectorXd& x, double epsilon,
    FdScheme scheme = FdScheme::kCentral) {
  if (!(epsilon > 0.0)) throw DomainError("finite-difference step must be positive");
  if (analytic_grad.size() != x.size()) throw ShapeError("gradient and point sizes differ");
  double worst = 0.0;
  Eigen::VectorXd probe = x;
  const auto central = [&](Eigen::Index i, double h) {
    probe[i] = x[i] + h;
    const double up = energy(probe);
    probe[i] = x[i] - h;
    const double down = energy(probe);
    probe[i] = x[i];
    return (up - down) / (2.0 * h);
  };
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double fd = central(i, epsilon);
    if (scheme == FdScheme::kRichardson) fd = (4.0 * central(i, 0.5 * epsilon) - fd) / 3.0;
    worst = std::max(worst, std::abs(analytic_grad[i] - fd) / std::max(std::abs(fd), 1e-8));
  }
  return worst;
}

}  // namespace speccam
