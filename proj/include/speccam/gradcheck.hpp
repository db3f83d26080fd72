#pragma once

// Finite-difference checks of every differentiable loss and energy, run at
// seeded random points. Used by the gradcheck command and the test suites.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "speccam/bodykin.hpp"
#include "speccam/camgeom.hpp"
#include "speccam/fitter.hpp"
#include "speccam/losses.hpp"
#include "speccam/rng.hpp"
#include "speccam/so3.hpp"

namespace speccam {

inline constexpr double kGradcheckTolerance = 1e-4;
inline constexpr std::size_t kGradcheckCases = 100;

struct GradcheckRow {
  std::string suite;  // "losses" or "fitter"
  std::string name;
  std::size_t cases = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

struct GradcheckOptions {
  std::size_t cases = kGradcheckCases;
  double tolerance = kGradcheckTolerance;
  std::string corrupt;  // name of a check whose analytic gradient gets perturbed (negative control)
};

/// One randomized case: the energy, its analytic gradient, and the point.
struct GradcheckCase {
  std::function<double(const Eigen::VectorXd&)> energy;
  Eigen::VectorXd grad;
  Eigen::VectorXd x;
  double epsilon = 1e-3;  // outer step of the Richardson pair
};

struct GradcheckEntry {
  std::string suite;
  std::string name;
  std::function<GradcheckCase(Rng&)> make_case;
};

namespace detail {

inline Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline std::vector<double> random_logits(Rng& rng, std::size_t n) {
  std::vector<double> z(n);
  for (double& v : z) v = rng.normal(0.0, 1.0);
  return z;
}

inline Eigen::Vector3d random_vec3(Rng& rng, double sigma) {
  return {rng.normal(0.0, sigma), rng.normal(0.0, sigma), rng.normal(0.0, sigma)};
}

/// A feasible single-view problem around a random body with random weights.
inline FitProblem random_fit_problem(Rng& rng) {
  FitProblem p;
  const std::size_t k = p.skeleton.joint_count();
  const ImageFrame frame{640, 480};
  p.intrinsics = intrinsics_from_vfov(deg2rad(rng.uniform(50.0, 110.0)), frame);
  p.rc = angles_to_rotation({deg2rad(rng.uniform(-30.0, 15.0)), deg2rad(rng.normal(0.0, 3.0)),
                             rng.uniform(-3.0, 3.0), 1.0});
  p.init = rest_params(p.skeleton);
  for (std::size_t j = 0; j < k; ++j) p.init.theta[j] = random_vec3(rng, 0.3);
  for (double& b : p.init.beta) b = rng.normal(0.0, 0.1);
  p.init.rb = p.rc.transpose() * rot_x(std::numbers::pi) * so3::exp(random_vec3(rng, 0.3));
  p.init.tb = Eigen::Vector3d(rng.normal(0.0, 0.3), rng.normal(0.0, 0.3), rng.uniform(4.0, 7.0));
  const Points3 body = forward_kinematics(p.skeleton, {p.init.theta, p.init.beta, p.init.rb, Eigen::Vector3d::Zero()});
  p.observed.coords = project(body, p.intrinsics, p.rc, p.init.tb);
  for (auto& c : p.observed.coords) c += Eigen::Vector2d(rng.normal(0.0, 8.0), rng.normal(0.0, 8.0));
  p.observed.confidence.resize(k);
  for (double& w : p.observed.confidence) w = rng.uniform(0.2, 1.0);
  return p;
}

inline MultiFrameProblem random_multiframe_problem(Rng& rng, std::size_t frames) {
  MultiFrameProblem m;
  const std::size_t k = m.skeleton.joint_count();
  m.presented_theta.resize(k);
  for (auto& t : m.presented_theta) t = random_vec3(rng, 0.3);
  m.target_height = rng.uniform(1.5, 1.9);
  std::vector<double> beta(m.skeleton.bone_count());
  for (double& b : beta) b = rng.normal(0.0, 0.1);
  const Points3 body = forward_kinematics(m.skeleton, {m.presented_theta, beta, Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero()});
  const ImageFrame frame{640, 480};
  for (std::size_t i = 0; i < frames; ++i) {
    FrameObservation f;
    f.intrinsics = intrinsics_from_vfov(deg2rad(rng.uniform(50.0, 110.0)), frame);
    // Same body frame convention as the multi-view scenes: flipped upright.
    const Eigen::Matrix3d r = angles_to_rotation({deg2rad(rng.uniform(-30.0, 15.0)), deg2rad(rng.normal(0.0, 3.0)),
                                                  rng.uniform(-3.0, 3.0), 1.0}) * rot_x(std::numbers::pi);
    const CameraAngles a = rotation_to_angles(r).angles;
    f.init_camera = {a.pitch, a.roll, a.yaw, Eigen::Vector3d(rng.normal(0.0, 0.2), rng.normal(0.0, 0.2), rng.uniform(4.0, 7.0))};
    f.observed.coords = project(body, f.intrinsics, f.init_camera.rotation(), f.init_camera.tc);
    for (auto& c : f.observed.coords) c += Eigen::Vector2d(rng.normal(0.0, 8.0), rng.normal(0.0, 8.0));
    f.observed.confidence.resize(k);
    for (double& w : f.observed.confidence) w = rng.uniform(0.2, 1.0);
    m.frames.push_back(f);
  }
  return m;
}

}  // namespace detail

inline std::vector<GradcheckEntry> gradcheck_registry() {
  std::vector<GradcheckEntry> r;

  const auto grid_case = [](Rng& rng) {
    const std::size_t bins = 8 + static_cast<std::size_t>(rng.uniform() * 56.0);
    BinGrid g = make_bin_grid(rng.uniform(-1.0, 0.0), rng.uniform(0.5, 2.5), bins);
    return g;
  };

  r.push_back({"losses", "softargmax_l2", [grid_case](Rng& rng) {
                 const BinGrid g = grid_case(rng);
                 const double gt = rng.uniform(g.lo, g.hi);
                 const auto z = detail::random_logits(rng, g.size());
                 return GradcheckCase{
                     [g, gt](const Eigen::VectorXd& x) { return softargmax_l2(detail::to_std(x), g, gt).value; },
                     detail::to_vector(softargmax_l2(z, g, gt).grad), detail::to_vector(z), 1e-3};
               }});
  r.push_back({"losses", "softargmax_biased_l2", [grid_case](Rng& rng) {
                 const BinGrid g = grid_case(rng);
                 const double gt = rng.uniform(g.lo, g.hi);
                 const auto z = detail::random_logits(rng, g.size());
                 return GradcheckCase{
                     [g, gt](const Eigen::VectorXd& x) { return softargmax_biased_l2(detail::to_std(x), g, gt).value; },
                     detail::to_vector(softargmax_biased_l2(z, g, gt).grad), detail::to_vector(z), 1e-3};
               }});
  r.push_back({"losses", "kl_loss", [grid_case](Rng& rng) {
                 const BinGrid g = grid_case(rng);
                 const ProbabilityMass target = smoothed_target(rng.uniform(g.lo, g.hi), g);
                 const auto z = detail::random_logits(rng, g.size());
                 return GradcheckCase{
                     [target](const Eigen::VectorXd& x) { return kl_loss(detail::to_std(x), target).value; },
                     detail::to_vector(kl_loss(z, target).grad), detail::to_vector(z), 1e-3};
               }});

  // Fitter energies are checked over the single-frame packed layout
  // [theta | beta | rb increment | tb] evaluated at zero increment.
  r.push_back({"fitter", "reprojection_energy", [](Rng& rng) {
                 const FitProblem p = detail::random_fit_problem(rng);
                 FitConfig cfg;
                 cfg.lambda_theta = 0.0;
                 cfg.lambda_beta = 0.0;
                 cfg.gamma = rng.uniform(0.5, 1.5);
                 // The objective holds references; keep copies alive inside the closure.
                 auto state = std::make_shared<std::pair<FitProblem, FitConfig>>(p, cfg);
                 auto obj = std::make_shared<SingleFrameObjective>(state->first, state->second, p.init.rb);
                 const Eigen::VectorXd x = obj->pack(p.init);
                 return GradcheckCase{[state, obj](const Eigen::VectorXd& v) { return obj->evaluate(v).value; },
                                      obj->evaluate(x).grad, x, 1e-3};
               }});
  r.push_back({"fitter", "single_frame_energy", [](Rng& rng) {
                 const FitProblem p = detail::random_fit_problem(rng);
                 FitConfig cfg;
                 cfg.lambda_theta = rng.uniform(0.0, 10.0);
                 cfg.lambda_beta = rng.uniform(0.0, 10.0);
                 auto state = std::make_shared<std::pair<FitProblem, FitConfig>>(p, cfg);
                 auto obj = std::make_shared<SingleFrameObjective>(state->first, state->second, p.init.rb);
                 const Eigen::VectorXd x = obj->pack(p.init);
                 return GradcheckCase{[state, obj](const Eigen::VectorXd& v) { return obj->evaluate(v).value; },
                                      obj->evaluate(x).grad, x, 1e-3};
               }});
  r.push_back({"fitter", "forward_kinematics", [](Rng& rng) {
                 // A random linear functional of the joint positions.
                 const SkeletonTemplate t = default_template();
                 const std::size_t k = t.joint_count();
                 Points3 weights(k);
                 for (auto& w : weights) w = detail::random_vec3(rng, 1.0);
                 BodyParams p = rest_params(t);
                 for (auto& th : p.theta) th = detail::random_vec3(rng, 0.4);
                 for (double& b : p.beta) b = rng.normal(0.0, 0.1);
                 Eigen::VectorXd x(static_cast<Eigen::Index>(4 * k - 1));
                 for (std::size_t j = 0; j < k; ++j) x.segment<3>(static_cast<Eigen::Index>(3 * j)) = p.theta[j];
                 for (std::size_t b = 0; b + 1 < k; ++b) x[static_cast<Eigen::Index>(3 * k + b)] = p.beta[b];
                 const auto unpack = [t, k](const Eigen::VectorXd& v) {
                   BodyParams q = rest_params(t);
                   for (std::size_t j = 0; j < k; ++j) q.theta[j] = v.segment<3>(static_cast<Eigen::Index>(3 * j));
                   for (std::size_t b = 0; b + 1 < k; ++b) q.beta[b] = v[static_cast<Eigen::Index>(3 * k + b)];
                   return q;
                 };
                 const auto energy = [t, weights, unpack](const Eigen::VectorXd& v) {
                   const Points3 q = forward_kinematics(t, unpack(v));
                   double e = 0.0;
                   for (std::size_t j = 0; j < q.size(); ++j) e += weights[j].dot(q[j]);
                   return e;
                 };
                 const KinematicState s = kinematic_state(t, p.theta, p.beta);
                 std::vector<Eigen::Vector3d> d_theta;
                 std::vector<double> d_beta;
                 backprop_chain(t, s, p.theta, weights, d_theta, d_beta);
                 Eigen::VectorXd g(x.size());
                 for (std::size_t j = 0; j < k; ++j) g.segment<3>(static_cast<Eigen::Index>(3 * j)) = d_theta[j];
                 for (std::size_t b = 0; b + 1 < k; ++b) g[static_cast<Eigen::Index>(3 * k + b)] = d_beta[b];
                 return GradcheckCase{energy, g, x, 1e-3};
               }});
  r.push_back({"fitter", "multiframe_stage1_energy", [](Rng& rng) {
                 auto m = std::make_shared<MultiFrameProblem>(
                     detail::random_multiframe_problem(rng, 1 + static_cast<std::size_t>(rng.uniform() * 3.0)));
                 auto cfg = std::make_shared<FitConfig>();
                 cfg->lambda_m = rng.uniform(0.0, 100.0);
                 std::vector<double> beta(m->skeleton.bone_count());
                 for (double& b : beta) b = rng.normal(0.0, 0.1);
                 std::vector<FrameCamera> cams;
                 for (const auto& f : m->frames) cams.push_back(f.init_camera);
                 auto obj = std::make_shared<MultiFrameObjective>(*m, *cfg, MultiFrameStage::kShape, 0.0);
                 const Eigen::VectorXd full = obj->pack(m->presented_theta, beta, cams);
                 // Only the stage variables: beta and the cameras.
                 const auto offset = static_cast<Eigen::Index>(obj->layout().beta());
                 const Eigen::VectorXd x = full.tail(full.size() - offset);
                 const Evaluation e = multiframe_stage1_energy(beta, cams, *m, *cfg);
                 // Height switches extreme joints at kinks; keep the step small.
                 return GradcheckCase{[m, cfg, obj, full, offset](const Eigen::VectorXd& v) {
                                        Eigen::VectorXd y = full;
                                        y.tail(y.size() - offset) = v;
                                        return obj->evaluate(y).value;
                                      },
                                      e.grad.tail(e.grad.size() - offset), x, 1e-4};
               }});
  r.push_back({"fitter", "multiframe_pose_energy", [](Rng& rng) {
                 auto m = std::make_shared<MultiFrameProblem>(
                     detail::random_multiframe_problem(rng, 1 + static_cast<std::size_t>(rng.uniform() * 3.0)));
                 auto cfg = std::make_shared<FitConfig>();
                 std::vector<Eigen::Vector3d> theta = m->presented_theta;
                 for (auto& t : theta) t += detail::random_vec3(rng, 0.1);
                 std::vector<double> beta(m->skeleton.bone_count());
                 for (double& b : beta) b = rng.normal(0.0, 0.1);
                 std::vector<FrameCamera> cams;
                 for (const auto& f : m->frames) cams.push_back(f.init_camera);
                 auto obj = std::make_shared<MultiFrameObjective>(*m, *cfg, MultiFrameStage::kPose, rng.uniform(0.0, 5.0));
                 const Eigen::VectorXd x = obj->pack(theta, beta, cams);
                 return GradcheckCase{[m, cfg, obj](const Eigen::VectorXd& v) { return obj->evaluate(v).value; },
                                      obj->evaluate(x).grad, x, 1e-3};
               }});
  r.push_back({"fitter", "body_height", [](Rng& rng) {
                 const SkeletonTemplate t = default_template();
                 std::vector<double> beta(t.bone_count());
                 for (double& b : beta) b = rng.normal(0.0, 0.1);
                 // Piecewise linear in exp(beta): a tiny step stays on one piece.
                 const auto [h, g] = body_height_with_gradient(t, beta);
                 (void)h;
                 return GradcheckCase{[t](const Eigen::VectorXd& v) { return body_height(t, detail::to_std(v)); },
                                      detail::to_vector(g), detail::to_vector(beta), 1e-6};
               }});
  return r;
}

/// Runs the checks of `suite` ("losses", "fitter" or "all") in registry order.
inline std::vector<GradcheckRow> run_gradchecks(const std::string& suite, std::uint64_t seed,
                                                const GradcheckOptions& options = {}) {
  if (suite != "losses" && suite != "fitter" && suite != "all") {
    throw DomainError("unknown gradcheck suite '" + suite + "'");
  }
  std::vector<GradcheckRow> rows;
  for (const auto& entry : gradcheck_registry()) {
    if (suite != "all" && entry.suite != suite) continue;
    Rng rng(seed);
    GradcheckRow row{entry.suite, entry.name, options.cases, 0.0, false};
    for (std::size_t c = 0; c < options.cases; ++c) {
      GradcheckCase gc = entry.make_case(rng);
      if (entry.name == options.corrupt && gc.grad.size() > 0) gc.grad[0] += 1e-2 * (1.0 + std::abs(gc.grad[0]));
      row.max_rel_error = std::max(row.max_rel_error, finite_difference_check(gc.energy, gc.grad, gc.x, gc.epsilon, FdScheme::kRichardson));
    }
    row.passed = row.max_rel_error < options.tolerance;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace speccam
