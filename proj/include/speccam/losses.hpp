#pragma once

// Calibration losses over discretized parameter heads and the body
// regression training losses. Every differentiable loss returns its exact
// gradient with respect to the logits.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "speccam/camgeom.hpp"
#include "speccam/error.hpp"

namespace speccam {

/// Bin centres of one discretized camera parameter head.
struct BinGrid {
  std::vector<double> centers;
  double lo = 0.0;
  double hi = 0.0;

  std::size_t size() const { return centers.size(); }
  double bin_width() const { return (hi - lo) / static_cast<double>(centers.size()); }
};

inline constexpr std::size_t kDefaultBins = 256;

inline void validate(const BinGrid& g) {
  if (g.centers.size() < 2) throw DomainError("bin grid needs at least two bins");
  for (std::size_t i = 1; i < g.centers.size(); ++i) {
    if (!(g.centers[i] > g.centers[i - 1])) throw DomainError("bin centres must increase strictly");
  }
  if (g.centers.front() < g.lo || g.centers.back() > g.hi) {
    throw DomainError("bin centres must lie inside [lo, hi]");
  }
}

/// B equal-width bins over [lo, hi], centres at the interval midpoints.
inline BinGrid make_bin_grid(double lo, double hi, std::size_t bins = kDefaultBins) {
  if (bins < 2) throw DomainError("bin grid needs at least two bins");
  if (!(hi > lo)) throw DomainError("bin grid range must satisfy lo < hi");
  BinGrid g{{}, lo, hi};
  g.centers.resize(bins);
  const double w = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i < bins; ++i) g.centers[i] = lo + (static_cast<double>(i) + 0.5) * w;
  return g;
}

inline BinGrid pitch_grid(std::size_t bins = kDefaultBins) {
  return make_bin_grid(deg2rad(-45.0), deg2rad(45.0), bins);
}
inline BinGrid roll_grid(std::size_t bins = kDefaultBins) {
  return make_bin_grid(deg2rad(-45.0), deg2rad(45.0), bins);
}
inline BinGrid vfov_grid(std::size_t bins = kDefaultBins) {
  return make_bin_grid(deg2rad(15.0), deg2rad(140.0), bins);
}

struct ProbabilityMass {
  std::vector<double> p;

  std::size_t size() const { return p.size(); }
};

inline void validate(const ProbabilityMass& m) {
  double sum = 0.0;
  for (double v : m.p) {
    if (!(v >= 0.0)) throw DomainError("probability mass must be non-negative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw DomainError("probability mass must sum to one");
}

struct LossValueWithGrad {
  double value = 0.0;
  std::vector<double> grad;
};

inline ProbabilityMass softmax_normalize(std::span<const double> logits) {
  ProbabilityMass out;
  out.p.resize(logits.size());
  if (logits.empty()) return out;
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.p[i] = std::exp(logits[i] - zmax);
    sum += out.p[i];
  }
  for (double& v : out.p) v /= sum;
  return out;
}

inline double softargmax_expectation(const ProbabilityMass& p, const BinGrid& grid) {
  if (p.size() != grid.size()) {
    throw ShapeError("probability mass has " + std::to_string(p.size()) + " entries but grid has " +
                     std::to_string(grid.size()) + " bins");
  }
  double e = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) e += p.p[i] * grid.centers[i];
  return e;
}

/// Asymmetric penalty: Geman-McClure for underestimates, squared error otherwise.
inline double biased_l2(double pred, double gt) {
  const double d = pred - gt;
  const double d2 = d * d;
  return d <= 0.0 ? d2 / (d2 + 1.0) : d2;
}

/// d biased_l2 / d pred.
inline double biased_l2_derivative(double pred, double gt) {
  const double d = pred - gt;
  if (d <= 0.0) {
    const double den = d * d + 1.0;
    return 2.0 * d / (den * den);
  }
  return 2.0 * d;
}

namespace detail {

inline void check_gt_in_range(const BinGrid& grid, double gt) {
  if (!(gt >= grid.lo && gt <= grid.hi)) {
    throw DomainError("ground truth " + std::to_string(gt) + " outside grid range [" +
                      std::to_string(grid.lo) + ", " + std::to_string(grid.hi) + "]");
  }
}

/// Chain rule through softmax and the expectation:
/// dE/dz_k = p_k * (c_k - E), scaled by dL/dE.
template <typename Penalty, typename PenaltyDerivative>
LossValueWithGrad softargmax_loss(std::span<const double> logits, const BinGrid& grid, double gt,
                                  Penalty penalty, PenaltyDerivative derivative) {
  if (logits.size() != grid.size()) {
    throw ShapeError("logit count " + std::to_string(logits.size()) + " does not match " +
                     std::to_string(grid.size()) + " bins");
  }
  check_gt_in_range(grid, gt);
  const ProbabilityMass p = softmax_normalize(logits);
  const double e = softargmax_expectation(p, grid);
  const double dl_de = derivative(e, gt);
  LossValueWithGrad out{penalty(e, gt), std::vector<double>(logits.size())};
  for (std::size_t k = 0; k < logits.size(); ++k) out.grad[k] = dl_de * p.p[k] * (grid.centers[k] - e);
  return out;
}

}  // namespace detail

inline LossValueWithGrad softargmax_l2(std::span<const double> logits, const BinGrid& grid,
                                       double gt) {
  return detail::softargmax_loss(
      logits, grid, gt, [](double e, double g) { return (e - g) * (e - g); },
      [](double e, double g) { return 2.0 * (e - g); });
}

inline LossValueWithGrad softargmax_biased_l2(std::span<const double> logits, const BinGrid& grid,
                                              double gt) {
  return detail::softargmax_loss(logits, grid, gt, biased_l2, biased_l2_derivative);
}

/// KL(target || softmax(logits)) with 0 log 0 = 0. Gradient is softmax - target.
inline LossValueWithGrad kl_loss(std::span<const double> logits, const ProbabilityMass& target) {
  if (logits.size() != target.size()) {
    throw ShapeError("logit count " + std::to_string(logits.size()) +
                     " does not match target size " + std::to_string(target.size()));
  }
  validate(target);
  const double zmax = logits.empty() ? 0.0 : *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - zmax);
  const double log_norm = zmax + std::log(sum);

  LossValueWithGrad out{0.0, std::vector<double>(logits.size())};
  double total_target = 0.0;
  for (double t : target.p) total_target += t;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double log_p = logits[i] - log_norm;
    const double t = target.p[i];
    if (t > 0.0) out.value += t * (std::log(t) - log_p);
    out.grad[i] = std::exp(log_p) * total_target - t;
  }
  return out;
}

/// Gaussian bump around gt, renormalized over the grid.
inline ProbabilityMass smoothed_target(double gt, const BinGrid& grid, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("sigma must be positive");
  detail::check_gt_in_range(grid, gt);
  std::vector<double> log_w(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double d = grid.centers[i] - gt;
    log_w[i] = -d * d / (2.0 * sigma * sigma);
  }
  // Normalizing in log space keeps tiny sigma from underflowing to all zeros.
  return softmax_normalize(log_w);
}

/// Default KL target width: two bin widths.
inline ProbabilityMass smoothed_target(double gt, const BinGrid& grid) {
  return smoothed_target(gt, grid, 2.0 * grid.bin_width());
}

struct HpsLossWeights {
  double lambda_3d = 1.0;
  double lambda_2d = 1.0;
  double lambda_smpl = 1.0;
};

struct HpsLossTerms {
  double l3d = 0.0;
  double l2d = 0.0;
  double lsmpl = 0.0;
  double total = 0.0;
};

namespace detail {

template <typename Range>
double squared_frobenius(const Range& pred, const Range& gt, const char* term) {
  if (pred.size() != gt.size()) {
    throw ShapeError(std::string(term) + ": prediction has " + std::to_string(pred.size()) +
                     " entries, ground truth has " + std::to_string(gt.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if constexpr (std::is_arithmetic_v<std::decay_t<decltype(pred[i])>>) {
      s += (pred[i] - gt[i]) * (pred[i] - gt[i]);
    } else {
      s += (pred[i] - gt[i]).squaredNorm();
    }
  }
  return s;
}

}  // namespace detail

inline HpsLossTerms hps_training_losses(const Points3& pred_j3d, const Points3& gt_j3d,
                                        const Points2& pred_j2d, const Points2& gt_j2d,
                                        const std::vector<double>& pred_theta,
                                        const std::vector<double>& gt_theta,
                                        const std::vector<double>& pred_beta,
                                        const std::vector<double>& gt_beta,
                                        const HpsLossWeights& lambdas) {
  HpsLossTerms t;
  t.l3d = detail::squared_frobenius(pred_j3d, gt_j3d, "L3D");
  t.l2d = detail::squared_frobenius(pred_j2d, gt_j2d, "L2D");
  t.lsmpl = detail::squared_frobenius(pred_theta, gt_theta, "LSMPL(theta)") +
            detail::squared_frobenius(pred_beta, gt_beta, "LSMPL(beta)");
  t.total = lambdas.lambda_3d * t.l3d + lambdas.lambda_2d * t.l2d + lambdas.lambda_smpl * t.lsmpl;
  return t;
}

}  // namespace speccam
