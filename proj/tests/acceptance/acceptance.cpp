// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.
//
//   acceptance <path to speccam CLI> <scratch dir>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "speccam/experiments.hpp"
#include "speccam/gradcheck.hpp"
#include "speccam/io.hpp"
#include "speccam/serialization.hpp"

using namespace speccam;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double time_limit_s;  // <= 0: no limit
  std::function<Outcome()> run;
};

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

// 1. Closed-form values.
Outcome formulas() {
  const double f = vfov_to_focal(deg2rad(90.0), 480);
  const double over = biased_l2(1.0, 0.0), under = biased_l2(-1.0, 0.0);
  const Eigen::Vector3d t = weak_to_full_translation({1.0, 0.0, 0.0}, {112, 112, 224, 224}, {224, 224}, 5000.0);
  const double tol = 1e-9;
  const bool ok = std::abs(f - 240.0) <= tol && std::abs(over - 1.0) <= tol && std::abs(under - 0.5) <= tol &&
                  std::abs(t.z() - 2.0 * 5000.0 / 224.0) <= tol;
  return {ok, "f=" + fmt(f, 12) + " biased_l2(+1)=" + fmt(over) + " biased_l2(-1)=" + fmt(under) +
                  " t_z=" + fmt(t.z(), 12) + " (tol 1e-9)"};
}

// 2. Every analytic gradient against finite differences.
Outcome gradients() {
  const auto rows = run_gradchecks("all", 2024, {});
  bool ok = !rows.empty();
  double worst = 0.0;
  std::size_t min_cases = SIZE_MAX;
  for (const auto& r : rows) {
    ok = ok && r.passed && r.cases >= 100;
    worst = std::max(worst, r.max_rel_error);
    min_cases = std::min(min_cases, r.cases);
  }
  return {ok, std::to_string(rows.size()) + " checks, >=" + std::to_string(min_cases) +
                  " cases each, worst rel error " + fmt(worst, 3) + " (tol 1e-4)"};
}

// 3. Procrustes and the two world-frame error variants.
Outcome procrustes() {
  Rng rng(3);
  const auto points = [&](std::size_t n) {
    Points3 p(n);
    for (auto& q : p) q = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) * 0.5;
    return p;
  };
  const auto rotation = [&] { return so3::exp(Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal())); };
  double worst_pa = 0.0, worst_w = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Points3 gt = points(17);
    const Eigen::Matrix3d r = rotation();
    const double s = std::exp(rng.normal(0.0, 0.7));
    const Eigen::Vector3d t(rng.normal(0.0, 3.0), rng.normal(0.0, 3.0), rng.normal(0.0, 3.0));
    Points3 pred(gt.size());
    for (std::size_t j = 0; j < gt.size(); ++j) pred[j] = s * r * gt[j] + t;
    worst_pa = std::max(worst_pa, pa_mpjpe(pred, gt));

    EvalSample world;
    world.ground_truth = gt;
    world.predicted = points(17);
    EvalSample cam = world;
    const Eigen::Matrix3d rc = rotation();
    cam.frame = PredictionFrame::kCamera;
    cam.estimated_rc = rc;
    for (auto& p : cam.predicted) p = rc * p;
    for (bool align : {true, false}) worst_w = std::max(worst_w, std::abs(w_mpjpe(cam, align) - w_mpjpe(world, align)));
  }
  return {worst_pa < 1e-9 && worst_w < 1e-9, "PA-MPJPE under similarity max " + fmt(worst_pa, 3) +
                                                 " mm, variant gap max " + fmt(worst_w, 3) + " mm (tol 1e-9 mm)"};
}

// 4. True camera versus f = 5000 with identity rotation.
Outcome camera_ordering() {
  int held = 0;
  double gt_w = 0.0, fixed_w = 0.0, gt_pa = 0.0, fixed_pa = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const CameraComparison c = compare_camera_models(seed, 200);
    held += c.gt_w_mpjpe < c.fixed_w_mpjpe && c.gt_pa_mpjpe <= c.fixed_pa_mpjpe;
    gt_w += c.gt_w_mpjpe / 100.0;
    fixed_w += c.fixed_w_mpjpe / 100.0;
    gt_pa += c.gt_pa_mpjpe / 100.0;
    fixed_pa += c.fixed_pa_mpjpe / 100.0;
  }
  return {held >= 95, "ordering held for " + std::to_string(held) + "/100 seeds (need 95); mean W-MPJPE " +
                          fmt(gt_w, 4) + " vs " + fmt(fixed_w, 4) + " mm, PA-MPJPE " + fmt(gt_pa, 4) + " vs " +
                          fmt(fixed_pa, 4) + " mm"};
}

// 5. Refit error under scaled focal lengths.
Outcome focal_asymmetry() {
  std::vector<double> factors = default_focal_factors();
  factors.push_back(0.5);
  const auto rows = focal_sensitivity(5, 100, factors);
  const auto at = [&](double f) {
    for (const auto& r : rows) {
      if (r.factor == f) return r.mean_w_mpjpe_mm;
    }
    return std::nan("");
  };
  bool unit_min = true;
  for (double f : default_focal_factors()) unit_min = unit_min && at(1.0) <= at(f);
  std::string curve;
  for (const auto& r : rows) curve += " " + fmt(r.factor, 3) + ":" + fmt(r.mean_w_mpjpe_mm, 4);
  return {at(0.5) > at(2.0) && unit_min, "mean W-MPJPE [mm] by factor" + curve +
                                             "; 0.5 > 2.0 and 1.0 minimal over the default grid"};
}

// 6. Panorama crops: yaw shift and horizon placement.
Outcome panorama() {
  const PanoImage grad = gradient_pano(256);
  Rng rng(6);
  int worst_gray = 0;
  for (int i = 0; i < 20; ++i) {
    CropSpec spec = sample_pano360_camera(rng);
    spec.out = {96, 64};
    const int shift = static_cast<int>(rng.uniform(1.0, 511.0));
    CropSpec base = spec;
    base.angles.yaw = 0.0;
    spec.angles.yaw = 2.0 * std::numbers::pi * shift / grad.width;
    const RgbImage a = crop_from_pano(grad, spec), b = crop_from_pano(shift_pano(grad, shift), base);
    for (std::size_t k = 0; k < a.rgb.size(); ++k) worst_gray = std::max(worst_gray, std::abs(a.rgb[k] - b.rgb[k]));
  }

  const PanoImage hemi = hemisphere_pano(1024);
  int specs = 0, columns = 0;
  double worst_row = 0.0;
  while (specs < 50) {
    const CropSpec spec = sample_pano360_camera(rng);
    const HorizonLine line = horizon_line(spec.angles, spec.out);
    if (!line.on_screen) continue;
    ++specs;
    const RgbImage crop = crop_from_pano(hemi, spec);
    for (int x = 0; x < spec.out.width; x += 5) {
      const double v = line.v_at(x + 0.5);
      if (v < 1.0 || v > spec.out.height - 1.0) continue;
      int edge = spec.out.height;
      for (int y = 0; y < spec.out.height; ++y) {
        if (crop.pixel(x, y)[0] < 128) {
          edge = y;
          break;
        }
      }
      worst_row = std::max(worst_row, std::abs(edge - (v - 0.5)));
      ++columns;
    }
  }
  return {worst_gray <= 1 && worst_row <= 1.0 && columns > 0,
          "yaw shift max diff " + std::to_string(worst_gray) + " gray levels (tol 1); horizon max offset " +
              fmt(worst_row, 3) + " px over " + std::to_string(specs) + " specs, " + std::to_string(columns) +
              " columns (tol 1)"};
}

// 7. Everyday-camera sampling distribution.
Outcome sampling() {
  Rng rng(7);
  const int n = 10000;
  bool pitch_ok = true;
  double roll_sum = 0.0, roll_sq = 0.0, vfov_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const CameraAngles a = sample_specsyn_camera(rng);
    const double p = rad2deg(a.pitch), r = rad2deg(a.roll);
    pitch_ok = pitch_ok && p >= -30.0 && p <= 15.0;
    roll_sum += r;
    roll_sq += r * r;
    vfov_sum += rad2deg(a.vfov);
  }
  const double mean = roll_sum / n;
  const double sd = std::sqrt((roll_sq - n * mean * mean) / (n - 1));
  const double vfov_mean = vfov_sum / n;
  return {pitch_ok && std::abs(sd - 2.8) <= 0.15 && std::abs(vfov_mean - 100.0) <= 0.7,
          "pitch in [-30, 15]: " + std::string(pitch_ok ? "yes" : "no") + "; roll sd " + fmt(sd, 4) +
              " deg (2.8 +- 0.15); vfov mean " + fmt(vfov_mean, 5) + " deg (100 +- 0.7)"};
}

// 8. Shape recovery from five views versus one.
Outcome multiframe() {
  double multi = 0.0, single = 0.0;
  bool monotone = true;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const MultiViewScene scene = make_multiview_scene(rng, 5);
    const FitResult all = fit_multiframe(scene.problem, {});
    MultiFrameProblem one = scene.problem;
    one.frames.resize(1);
    const FitResult first = fit_multiframe(one, {});
    multi += beta_error(all.params.beta, scene.gt_beta) / 20.0;
    single += beta_error(first.params.beta, scene.gt_beta) / 20.0;
    for (const FitResult* r : {&all, &first}) {
      for (std::size_t s = 0; s < r->stages.size(); ++s) {
        monotone = monotone && r->stages[s].best.total <= r->stages[s].initial.total;
        if (s > 0) monotone = monotone && r->stages[s].best.total <= r->stages[s - 1].best.total;
      }
    }
  }
  return {multi <= single && monotone, "mean beta error 5 views " + fmt(multi, 4) + " vs 1 view " + fmt(single, 4) +
                                           "; stage energies non-increasing: " + (monotone ? "yes" : "no")};
}

// 9. CLI reruns produce identical bytes.
Outcome determinism(const std::string& cli, const fs::path& work) {
  fs::remove_all(work);
  fs::create_directories(work);
  const auto run = [&](const std::string& args) { return std::system((cli + " " + args + " --quiet").c_str()); };

  // A single-frame problem written from a synthetic scene.
  Rng rng(9);
  const SyntheticScene s = make_scene(rng);
  nlohmann::json kp = nlohmann::json::array();
  for (std::size_t j = 0; j < s.observed.coords.size(); ++j) {
    kp.push_back({s.observed.coords[j].x(), s.observed.coords[j].y(), s.observed.confidence[j]});
  }
  const nlohmann::json problem = {{"camera",
                                   {{"pitch_deg", rad2deg(s.angles.pitch)},
                                    {"roll_deg", rad2deg(s.angles.roll)},
                                    {"yaw_deg", rad2deg(s.angles.yaw)},
                                    {"vfov_deg", rad2deg(s.angles.vfov)},
                                    {"width", 1280},
                                    {"height", 720}}},
                                  {"keypoints", kp}};
  write_file_atomic(work / "problem.json", problem.dump());

  int failures = 0;
  for (const char* run_dir : {"a", "b"}) {
    const fs::path d = work / run_dir;
    failures += run("synth --pano procedural:checker --count 10 --seed 42 --out " + (d / "synth").string()) != 0;
    failures += run("synth --pano procedural:gradient --dist specsyn --count 5 --seed 7 --out " +
                    (d / "synth_specsyn").string()) != 0;
    for (const char* cam : {"gt", "f5000"}) {
      failures += run("fit --problem " + (work / "problem.json").string() + " --camera " + cam + " --out " +
                      (d / (std::string("fit_") + cam + ".json")).string()) != 0;
    }
  }
  if (failures) return {false, std::to_string(failures) + " CLI runs failed"};

  std::size_t compared = 0, differing = 0;
  for (const auto& entry : fs::recursive_directory_iterator(work / "a")) {
    if (!entry.is_regular_file()) continue;
    const fs::path other = work / "b" / fs::relative(entry.path(), work / "a");
    ++compared;
    if (!fs::exists(other) || read_file(entry.path()) != read_file(other)) ++differing;
  }
  return {compared > 0 && differing == 0,
          std::to_string(compared) + " output files compared, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: acceptance <speccam cli> <scratch dir>\n";
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path work = argv[2];

  const std::vector<Criterion> criteria = {
      {1, "formula fidelity", 1.0, formulas},
      {2, "gradient suite", 30.0, gradients},
      {3, "Procrustes and metric suite", 10.0, procrustes},
      {4, "true camera beats f=5000, R=I", 300.0, camera_ordering},
      {5, "focal-sensitivity asymmetry", 300.0, focal_asymmetry},
      {6, "panorama pipeline", 30.0, panorama},
      {7, "camera sampling distributions", 5.0, sampling},
      {8, "multi-frame fitting", 120.0, multiframe},
      {9, "CLI determinism", 0.0, [&] { return determinism(cli, work); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.time_limit_s <= 0.0 || secs < c.time_limit_s;
    const bool ok = o.passed && in_time;
    failed += !ok;
    std::cout << (ok ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.name << "): " << o.detail << " ["
              << fmt(secs, 3) << " s";
    if (c.time_limit_s > 0.0) std::cout << ", limit " << fmt(c.time_limit_s) << " s";
    std::cout << "]" << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << "\n";
  return failed ? 1 : 0;
}
