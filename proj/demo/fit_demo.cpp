// Fits one synthetic body twice: with the true camera and with the usual
// f = 5000, identity-rotation assumption. Prints both world-frame errors.
//
//   fit_demo [seed] [problem.json]
//
// With a second argument the generated single-frame problem is also written
// in the format read by `speccam fit`.

#include <cstdlib>
#include <iostream>

#include "speccam/experiments.hpp"
#include "speccam/io.hpp"
#include "speccam/serialization.hpp"

using namespace speccam;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;
  Rng rng(seed);
  const SyntheticScene scene = make_scene(rng);

  std::cout << "camera: pitch " << rad2deg(scene.angles.pitch) << " deg, roll " << rad2deg(scene.angles.roll)
            << " deg, vfov " << rad2deg(scene.angles.vfov) << " deg (f = " << scene.intrinsics.fy << " px)\n";

  for (const auto& [label, hyp] : {std::pair{"true camera  ", ground_truth_camera(scene)},
                                   std::pair{"f=5000, R=I  ", fixed_focal_camera(5000.0, SceneConfig{}.frame)}}) {
    const FitResult r = fit_single(problem_for(scene, hyp), FitConfig{});
    const FitScore s = score_fit(scene, hyp, r.params);
    std::cout << label << "reprojection " << r.stages.back().best.data / 17.0 << " px^2/joint, W-MPJPE "
              << s.w_mpjpe_mm << " mm, PA-MPJPE " << s.pa_mpjpe_mm << " mm\n";
  }

  if (argc > 2) {
    nlohmann::json kp = nlohmann::json::array();
    for (std::size_t j = 0; j < scene.observed.coords.size(); ++j) {
      kp.push_back({scene.observed.coords[j].x(), scene.observed.coords[j].y(), scene.observed.confidence[j]});
    }
    const ImageFrame frame = SceneConfig{}.frame;
    nlohmann::json doc = {{"camera",
                           {{"pitch_deg", rad2deg(scene.angles.pitch)},
                            {"roll_deg", rad2deg(scene.angles.roll)},
                            {"yaw_deg", rad2deg(scene.angles.yaw)},
                            {"vfov_deg", rad2deg(scene.angles.vfov)},
                            {"width", frame.width},
                            {"height", frame.height}}},
                          {"keypoints", kp}};
    write_file_atomic(argv[2], doc.dump(2) + "\n");
    std::cout << "problem written to " << argv[2] << "\n";
  }
  return 0;
}
