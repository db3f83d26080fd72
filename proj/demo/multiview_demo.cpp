// One static body filmed from several viewpoints. Fits shape and pose with
// all views, then with the first view alone, and prints the bone-scale error
// of both.
//
//   multiview_demo [seed] [views] [problem.json]
//
// With a third argument the multi-view problem is written in the format read
// by `speccam fit --multi`.

#include <cstdlib>
#include <iostream>

#include "speccam/experiments.hpp"
#include "speccam/io.hpp"
#include "speccam/serialization.hpp"

using namespace speccam;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;
  const std::size_t views = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 5;
  Rng rng(seed);
  const MultiViewConfig cfg;
  const MultiViewScene scene = make_multiview_scene(rng, views, cfg);

  const FitResult all = fit_multiframe(scene.problem, FitConfig{});
  MultiFrameProblem single = scene.problem;
  single.frames.resize(1);
  const FitResult one = fit_multiframe(single, FitConfig{});

  for (const auto& s : all.stages) {
    std::cout << s.name << ": " << s.initial.total << " -> " << s.best.total << "\n";
  }
  std::cout << "beta error, " << views << " views: " << beta_error(all.params.beta, scene.gt_beta) << "\n";
  std::cout << "beta error, 1 view:  " << beta_error(one.params.beta, scene.gt_beta) << "\n";

  if (argc > 3) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& f : scene.problem.frames) {
      nlohmann::json kp = nlohmann::json::array();
      for (std::size_t j = 0; j < f.observed.coords.size(); ++j) {
        kp.push_back({f.observed.coords[j].x(), f.observed.coords[j].y(), f.observed.confidence[j]});
      }
      frames.push_back({{"camera",
                         {{"pitch_deg", rad2deg(f.init_camera.pitch)},
                          {"roll_deg", rad2deg(f.init_camera.roll)},
                          {"yaw_deg", rad2deg(f.init_camera.yaw)},
                          {"fx", f.intrinsics.fx},
                          {"fy", f.intrinsics.fy},
                          {"width", cfg.frame.width},
                          {"height", cfg.frame.height}}},
                        {"keypoints", kp},
                        {"init_tc", schema::to_json(f.init_camera.tc)}});
    }
    const nlohmann::json doc = {{"frames", frames},
                                {"presented_theta", schema::to_json(scene.problem.presented_theta)},
                                {"target_height", scene.problem.target_height}};
    write_file_atomic(argv[3], doc.dump(2) + "\n");
    std::cout << "problem written to " << argv[3] << "\n";
  }
  return 0;
}
