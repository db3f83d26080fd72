// Renders a crop of the two-tone hemisphere panorama and compares where the
// sky/ground edge lands with the analytic horizon line.
//
//   horizon_demo [pitch_deg] [roll_deg] [vfov_deg] [out.ppm]

#include <cstdlib>
#include <iostream>

#include "speccam/camgeom.hpp"
#include "speccam/io.hpp"
#include "speccam/panosample.hpp"

using namespace speccam;

int main(int argc, char** argv) {
  CropSpec spec;
  spec.angles.pitch = deg2rad(argc > 1 ? std::atof(argv[1]) : 10.0);
  spec.angles.roll = deg2rad(argc > 2 ? std::atof(argv[2]) : 5.0);
  spec.angles.vfov = deg2rad(argc > 3 ? std::atof(argv[3]) : 80.0);
  spec.out = {640, 480};

  const PanoImage pano = hemisphere_pano(1024);
  const RgbImage crop = crop_from_pano(pano, spec);
  const HorizonLine line = horizon_line(spec.angles, spec.out);

  std::cout << "horizon from geometry: v(0) = " << line.start.y() << ", v(" << spec.out.width
            << ") = " << line.end.y() << (line.on_screen ? "" : " (off screen)") << "\n";
  for (int x : {0, spec.out.width / 2, spec.out.width - 1}) {
    // First row from the top that is darker than mid-gray.
    int edge = -1;
    for (int y = 0; y < spec.out.height; ++y) {
      if (crop.pixel(x, y)[0] < 128) {
        edge = y;
        break;
      }
    }
    std::cout << "column " << x << ": rendered edge at row " << edge << ", predicted "
              << line.v_at(x + 0.5) << "\n";
  }
  if (argc > 4) write_file_atomic(argv[4], encode_ppm(crop));
  return 0;
}
