#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "speccam/io.hpp"
#include "speccam/panosample.hpp"

using namespace speccam;
namespace fs = std::filesystem;

namespace {

int max_channel_difference(const RgbImage& a, const RgbImage& b) {
  int worst = 0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) worst = std::max(worst, std::abs(int{a.rgb[i]} - int{b.rgb[i]}));
  return worst;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("speccam_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(CropFromPano, ConstantPanoramaGivesConstantCrop) {
  const PanoImage pano = constant_pano(64, 10, 120, 250);
  Rng rng(1);
  for (int i = 0; i < 10; ++i) {
    const RgbImage crop = crop_from_pano(pano, sample_pano360_camera(rng));
    for (std::size_t k = 0; k < crop.rgb.size(); k += 3) {
      ASSERT_EQ(crop.rgb[k], 10);
      ASSERT_EQ(crop.rgb[k + 1], 120);
      ASSERT_EQ(crop.rgb[k + 2], 250);
    }
  }
}

TEST(CropFromPano, CentreLooksAtPanoramaCentre) {
  // A single bright 2x2 block at the panorama centre, seen by an odd-sized
  // narrow crop whose centre pixel lies on the optical axis.
  PanoImage pano(512, 256);
  for (int y = 127; y <= 128; ++y) {
    for (int x = 255; x <= 256; ++x) std::fill_n(pano.pixel(x, y), 3, std::uint8_t{255});
  }
  CropSpec spec;
  spec.angles = {0.0, 0.0, 0.0, deg2rad(10.0)};
  spec.out = {31, 31};
  const RgbImage crop = crop_from_pano(pano, spec);
  EXPECT_EQ(crop.pixel(15, 15)[0], 255);
  EXPECT_EQ(crop.pixel(0, 0)[0], 0);
}

TEST(CropFromPano, YawEqualsCircularShift) {
  const PanoImage pano = gradient_pano(256);
  Rng rng(2);
  int worst = 0;
  for (int i = 0; i < 20; ++i) {
    CropSpec spec = sample_pano360_camera(rng);
    spec.out = {96, 64};
    const int shift = static_cast<int>(rng.uniform(1.0, 511.0));
    CropSpec base = spec;
    base.angles.yaw = 0.0;
    spec.angles.yaw = 2.0 * std::numbers::pi * shift / pano.width;
    worst = std::max(worst, max_channel_difference(crop_from_pano(pano, spec), crop_from_pano(shift_pano(pano, shift), base)));
  }
  EXPECT_LE(worst, 1);
}

TEST(CropFromPano, InvariantToFullTurnOfYaw) {
  const PanoImage pano = checker_pano(128);
  Rng rng(3);
  for (int i = 0; i < 10; ++i) {
    CropSpec spec = sample_pano360_camera(rng);
    spec.out = {64, 48};
    CropSpec turned = spec;
    turned.angles.yaw += 2.0 * std::numbers::pi;
    EXPECT_LE(max_channel_difference(crop_from_pano(pano, spec), crop_from_pano(pano, turned)), 1);
  }
}

TEST(CropFromPano, DeterministicBytes) {
  const PanoImage pano = gradient_pano(128);
  Rng rng(4);
  const CropSpec spec = sample_pano360_camera(rng);
  EXPECT_EQ(crop_from_pano(pano, spec).rgb, crop_from_pano(pano, spec).rgb);
}

TEST(CropFromPano, HorizonRowMatchesGeometry) {
  const PanoImage pano = hemisphere_pano(1024);
  Rng rng(5);
  int checked = 0;
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    CropSpec spec = sample_pano360_camera(rng);
    const HorizonLine line = horizon_line(spec.angles, spec.out);
    if (!line.on_screen) continue;
    const RgbImage crop = crop_from_pano(pano, spec);
    for (int x = 0; x < spec.out.width; x += 7) {
      const double v = line.v_at(x + 0.5);
      if (v < 1.0 || v > spec.out.height - 1.0) continue;
      int edge = spec.out.height;
      for (int y = 0; y < spec.out.height; ++y) {
        if (crop.pixel(x, y)[0] < 128) {
          edge = y;
          break;
        }
      }
      // Rows whose centre lies below the horizon are ground.
      worst = std::max(worst, std::abs(edge - (v - 0.5)));
      ++checked;
    }
  }
  EXPECT_GT(checked, 100);
  EXPECT_LE(worst, 1.0);
}

TEST(CropFromPano, RejectsBadInput) {
  CropSpec spec;
  spec.angles = {0.0, 0.0, 0.0, deg2rad(60.0)};
  spec.out = {32, 32};
  EXPECT_THROW(crop_from_pano(PanoImage(30, 20), spec), DomainError);
  spec.out = {0, 32};
  EXPECT_THROW(crop_from_pano(constant_pano(16, 0, 0, 0), spec), DomainError);
}

TEST(SamplePano360, DeterministicAndInRange) {
  Rng a(7), b(7);
  const CropSpec sa = sample_pano360_camera(a), sb = sample_pano360_camera(b);
  EXPECT_EQ(sa.angles.pitch, sb.angles.pitch);
  EXPECT_EQ(sa.angles.roll, sb.angles.roll);
  EXPECT_EQ(sa.angles.yaw, sb.angles.yaw);
  EXPECT_EQ(sa.angles.vfov, sb.angles.vfov);

  const Pano360Ranges r;
  Rng rng(8);
  double vfov_sum = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const CameraAngles s = sample_pano360_camera(rng, r).angles;
    ASSERT_GE(s.pitch, r.pitch_lo);
    ASSERT_LE(s.pitch, r.pitch_hi);
    ASSERT_GE(s.roll, r.roll_lo);
    ASSERT_LE(s.roll, r.roll_hi);
    ASSERT_GE(s.vfov, r.vfov_lo);
    ASSERT_LE(s.vfov, r.vfov_hi);
    ASSERT_GT(s.yaw, -std::numbers::pi);
    ASSERT_LE(s.yaw, std::numbers::pi);
    vfov_sum += s.vfov;
  }
  EXPECT_NEAR(rad2deg(vfov_sum / 10000.0), rad2deg(0.5 * (r.vfov_lo + r.vfov_hi)), 1.0);
}

TEST(SamplePano360, RejectsInvertedRanges) {
  Rng rng(9);
  Pano360Ranges r;
  r.pitch_lo = 1.0;
  r.pitch_hi = 0.0;
  EXPECT_THROW(sample_pano360_camera(rng, r), DomainError);
  r = {};
  r.vfov_hi = 4.0;
  EXPECT_THROW(sample_pano360_camera(rng, r), DomainError);
}

TEST(SampleSpecsyn, Distributions) {
  Rng rng(10);
  const int n = 10000;
  double roll_sum = 0.0, roll_sq = 0.0, vfov_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const CameraAngles a = sample_specsyn_camera(rng);
    ASSERT_GE(rad2deg(a.pitch), -30.0);
    ASSERT_LE(rad2deg(a.pitch), 15.0);
    ASSERT_GE(rad2deg(a.vfov), 70.0);
    ASSERT_LE(rad2deg(a.vfov), 130.0);
    roll_sum += rad2deg(a.roll);
    roll_sq += rad2deg(a.roll) * rad2deg(a.roll);
    vfov_sum += rad2deg(a.vfov);
  }
  const double roll_mean = roll_sum / n;
  const double roll_sd = std::sqrt((roll_sq - n * roll_mean * roll_mean) / (n - 1));
  EXPECT_NEAR(roll_sd, 2.8, 0.15);
  EXPECT_NEAR(vfov_sum / n, 100.0, 0.7);
}

TEST(Ppm, HeaderAndRoundTrip) {
  RgbImage img(64, 48);
  for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = static_cast<std::uint8_t>(i * 7);
  const std::string bytes = encode_ppm(img);
  ASSERT_EQ(bytes.substr(0, 13), "P6\n64 48\n255\n");
  EXPECT_EQ(bytes.size(), 13u + 9216u);
  const RgbImage back = decode_ppm(bytes);
  EXPECT_EQ(back.width, 64);
  EXPECT_EQ(back.height, 48);
  EXPECT_EQ(back.rgb, img.rgb);
  EXPECT_THROW(decode_ppm("P3\n1 1\n255\n"), SchemaError);
  EXPECT_THROW(decode_ppm(bytes.substr(0, 100)), SchemaError);
}

TEST(SampleRecord, WriteReadRoundTrip) {
  const fs::path dir = scratch_dir("records");
  Rng rng(11);
  std::vector<SampleRecord> written;
  for (int i = 0; i < 3; ++i) {
    CropSpec spec = sample_pano360_camera(rng);
    spec.out = {64, 48};
    const SampleRecord rec = make_sample_record("crop_" + std::to_string(i) + ".ppm", spec, 1000 + i);
    EXPECT_NEAR(rec.focal_px, vfov_to_focal(spec.angles.vfov, 48), 1e-6);
    write_sample_record(rec, crop_from_pano(checker_pano(64), spec), dir);
    written.push_back(rec);
  }
  EXPECT_EQ(read_manifest(dir / kManifestName), written);
  const RgbImage img = decode_ppm(read_file(dir / "crop_1.ppm"));
  EXPECT_EQ(img.width, 64);
  EXPECT_EQ(img.height, 48);

  write_manifest({written[2]}, dir);
  const auto replaced = read_manifest(dir / kManifestName);
  ASSERT_EQ(replaced.size(), 1u);
  EXPECT_EQ(replaced[0], written[2]);
  fs::remove_all(dir);
}

TEST(SampleRecord, IoErrorsNameThePath) {
  const SampleRecord rec{"x.ppm", 0, 0, 0, 60, 41.5, 1};
  const fs::path missing = fs::temp_directory_path() / "speccam_test_no_such_dir" / "deeper";
  try {
    write_sample_record(rec, RgbImage(2, 2), missing);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("speccam_test_no_such_dir"), std::string::npos);
  }
  EXPECT_THROW(read_manifest(missing / "manifest.jsonl"), IoError);
}
