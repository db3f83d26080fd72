#pragma once

// Synthetic calibration data: perspective crops from equirectangular
// panoramas with their ground-truth camera, camera-distribution sampling,
// and the PPM + JSON-lines dataset writer.
//
// Equirectangular mapping (pixel centres at integer + 0.5):
//   longitude lon in [-pi, pi)      -> u = (lon / 2pi + 0.5) * W
//   latitude  lat in [-pi/2, pi/2]  -> v = (0.5 - lat / pi) * H
// World up is -y (the camera y axis points down the image), so a world
// direction d has lat = asin(-d_y / |d|) and lon = atan2(d_x, d_z).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "speccam/camgeom.hpp"
#include "speccam/error.hpp"
#include "speccam/io.hpp"
#include "speccam/losses.hpp"
#include "speccam/rng.hpp"

namespace speccam {

/// Interleaved 8-bit RGB raster, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), rgb(3 * static_cast<std::size_t>(w) * h, 0) {}

  std::uint8_t* pixel(int x, int y) { return &rgb[3 * (static_cast<std::size_t>(y) * width + x)]; }
  const std::uint8_t* pixel(int x, int y) const {
    return &rgb[3 * (static_cast<std::size_t>(y) * width + x)];
  }
};

/// A full-sphere equirectangular panorama (width == 2 * height).
using PanoImage = RgbImage;

inline void validate_pano(const PanoImage& p) {
  if (p.height < 1 || p.width != 2 * p.height) {
    throw DomainError("panorama must be 2:1, got " + std::to_string(p.width) + "x" +
                      std::to_string(p.height));
  }
  if (p.rgb.size() != 3 * static_cast<std::size_t>(p.width) * p.height) {
    throw ShapeError("panorama buffer size does not match its dimensions");
  }
}

struct CropSpec {
  CameraAngles angles;
  ImageFrame out;
};

inline std::uint8_t to_byte(double v) {
  // nearbyint under the default rounding mode rounds half to even.
  return static_cast<std::uint8_t>(std::nearbyint(std::clamp(v, 0.0, 255.0)));
}

/// Bilinear lookup at continuous pano coordinates, wrapping horizontally and
/// clamping vertically.
inline void sample_bilinear(const PanoImage& pano, double u, double v, double out[3]) {
  const double x = u - 0.5;
  const double y = v - 0.5;
  const double x0f = std::floor(x);
  const double y0f = std::floor(y);
  const double ax = x - x0f;
  const double ay = y - y0f;
  const auto wrap = [w = pano.width](long i) { return static_cast<int>(((i % w) + w) % w); };
  const auto clampy = [h = pano.height](long j) { return static_cast<int>(std::clamp<long>(j, 0, h - 1)); };
  const int x0 = wrap(static_cast<long>(x0f)), x1 = wrap(static_cast<long>(x0f) + 1);
  const int y0 = clampy(static_cast<long>(y0f)), y1 = clampy(static_cast<long>(y0f) + 1);
  const std::uint8_t* p00 = pano.pixel(x0, y0);
  const std::uint8_t* p10 = pano.pixel(x1, y0);
  const std::uint8_t* p01 = pano.pixel(x0, y1);
  const std::uint8_t* p11 = pano.pixel(x1, y1);
  for (int c = 0; c < 3; ++c) {
    const double top = (1.0 - ax) * p00[c] + ax * p10[c];
    const double bottom = (1.0 - ax) * p01[c] + ax * p11[c];
    out[c] = (1.0 - ay) * top + ay * bottom;
  }
}

/// Panorama pixel coordinates of a world direction.
inline Eigen::Vector2d direction_to_pano(const Eigen::Vector3d& d, const PanoImage& pano) {
  const double lon = std::atan2(d.x(), d.z());
  const double lat = std::asin(std::clamp(-d.y() / d.norm(), -1.0, 1.0));
  return {(lon / (2.0 * std::numbers::pi) + 0.5) * pano.width,
          (0.5 - lat / std::numbers::pi) * pano.height};
}

/// Renders the perspective view described by `spec`. Each output pixel centre
/// is back-projected, rotated camera-to-world by Rc^T and looked up in the
/// panorama.
inline RgbImage crop_from_pano(const PanoImage& pano, const CropSpec& spec) {
  validate_pano(pano);
  validate(spec.angles);
  validate(spec.out);
  const Intrinsics k = intrinsics_from_vfov(spec.angles.vfov, spec.out);
  const Eigen::Matrix3d cam_to_world = angles_to_rotation(spec.angles).transpose();
  RgbImage out(spec.out.width, spec.out.height);
  double rgb[3];
  for (int row = 0; row < out.height; ++row) {
    for (int col = 0; col < out.width; ++col) {
      const Eigen::Vector3d ray((col + 0.5 - k.ox) / k.fx, (row + 0.5 - k.oy) / k.fy, 1.0);
      const Eigen::Vector2d uv = direction_to_pano(cam_to_world * ray, pano);
      sample_bilinear(pano, uv.x(), uv.y(), rgb);
      std::uint8_t* px = out.pixel(col, row);
      for (int c = 0; c < 3; ++c) px[c] = to_byte(rgb[c]);
    }
  }
  return out;
}

// Procedural panoramas.

inline PanoImage constant_pano(int height, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  PanoImage p(2 * height, height);
  for (std::size_t i = 0; i < p.rgb.size(); i += 3) {
    p.rgb[i] = r;
    p.rgb[i + 1] = g;
    p.rgb[i + 2] = b;
  }
  return p;
}

/// White sky above the equator, black ground below.
inline PanoImage hemisphere_pano(int height) {
  PanoImage p(2 * height, height);
  for (int y = 0; y < height / 2; ++y) {
    std::fill_n(p.pixel(0, y), 3 * static_cast<std::size_t>(p.width), std::uint8_t{255});
  }
  return p;
}

inline PanoImage checker_pano(int height, int cells_per_row = 16) {
  PanoImage p(2 * height, height);
  const int cell = std::max(1, p.width / cells_per_row);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      const bool on = ((x / cell) + (y / cell)) % 2 == 0;
      std::uint8_t* px = p.pixel(x, y);
      px[0] = on ? 230 : 30;
      px[1] = on ? 200 : 60;
      px[2] = on ? 40 : 160;
    }
  }
  return p;
}

/// Smooth colour ramps: red follows longitude, green latitude, blue both.
inline PanoImage gradient_pano(int height) {
  PanoImage p(2 * height, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      const double fu = (x + 0.5) / p.width;
      const double fv = (y + 0.5) / height;
      std::uint8_t* px = p.pixel(x, y);
      px[0] = to_byte(255.0 * (0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * fu)));
      px[1] = to_byte(255.0 * fv);
      px[2] = to_byte(127.5 * (1.0 + std::cos(2.0 * std::numbers::pi * fu) * std::sin(std::numbers::pi * fv)));
    }
  }
  return p;
}

/// Resolves "checker", "hemisphere" or "gradient".
inline PanoImage procedural_pano(const std::string& name, int height = 512) {
  if (name == "checker") return checker_pano(height);
  if (name == "hemisphere") return hemisphere_pano(height);
  if (name == "gradient") return gradient_pano(height);
  throw DomainError("unknown procedural panorama '" + name + "'");
}

/// Horizontal circular shift: out[x] = in[(x - pixels) mod W].
inline PanoImage shift_pano(const PanoImage& in, int pixels) {
  PanoImage out(in.width, in.height);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      const int src = (((x - pixels) % in.width) + in.width) % in.width;
      std::copy_n(in.pixel(src, y), 3, out.pixel(x, y));
    }
  }
  return out;
}

// Camera sampling.

/// Uniform sampling ranges in radians; yaw is always uniform over (-pi, pi].
struct Pano360Ranges {
  double pitch_lo = deg2rad(-45.0), pitch_hi = deg2rad(45.0);
  double roll_lo = deg2rad(-45.0), roll_hi = deg2rad(45.0);
  double vfov_lo = deg2rad(15.0), vfov_hi = deg2rad(140.0);
  ImageFrame out{320, 240};
};

inline void validate(const Pano360Ranges& r) {
  if (!(r.pitch_lo <= r.pitch_hi && r.roll_lo <= r.roll_hi && r.vfov_lo <= r.vfov_hi)) {
    throw DomainError("sampling ranges must satisfy lo <= hi");
  }
  if (!(r.vfov_lo > 0.0 && r.vfov_hi < std::numbers::pi)) {
    throw DomainError("vfov range must lie inside (0, pi)");
  }
  validate(r.out);
}

/// Uniform over (-pi, pi].
inline double sample_yaw(Rng& rng) { return std::numbers::pi - 2.0 * std::numbers::pi * rng.uniform(); }

inline CropSpec sample_pano360_camera(Rng& rng, const Pano360Ranges& ranges = {}) {
  validate(ranges);
  CropSpec s;
  s.out = ranges.out;
  s.angles.pitch = rng.uniform(ranges.pitch_lo, ranges.pitch_hi);
  s.angles.roll = rng.uniform(ranges.roll_lo, ranges.roll_hi);
  s.angles.vfov = rng.uniform(ranges.vfov_lo, ranges.vfov_hi);
  s.angles.yaw = sample_yaw(rng);
  return s;
}

/// pitch ~ U(-30, 15) deg, roll ~ N(0, 2.8) deg, vfov ~ U(70, 130) deg.
inline CameraAngles sample_specsyn_camera(Rng& rng) {
  CameraAngles a;
  a.pitch = deg2rad(rng.uniform(-30.0, 15.0));
  a.roll = deg2rad(rng.normal(0.0, 2.8));
  a.vfov = deg2rad(rng.uniform(70.0, 130.0));
  a.yaw = sample_yaw(rng);
  return a;
}

// Dataset records.

struct SampleRecord {
  std::string file;
  double pitch_deg = 0.0;
  double roll_deg = 0.0;
  double yaw_deg = 0.0;
  double vfov_deg = 0.0;
  double focal_px = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const SampleRecord&) const = default;
};

inline SampleRecord make_sample_record(std::string file, const CropSpec& spec, std::uint64_t seed) {
  return {std::move(file),
          rad2deg(spec.angles.pitch),
          rad2deg(spec.angles.roll),
          rad2deg(spec.angles.yaw),
          rad2deg(spec.angles.vfov),
          vfov_to_focal(spec.angles.vfov, spec.out.height),
          seed};
}

inline void to_json(nlohmann::json& j, const SampleRecord& r) {
  j = nlohmann::json{{"file", r.file},         {"pitch_deg", r.pitch_deg}, {"roll_deg", r.roll_deg},
                     {"yaw_deg", r.yaw_deg},   {"vfov_deg", r.vfov_deg},   {"focal_px", r.focal_px},
                     {"seed", r.seed}};
}

inline void from_json(const nlohmann::json& j, SampleRecord& r) {
  j.at("file").get_to(r.file);
  j.at("pitch_deg").get_to(r.pitch_deg);
  j.at("roll_deg").get_to(r.roll_deg);
  j.at("yaw_deg").get_to(r.yaw_deg);
  j.at("vfov_deg").get_to(r.vfov_deg);
  j.at("focal_px").get_to(r.focal_px);
  j.at("seed").get_to(r.seed);
}

inline std::string encode_ppm(const RgbImage& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.rgb.data()), img.rgb.size());
  return out;
}

/// Reads binary P6 with maxval 255 (comments are not supported).
inline RgbImage decode_ppm(const std::string& bytes) {
  std::istringstream in(bytes);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || w < 1 || h < 1 || maxval != 255) throw SchemaError("not a binary 8-bit PPM");
  in.get();
  RgbImage img(w, h);
  in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.rgb.size())) throw SchemaError("truncated PPM");
  return img;
}

inline constexpr const char* kManifestName = "manifest.jsonl";

/// Writes the raster as `dir/record.file` and appends the record to
/// `dir/manifest.jsonl`. Returns the manifest line (without newline).
inline std::string write_sample_record(const SampleRecord& record, const RgbImage& raster,
                                       const std::filesystem::path& dir) {
  write_file_atomic(dir / record.file, encode_ppm(raster));
  const std::string line = nlohmann::json(record).dump();
  const std::filesystem::path manifest = dir / kManifestName;
  std::ofstream out(manifest, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot open " + manifest.string() + " for appending");
  out << line << '\n';
  if (!out) throw IoError("error while appending to " + manifest.string());
  return line;
}

/// Replaces `dir/manifest.jsonl` with one line per record.
inline void write_manifest(const std::vector<SampleRecord>& records, const std::filesystem::path& dir) {
  std::string text;
  for (const auto& r : records) text += nlohmann::json(r).dump() + "\n";
  write_file_atomic(dir / kManifestName, text);
}

inline std::vector<SampleRecord> read_manifest(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<SampleRecord> records;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      records.push_back(nlohmann::json::parse(line).get<SampleRecord>());
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace speccam
