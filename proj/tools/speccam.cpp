// speccam: dataset synthesis, body fitting, evaluation, focal sensitivity and
// gradient checks from the command line.
//
// Exit codes: 0 success, 1 bad input or failed check, 2 internal error.

#include <charconv>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "speccam/experiments.hpp"
#include "speccam/gradcheck.hpp"
#include "speccam/io.hpp"
#include "speccam/metrics.hpp"
#include "speccam/panosample.hpp"
#include "speccam/serialization.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace speccam;

namespace {

// Raised for bad user input; maps to exit code 1.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::uint64_t seed = 0;
  std::string out;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  cmd->add_option("--out", c.out, "Output path");
  cmd->add_flag("--quiet", c.quiet, "Suppress the report on stdout");
}

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

json load_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string pano;
  std::size_t count = 10;
  std::string dist = "pano360";
  int width = 320;
  int height = 240;
};

PanoImage load_pano(const std::string& what) {
  const std::string prefix = "procedural:";
  if (what.rfind(prefix, 0) == 0) return procedural_pano(what.substr(prefix.size()));
  PanoImage p = decode_ppm(read_file(what));
  validate_pano(p);
  return p;
}

int run_synth(const SynthArgs& a, const Common& c) {
  if (c.out.empty()) throw InputError("synth needs --out DIR");
  if (a.dist != "pano360" && a.dist != "specsyn") throw InputError("--dist must be pano360 or specsyn");
  Pano360Ranges ranges;
  ranges.out = {a.width, a.height};
  validate(ranges);
  const PanoImage pano = load_pano(a.pano);
  const fs::path dir(c.out);
  fs::create_directories(dir);

  Rng master(c.seed);
  std::vector<SampleRecord> records;
  for (std::size_t i = 0; i < a.count; ++i) {
    const std::uint64_t sample_seed = master.next_u64();
    Rng rng(sample_seed);
    CropSpec spec;
    if (a.dist == "pano360") {
      spec = sample_pano360_camera(rng, ranges);
    } else {
      spec.angles = sample_specsyn_camera(rng);
      spec.out = ranges.out;
    }
    std::ostringstream name;
    name << "crop_" << std::setw(6) << std::setfill('0') << i << ".ppm";
    SampleRecord rec = make_sample_record(name.str(), spec, sample_seed);
    write_file_atomic(dir / rec.file, encode_ppm(crop_from_pano(pano, spec)));
    records.push_back(std::move(rec));
  }
  write_manifest(records, dir);
  if (!c.quiet) std::cout << records.size() << " samples written to " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string problem;
  std::string camera = "gt";
  bool multi = false;
  int steps = FitConfig{}.steps;
  double step_size = FitConfig{}.step_size;
};

struct CameraOverride {
  std::optional<double> focal;              // fixed focal, Rc = I
  std::optional<schema::CameraSpec> file;   // camera read from a file
};

CameraOverride parse_camera_mode(const std::string& mode) {
  CameraOverride o;
  if (mode == "gt") return o;
  if (mode == "f5000") {
    o.focal = 5000.0;
  } else if (mode == "f2200") {
    o.focal = 2200.0;
  } else if (mode.rfind("file:", 0) == 0) {
    o.file = schema::camera_from_json(load_json(mode.substr(5)), mode.substr(5));
  } else {
    throw InputError("--camera must be gt, f5000, f2200 or file:PATH");
  }
  return o;
}

json fit_single_file(const json& doc, const CameraOverride& cam, const FitConfig& cfg) {
  const schema::ProblemFile f = schema::problem_file_from_json(doc);
  Intrinsics k = f.camera.intrinsics;
  Eigen::Matrix3d rc = f.camera.rotation();
  if (cam.focal) {
    k = intrinsics_from_focal(*cam.focal, f.camera.frame);
    rc.setIdentity();
  } else if (cam.file) {
    k = cam.file->intrinsics;
    rc = cam.file->rotation();
  }
  const FitProblem problem = schema::make_fit_problem(f, k, rc);
  const FitResult r = fit_single(problem, cfg);
  json out = schema::to_json(r);
  out["intrinsics"] = schema::to_json(k);
  out["rc"] = schema::to_json(rc);
  BodyParams world = r.params;
  world.tb.setZero();
  out["joints_world"] = schema::to_json(forward_kinematics(problem.skeleton, world));
  return out;
}

json fit_multi_file(const json& doc, const CameraOverride& cam, const FitConfig& cfg) {
  MultiFrameProblem problem = schema::multiframe_from_json(doc);
  for (std::size_t i = 0; i < problem.frames.size(); ++i) {
    auto& f = problem.frames[i];
    if (cam.focal) {
      f.intrinsics.fx = f.intrinsics.fy = *cam.focal;
      // Multi-frame bodies are y-up, so a level camera is a half turn about x.
      f.init_camera.pitch = std::numbers::pi;
      f.init_camera.roll = f.init_camera.yaw = 0.0;
    } else if (cam.file) {
      f.intrinsics = cam.file->intrinsics;
      f.init_camera.pitch = cam.file->angles.pitch;
      f.init_camera.roll = cam.file->angles.roll;
      f.init_camera.yaw = cam.file->angles.yaw;
    }
  }
  const FitResult r = fit_multiframe(problem, cfg);
  json out = schema::to_json(r);
  BodyParams body = r.params;
  body.rb.setIdentity();
  body.tb.setZero();
  out["joints_world"] = schema::to_json(forward_kinematics(problem.skeleton, body));
  return out;
}

int run_fit(const FitArgs& a, const Common& c) {
  FitConfig cfg;
  cfg.steps = a.steps;
  cfg.step_size = a.step_size;
  validate(cfg);
  const CameraOverride cam = parse_camera_mode(a.camera);
  const json doc = load_json(a.problem);
  json out = a.multi ? fit_multi_file(doc, cam, cfg) : fit_single_file(doc, cam, cfg);
  out["camera_mode"] = a.camera;
  out["multi"] = a.multi;
  const std::string text = out.dump(2) + "\n";
  if (c.out.empty()) {
    if (!c.quiet) std::cout << text;
  } else {
    write_file_atomic(c.out, text);
    if (!c.quiet) {
      for (const auto& s : out["stages"]) {
        std::cout << s["name"].get<std::string>() << ": " << num(s["initial"]["total"].get<double>()) << " -> "
                  << num(s["best"]["total"].get<double>()) << "\n";
      }
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string samples;
  std::string buckets;
  std::string root_align = "on";
};

json optional_number(std::optional<double> v) { return v ? json(*v) : json(nullptr); }

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

int run_eval(const EvalArgs& a, const Common& c) {
  if (a.root_align != "on" && a.root_align != "off") throw InputError("--root-align must be on or off");
  const bool root_align = a.root_align == "on";
  const std::vector<EvalSample> samples = schema::samples_from_json(load_json(a.samples));
  std::optional<BucketSpec> spec;
  if (!a.buckets.empty()) spec = schema::buckets_from_json(load_json(a.buckets));

  std::vector<double> mp, pa, w, w1, w2;
  json rows = json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const EvalSample& s = samples[i];
    double m = 0.0, p = 0.0, wv = 0.0;
    try {
      m = mpjpe(world_prediction(s), s.ground_truth);
      p = pa_mpjpe(s.predicted, s.ground_truth);
      wv = w_mpjpe(s, root_align);
    } catch (const std::exception& e) {
      throw InputError("sample " + std::to_string(i) + ": " + e.what());
    }
    const int variant = s.frame == PredictionFrame::kWorld ? 1 : 2;
    mp.push_back(m);
    pa.push_back(p);
    w.push_back(wv);
    (variant == 1 ? w1 : w2).push_back(wv);
    rows.push_back({{"index", i}, {"variant", variant}, {"mpjpe_mm", m}, {"pa_mpjpe_mm", p}, {"w_mpjpe_mm", wv}});
  }

  json out;
  out["root_align"] = root_align;
  out["count"] = samples.size();
  out["mean"] = {{"mpjpe_mm", optional_number(mean_of(mp))},
                 {"pa_mpjpe_mm", optional_number(mean_of(pa))},
                 {"w_mpjpe_mm", optional_number(mean_of(w))},
                 {"w_mpjpe_variant1_mm", optional_number(mean_of(w1))},
                 {"w_mpjpe_variant2_mm", optional_number(mean_of(w2))}};
  out["samples"] = rows;

  std::ostringstream text;
  const auto line = [&](const std::string& label, std::optional<double> v) {
    text << std::left << std::setw(22) << label << (v ? num(*v) : std::string("-")) << "\n";
  };
  text << "samples               " << samples.size() << " (root alignment " << a.root_align << ")\n";
  line("MPJPE [mm]", mean_of(mp));
  line("PA-MPJPE [mm]", mean_of(pa));
  line("W-MPJPE [mm]", mean_of(w));
  line("W-MPJPE world [mm]", mean_of(w1));
  line("W-MPJPE camera [mm]", mean_of(w2));

  if (spec) {
    const BucketTable t = bucket_breakdown(samples, w, *spec);
    json b;
    for (const auto* rows_of : {&t.focal, &t.pitch}) {
      json list = json::array();
      for (const auto& r : *rows_of) list.push_back(schema::to_json(r));
      b[rows_of == &t.focal ? "focal" : "pitch"] = list;
    }
    out["buckets"] = b;
    for (const auto& [title, rows_of] : {std::pair{"focal [px]", &t.focal}, std::pair{"pitch [deg]", &t.pitch}}) {
      text << "\nW-MPJPE by " << title << "\n";
      for (const auto& r : *rows_of) {
        text << "  " << std::left << std::setw(16) << r.label << std::right << std::setw(6) << r.count << "  "
             << (r.mean ? num(*r.mean) : std::string("-")) << "\n";
      }
    }
  }
  if (!c.out.empty()) write_file_atomic(c.out, out.dump(2) + "\n");
  if (!c.quiet) std::cout << text.str();
  return 0;
}

// ---------------------------------------------------------------------------

struct SensitivityArgs {
  std::size_t trials = 100;
  std::string factors = "0.4,0.6,0.8,1.0,1.3,1.6,2.0";
};

std::vector<double> parse_factors(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    const auto r = std::from_chars(item.data(), item.data() + item.size(), v);
    if (r.ec != std::errc() || r.ptr != item.data() + item.size()) throw InputError("bad factor '" + item + "'");
    if (!(v > 0.0)) throw InputError("focal factors must be positive, got " + item);
    out.push_back(v);
  }
  if (out.empty()) throw InputError("--factors is empty");
  return out;
}

int run_sensitivity(const SensitivityArgs& a, const Common& c) {
  const std::vector<double> factors = parse_factors(a.factors);
  const auto rows = focal_sensitivity(c.seed, a.trials, factors);
  std::string csv = "factor,mean_wmpjpe_mm,trials\n";
  for (const auto& r : rows) csv += num(r.factor) + "," + num(r.mean_w_mpjpe_mm) + "," + std::to_string(r.trials) + "\n";
  if (c.out.empty()) {
    std::cout << csv;
  } else {
    write_file_atomic(c.out, csv);
    if (!c.quiet) std::cout << csv;
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct GradcheckArgs {
  std::string suite = "all";
  std::size_t cases = kGradcheckCases;
  std::string corrupt;
};

int run_gradcheck(const GradcheckArgs& a, const Common& c) {
  if (a.suite != "losses" && a.suite != "fitter" && a.suite != "all") {
    throw InputError("--suite must be losses, fitter or all");
  }
  GradcheckOptions opt;
  opt.cases = a.cases;
  opt.corrupt = a.corrupt;
  const auto rows = run_gradchecks(a.suite, c.seed, opt);
  std::string csv = "suite,check,cases,max_rel_error,passed\n";
  std::vector<std::string> failed;
  for (const auto& r : rows) {
    csv += r.suite + "," + r.name + "," + std::to_string(r.cases) + "," + num(r.max_rel_error) + "," +
           (r.passed ? "true" : "false") + "\n";
    if (!r.passed) failed.push_back(r.name);
  }
  if (!c.out.empty()) write_file_atomic(c.out, csv);
  if (!c.quiet || c.out.empty()) std::cout << csv;
  if (!failed.empty()) {
    std::cerr << "gradient check failed:";
    for (const auto& f : failed) std::cerr << " " << f;
    std::cerr << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"speccam: camera-aware body fitting tools"};
  app.require_subcommand(1);

  Common common;
  SynthArgs synth;
  FitArgs fit;
  EvalArgs eval;
  SensitivityArgs sens;
  GradcheckArgs grad;

  auto* s = app.add_subcommand("synth", "Render perspective crops with camera labels from a panorama");
  s->add_option("--pano", synth.pano, "Panorama PPM file or procedural:checker|hemisphere|gradient")->required();
  s->add_option("--count", synth.count, "Number of crops")->capture_default_str();
  s->add_option("--dist", synth.dist, "Camera distribution: pano360 or specsyn")->capture_default_str();
  s->add_option("--width", synth.width, "Crop width")->capture_default_str();
  s->add_option("--height", synth.height, "Crop height")->capture_default_str();
  add_common(s, common);

  auto* f = app.add_subcommand("fit", "Fit the body model to 2D keypoints");
  f->add_option("--problem", fit.problem, "Problem JSON")->required();
  f->add_option("--camera", fit.camera, "gt, f5000, f2200 or file:PATH")->capture_default_str();
  f->add_flag("--multi", fit.multi, "Multi-frame problem");
  f->add_option("--steps", fit.steps, "Optimizer steps per stage")->capture_default_str();
  f->add_option("--step-size", fit.step_size, "Optimizer step size")->capture_default_str();
  add_common(f, common);

  auto* e = app.add_subcommand("eval", "Joint-error metrics with optional bucketing");
  e->add_option("--samples", eval.samples, "Samples JSON")->required();
  e->add_option("--buckets", eval.buckets, "Bucket edges JSON");
  e->add_option("--root-align", eval.root_align, "Root alignment for W-MPJPE: on or off")->capture_default_str();
  add_common(e, common);

  auto* n = app.add_subcommand("sensitivity", "W-MPJPE of refits under scaled focal lengths (CSV)");
  n->add_option("--trials", sens.trials, "Synthetic bodies")->capture_default_str();
  n->add_option("--factors", sens.factors, "Comma-separated focal factors")->capture_default_str();
  add_common(n, common);

  auto* g = app.add_subcommand("gradcheck", "Finite-difference checks of all gradients");
  g->add_option("--suite", grad.suite, "losses, fitter or all")->capture_default_str();
  g->add_option("--cases", grad.cases, "Random cases per check")->capture_default_str();
  g->add_option("--corrupt", grad.corrupt)->group("");  // negative-control hook
  add_common(g, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err) == 0 ? 0 : 1;
  }

  try {
    if (*s) return run_synth(synth, common);
    if (*f) return run_fit(fit, common);
    if (*e) return run_eval(eval, common);
    if (*n) return run_sensitivity(sens, common);
    if (*g) return run_gradcheck(grad, common);
  } catch (const InputError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const SchemaError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const IoError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const DomainError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const ShapeError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const BehindCameraError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "internal error: " << err.what() << "\n";
    return 2;
  }
  return 2;
}
