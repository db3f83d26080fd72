#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "speccam/serialization.hpp"

using namespace speccam;
using namespace speccam::schema;

namespace {

std::string schema_message(const std::function<void()>& f) {
  try {
    f();
  } catch (const SchemaError& e) {
    return e.what();
  }
  return "";
}

json rest_keypoints(const Intrinsics& k, const Eigen::Matrix3d& rb, const Eigen::Vector3d& tb) {
  const SkeletonTemplate t = default_template();
  BodyParams p = rest_params(t);
  p.rb = rb;
  const Points2 px = project(forward_kinematics(t, p), k, Eigen::Matrix3d::Identity(), tb);
  json kp = json::array();
  for (const auto& q : px) kp.push_back({q.x(), q.y(), 1.0});
  return kp;
}

}  // namespace

TEST(CameraFromJson, VfovForm) {
  const CameraSpec c = camera_from_json(
      json::parse(R"({"pitch_deg": 10, "roll_deg": 5, "vfov_deg": 90, "width": 640, "height": 480})"));
  EXPECT_DOUBLE_EQ(c.intrinsics.fy, 240.0);
  EXPECT_DOUBLE_EQ(c.intrinsics.fx, 240.0);
  EXPECT_DOUBLE_EQ(c.intrinsics.ox, 320.0);
  EXPECT_DOUBLE_EQ(c.intrinsics.oy, 240.0);
  EXPECT_DOUBLE_EQ(c.angles.yaw, 0.0);
  EXPECT_LT((c.rotation() - angles_to_rotation({deg2rad(10.0), deg2rad(5.0), 0.0, 1.0})).norm(), 1e-15);
}

TEST(CameraFromJson, FocalForm) {
  const CameraSpec c = camera_from_json(json::parse(
      R"({"pitch_deg": 0, "roll_deg": 0, "yaw_deg": 30, "fx": 1000, "fy": 1100, "oy": 200, "width": 800, "height": 400})"));
  EXPECT_DOUBLE_EQ(c.intrinsics.fx, 1000.0);
  EXPECT_DOUBLE_EQ(c.intrinsics.fy, 1100.0);
  EXPECT_DOUBLE_EQ(c.intrinsics.ox, 400.0);
  EXPECT_DOUBLE_EQ(c.intrinsics.oy, 200.0);
  EXPECT_NEAR(c.angles.vfov, 2.0 * std::atan(200.0 / 1100.0), 1e-15);
  EXPECT_NEAR(rad2deg(c.angles.yaw), 30.0, 1e-12);
}

TEST(CameraFromJson, ErrorsNameTheField) {
  EXPECT_NE(schema_message([] { camera_from_json(json::parse(R"({"roll_deg": 0, "width": 1, "height": 1})")); })
                .find("pitch_deg"),
            std::string::npos);
  EXPECT_NE(schema_message([] {
              camera_from_json(json::parse(R"({"pitch_deg": "x", "roll_deg": 0, "vfov_deg": 60, "width": 4, "height": 4})"));
            }).find("pitch_deg"),
            std::string::npos);
  EXPECT_FALSE(schema_message([] {
                 camera_from_json(json::parse(R"({"pitch_deg": 0, "roll_deg": 0, "vfov_deg": 190, "width": 4, "height": 4})"));
               }).empty());
}

TEST(TemplateJson, RoundTrip) {
  const SkeletonTemplate t = default_template();
  const SkeletonTemplate back = template_from_json(to_json(t));
  EXPECT_EQ(back.parent, t.parent);
  EXPECT_EQ(back.names, t.names);
  for (std::size_t i = 0; i < t.joint_count(); ++i) EXPECT_EQ(back.rest_offset[i], t.rest_offset[i]);

  const SkeletonTemplate minimal =
      template_from_json(json::parse(R"({"parents": [-1, 0, 1], "offsets": [[0,0,0],[0,1,0],[0,1,0]]})"));
  EXPECT_EQ(minimal.names[2], "joint2");
  EXPECT_THROW(template_from_json(json::parse(R"({"parents": [-1, 2, 1], "offsets": [[0,0,0],[0,1,0],[0,1,0]]})")),
               SchemaError);
  EXPECT_THROW(template_from_json(json::parse(R"({"parents": [-1, 0], "offsets": [[0,0,0]]})")), SchemaError);
}

TEST(ParamsJson, RoundTripAndAngleForm) {
  const SkeletonTemplate t = default_template();
  BodyParams p = rest_params(t);
  p.theta[3] = Eigen::Vector3d(0.1, -0.2, 0.3);
  p.beta[4] = 0.05;
  p.rb = angles_to_rotation({0.3, -0.1, 1.2, 1.0});
  p.tb = Eigen::Vector3d(0.5, -0.25, 4.0);
  const BodyParams back = params_from_json(to_json(p), t);
  EXPECT_EQ(back.theta[3], p.theta[3]);
  EXPECT_EQ(back.beta, p.beta);
  EXPECT_EQ(back.rb, p.rb);
  EXPECT_EQ(back.tb, p.tb);

  json angles = json::object();
  angles["rb_angles_deg"] = {rad2deg(0.3), rad2deg(-0.1), rad2deg(1.2)};
  EXPECT_LT((params_from_json(angles, t).rb - p.rb).norm(), 1e-12);

  json bad = to_json(p);
  bad["beta"] = {1.0, 2.0};
  EXPECT_THROW(params_from_json(bad, t), SchemaError);
  bad = to_json(p);
  bad["rb"] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 2}};
  EXPECT_THROW(params_from_json(bad, t), SchemaError);
}

TEST(KeypointsJson, ParsesAndValidates) {
  const JointSet2D kp = keypoints_from_json(json::parse("[[1, 2, 0.5], [3, 4, 1]]"));
  ASSERT_EQ(kp.coords.size(), 2u);
  EXPECT_EQ(kp.coords[1], Eigen::Vector2d(3, 4));
  EXPECT_EQ(kp.confidence[0], 0.5);
  EXPECT_NE(schema_message([] { keypoints_from_json(json::parse("[[1, 2, 0.5], [3, 4]]")); }).find("keypoints[1]"),
            std::string::npos);
  EXPECT_THROW(keypoints_from_json(json::parse("[[1, 2, 1.5]]")), SchemaError);
  EXPECT_THROW(keypoints_from_json(json::parse("{}")), SchemaError);
}

TEST(DefaultInit, PlacesBodyInFrontOfCamera) {
  const Intrinsics k{1000, 1000, 640, 360};
  const Eigen::Matrix3d upright = rot_x(std::numbers::pi);
  const json kp = rest_keypoints(k, upright, Eigen::Vector3d(0.3, 0.1, 6.0));
  const BodyParams p = default_init(default_template(), keypoints_from_json(kp), k, Eigen::Matrix3d::Identity());
  EXPECT_EQ(p.rb, upright);
  // A 1.7 m tall rest body at 6 m: the bounding-box depth estimate is exact
  // up to the small depth spread of the joints.
  EXPECT_NEAR(p.tb.z(), 6.0, 0.1);
  EXPECT_GT(p.tb.z(), 0.0);
}

TEST(ProblemFile, ParsesAndBuildsFitProblem) {
  const Intrinsics k = intrinsics_from_vfov(deg2rad(60.0), {1280, 720});
  json j;
  j["camera"] = {{"pitch_deg", 5}, {"roll_deg", 0}, {"vfov_deg", 60}, {"width", 1280}, {"height", 720}};
  j["keypoints"] = rest_keypoints(k, rot_x(std::numbers::pi), Eigen::Vector3d(0, 0, 5));
  const ProblemFile f = problem_file_from_json(j);
  EXPECT_FALSE(f.init.has_value());
  const FitProblem p = make_fit_problem(f, f.camera.intrinsics, f.camera.rotation());
  EXPECT_NO_THROW(validate(p));
  EXPECT_EQ(p.observed.coords.size(), 17u);

  j["keypoints"].erase(0);
  EXPECT_NE(schema_message([&] { problem_file_from_json(j); }).find("problem.keypoints"), std::string::npos);
}

TEST(MultiframeJson, ParsesFrames) {
  const Intrinsics k = intrinsics_from_vfov(deg2rad(60.0), {640, 480});
  json frame;
  frame["camera"] = {{"pitch_deg", 180}, {"roll_deg", 0}, {"vfov_deg", 60}, {"width", 640}, {"height", 480}};
  frame["keypoints"] = rest_keypoints(k, rot_x(std::numbers::pi), Eigen::Vector3d(0, 0, 5));
  frame["init_tc"] = {0, 0, 5};
  json j;
  j["frames"] = {frame, frame};
  j["presented_theta"] = to_json(Points3(17, Eigen::Vector3d::Zero()));
  j["target_height"] = 1.7;
  const MultiFrameProblem p = multiframe_from_json(j);
  ASSERT_EQ(p.frames.size(), 2u);
  EXPECT_NEAR(p.frames[1].init_camera.pitch, std::numbers::pi, 1e-15);
  EXPECT_EQ(p.frames[1].init_camera.tc, Eigen::Vector3d(0, 0, 5));
  EXPECT_TRUE(p.init_beta.empty());

  j["frames"][1].erase("init_tc");
  EXPECT_NE(schema_message([&] { multiframe_from_json(j); }).find("problem.frames[1]"), std::string::npos);
  j["frames"] = json::array();
  EXPECT_THROW(multiframe_from_json(j), SchemaError);
}

TEST(SamplesJson, BothFramesAndWrapping) {
  const json s = json::parse(R"([
    {"pred": [[0,0,0],[1,0,0],[0,1,0]], "gt": [[0,0,0],[1,0,0],[0,1,0]], "pred_frame": "world",
     "focal_px": 1000, "pitch_deg": 5},
    {"pred": [[0,0,0],[1,0,0],[0,1,0]], "gt": [[0,0,0],[1,0,0],[0,1,0]], "pred_frame": "camera",
     "est_rc_angles_deg": [10, 0, 0], "focal_px": 2000, "pitch_deg": -5}
  ])");
  const auto samples = samples_from_json(s);
  ASSERT_EQ(samples.size(), 2u);
  EXPECT_EQ(samples[0].frame, PredictionFrame::kWorld);
  EXPECT_EQ(samples[1].frame, PredictionFrame::kCamera);
  EXPECT_LT((*samples[1].estimated_rc - rot_x(deg2rad(10.0))).norm(), 1e-15);
  EXPECT_EQ(samples_from_json(json{{"samples", s}}).size(), 2u);

  json bad = s;
  bad[1].erase("est_rc_angles_deg");
  EXPECT_NE(schema_message([&] { samples_from_json(bad); }).find("sample 1"), std::string::npos);
  bad = s;
  bad[0]["pred_frame"] = "body";
  EXPECT_THROW(samples_from_json(bad), SchemaError);
  bad = s;
  bad[0]["gt"].erase(0);
  EXPECT_THROW(samples_from_json(bad), SchemaError);
}

TEST(BucketsJson, ParsesAndValidates) {
  const BucketSpec b = buckets_from_json(json::parse(R"({"focal_edges": [0, 1000, 5000], "pitch_edges": [-30, 0, 30]})"));
  EXPECT_EQ(b.focal_edges.size(), 3u);
  EXPECT_THROW(buckets_from_json(json::parse(R"({"focal_edges": [5, 1], "pitch_edges": [0, 1]})")), SchemaError);
  EXPECT_THROW(buckets_from_json(json::parse(R"({"focal_edges": [0, 1]})")), SchemaError);

  const json row = to_json(BucketRow{"[0,1)", 0.0, 1.0, 0, std::nullopt});
  EXPECT_TRUE(row.at("mean").is_null());
  EXPECT_EQ(row.at("count"), 0);
}

TEST(FitResultJson, CarriesStagesAndCameras) {
  FitResult r;
  r.params = rest_params(default_template());
  StageReport s;
  s.name = "shape";
  s.trace = {3.0, 2.0};
  s.best.total = 2.0;
  s.best_iteration = 1;
  r.stages.push_back(s);
  r.cameras.push_back({0.1, 0.0, 0.0, Eigen::Vector3d(0, 0, 4)});
  const json j = to_json(r);
  EXPECT_EQ(j.at("stages")[0].at("name"), "shape");
  EXPECT_EQ(j.at("stages")[0].at("trace").size(), 2u);
  EXPECT_EQ(j.at("stages")[0].at("best").at("total"), 2.0);
  EXPECT_NEAR(j.at("cameras")[0].at("pitch_deg").get<double>(), rad2deg(0.1), 1e-12);
  EXPECT_EQ(j.at("params").at("theta").size(), 17u);
}
