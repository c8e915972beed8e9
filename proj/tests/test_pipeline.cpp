#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "sheetwarp/pipeline.hpp"
#include "sheetwarp/simworld.hpp"

using namespace sheetwarp;

namespace {

const PinholeIntrinsics kCam = PinholeIntrinsics::from_hfov(160, 96, 50.0);

Frame scene_frame(std::uint64_t seed) {
  const Scene s = make_scene(seed);
  Frame f = render_frame(s, forward_camera_pose(1.5), kCam, "f");
  f.lidar = sample_lidar(s, f.pose, kCam, 4000, seed);
  return f;
}

}  // namespace

TEST_CASE("transformed_count rounds half up") {
  CHECK(transformed_count(0.5, 1000) == 500);
  CHECK(transformed_count(0.5, 5) == 3);
  CHECK(transformed_count(0.25, 2) == 1);
  CHECK(transformed_count(0.0, 9) == 0);
  CHECK(transformed_count(1.0, 9) == 9);
  CHECK(transformed_count(0.3, 0) == 0);
}

TEST_CASE("select_transformed draws without replacement") {
  const auto a = select_transformed(1000, 0.5, 3);
  CHECK(a.size() == 500);
  CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 500);
  CHECK(std::is_sorted(a.begin(), a.end()));
  CHECK(a.back() < 1000);
  CHECK(a == select_transformed(1000, 0.5, 3));
  CHECK_FALSE(a == select_transformed(1000, 0.5, 4));
  CHECK(select_transformed(10, 0, 1).empty());
  CHECK(select_transformed(10, 1, 1).size() == 10);
  // smaller ratios select a prefix of the same permutation
  const auto small = select_transformed(1000, 0.2, 3);
  CHECK(small.size() == 200);
  for (std::size_t i : small) CHECK(std::binary_search(a.begin(), a.end(), i));
  MixPlan bad;
  bad.ratio = 1.5;
  CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("perturbation_id") {
  CHECK(perturbation_id({-10, 0, 0.2, 0}) == "pitch-10_yaw0_height0.2_depth0");
}

TEST_CASE("parse_bounds") {
  const auto b = parse_bounds("pitch:-5:5,yaw:-10:12");
  CHECK(b.lo.d_pitch == -5);
  CHECK(b.hi.d_pitch == 5);
  CHECK(b.lo.d_yaw == -10);
  CHECK(b.hi.d_yaw == 12);
  CHECK(parse_bounds("pitch:0:0,yaw:0:0,height:0:1").hi.d_height == 1);
  CHECK_THROWS_AS(parse_bounds("pitch:5:-5,yaw:0:0"), InputError);
  CHECK_THROWS_AS(parse_bounds("roll:0:1"), InputError);
  CHECK_THROWS_AS(parse_bounds("pitch:0"), InputError);
}

TEST_CASE("extrinsic_augment") {
  const RigPose rig = forward_camera_pose(1.5);
  Box3D b;
  b.center = Vec3(20, 3, 0.8);
  b.dims = Vec3(4.3, 1.85, 1.6);
  b.yaw = 0.3;
  const std::vector<OrientedBox3D> boxes{OrientedBox3D::from_box(b)};

  const auto id = extrinsic_augment(rig, boxes, parse_bounds("pitch:0:0,yaw:0:0"), 5);
  CHECK((id.rig.rotation - rig.rotation).norm() <= 1e-15);
  CHECK((id.rig.translation - rig.translation).norm() == 0);
  CHECK((id.boxes[0].center - boxes[0].center).norm() <= 1e-12);

  const auto bounds = parse_bounds("pitch:-5:5,yaw:-10:10");
  const auto a = extrinsic_augment(rig, boxes, bounds, 7), a2 = extrinsic_augment(rig, boxes, bounds, 7);
  CHECK(a.sampled == a2.sampled);
  CHECK(a.rig.rotation == a2.rig.rotation);
  CHECK(std::abs(a.sampled.d_pitch) <= 5);
  CHECK(std::abs(a.sampled.d_yaw) <= 10);
  CHECK((a.delta * a.delta.transpose() - Mat3::Identity()).norm() <= 1e-12);
  CHECK(a.rig.translation == rig.translation);

  // +5 deg pitch: corners keep their camera-frame coordinates
  const auto up = extrinsic_augment(rig, boxes, parse_bounds("pitch:5:5,yaw:0:0"), 1);
  const auto c0 = boxes[0].corners(), c1 = up.boxes[0].corners();
  for (int i = 0; i < 8; ++i) CHECK((rig.to_camera(c0[i]) - up.rig.to_camera(c1[i])).norm() <= 1e-9);
  CHECK(up.rig.rotation.col(2).z() > rig.rotation.col(2).z());
}

TEST_CASE("source_star_swap") {
  DatasetManifest m;
  m.rig.extrinsic = forward_camera_pose(1.5);
  for (int i = 0; i < 4; ++i) {
    FrameRecord r;
    r.id = "f" + std::to_string(i);
    r.pose = perturb_rig(m.rig.extrinsic, {double(i), 0, 0, 0});
    m.frames.push_back(r);
  }
  const RigPose train = forward_camera_pose(2.0);
  const auto s = source_star_swap(m, train);
  REQUIRE(s.frames.size() == 4);
  CHECK(s.provenance_counts().at("source-star") == 4);
  for (const auto& f : s.frames) CHECK(f.pose.translation == train.translation);
  CHECK(s.frames[2].id == "f2");
  const auto same = source_star_swap(m, m.rig.extrinsic);
  CHECK(same.frames[0].pose.rotation == m.frames[0].pose.rotation);
}

TEST_CASE("transform_frame with a zero perturbation reproduces the frame") {
  const Frame f = scene_frame(21);
  const TransformResult r = transform_frame(f, {});
  CHECK(r.coverage >= 0.99);
  CHECK_FALSE(r.flagged);
  const double l1 = oracle::naive_l1(r.frame.image, f.image, r.frame.coverage);
  MESSAGE("identity L1 " << l1);
  CHECK(l1 <= 2.0 / 255);
  CHECK(r.frame.pose.translation == f.pose.translation);
  CHECK(r.frame.boxes.size() == f.boxes.size());
}

TEST_CASE("transform_frame to a raised rig") {
  const Frame f = scene_frame(22);
  const TransformResult r = transform_frame(f, {0, 0, 0.8, 0});
  MESSAGE("coverage " << r.coverage);
  CHECK(r.coverage >= 0.4);
  CHECK(r.frame.pose.translation.z() == doctest::Approx(2.3));
  const TransformResult r2 = transform_frame(f, {0, 0, 0.8, 0});
  CHECK(r2.frame.image.data() == r.frame.image.data());

  TransformConfig cfg;
  cfg.coverage_floor = 1.0;
  CHECK(transform_frame(f, {-10, 0, 0, 0}, cfg).flagged);
  cfg = {};
  cfg.grid_w = 1;
  CHECK_THROWS_AS(cfg.validate(), InputError);
}

TEST_CASE("f-theta frames are rectified into the output model") {
  const auto fish = FThetaIntrinsics::equidistant(320, 192, 120);
  CHECK(output_intrinsics(fish) == PinholeIntrinsics::from_hfov(320, 192, 50));
  CHECK(output_intrinsics(kCam) == kCam);
  const Scene s = make_scene(23);
  const Frame f = render_frame(s, forward_camera_pose(1.5), fish, "ff");
  const Frame r = rectify_frame(f, output_intrinsics(fish));
  CHECK(std::holds_alternative<PinholeIntrinsics>(r.camera));
  CHECK(r.image.width() == 320);
  CHECK(oracle::fraction(r.coverage) > 0.99);
}
