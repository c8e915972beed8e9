#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sheetwarp/random.hpp"
#include "sheetwarp/simworld.hpp"

using namespace sheetwarp;

namespace {

// Slab test in the box frame; returns +inf on a miss.
double ray_box(const Box3D& b, const Vec3& o, const Vec3& d) {
  const Mat3 r = rot_z(b.yaw);
  const Vec3 lo = r.transpose() * (o - b.center), ld = r.transpose() * d;
  double t0 = -1e300, t1 = 1e300;
  for (int a = 0; a < 3; ++a) {
    const double h = 0.5 * b.dims[a];
    if (std::abs(ld[a]) < 1e-15) {
      if (std::abs(lo[a]) > h) return INFINITY;
      continue;
    }
    double ta = (-h - lo[a]) / ld[a], tb = (h - lo[a]) / ld[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return (t0 <= t1 && t0 > 0) ? t0 : INFINITY;
}

bool inside_footprint(const Box3D& b, double x, double y) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double dx = x - b.center.x(), dy = y - b.center.y();
  const double u = c * dx + s * dy, v = -s * dx + c * dy;
  return std::abs(u) <= 0.5 * b.dims.x() && std::abs(v) <= 0.5 * b.dims.y();
}

RigPose looking_down(double h) {
  RigPose p;
  p.rotation.col(0) = Vec3(0, -1, 0);
  p.rotation.col(1) = Vec3(-1, 0, 0);
  p.rotation.col(2) = Vec3(0, 0, -1);
  p.translation = Vec3(10, 0, h);
  return p;
}

}  // namespace

TEST_CASE("make_scene") {
  const Scene a = make_scene(7), b = make_scene(7);
  CHECK(a.boxes == b.boxes);
  CHECK(a.palette_index == b.palette_index);
  CHECK(a.boxes.size() == 7);
  CHECK(make_scene(7, 0).boxes.empty());
  CHECK_FALSE(make_scene(8).boxes == a.boxes);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scene s = make_scene(seed);
    for (std::size_t i = 0; i < s.boxes.size(); ++i) {
      const Box3D& bi = s.boxes[i];
      CHECK(bi.center.z() - 0.5 * bi.dims.z() >= 0.0);
      CHECK(bi.center.x() > 0);
      CHECK(bi.center.x() <= 42.0);
      for (std::size_t j = i + 1; j < s.boxes.size(); ++j) {
        // footprints do not overlap: no corner of one inside the other
        const auto cj = OrientedBox3D::from_box(s.boxes[j]).corners();
        for (const Vec3& c : cj) CHECK_FALSE(inside_footprint(bi, c.x(), c.y()));
      }
    }
  }
  CHECK_THROWS_AS(make_scene(1, -1), InputError);
  CHECK_THROWS_AS(make_scene(1, 400, 10.0), GeometryError);
}

TEST_CASE("palette colors are far apart and far from ground and sky") {
  const auto& pal = vehicle_palette();
  REQUIRE(pal.size() >= 7);
  auto dist = [](const Rgb& a, const Rgb& b) {
    return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
  };
  for (std::size_t i = 0; i < pal.size(); ++i)
    for (std::size_t j = i + 1; j < pal.size(); ++j) CHECK(dist(pal[i], pal[j]) > 0.3);
  const Scene s = make_scene(1);
  Rng rng(1);
  for (int n = 0; n < 2000; ++n) {
    const Rgb g = ground_color(s, rng.uniform(-50, 50), rng.uniform(-50, 50));
    const Rgb sky = sky_color(Vec3(1, rng.uniform(-1, 1), rng.uniform(0, 2)).normalized());
    for (const Rgb& p : pal) {
      CHECK(dist(p, g) > 0.3);
      CHECK(dist(p, sky) > 0.3);
    }
  }
}

TEST_CASE("looking straight down at the ground gives constant depth") {
  const auto k = PinholeIntrinsics::from_hfov(64, 48, 40);
  const SceneRender r = render_scene(make_scene(1, 0), looking_down(3.0), k);
  for (double v : r.depth.data()) CHECK(v == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(count_set(r.sky) == 0);
}

TEST_CASE("render_scene depth equals independent ray casting") {
  const auto k = PinholeIntrinsics::from_hfov(160, 96, 50);
  const Scene s = make_scene(3);
  const RigPose pose = perturb_rig(forward_camera_pose(1.5), {-3, 4, 0.2, 0});
  const SceneRender r = render_scene(s, pose, k);
  double worst = 0;
  int box_px = 0;
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x) {
      const Vec3 ray((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
      const Vec3 d = pose.rotation * ray, o = pose.translation;
      double best = INFINITY;
      int obj = -1;
      for (std::size_t b = 0; b < s.boxes.size(); ++b) {
        const double t = ray_box(s.boxes[b], o, d);
        if (t < best) best = t, obj = static_cast<int>(b);
      }
      if (d.z() < 0 && -o.z() / d.z() < best) best = -o.z() / d.z(), obj = -1;
      if (!std::isfinite(best) || (obj == -1 && best > kGroundHorizon)) {
        CHECK(r.sky.at(x, y) == 1);
        CHECK(r.depth.at(x, y) == 0.0);
        continue;
      }
      CHECK(r.object.at(x, y) == obj);
      box_px += obj >= 0;
      worst = std::max(worst, std::abs(r.depth.at(x, y) - best));
    }
  CHECK(box_px > 100);
  CHECK(worst <= 1e-9);
}

TEST_CASE("f-theta and pinhole renders agree after rectification") {
  // the fisheye is rendered finely so its resampling blur stays below the pinhole pixel
  const auto fish = FThetaIntrinsics::equidistant(1280, 768, 120);
  const auto pin = PinholeIntrinsics::from_hfov(320, 192, 50);
  const Scene s = make_scene(4);
  const RigPose pose = forward_camera_pose(1.5);
  SceneRenderOptions opt;
  opt.supersample = 4;
  const SceneRender rf = render_scene(s, pose, fish, opt), rp = render_scene(s, pose, pin, opt);
  const RectifiedImage rect = rectify(rf.image, fish, pin);
  const double l1 = oracle::naive_l1(rect.image, rp.image, rect.valid);
  MESSAGE("mean L1 " << l1 << " on " << oracle::fraction(rect.valid));
  CHECK(oracle::fraction(rect.valid) > 0.99);
  CHECK(l1 <= 2.0 / 255);
}

TEST_CASE("sample_lidar") {
  const auto k = PinholeIntrinsics::from_hfov(160, 96, 50);
  const RigPose pose = forward_camera_pose(1.5);
  const auto ground = sample_lidar(make_scene(1, 0), pose, k, 3000, 5);
  CHECK(ground.size() > 1000);
  for (const Vec3& p : ground) CHECK(std::abs(p.z()) <= 1e-9);
  const Scene s = make_scene(5);
  const auto a = sample_lidar(s, pose, k, 3000, 9), b = sample_lidar(s, pose, k, 3000, 9);
  CHECK(a == b);
  CHECK_FALSE(a == sample_lidar(s, pose, k, 3000, 10));
  // every point lies on some surface
  for (const Vec3& p : a) {
    const auto hit = intersect(s, pose.translation, p - pose.translation);
    REQUIRE(hit);
    CHECK(hit->t == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("bev_groundtruth") {
  BevSpec spec;
  CHECK(bev_groundtruth(make_scene(1, 0), spec).count() == 0);

  BevSpec small{10, 10, 0.5};
  Scene one;
  Box3D b;
  b.center = Vec3(3, 0, 0.5);
  b.dims = Vec3(2, 2, 1);
  one.boxes.push_back(b);
  one.palette_index.push_back(0);
  const BevGrid g = bev_groundtruth(one, small);
  CHECK(g.count() == 16);
  for (int ix = 4; ix < 8; ++ix)
    for (int iy = 8; iy < 12; ++iy) CHECK(g.at(ix, iy) == 1);
}

TEST_CASE("rotated footprints match a 16x supersampled rasterization") {
  Rng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    Scene sc;
    Box3D b;
    b.center = Vec3(rng.uniform(15, 35), rng.uniform(-10, 10), 0.8);
    b.dims = Vec3(rng.uniform(8, 10), rng.uniform(4, 5), 1.6);
    b.yaw = rng.uniform(-kPi, kPi);
    sc.boxes.push_back(b);
    sc.palette_index.push_back(0);
    const BevSpec spec;
    const BevGrid g = bev_groundtruth(sc, spec);
    int oracle_cells = 0, disagree = 0;
    for (int ix = 0; ix < g.nx; ++ix)
      for (int iy = 0; iy < g.ny; ++iy) {
        int in = 0;
        for (int sy = 0; sy < 16; ++sy)
          for (int sx = 0; sx < 16; ++sx) {
            const double x = (ix + (sx + 0.5) / 16) * spec.resolution;
            const double y = -0.5 * spec.width + (iy + (sy + 0.5) / 16) * spec.resolution;
            in += inside_footprint(b, x, y);
          }
        const bool o = in > 128;
        oracle_cells += o;
        disagree += o != (g.at(ix, iy) != 0);
      }
    CHECK(oracle_cells > 400);
    CHECK(disagree <= 0.01 * oracle_cells);
  }
}

TEST_CASE("render_frame carries boxes, sky and exact depth") {
  const auto k = PinholeIntrinsics::from_hfov(160, 96, 50);
  const Scene s = make_scene(6);
  const Frame f = render_frame(s, forward_camera_pose(1.5), k, "f0");
  CHECK(f.id == "f0");
  CHECK(f.boxes.size() == s.boxes.size());
  CHECK(f.lidar.empty());
  CHECK(count_set(f.sky) > 0);
  for (std::size_t i = 0; i < f.depth.pixel_count(); ++i) CHECK((f.depth.data()[i] > 0) == (f.sky.data()[i] == 0));
}
