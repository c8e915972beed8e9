#include "sheetwarp/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sheetwarp/parallel.hpp"
#include "sheetwarp/random.hpp"

namespace sheetwarp {

OrientedBox3D OrientedBox3D::from_box(const Box3D& b) { return {b.center, b.dims, rot_z(b.yaw)}; }

std::array<Vec3, 8> OrientedBox3D::corners() const {
  std::array<Vec3, 8> c;
  for (int k = 0; k < 8; ++k) {
    const Vec3 s((k & 1) ? 0.5 : -0.5, (k & 2) ? 0.5 : -0.5, (k & 4) ? 0.5 : -0.5);
    c[k] = center + rotation * s.cwiseProduct(dims);
  }
  return c;
}

const std::vector<Rgb>& vehicle_palette() {
  static const std::vector<Rgb> palette = {
      {0.86, 0.12, 0.10}, {0.12, 0.70, 0.18}, {0.92, 0.82, 0.10}, {0.82, 0.12, 0.72},
      {0.95, 0.48, 0.05}, {0.42, 0.10, 0.70}, {0.05, 0.55, 0.50}, {0.08, 0.12, 0.55},
  };
  return palette;
}

Scene make_scene(std::uint64_t seed, int n_boxes, double extent) {
  if (n_boxes < 0) throw InputError("make_scene: n_boxes must be >= 0");
  if (!(extent > 4.0)) throw InputError("make_scene: extent must exceed 4 m");
  Scene s;
  s.seed = seed;
  Rng rng(hash_combine(seed, 0x5ce9e));
  const double x_lo = 0.465 * extent;
  std::vector<double> radius;
  for (int b = 0; b < n_boxes; ++b) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      Box3D box;
      box.dims = Vec3(rng.uniform(3.8, 4.8), rng.uniform(1.7, 2.0), rng.uniform(1.4, 1.7));
      const double x = rng.uniform(x_lo, extent);
      const double half_lat = std::max(0.0, 0.4 * x - 1.2);
      const double y = rng.uniform(-half_lat, half_lat);
      box.yaw = rng.uniform(-0.3, 0.3);
      box.center = Vec3(x, y, 0.5 * box.dims.z());
      const double r = 0.5 * std::hypot(box.dims.x(), box.dims.y()) + 0.3;
      bool clear = true;
      for (std::size_t k = 0; k < s.boxes.size() && clear; ++k)
        clear = (s.boxes[k].center.head<2>() - box.center.head<2>()).norm() > r + radius[k];
      if (!clear) continue;
      s.boxes.push_back(box);
      s.palette_index.push_back(b % static_cast<int>(vehicle_palette().size()));
      radius.push_back(r);
      placed = true;
    }
    if (!placed) throw GeometryError("make_scene: cannot place box " + std::to_string(b) + " without overlap");
  }
  return s;
}

namespace {

double lattice_value(std::uint64_t seed, std::int64_t ix, std::int64_t iy, std::uint64_t octave) {
  const std::uint64_t h =
      hash_combine(hash_combine(hash_combine(seed, octave), static_cast<std::uint64_t>(ix)), static_cast<std::uint64_t>(iy));
  return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

double value_noise(std::uint64_t seed, double x, double y, double cell, std::uint64_t octave) {
  const double gx = x / cell, gy = y / cell;
  const double fx = std::floor(gx), fy = std::floor(gy);
  const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy);
  double tx = gx - fx, ty = gy - fy;
  tx = tx * tx * (3 - 2 * tx);
  ty = ty * ty * (3 - 2 * ty);
  const double v00 = lattice_value(seed, ix, iy, octave), v10 = lattice_value(seed, ix + 1, iy, octave);
  const double v01 = lattice_value(seed, ix, iy + 1, octave), v11 = lattice_value(seed, ix + 1, iy + 1, octave);
  return (v00 * (1 - tx) + v10 * tx) * (1 - ty) + (v01 * (1 - tx) + v11 * tx) * ty;
}

bool intersect_box(const Box3D& b, const Vec3& o, const Vec3& d, double& t_hit) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const Vec3 rel = o - b.center;
  const Vec3 lo(c * rel.x() + s * rel.y(), -s * rel.x() + c * rel.y(), rel.z());
  const Vec3 ld(c * d.x() + s * d.y(), -s * d.x() + c * d.y(), d.z());
  double tmin = -std::numeric_limits<double>::infinity(), tmax = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double half = 0.5 * b.dims[a];
    if (ld[a] == 0.0) {
      if (std::abs(lo[a]) > half) return false;
      continue;
    }
    double t0 = (-half - lo[a]) / ld[a], t1 = (half - lo[a]) / ld[a];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
  }
  if (tmax < tmin || !(tmin > 0)) return false;
  t_hit = tmin;
  return true;
}

Rgb shade(const Scene& scene, const Vec3& o, const Vec3& d) {
  const auto hit = intersect(scene, o, d);
  if (!hit) return sky_color(d);
  if (hit->object >= 0) return vehicle_palette()[scene.palette_index[hit->object]];
  const Vec3 p = o + hit->t * d;
  return ground_color(scene, p.x(), p.y());
}

}  // namespace

Rgb ground_color(const Scene& scene, double x, double y) {
  const bool odd = ((static_cast<std::int64_t>(std::floor(x)) + static_cast<std::int64_t>(std::floor(y))) & 1) != 0;
  double g = odd ? 0.56 : 0.48;
  g += 0.06 * value_noise(scene.seed, x, y, 0.5, 1) + 0.05 * value_noise(scene.seed, x, y, 0.17, 2);
  return {g, 0.98 * g, 0.95 * g};
}

Rgb sky_color(const Vec3& dir_world) {
  const double e = dir_world.z() / dir_world.norm();
  const double t = std::clamp(e / 0.4, 0.0, 1.0);
  return {0.80 + (0.38 - 0.80) * t, 0.86 + (0.56 - 0.86) * t, 0.93 + (0.86 - 0.93) * t};
}

std::optional<RayHit> intersect(const Scene& scene, const Vec3& origin, const Vec3& dir) {
  std::optional<RayHit> best;
  if (dir.z() < 0 && origin.z() > 0) {
    const double t = -origin.z() / dir.z();
    if (t <= kGroundHorizon) best = RayHit{t, -1};
  }
  for (std::size_t k = 0; k < scene.boxes.size(); ++k) {
    double t;
    if (intersect_box(scene.boxes[k], origin, dir, t) && (!best || t <= best->t)) best = RayHit{t, static_cast<int>(k)};
  }
  return best;
}

SceneRender render_scene(const Scene& scene, const RigPose& pose, const CameraModel& camera,
                         const SceneRenderOptions& opt) {
  if (opt.supersample < 1) throw InputError("render_scene: supersample must be >= 1");
  const int w = image_width(camera), h = image_height(camera);
  SceneRender out{Image(w, h), DepthMap(w, h), PixelMask(w, h), Raster<int, 1>(w, h, -1)};
  const int n = opt.supersample;
  const Vec3 o = pose.translation;
  parallel_bands(
      h,
      [&](int y0, int y1) {
        for (int y = y0; y < y1; ++y)
          for (int x = 0; x < w; ++x) {
            const Vec3 d = pose.rotation * pixel_ray(camera, Vec2(x, y));
            const auto hit = intersect(scene, o, d);
            if (hit) {
              out.depth.at(x, y) = hit->t;
              out.object.at(x, y) = hit->object;
            } else {
              out.sky.at(x, y) = 1;
            }
            Rgb acc{0, 0, 0};
            for (int sy = 0; sy < n; ++sy)
              for (int sx = 0; sx < n; ++sx) {
                const double ox = (sx + 0.5) / n - 0.5, oy = (sy + 0.5) / n - 0.5;
                const Vec3 ds = (n == 1) ? d : Vec3(pose.rotation * pixel_ray(camera, Vec2(x + ox, y + oy)));
                const Rgb c = shade(scene, o, ds);
                for (int ch = 0; ch < 3; ++ch) acc[ch] += c[ch];
              }
            for (int ch = 0; ch < 3; ++ch) out.image.at(x, y, ch) = acc[ch] / (n * n);
          }
      },
      opt.threads);
  return out;
}

Frame render_frame(const Scene& scene, const RigPose& pose, const CameraModel& camera, const std::string& id,
                   const SceneRenderOptions& opt) {
  SceneRender r = render_scene(scene, pose, camera, opt);
  Frame f;
  f.id = id;
  f.image = std::move(r.image);
  f.depth = std::move(r.depth);
  f.sky = std::move(r.sky);
  f.pose = pose;
  f.camera = camera;
  for (const Box3D& b : scene.boxes) f.boxes.push_back(OrientedBox3D::from_box(b));
  return f;
}

std::vector<Vec3> sample_lidar(const Scene& scene, const RigPose& pose, const CameraModel& camera, int n_rays,
                               std::uint64_t seed) {
  if (n_rays < 1) throw InputError("sample_lidar: n_rays must be >= 1");
  const int w = image_width(camera), h = image_height(camera);
  Rng rng(seed);
  std::vector<Vec3> pts;
  pts.reserve(n_rays);
  for (int k = 0; k < n_rays; ++k) {
    const int x = static_cast<int>(rng.below(w));
    const int y = static_cast<int>(rng.below(h));
    const Vec3 d = pose.rotation * pixel_ray(camera, Vec2(x, y));
    const auto hit = intersect(scene, pose.translation, d);
    if (hit) pts.push_back(pose.translation + hit->t * d);
  }
  return pts;
}

BevGrid bev_groundtruth(const Scene& scene, const BevSpec& spec) {
  BevGrid g(spec);
  for (const Box3D& b : scene.boxes) {
    const double c = std::cos(b.yaw), s = std::sin(b.yaw);
    const double hl = 0.5 * b.dims.x(), hw = 0.5 * b.dims.y();
    // Only scan the footprint's bounding square.
    const double r = std::hypot(hl, hw);
    const int ix0 = std::max(0, static_cast<int>(std::floor((b.center.x() - r) / spec.resolution)));
    const int ix1 = std::min(g.nx - 1, static_cast<int>(std::ceil((b.center.x() + r) / spec.resolution)));
    const int iy0 = std::max(0, static_cast<int>(std::floor((b.center.y() - r + 0.5 * spec.width) / spec.resolution)));
    const int iy1 =
        std::min(g.ny - 1, static_cast<int>(std::ceil((b.center.y() + r + 0.5 * spec.width) / spec.resolution)));
    for (int iy = iy0; iy <= iy1; ++iy)
      for (int ix = ix0; ix <= ix1; ++ix) {
        const Vec2 p = g.cell_center(ix, iy);
        const double dx = p.x() - b.center.x(), dy = p.y() - b.center.y();
        const double lx = c * dx + s * dy, ly = -s * dx + c * dy;
        if (std::abs(lx) <= hl && std::abs(ly) <= hw) g.at(ix, iy) = 1;
      }
  }
  return g;
}

}  // namespace sheetwarp
