#include "sheetwarp/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sheetwarp/parallel.hpp"

namespace sheetwarp {

namespace {

struct ClipVertex {
  Vec3 p;     // target camera frame
  Vec3 attr;  // (source px * zs, source py * zs, zs): linear over the face in 3D
};

/// Screen-space triangle ready for scan conversion.
struct ScreenTri {
  double sx[3], sy[3];
  double inv_z[3];
  Vec3 attr[3];
  double area;
  int xmin, xmax, ymin, ymax;
};

constexpr double kSnap = 1e-9;

double edge(double ax, double ay, double bx, double by, double px, double py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

/// Sutherland-Hodgman against z >= near. Returns the vertex count (0, 3 or 4).
int clip_near(const ClipVertex in[3], double near, ClipVertex out[4]) {
  int n = 0;
  for (int k = 0; k < 3; ++k) {
    const ClipVertex& a = in[k];
    const ClipVertex& b = in[(k + 1) % 3];
    const bool a_in = a.p.z() >= near, b_in = b.p.z() >= near;
    if (a_in) out[n++] = a;
    if (a_in != b_in) {
      const double t = (near - a.p.z()) / (b.p.z() - a.p.z());
      out[n++] = {a.p + t * (b.p - a.p), a.attr + t * (b.attr - a.attr)};
    }
  }
  return n;
}

/// True if every bilinear tap with nonzero weight at (u, v) is a valid texel.
bool texel_footprint_valid(const PixelMask& valid, double u, double v) {
  const double cu = std::clamp(u, 0.0, valid.width() - 1.0), cv = std::clamp(v, 0.0, valid.height() - 1.0);
  const int x0 = static_cast<int>(std::floor(cu)), y0 = static_cast<int>(std::floor(cv));
  const int x1 = cu > x0 ? x0 + 1 : x0, y1 = cv > y0 ? y0 + 1 : y0;
  return valid.at(x0, y0) && valid.at(x1, y0) && valid.at(x0, y1) && valid.at(x1, y1);
}

}  // namespace

namespace {

double screen_area(const Vec3& a, const Vec3& b, const Vec3& c, const PinholeIntrinsics& k) {
  auto px = [&](const Vec3& p) { return Vec2(k.fx * p.x() / p.z(), k.fy * p.y() / p.z()); };
  const Vec2 pa = px(a), pb = px(b), pc = px(c);
  return 0.5 * std::abs((pb.x() - pa.x()) * (pc.y() - pa.y()) - (pb.y() - pa.y()) * (pc.x() - pa.x()));
}

/// Stretch face that grows on screen by more than opt.stretch_growth
/// between the source pose and the target pose (both seen through dst).
bool opens_up(const Vec3& s0, const Vec3& s1, const Vec3& s2, const Vec3& t0, const Vec3& t1, const Vec3& t2,
              const PinholeIntrinsics& dst, const RenderOptions& opt) {
  if (opt.stretch_growth <= 0) return true;
  if (std::min({s0.z(), s1.z(), s2.z(), t0.z(), t1.z(), t2.z()}) < opt.near_plane) return true;
  const double before = screen_area(s0, s1, s2, dst), after = screen_area(t0, t1, t2, dst);
  return !(after <= opt.stretch_growth * before);
}

}  // namespace

RenderOutput render(const TexturedSheet& ts, const CameraModel& src, const PinholeIntrinsics& dst, const RigPose& rel,
                    const RenderOptions& opt) {
  const WorldSheet& sheet = ts.sheet;
  if (opt.shade && (ts.texture.width() != sheet.image_width || ts.texture.height() != sheet.image_height))
    throw InputError("render: texture does not match the sheet's source image size");
  if (opt.texture_valid) require_same_shape(ts.texture, *opt.texture_valid, "render(texture_valid)");
  dst.validate();

  RenderOutput out{Image(dst.width, dst.height), DepthMap(dst.width, dst.height), PixelMask(dst.width, dst.height), {}};
  RenderStats& st = out.stats;

  // Per-vertex transform.
  std::vector<ClipVertex> verts(sheet.vertices.size());
  std::vector<Vec3> source_pos(sheet.vertices.size());
  for (std::size_t v = 0; v < verts.size(); ++v) {
    const Vec2 px = sheet.anchor_pixel(static_cast<int>(v));
    const Vec3 ps = unproject(src, px, sheet.vertices[v].z);
    source_pos[v] = ps;
    verts[v].p = rel.rotation * ps + rel.translation;
    verts[v].attr = Vec3(px.x() * ps.z(), px.y() * ps.z(), ps.z());
  }

  // Triangle setup, in face order.
  std::vector<ScreenTri> tris;
  tris.reserve(sheet.faces.size());
  auto emit = [&](const ClipVertex& a, const ClipVertex& b, const ClipVertex& c) {
    ScreenTri t{};
    const ClipVertex* vs[3] = {&a, &b, &c};
    for (int k = 0; k < 3; ++k) {
      const Vec3& p = vs[k]->p;
      t.inv_z[k] = 1.0 / p.z();
      t.sx[k] = dst.fx * p.x() * t.inv_z[k] + dst.cx;
      t.sy[k] = dst.fy * p.y() * t.inv_z[k] + dst.cy;
      t.attr[k] = vs[k]->attr;
    }
    t.area = edge(t.sx[0], t.sy[0], t.sx[1], t.sy[1], t.sx[2], t.sy[2]);
    if (!std::isfinite(t.area) || std::abs(t.area) < 1e-12) {
      ++st.degenerate;
      return;
    }
    if (t.area < 0) {
      ++st.backfacing;
      return;
    }
    const double fxmin = std::min({t.sx[0], t.sx[1], t.sx[2]}), fxmax = std::max({t.sx[0], t.sx[1], t.sx[2]});
    const double fymin = std::min({t.sy[0], t.sy[1], t.sy[2]}), fymax = std::max({t.sy[0], t.sy[1], t.sy[2]});
    if (fxmax < 0 || fymax < 0 || fxmin > dst.width - 1 || fymin > dst.height - 1) return;
    // unproject/project round-off leaves border vertices a hair outside
    t.xmin = std::max(0, static_cast<int>(std::ceil(fxmin - kSnap)));
    t.xmax = std::min(dst.width - 1, static_cast<int>(std::floor(fxmax + kSnap)));
    t.ymin = std::max(0, static_cast<int>(std::ceil(fymin - kSnap)));
    t.ymax = std::min(dst.height - 1, static_cast<int>(std::floor(fymax + kSnap)));
    if (t.xmin > t.xmax || t.ymin > t.ymax) return;
    ++st.rasterized;
    tris.push_back(t);
  };

  for (const auto& f : sheet.faces) {
    ++st.faces;
    if (opt.drop_stretch_faces && is_stretch_face(sheet, f, opt.stretch_ratio) &&
        opens_up(source_pos[f[0]], source_pos[f[1]], source_pos[f[2]], verts[f[0]].p, verts[f[1]].p, verts[f[2]].p,
                 dst, opt)) {
      ++st.dropped_stretch;
      continue;
    }
    const ClipVertex in[3] = {verts[f[0]], verts[f[1]], verts[f[2]]};
    const int inside = (in[0].p.z() >= opt.near_plane) + (in[1].p.z() >= opt.near_plane) +
                       (in[2].p.z() >= opt.near_plane);
    if (inside == 0) {
      ++st.behind_camera;
      continue;
    }
    if (inside == 3) {
      emit(in[0], in[1], in[2]);
      continue;
    }
    ++st.clipped;
    ClipVertex poly[4];
    const int n = clip_near(in, opt.near_plane, poly);
    for (int k = 1; k + 1 < n; ++k) emit(poly[0], poly[k], poly[k + 1]);
  }

  // Scan conversion over horizontal bands; each band owns its rows.
  const double inf = std::numeric_limits<double>::infinity();
  parallel_bands(
      dst.height,
      [&](int r0, int r1) {
        std::vector<double> zbuf(static_cast<std::size_t>(r1 - r0) * dst.width, inf);
        std::vector<std::uint8_t> bad(opt.texture_valid ? zbuf.size() : 0, 0);
        for (const ScreenTri& t : tris) {
          const int y0 = std::max(t.ymin, r0), y1 = std::min(t.ymax, r1 - 1);
          for (int y = y0; y <= y1; ++y) {
            for (int x = t.xmin; x <= t.xmax; ++x) {
              const double w0 = edge(t.sx[1], t.sy[1], t.sx[2], t.sy[2], x, y);
              const double w1 = edge(t.sx[2], t.sy[2], t.sx[0], t.sy[0], x, y);
              const double w2 = edge(t.sx[0], t.sy[0], t.sx[1], t.sy[1], x, y);
              const double tol = -kSnap * t.area;
              if (w0 < tol || w1 < tol || w2 < tol) continue;
              const double b0 = w0 / t.area, b1 = w1 / t.area, b2 = w2 / t.area;
              const double iz = b0 * t.inv_z[0] + b1 * t.inv_z[1] + b2 * t.inv_z[2];
              const double z = 1.0 / iz;
              double& zb = zbuf[static_cast<std::size_t>(y - r0) * dst.width + x];
              if (!(z < zb)) continue;
              zb = z;
              out.depth.at(x, y) = z;
              out.coverage.at(x, y) = 1;
              if (!opt.shade) continue;
              const double l0 = b0 * t.inv_z[0], l1 = b1 * t.inv_z[1], l2 = b2 * t.inv_z[2];
              const Vec3 a = l0 * t.attr[0] + l1 * t.attr[1] + l2 * t.attr[2];
              const double u = a.x() / a.z(), v = a.y() / a.z();
              const Rgb c = sample_bilinear(ts.texture, u, v);
              for (int ch = 0; ch < 3; ++ch) out.image.at(x, y, ch) = c[ch];
              if (opt.texture_valid)
                bad[static_cast<std::size_t>(y - r0) * dst.width + x] = !texel_footprint_valid(*opt.texture_valid, u, v);
            }
          }
        }
        for (std::size_t k = 0; k < bad.size(); ++k) {
          if (!bad[k]) continue;
          const int x = static_cast<int>(k % dst.width), y = r0 + static_cast<int>(k / dst.width);
          out.depth.at(x, y) = 0.0;
          out.coverage.at(x, y) = 0;
          for (int ch = 0; ch < 3; ++ch) out.image.at(x, y, ch) = 0.0;
        }
      },
      opt.threads);
  return out;
}

DepthMap render_sparse_depth(std::span<const Vec3> points, const RigPose& pose, const CameraModel& camera) {
  const int w = image_width(camera), h = image_height(camera);
  DepthMap d(w, h);
  for (const Vec3& pw : points) {
    const Vec3 pc = pose.to_camera(pw);
    if (!(pc.z() > 0)) continue;
    Vec2 px;
    try {
      px = project(camera, pc);
    } catch (const GeometryError&) {
      continue;
    }
    const long x = std::lround(px.x()), y = std::lround(px.y());
    if (x < 0 || y < 0 || x >= w || y >= h) continue;
    double& cell = d.at(static_cast<int>(x), static_cast<int>(y));
    if (cell == 0.0 || pc.z() < cell) cell = pc.z();
  }
  return d;
}

DepthMap apply_depth_masks(const DepthMap& depth, const PixelMask& sky, const PixelMask& dynamic, double far_depth) {
  require_same_shape(depth, sky, "apply_depth_masks(sky)");
  require_same_shape(depth, dynamic, "apply_depth_masks(dynamic)");
  DepthMap out = depth;
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    if (sky.data()[i]) out.data()[i] = far_depth;
    if (dynamic.data()[i]) out.data()[i] = 0.0;
  }
  return out;
}

}  // namespace sheetwarp
