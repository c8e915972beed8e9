#pragma once

// Independent reference implementations used by the tests. Kept
// deliberately naive: straight loops, no shared helpers with the library
// beyond the data types and camera projection.

#include <algorithm>
#include <cmath>
#include <vector>

#include "sheetwarp/geometry.hpp"
#include "sheetwarp/image.hpp"
#include "sheetwarp/simworld.hpp"

namespace oracle {

using namespace sheetwarp;

/// Plain left-to-right sum.
inline double naive_sum(const std::vector<double>& v) {
  long double s = 0;
  for (double x : v) s += x;
  return static_cast<double>(s);
}

inline double naive_mean(const Raster<double, 1>& v, const PixelMask& m) {
  long double s = 0;
  std::size_t n = 0;
  for (int y = 0; y < v.height(); ++y)
    for (int x = 0; x < v.width(); ++x)
      if (m.at(x, y)) {
        s += v.at(x, y);
        ++n;
      }
  return static_cast<double>(s / n);
}

inline double naive_l1(const Image& a, const Image& b, const PixelMask& m) {
  long double s = 0;
  std::size_t n = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      if (!m.at(x, y)) continue;
      long double d = 0;
      for (int c = 0; c < 3; ++c) d += std::fabs(a.at(x, y, c) - b.at(x, y, c));
      s += d / 3;
      ++n;
    }
  return n ? static_cast<double>(s / n) : NAN;
}

/// SSIM per pixel: gathers the 3x3 window (mirror at the border, edge not
/// repeated) and uses two-pass moments. Channel mean.
inline Raster<double, 1> naive_ssim(const Image& a, const Image& b, double c1 = 1e-4, double c2 = 9e-4) {
  const int w = a.width(), h = a.height();
  auto mirror = [](int i, int n) { return n == 1 ? 0 : (i < 0 ? -i : (i >= n ? 2 * n - 2 - i : i)); };
  Raster<double, 1> out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int c = 0; c < 3; ++c) {
        double p[9], q[9];
        int k = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx, ++k) {
            p[k] = a.at(mirror(x + dx, w), mirror(y + dy, h), c);
            q[k] = b.at(mirror(x + dx, w), mirror(y + dy, h), c);
          }
        double mp = 0, mq = 0;
        for (int i = 0; i < 9; ++i) mp += p[i], mq += q[i];
        mp /= 9, mq /= 9;
        double vp = 0, vq = 0, cov = 0;
        for (int i = 0; i < 9; ++i) {
          vp += (p[i] - mp) * (p[i] - mp);
          vq += (q[i] - mq) * (q[i] - mq);
          cov += (p[i] - mp) * (q[i] - mq);
        }
        vp /= 9, vq /= 9, cov /= 9;
        const double s = (2 * mp * mq + c1) * (2 * cov + c2) / ((mp * mp + mq * mq + c1) * (vp + vq + c2));
        acc += std::clamp(s, -1.0, 1.0);
      }
      out.at(x, y) = acc / 3;
    }
  return out;
}

inline Rgb bilinear(const Image& img, double x, double y) {
  x = std::clamp(x, 0.0, img.width() - 1.0);
  y = std::clamp(y, 0.0, img.height() - 1.0);
  const int x0 = std::min(static_cast<int>(x), img.width() - 2 < 0 ? 0 : img.width() - 2);
  const int y0 = std::min(static_cast<int>(y), img.height() - 2 < 0 ? 0 : img.height() - 2);
  const int x1 = std::min(x0 + 1, img.width() - 1), y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = x - x0, fy = y - y0;
  Rgb out{};
  for (int c = 0; c < 3; ++c)
    out[c] = (1 - fy) * ((1 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c)) +
             fy * ((1 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c));
  return out;
}

/// Pure-rotation warp via the homography K R K^-1. `rot` maps target camera
/// coordinates to source camera coordinates. `inside` marks target pixels
/// whose preimage lies inside the source image.
inline Image homography_warp(const Image& src, const PinholeIntrinsics& k, const Mat3& rot, PixelMask& inside) {
  Mat3 K;
  K << k.fx, 0, k.cx, 0, k.fy, k.cy, 0, 0, 1;
  const Mat3 H = K * rot * K.inverse();
  Image out(k.width, k.height);
  inside = PixelMask(k.width, k.height);
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x) {
      const Vec3 p = H * Vec3(x, y, 1);
      if (p.z() <= 0) continue;
      const double u = p.x() / p.z(), v = p.y() / p.z();
      if (u < 0 || v < 0 || u > k.width - 1 || v > k.height - 1) continue;
      inside.at(x, y) = 1;
      const Rgb c = bilinear(src, u, v);
      for (int ch = 0; ch < 3; ++ch) out.at(x, y, ch) = c[ch];
    }
  return out;
}

/// Target pixels whose scene point (or sky direction) is seen unoccluded by
/// the source camera, found by casting rays in the scene.
inline PixelMask visible_from(const Scene& scene, const RigPose& src, const RigPose& dst, const PinholeIntrinsics& k,
                              const DepthMap& dst_depth, const PixelMask& dst_sky) {
  PixelMask m(k.width, k.height);
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x) {
      const Vec3 ray_cam((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
      if (dst_sky.at(x, y)) {
        const Vec3 d = src.rotation.transpose() * (dst.rotation * ray_cam);
        if (d.z() <= 0) continue;
        const double u = k.fx * d.x() / d.z() + k.cx, v = k.fy * d.y() / d.z() + k.cy;
        if (u < 0 || v < 0 || u > k.width - 1 || v > k.height - 1) continue;
        const auto hit = intersect(scene, src.translation, src.rotation * d);
        if (!hit || hit->t * d.z() > kGroundHorizon) m.at(x, y) = 1;
        continue;
      }
      const double z = dst_depth.at(x, y);
      if (!(z > 0)) continue;
      const Vec3 X = dst.to_world(z * ray_cam);
      const Vec3 pc = src.to_camera(X);
      if (pc.z() <= 0.01) continue;
      const double u = k.fx * pc.x() / pc.z() + k.cx, v = k.fy * pc.y() / pc.z() + k.cy;
      if (u < 0 || v < 0 || u > k.width - 1 || v > k.height - 1) continue;
      const auto hit = intersect(scene, src.translation, X - src.translation);
      if (hit && hit->t > 1.0 - 1e-6) m.at(x, y) = 1;
    }
  return m;
}

inline PixelMask mask_and(const PixelMask& a, const PixelMask& b) {
  PixelMask m(a.width(), a.height());
  for (std::size_t i = 0; i < m.pixel_count(); ++i) m.data()[i] = (a.data()[i] && b.data()[i]) ? 1 : 0;
  return m;
}

inline double fraction(const PixelMask& m) {
  std::size_t n = 0;
  for (auto v : m.data()) n += v ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(m.pixel_count());
}

}  // namespace oracle
