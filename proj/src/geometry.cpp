#include "sheetwarp/geometry.hpp"

#include <cmath>
#include <optional>
#include <string>

#include "sheetwarp/parallel.hpp"

namespace sheetwarp {

RigPose RigPose::from_matrix(const Mat4& m) {
  RigPose p;
  p.rotation = m.topLeftCorner<3, 3>();
  p.translation = m.topRightCorner<3, 1>();
  return p;
}

Mat4 RigPose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

RigPose RigPose::inverse() const {
  RigPose inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

bool RigPose::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

RigPose operator*(const RigPose& a, const RigPose& b) {
  RigPose r;
  r.rotation = a.rotation * b.rotation;
  r.translation = a.rotation * b.translation + a.translation;
  return r;
}

RigPose compose(const RigPose& first, const RigPose& second) { return second * first; }

RigPose relative_pose(const RigPose& a, const RigPose& b) { return b.inverse() * a; }

Mat3 rot_x(double r) {
  const double c = std::cos(r), s = std::sin(r);
  Mat3 m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

Mat3 rot_y(double r) {
  const double c = std::cos(r), s = std::sin(r);
  Mat3 m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

Mat3 rot_z(double r) {
  const double c = std::cos(r), s = std::sin(r);
  Mat3 m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

// ---------------------------------------------------------------------------
// Pinhole

PinholeIntrinsics PinholeIntrinsics::from_hfov(int width, int height, double hfov_deg) {
  PinholeIntrinsics k;
  k.width = width;
  k.height = height;
  k.fx = k.fy = 0.5 * width / std::tan(0.5 * deg2rad(hfov_deg));
  k.cx = 0.5 * (width - 1);
  k.cy = 0.5 * (height - 1);
  k.validate();
  return k;
}

double PinholeIntrinsics::hfov_deg() const {
  return rad2deg(2.0 * std::atan(0.5 * width / fx));
}

void PinholeIntrinsics::validate() const {
  if (!(fx > 0 && fy > 0)) throw InputError("pinhole: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InputError("pinhole: image size must be positive");
  if (!(cx >= 0 && cx < width && cy >= 0 && cy < height))
    throw InputError("pinhole: principal point outside the image");
}

Vec2 project_pinhole(const Vec3& p, const PinholeIntrinsics& k) {
  if (!(p.z() > 0)) throw GeometryError("behind camera");
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

Vec3 unproject_pinhole(const Vec2& px, double depth, const PinholeIntrinsics& k) {
  if (!(depth > 0)) throw GeometryError("unproject: depth must be positive");
  return {(px.x() - k.cx) / k.fx * depth, (px.y() - k.cy) / k.fy * depth, depth};
}

// ---------------------------------------------------------------------------
// f-theta

FThetaIntrinsics FThetaIntrinsics::equidistant(int width, int height, double hfov_deg) {
  FThetaIntrinsics k;
  k.width = width;
  k.height = height;
  k.cx = 0.5 * (width - 1);
  k.cy = 0.5 * (height - 1);
  const double f = 0.5 * width / (0.5 * deg2rad(hfov_deg));
  k.poly = {0.0, f, 0.0, 0.0, 0.0};
  const double corner = std::hypot(0.5 * width, 0.5 * height) + 1.0;
  k.max_fov = 2.0 * corner / f;
  k.validate();
  return k;
}

double FThetaIntrinsics::radius(double t) const {
  return (((poly[4] * t + poly[3]) * t + poly[2]) * t + poly[1]) * t + poly[0];
}

double FThetaIntrinsics::radius_derivative(double t) const {
  return ((4.0 * poly[4] * t + 3.0 * poly[3]) * t + 2.0 * poly[2]) * t + poly[1];
}

double FThetaIntrinsics::theta_from_radius(double r) const {
  const double hi_theta = 0.5 * max_fov;
  if (r <= 0.0) return 0.0;
  if (r > radius(hi_theta) * (1.0 + 1e-12)) throw OutOfFovError("f-theta: radius beyond lens field of view");
  double lo = 0.0, hi = hi_theta;
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (radius(mid) < r) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

void FThetaIntrinsics::validate() const {
  if (std::abs(poly[0]) > 1e-12) throw InputError("f-theta: r(0) must be 0");
  if (!(max_fov > 0 && max_fov < kPi)) throw InputError("f-theta: max_fov must lie in (0, pi)");
  if (width <= 0 || height <= 0) throw InputError("f-theta: image size must be positive");
  double prev = radius(0.0);
  for (int i = 1; i <= 1000; ++i) {
    const double r = radius(0.5 * max_fov * i / 1000.0);
    if (!(r > prev)) throw InputError("f-theta: r(theta) must be strictly increasing");
    prev = r;
  }
}

Vec2 project_ftheta(const Vec3& p, const FThetaIntrinsics& k) {
  const double rho = std::hypot(p.x(), p.y());
  const double theta = std::atan2(rho, p.z());
  if (theta > 0.5 * k.max_fov) throw OutOfFovError("f-theta: point outside lens field of view");
  if (rho == 0.0) return {k.cx, k.cy};
  const double r = k.radius(theta);
  return {k.cx + r * p.x() / rho, k.cy + r * p.y() / rho};
}

Vec3 unproject_ftheta(const Vec2& px, double depth, const FThetaIntrinsics& k) {
  if (!(depth > 0)) throw GeometryError("unproject: depth must be positive");
  const double dx = px.x() - k.cx, dy = px.y() - k.cy;
  const double r = std::hypot(dx, dy);
  if (r == 0.0) return {0.0, 0.0, depth};
  const double theta = k.theta_from_radius(r);
  const double t = std::tan(theta);
  return {t * dx / r * depth, t * dy / r * depth, depth};
}

// ---------------------------------------------------------------------------
// Model dispatch

Vec2 project(const CameraModel& cam, const Vec3& p) {
  return std::visit(
      [&](const auto& k) -> Vec2 {
        if constexpr (std::is_same_v<std::decay_t<decltype(k)>, PinholeIntrinsics>)
          return project_pinhole(p, k);
        else
          return project_ftheta(p, k);
      },
      cam);
}

Vec3 unproject(const CameraModel& cam, const Vec2& px, double depth) {
  return std::visit(
      [&](const auto& k) -> Vec3 {
        if constexpr (std::is_same_v<std::decay_t<decltype(k)>, PinholeIntrinsics>)
          return unproject_pinhole(px, depth, k);
        else
          return unproject_ftheta(px, depth, k);
      },
      cam);
}

Vec3 pixel_ray(const CameraModel& cam, const Vec2& px) { return unproject(cam, px, 1.0); }

int image_width(const CameraModel& cam) {
  return std::visit([](const auto& k) { return k.width; }, cam);
}

int image_height(const CameraModel& cam) {
  return std::visit([](const auto& k) { return k.height; }, cam);
}

bool is_pinhole(const CameraModel& cam) { return std::holds_alternative<PinholeIntrinsics>(cam); }

// ---------------------------------------------------------------------------
// Rig manipulation

RigPose perturb_rig(const RigPose& pose, const RigPerturbation& p) {
  RigPose out;
  // Pitch multiplies on the camera side, yaw on the world side; the two
  // commute, so pitch-then-yaw and yaw-then-pitch give the same result.
  out.rotation = rot_z(deg2rad(p.d_yaw)) * pose.rotation * rot_x(deg2rad(p.d_pitch));
  out.translation = pose.translation + Vec3(p.d_depth, 0.0, p.d_height);
  return out;
}

RigPose forward_camera_pose(double height) {
  RigPose p;
  // Columns: camera X (right) = world -Y, camera Y (down) = world -Z,
  // camera Z (forward) = world +X.
  p.rotation << 0, 0, 1, -1, 0, 0, 0, -1, 0;
  p.translation = Vec3(0.0, 0.0, height);
  return p;
}

// ---------------------------------------------------------------------------
// Rectification

namespace {

/// Source pixel for a target pinhole pixel, or nullopt if outside the source.
std::optional<Vec2> source_pixel(const CameraModel& source, const PinholeIntrinsics& target, int x, int y) {
  if (const auto* pin = std::get_if<PinholeIntrinsics>(&source); pin && *pin == target) return Vec2(x, y);
  const Vec3 ray((x - target.cx) / target.fx, (y - target.cy) / target.fy, 1.0);
  Vec2 sp;
  if (const auto* ft = std::get_if<FThetaIntrinsics>(&source)) {
    const double theta = std::atan2(std::hypot(ray.x(), ray.y()), ray.z());
    if (theta > 0.5 * ft->max_fov) return std::nullopt;
    sp = project_ftheta(ray, *ft);
  } else {
    sp = project_pinhole(ray, std::get<PinholeIntrinsics>(source));
  }
  const double eps = 1e-9;
  if (sp.x() < -eps || sp.y() < -eps || sp.x() > image_width(source) - 1 + eps ||
      sp.y() > image_height(source) - 1 + eps)
    return std::nullopt;
  return sp;
}

template <typename Fn>
void for_each_target_row(const PinholeIntrinsics& target, Fn&& fn) {
  parallel_bands(target.height, [&](int r0, int r1) {
    for (int y = r0; y < r1; ++y) fn(y);
  });
}

}  // namespace

RectifiedImage rectify(const Image& image, const CameraModel& source, const PinholeIntrinsics& target) {
  if (image.width() != image_width(source) || image.height() != image_height(source))
    throw InputError("rectify: image does not match source camera size");
  target.validate();
  RectifiedImage out{Image(target.width, target.height), PixelMask(target.width, target.height)};
  for_each_target_row(target, [&](int y) {
    for (int x = 0; x < target.width; ++x) {
      const auto sp = source_pixel(source, target, x, y);
      if (!sp) continue;
      const Rgb c = sample_bilinear(image, sp->x(), sp->y());
      for (int ch = 0; ch < 3; ++ch) out.image.at(x, y, ch) = c[ch];
      out.valid.at(x, y) = 1;
    }
  });
  return out;
}

DepthMap rectify_depth(const DepthMap& depth, const CameraModel& source, const PinholeIntrinsics& target) {
  if (depth.width() != image_width(source) || depth.height() != image_height(source))
    throw InputError("rectify_depth: depth does not match source camera size");
  DepthMap out(target.width, target.height);
  for_each_target_row(target, [&](int y) {
    for (int x = 0; x < target.width; ++x) {
      const auto sp = source_pixel(source, target, x, y);
      if (!sp) continue;
      out.at(x, y) = depth.at(static_cast<int>(std::lround(sp->x())), static_cast<int>(std::lround(sp->y())));
    }
  });
  return out;
}

PixelMask rectify_mask(const PixelMask& mask, const CameraModel& source, const PinholeIntrinsics& target) {
  if (mask.width() != image_width(source) || mask.height() != image_height(source))
    throw InputError("rectify_mask: mask does not match source camera size");
  PixelMask out(target.width, target.height);
  for_each_target_row(target, [&](int y) {
    for (int x = 0; x < target.width; ++x) {
      const auto sp = source_pixel(source, target, x, y);
      if (!sp) continue;
      out.at(x, y) = mask.at(static_cast<int>(std::lround(sp->x())), static_cast<int>(std::lround(sp->y())));
    }
  });
  return out;
}

}  // namespace sheetwarp
