#pragma once

// Camera models, rig poses and rig perturbations.
//
// Conventions used throughout the library:
//   world frame  : X forward, Y left, Z up (ground plane is Z = 0)
//   camera frame : Z forward (optical axis), X right, Y down
//   pixels       : integer coordinates are pixel centers, x right, y down
//   depth        : distance along the optical axis (camera-frame Z), meters

#include <array>
#include <stdexcept>
#include <variant>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "sheetwarp/image.hpp"

namespace sheetwarp {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kInchToMeter = 0.0254;

constexpr double deg2rad(double d) { return d * kPi / 180.0; }
constexpr double rad2deg(double r) { return r * 180.0 / kPi; }

/// Thrown for geometrically impossible requests (point behind the camera,
/// ray outside the lens field of view, non-positive depth).
class GeometryError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class OutOfFovError : public GeometryError {
 public:
  using GeometryError::GeometryError;
};

/// Rigid world-from-camera transform. `translation` is the camera center
/// in world coordinates.
struct RigPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigPose identity() { return {}; }
  static RigPose from_matrix(const Mat4& m);

  Mat4 matrix() const;
  RigPose inverse() const;

  Vec3 to_world(const Vec3& p_cam) const { return rotation * p_cam + translation; }
  Vec3 to_camera(const Vec3& p_world) const { return rotation.transpose() * (p_world - translation); }

  /// Optical axis direction in world coordinates.
  Vec3 forward() const { return rotation.col(2); }

  /// Checks orthonormality and det = +1 within `tol`.
  bool is_valid(double tol = 1e-9) const;
};

/// Matrix product a * b (apply b first, then a).
RigPose operator*(const RigPose& a, const RigPose& b);

/// Applies `first`, then `second`: the result maps like second(first(x)).
RigPose compose(const RigPose& first, const RigPose& second);

/// Transform taking points in camera `a` coordinates to camera `b`
/// coordinates (b-from-a). relative_pose(a, a) is the identity.
RigPose relative_pose(const RigPose& a, const RigPose& b);

Mat3 rot_x(double radians);
Mat3 rot_y(double radians);
Mat3 rot_z(double radians);

struct PinholeIntrinsics {
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  int width = 1, height = 1;

  /// Square-pixel model with the given horizontal field of view, principal
  /// point at the image center.
  static PinholeIntrinsics from_hfov(int width, int height, double hfov_deg);

  double hfov_deg() const;
  void validate() const;
  friend bool operator==(const PinholeIntrinsics&, const PinholeIntrinsics&) = default;
};

/// f-theta (polynomial fisheye) lens: image radius r(theta) = sum c_i theta^i
/// in pixels, theta = angle between ray and optical axis. Azimuth preserved.
struct FThetaIntrinsics {
  std::array<double, 5> poly{0.0, 1.0, 0.0, 0.0, 0.0};
  double cx = 0.0, cy = 0.0;
  int width = 1, height = 1;
  double max_fov = kPi / 2;  ///< full cone angle (radians) the model is valid for

  /// Equidistant lens (r = f theta) spanning `hfov_deg` across the image
  /// width; max_fov is widened to include the image corners.
  static FThetaIntrinsics equidistant(int width, int height, double hfov_deg);

  double radius(double theta) const;
  double radius_derivative(double theta) const;
  /// Inverts radius() by bisection on [0, max_fov/2] to 1e-10 rad.
  double theta_from_radius(double r) const;

  void validate() const;
  friend bool operator==(const FThetaIntrinsics&, const FThetaIntrinsics&) = default;
};

using CameraModel = std::variant<PinholeIntrinsics, FThetaIntrinsics>;

/// Perturbation of a rig in the units of the sweep tables: degrees and meters.
struct RigPerturbation {
  double d_pitch = 0.0;   ///< degrees about the camera X axis, positive tilts the axis up
  double d_yaw = 0.0;     ///< degrees about world Z, positive turns left
  double d_height = 0.0;  ///< meters along world +Z
  double d_depth = 0.0;   ///< meters along world +X

  RigPerturbation operator-() const { return {-d_pitch, -d_yaw, -d_height, -d_depth}; }
  bool is_zero() const { return d_pitch == 0 && d_yaw == 0 && d_height == 0 && d_depth == 0; }
  friend bool operator==(const RigPerturbation&, const RigPerturbation&) = default;
};

Vec2 project_pinhole(const Vec3& point_cam, const PinholeIntrinsics& intr);
Vec3 unproject_pinhole(const Vec2& pixel, double depth, const PinholeIntrinsics& intr);

Vec2 project_ftheta(const Vec3& point_cam, const FThetaIntrinsics& intr);
Vec3 unproject_ftheta(const Vec2& pixel, double depth, const FThetaIntrinsics& intr);

Vec2 project(const CameraModel& cam, const Vec3& point_cam);
Vec3 unproject(const CameraModel& cam, const Vec2& pixel, double depth);
/// Ray through `pixel` scaled so its camera-frame Z component is 1.
Vec3 pixel_ray(const CameraModel& cam, const Vec2& pixel);
int image_width(const CameraModel& cam);
int image_height(const CameraModel& cam);
bool is_pinhole(const CameraModel& cam);

/// Rotation about the camera center: pitch about camera X, yaw about world
/// Z. Translation offsets are applied in world axes.
RigPose perturb_rig(const RigPose& pose, const RigPerturbation& p);

/// Front-facing camera at `height` meters above the world origin, optical
/// axis along world +X.
RigPose forward_camera_pose(double height = 1.5);

struct RectifiedImage {
  Image image;
  PixelMask valid;  ///< false where the target ray falls outside the source model
};

/// Resamples `image` captured with `source` into an ideal pinhole camera
/// sharing the same camera frame. Bilinear for color.
RectifiedImage rectify(const Image& image, const CameraModel& source, const PinholeIntrinsics& target);

/// Same mapping for depth maps, nearest-neighbour so discontinuities are
/// not blended. Pixels mapping outside the source are 0.
DepthMap rectify_depth(const DepthMap& depth, const CameraModel& source, const PinholeIntrinsics& target);
PixelMask rectify_mask(const PixelMask& mask, const CameraModel& source, const PinholeIntrinsics& target);

}  // namespace sheetwarp
