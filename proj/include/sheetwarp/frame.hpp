#pragma once

#include <array>
#include <string>
#include <vector>

#include "sheetwarp/geometry.hpp"
#include "sheetwarp/image.hpp"

namespace sheetwarp {

/// Upright box label: yaw about world Z, resting on whatever supports it.
struct Box3D {
  Vec3 center = Vec3::Zero();
  Vec3 dims = Vec3::Ones();  ///< length (along heading), width, height
  double yaw = 0.0;

  friend bool operator==(const Box3D&, const Box3D&) = default;
};

/// Box with an arbitrary orientation (after extrinsic augmentation).
struct OrientedBox3D {
  Vec3 center = Vec3::Zero();
  Vec3 dims = Vec3::Ones();
  Mat3 rotation = Mat3::Identity();  ///< world-from-box

  static OrientedBox3D from_box(const Box3D& b);
  /// Eight corners, box-frame signs (+-l/2, +-w/2, +-h/2) in binary order.
  std::array<Vec3, 8> corners() const;

  friend bool operator==(const OrientedBox3D&, const OrientedBox3D&) = default;
};

/// One captured view with everything the pipeline may use. Optional parts
/// are left empty.
struct Frame {
  std::string id;
  Image image;
  DepthMap depth;            ///< dense depth along the optical axis; 0 = invalid
  std::vector<Vec3> lidar;   ///< world-frame points
  PixelMask sky;
  PixelMask dynamic;
  PixelMask coverage;        ///< empty means fully valid
  RigPose pose;
  CameraModel camera = PinholeIntrinsics{};
  std::vector<OrientedBox3D> boxes;  ///< world frame
};

}  // namespace sheetwarp
