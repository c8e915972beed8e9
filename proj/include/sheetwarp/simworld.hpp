#pragma once

// Procedural driving-like scenes with an exact ray-cast renderer: textured
// ground plane, flat-colored boxes, gradient sky.

#include <cstdint>
#include <optional>
#include <vector>

#include "sheetwarp/bevgrid.hpp"
#include "sheetwarp/frame.hpp"
#include "sheetwarp/geometry.hpp"
#include "sheetwarp/image.hpp"

namespace sheetwarp {

struct Scene {
  std::uint64_t seed = 0;
  std::vector<Box3D> boxes;
  std::vector<int> palette_index;  ///< per box, into vehicle_palette()
};

/// Saturated box colors, all far (> 0.3 in RGB) from each other, the
/// ground and the sky.
const std::vector<Rgb>& vehicle_palette();

/// Seeded placement of non-overlapping car-sized boxes in the camera's
/// forward wedge, x in [0.465 extent, extent], |y| <= 0.4 x - 1.2. Throws GeometryError when a
/// box cannot be placed in 1000 attempts.
Scene make_scene(std::uint64_t seed, int n_boxes = 7, double extent = 42.0);

/// Ground texture at world (x, y): 1 m checker plus hashed value noise.
Rgb ground_color(const Scene& scene, double x, double y);
/// Sky color from the world-frame viewing direction.
Rgb sky_color(const Vec3& dir_world);

/// Ground hits farther than this along the optical axis count as sky.
inline constexpr double kGroundHorizon = 500.0;

struct RayHit {
  double t = 0.0;   ///< ray parameter; equals optical-axis depth for z-normalized camera rays
  int object = -1;  ///< box index, or -1 for ground
};

/// First intersection of origin + t dir (t > 0) with the ground or a box.
std::optional<RayHit> intersect(const Scene& scene, const Vec3& origin, const Vec3& dir);

struct SceneRender {
  Image image;        ///< supersampled color
  DepthMap depth;     ///< exact depth at pixel centers, 0 for sky
  PixelMask sky;
  Raster<int, 1> object;  ///< box index at the pixel center, -1 ground/sky
};

struct SceneRenderOptions {
  int supersample = 3;  ///< n x n samples per pixel for color
  int threads = 0;
};

SceneRender render_scene(const Scene& scene, const RigPose& pose, const CameraModel& camera,
                         const SceneRenderOptions& opt = {});

/// Renders a frame: image, exact depth, sky mask, boxes. Lidar left empty.
Frame render_frame(const Scene& scene, const RigPose& pose, const CameraModel& camera, const std::string& id = "",
                   const SceneRenderOptions& opt = {});

/// Rays through uniformly drawn pixel centers; returns world-frame hits
/// (misses are dropped).
std::vector<Vec3> sample_lidar(const Scene& scene, const RigPose& pose, const CameraModel& camera, int n_rays,
                               std::uint64_t seed);

/// Cell set iff its center lies inside some box footprint.
BevGrid bev_groundtruth(const Scene& scene, const BevSpec& spec);

}  // namespace sheetwarp
