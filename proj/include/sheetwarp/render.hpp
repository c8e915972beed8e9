#pragma once

#include <cstddef>
#include <span>

#include "sheetwarp/geometry.hpp"
#include "sheetwarp/image.hpp"
#include "sheetwarp/sheet.hpp"

namespace sheetwarp {

struct RenderStats {
  std::size_t faces = 0;             ///< sheet faces considered
  std::size_t rasterized = 0;        ///< screen triangles sent to the rasterizer
  std::size_t backfacing = 0;
  std::size_t behind_camera = 0;     ///< faces entirely behind the near plane
  std::size_t clipped = 0;           ///< faces split by the near plane
  std::size_t degenerate = 0;        ///< zero projected area
  std::size_t dropped_stretch = 0;
};

struct RenderOutput {
  Image image;
  DepthMap depth;      ///< 0 where nothing was drawn
  PixelMask coverage;  ///< set exactly where depth > 0
  RenderStats stats;
};

struct RenderOptions {
  bool drop_stretch_faces = false;
  double stretch_ratio = 1.35;
  /// A flagged stretch face is dropped only if its screen area grows by
  /// more than this factor from the source pose to the target pose (both
  /// measured through dst). <= 0 drops every flagged face.
  double stretch_growth = 0.0;
  double near_plane = 0.01;
  bool shade = true;  ///< false skips texture lookups (depth-only renders)
  int threads = 0;
  /// Optional per-texel validity of the texture. A winning fragment whose
  /// bilinear footprint touches an invalid texel still occludes, but its
  /// pixel is reported uncovered (depth 0).
  const PixelMask* texture_valid = nullptr;
};

/// Z-buffered rasterization of a textured sheet into the pinhole camera
/// `dst`, posed by `rel` (dst-from-src). Depth is interpolated
/// perspective-correctly; texture lookups use the projective source
/// coordinate of the surface point. Equal-depth fragments keep the lower
/// face index. Output is identical for any thread count.
RenderOutput render(const TexturedSheet& ts, const CameraModel& src, const PinholeIntrinsics& dst, const RigPose& rel,
                    const RenderOptions& opt = {});

/// Projects world points through `camera` posed at `pose`; the nearest
/// point wins each pixel, pixels without points stay 0.
DepthMap render_sparse_depth(std::span<const Vec3> points, const RigPose& pose, const CameraModel& camera);

inline constexpr double kSkyDepth = 1000.0;

/// Sky pixels are set to `far_depth`, dynamic-object pixels to 0.
DepthMap apply_depth_masks(const DepthMap& depth, const PixelMask& sky, const PixelMask& dynamic,
                           double far_depth = kSkyDepth);

}  // namespace sheetwarp
