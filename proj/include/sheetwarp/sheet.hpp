#pragma once

// Worldsheet scene mesh: a grid_w x grid_h vertex lattice laid over the
// source image, each vertex pushed out to its depth along the pixel ray.

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "sheetwarp/geometry.hpp"
#include "sheetwarp/image.hpp"

namespace sheetwarp {

struct SheetVertex {
  double z = 1.0;   ///< depth along the source optical axis, meters
  double du = 0.0;  ///< lattice offset, in cells
  double dv = 0.0;
};

/// How a vertex obtained its depth in build_sheet.
enum class VertexSource : std::uint8_t {
  Cell = 0,          ///< median of valid samples in its own cell
  Neighborhood = 1,  ///< median over the 3x3 cell neighbourhood
  Propagated = 2,    ///< copied from the nearest valid vertex
};

struct WorldSheet {
  int grid_w = 0;
  int grid_h = 0;
  int image_width = 0;  ///< source image the lattice was laid over
  int image_height = 0;
  double offset_bound = 0.5;  ///< max |du|, |dv| in cells
  std::vector<SheetVertex> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<Vec2> uv;  ///< texture coordinates in [0,1]^2
  std::vector<VertexSource> vertex_source;

  int vertex_index(int i, int j) const { return j * grid_w + i; }

  /// Normalized image position of vertex (i, j), clamped to [0,1]^2.
  Vec2 anchor(int i, int j) const;
  /// Anchor in source pixel coordinates.
  Vec2 anchor_pixel(int i, int j) const;
  Vec2 anchor_pixel(int v) const { return anchor_pixel(v % grid_w, v / grid_w); }

  /// Recomputes uv from the current offsets.
  void update_uv();
  /// Throws InputError if any documented invariant is broken.
  void validate() const;
};

struct TexturedSheet {
  WorldSheet sheet;
  Image texture;
};

/// Face list for a lattice: two triangles per cell, fixed diagonal,
/// counter-clockwise in y-down image coordinates. Depends only on the dims.
std::vector<std::array<int, 3>> lattice_faces(int grid_w, int grid_h);

/// Builds a sheet whose vertex depths are medians of the valid (> 0)
/// samples of `depth` around each anchor. Vertices with no data in their
/// 3x3 cell neighbourhood copy the nearest valid vertex. Throws InputError
/// when the whole map is invalid.
WorldSheet build_sheet(const DepthMap& depth, const CameraModel& camera, int grid_w, int grid_h);

TexturedSheet splat_texture(const Image& image, const WorldSheet& sheet);

/// Source-camera 3D position of a vertex.
Vec3 vertex_position(const WorldSheet& sheet, const CameraModel& camera, int v);

/// True if max/min vertex depth over the face exceeds `ratio`.
bool is_stretch_face(const WorldSheet& sheet, const std::array<int, 3>& face, double ratio);

/// Dense depth of the sheet rasterized in its own source view.
DepthMap sheet_depth(const WorldSheet& sheet, const PinholeIntrinsics& intr);

/// Debug dump: one JSON header line, then little-endian float32 arrays z, du, dv.
void save_sheet(const std::filesystem::path& path, const WorldSheet& sheet);
WorldSheet load_sheet(const std::filesystem::path& path);

}  // namespace sheetwarp
