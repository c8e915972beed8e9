#pragma once

#include <cstdint>
#include <vector>

#include "sheetwarp/geometry.hpp"

namespace sheetwarp {

/// Ego-centric BEV raster. The ego sits at the rear-center: cell (ix, iy)
/// covers x in [ix r, (ix+1) r) forward and y in [-W/2 + iy r, -W/2 + (iy+1) r).
struct BevSpec {
  double length = 50.0;  ///< forward extent, meters
  double width = 50.0;   ///< lateral extent, meters
  double resolution = 0.25;

  int cells_x() const;
  int cells_y() const;
  /// Throws InputError unless resolution > 0 and both extents are integral multiples.
  void validate() const;
  friend bool operator==(const BevSpec&, const BevSpec&) = default;
};

struct BevGrid {
  BevSpec spec;
  int nx = 0, ny = 0;
  std::vector<std::uint8_t> cells;

  explicit BevGrid(const BevSpec& s = {});

  std::uint8_t& at(int ix, int iy) { return cells[static_cast<std::size_t>(iy) * nx + ix]; }
  std::uint8_t at(int ix, int iy) const { return cells[static_cast<std::size_t>(iy) * nx + ix]; }
  Vec2 cell_center(int ix, int iy) const;
  /// Marks the cell containing (x, y); ignores points outside the grid.
  void mark(double x, double y);
  std::size_t count() const;
};

/// |a & b| / |a | b|; two empty grids give 1. Throws InputError on spec mismatch.
double iou(const BevGrid& a, const BevGrid& b);

}  // namespace sheetwarp
