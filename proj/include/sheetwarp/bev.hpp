#pragma once

// Geometric BEV segmenter (inverse perspective mapping of vehicle-ground
// contact points) and the viewpoint sweep built on it.

#include <cstdint>
#include <string>
#include <vector>

#include "sheetwarp/bevgrid.hpp"
#include "sheetwarp/frame.hpp"
#include "sheetwarp/pipeline.hpp"
#include "sheetwarp/simworld.hpp"

namespace sheetwarp {

struct IpmConfig {
  BevSpec spec;
  double color_threshold = 0.15;  ///< RGB L2 distance to the nearest palette color
  double nominal_length = 4.3;    ///< hidden side length when only a front/rear edge is seen
  double nominal_width = 1.85;    ///< hidden side length when only a flank is seen
  double max_front_edge = 2.6;    ///< visible edges up to this long are taken as front/rear
  double run_gap = 1.0;           ///< meters between neighbouring contacts of one object
};

/// Palette index per pixel, -1 for non-vehicle, -2 outside `coverage`
/// (if given).
Raster<int, 1> classify_vehicles(const Image& image, const PixelMask* coverage, double threshold = 0.15);

/// Finds, per image column, the rows where a vehicle pixel sits on a
/// non-vehicle pixel, places the contact line sub-pixel from the color
/// blend and intersects that ray with the ground using the ASSUMED rig.
/// Contacts of neighbouring columns form one object's visible bottom
/// edges; the nearest contact is taken as a corner, the footprint spans the
/// edges on either side of it, and a single visible edge is completed with
/// a nominal vehicle dimension on the side away from the camera.
BevGrid ipm_segment(const Frame& frame, const RigPose& assumed_rig, const CameraModel& camera,
                    const IpmConfig& cfg = {});

struct SweepPoint {
  std::string axis;  ///< pitch | yaw | height | depth | pitch-height
  double delta = 0;  ///< degrees for angular axes, meters for height/depth
  RigPerturbation perturbation;
};

/// Points from `from` to `to` (inclusive, within 1e-9 of a step) for one axis.
/// pitch-height couples 6 in of height gain per 4 degrees of downward pitch.
std::vector<SweepPoint> axis_sweep(const std::string& axis, double from, double to, double step);

/// Reference rig set: pitch -10/-5/+5 deg, depth +1.5 m, height +0.2/+0.8 m.
std::vector<SweepPoint> reference_rig_set();

struct SweepRow {
  SweepPoint point;
  double iou_source = 0;
  double iou_corrected = 0;
  double iou_oracle = 0;
  int failed_frames = 0;  ///< frames whose correction threw; they score 0
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::string to_csv() const;
};

struct SweepConfig {
  PinholeIntrinsics camera = PinholeIntrinsics::from_hfov(640, 384, 50.0);
  RigPose source_rig = forward_camera_pose(1.5);
  IpmConfig ipm;
  TransformConfig transform;
  SceneRenderOptions render;
  int threads = 0;
};

/// Scenes for a sweep: make_scene(hash(seed, k), boxes, extent) for k < n.
std::vector<Scene> sweep_scenes(int n, std::uint64_t seed, int boxes = 7, double extent = 42.0);

/// Per point, mean over scenes of the three IoUs against bev_groundtruth.
SweepResult run_sweep(const std::vector<Scene>& scenes, const std::vector<SweepPoint>& points,
                      const SweepConfig& cfg = {});

}  // namespace sheetwarp
