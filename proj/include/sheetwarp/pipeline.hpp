#pragma once

// Dataset-level operations: per-frame viewpoint transform, mixed-dataset
// assembly, extrinsic augmentation and the extrinsic-swap baseline.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sheetwarp/frame.hpp"
#include "sheetwarp/manifest.hpp"
#include "sheetwarp/refine.hpp"
#include "sheetwarp/render.hpp"

namespace sheetwarp {

struct TransformConfig {
  int grid_w = 65;
  int grid_h = 65;
  bool refine = false;  ///< refine the sheet against the frame's lidar first
  RefineConfig refine_cfg;
  double coverage_floor = 0.4;
  bool drop_stretch_faces = true;
  double stretch_ratio = 1.35;
  double stretch_growth = 1.5;  ///< see RenderOptions
  double rectified_hfov_deg = 50.0;  ///< pinhole model f-theta frames are rendered into
  int threads = 0;

  void validate() const;
};

struct TransformResult {
  Frame frame;
  double coverage = 0.0;  ///< covered fraction of the output
  bool flagged = false;   ///< coverage below the floor
  RenderStats stats;
};

/// The pinhole model a camera's frames end up in: itself for pinhole, the
/// centered `hfov_deg` model of the same size for f-theta.
PinholeIntrinsics output_intrinsics(const CameraModel& camera, double hfov_deg = 50.0);

/// Depth the sheet is built from: dense depth if present, else rendered
/// lidar; sky set to the far sentinel and dynamic pixels cleared. Pixels
/// outside the frame's coverage are invalid.
DepthMap frame_depth_source(const Frame& frame);

/// depth -> sheet (-> refine) -> texture -> render at the perturbed rig.
/// Output carries the target pose, coverage and sky mask; boxes and lidar
/// stay in world coordinates.
TransformResult transform_frame(const Frame& frame, const RigPerturbation& target, const TransformConfig& cfg = {});

/// Resamples an f-theta frame into the pinhole model (identity for pinhole).
Frame rectify_frame(const Frame& frame, const PinholeIntrinsics& target);

struct MixPlan {
  double ratio = 1.0;
  std::uint64_t seed = 0;
  RigPerturbation target;

  void validate() const;
};

/// round-half-up(ratio * n)
std::size_t transformed_count(double ratio, std::size_t n);

/// Indices (ascending) of the frames to transform: the first k of a seeded
/// Fisher-Yates permutation, no replacement.
std::vector<std::size_t> select_transformed(std::size_t n, double ratio, std::uint64_t seed);

/// Compact tag for a perturbation, e.g. "pitch-10_yaw0_height0.2_depth0".
std::string perturbation_id(const RigPerturbation& p);

/// Builds D_final under `out_dir`: selected frames transformed, the rest
/// copied (rectified first for f-theta rigs). Writes manifest.json.
DatasetManifest build_mixed_dataset(const fs::path& src_dir, const DatasetManifest& src, const MixPlan& plan,
                                    const TransformConfig& cfg, const fs::path& out_dir);

/// Same selection as build_mixed_dataset, but the transformed frames are
/// taken from an already-transformed dataset with matching frame ids.
DatasetManifest assemble_mix(const fs::path& src_dir, const DatasetManifest& src, const fs::path& transformed_dir,
                             const DatasetManifest& transformed, const MixPlan& plan, const fs::path& out_dir);

/// Rectifies every frame of an f-theta dataset into the pinhole model.
DatasetManifest rectify_dataset(const fs::path& src_dir, const DatasetManifest& src, double hfov_deg,
                                const fs::path& out_dir);

/// Inclusive per-axis ranges; only pitch and yaw drive extrinsic augmentation.
struct PerturbationBounds {
  RigPerturbation lo, hi;
};

/// Parses "pitch:lo:hi,yaw:lo:hi[,height:lo:hi][,depth:lo:hi]".
PerturbationBounds parse_bounds(const std::string& text);

struct AugmentResult {
  RigPose rig;
  std::vector<OrientedBox3D> boxes;
  RigPerturbation sampled;
  Mat3 delta = Mat3::Identity();  ///< world-frame rotation about the camera center
};

/// One rotation drawn uniformly within the pitch/yaw bounds, applied to the
/// extrinsic and to every box about the camera center.
AugmentResult extrinsic_augment(const RigPose& rig, const std::vector<OrientedBox3D>& boxes,
                                const PerturbationBounds& bounds, std::uint64_t seed);

/// Every frame's pose replaced by `train_rig`; provenance "source-star".
DatasetManifest source_star_swap(const DatasetManifest& manifest, const RigPose& train_rig);

}  // namespace sheetwarp
