#pragma once

// On-disk dataset layout: <dir>/manifest.json plus per-frame files whose
// paths are stored relative to <dir>.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "sheetwarp/frame.hpp"
#include "sheetwarp/geometry.hpp"

namespace sheetwarp {

namespace fs = std::filesystem;

struct RigRecord {
  std::string id = "source";
  CameraModel camera = PinholeIntrinsics{};
  RigPose extrinsic;  ///< world-from-camera (vehicle frame)
};

struct FrameRecord {
  std::string id;
  std::string image;  ///< required
  std::string depth, lidar, sky_mask, dynamic_mask, coverage, boxes;  ///< optional, "" if absent
  RigPose pose;
  std::string provenance = "source";
  std::vector<std::string> flags;
};

struct DatasetManifest {
  RigRecord rig;
  std::vector<FrameRecord> frames;

  /// Reads <dir>/manifest.json; checks unique ids and that referenced files exist.
  static DatasetManifest load(const fs::path& dir);
  /// Writes <dir>/manifest.json only (frame files are written by save_frame).
  void save(const fs::path& dir) const;

  /// Frame count per provenance tag.
  std::map<std::string, std::size_t> provenance_counts() const;
  void validate(const fs::path& dir) const;
};

nlohmann::json camera_to_json(const CameraModel& cam);
CameraModel camera_from_json(const nlohmann::json& j);
nlohmann::json pose_to_json(const RigPose& pose);
RigPose pose_from_json(const nlohmann::json& j);
nlohmann::json boxes_to_json(const std::vector<OrientedBox3D>& boxes);
std::vector<OrientedBox3D> boxes_from_json(const nlohmann::json& j);

/// Loads every file the record references.
Frame load_frame(const fs::path& dir, const FrameRecord& rec, const CameraModel& camera);

/// Writes the frame's parts under `dir` and returns a record pointing at them.
FrameRecord save_frame(const fs::path& dir, const Frame& frame, const std::string& provenance = "source");

/// Copies the files of `rec` from `src_dir` to `dst_dir` (same relative paths).
void copy_frame_files(const fs::path& src_dir, const fs::path& dst_dir, const FrameRecord& rec);

}  // namespace sheetwarp
