#include "sheetwarp/manifest.hpp"

#include <set>

#include "sheetwarp/io.hpp"

namespace sheetwarp {

using nlohmann::json;

json camera_to_json(const CameraModel& cam) {
  if (const auto* p = std::get_if<PinholeIntrinsics>(&cam))
    return {{"model", "pinhole"}, {"fx", p->fx}, {"fy", p->fy}, {"cx", p->cx},
            {"cy", p->cy},         {"width", p->width}, {"height", p->height}};
  const auto& f = std::get<FThetaIntrinsics>(cam);
  return {{"model", "ftheta"}, {"poly", f.poly},     {"cx", f.cx},
          {"cy", f.cy},        {"width", f.width}, {"height", f.height},
          {"max_fov_deg", rad2deg(f.max_fov)}};
}

CameraModel camera_from_json(const json& j) {
  try {
    const std::string model = j.value("model", j.contains("poly") ? "ftheta" : "pinhole");
    if (model == "pinhole") {
      PinholeIntrinsics p;
      p.fx = j.at("fx");
      p.fy = j.at("fy");
      p.cx = j.at("cx");
      p.cy = j.at("cy");
      p.width = j.at("width");
      p.height = j.at("height");
      p.validate();
      return p;
    }
    if (model == "ftheta") {
      FThetaIntrinsics f;
      const auto poly = j.at("poly").get<std::vector<double>>();
      if (poly.size() > 5) throw InputError("f-theta poly has more than 5 coefficients");
      f.poly.fill(0.0);
      std::copy(poly.begin(), poly.end(), f.poly.begin());
      f.cx = j.at("cx");
      f.cy = j.at("cy");
      f.width = j.at("width");
      f.height = j.at("height");
      f.max_fov = deg2rad(j.at("max_fov_deg").get<double>());
      f.validate();
      return f;
    }
    throw InputError("unknown camera model '" + model + "'");
  } catch (const json::exception& e) {
    throw InputError(std::string("bad camera record: ") + e.what());
  }
}

json pose_to_json(const RigPose& pose) {
  const Mat4 m = pose.matrix();
  std::vector<double> v;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) v.push_back(m(r, c));
  return v;
}

RigPose pose_from_json(const json& j) {
  std::vector<double> v;
  try {
    v = j.get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw InputError(std::string("bad pose: ") + e.what());
  }
  if (v.size() != 16) throw InputError("pose must have 16 entries (4x4 row-major)");
  Mat4 m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = v[r * 4 + c];
  RigPose p = RigPose::from_matrix(m);
  if (!p.is_valid(1e-6)) throw InputError("pose rotation is not orthonormal");
  return p;
}

json boxes_to_json(const std::vector<OrientedBox3D>& boxes) {
  json arr = json::array();
  for (const auto& b : boxes) {
    std::vector<double> r;
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) r.push_back(b.rotation(i, k));
    arr.push_back({{"center", {b.center.x(), b.center.y(), b.center.z()}},
                   {"dims", {b.dims.x(), b.dims.y(), b.dims.z()}},
                   {"rotation", r}});
  }
  return arr;
}

std::vector<OrientedBox3D> boxes_from_json(const json& j) {
  std::vector<OrientedBox3D> out;
  try {
    for (const auto& e : j) {
      OrientedBox3D b;
      const auto c = e.at("center").get<std::vector<double>>();
      const auto d = e.at("dims").get<std::vector<double>>();
      if (c.size() != 3 || d.size() != 3) throw InputError("box center/dims must have 3 entries");
      b.center = Vec3(c[0], c[1], c[2]);
      b.dims = Vec3(d[0], d[1], d[2]);
      if (e.contains("rotation")) {
        const auto r = e.at("rotation").get<std::vector<double>>();
        if (r.size() != 9) throw InputError("box rotation must have 9 entries");
        for (int i = 0; i < 3; ++i)
          for (int k = 0; k < 3; ++k) b.rotation(i, k) = r[i * 3 + k];
      } else {
        b.rotation = rot_z(e.value("yaw", 0.0));
      }
      out.push_back(b);
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("bad boxes file: ") + e.what());
  }
  return out;
}

namespace {

json frame_to_json(const FrameRecord& f) {
  json j = {{"id", f.id}, {"image", f.image}, {"pose", pose_to_json(f.pose)}, {"provenance", f.provenance},
            {"flags", f.flags}};
  auto opt = [&](const char* key, const std::string& v) {
    if (!v.empty()) j[key] = v;
  };
  opt("depth", f.depth);
  opt("lidar", f.lidar);
  opt("sky_mask", f.sky_mask);
  opt("dynamic_mask", f.dynamic_mask);
  opt("coverage", f.coverage);
  opt("boxes", f.boxes);
  return j;
}

FrameRecord frame_from_json(const json& j) {
  FrameRecord f;
  f.id = j.at("id");
  f.image = j.at("image");
  f.depth = j.value("depth", "");
  f.lidar = j.value("lidar", "");
  f.sky_mask = j.value("sky_mask", "");
  f.dynamic_mask = j.value("dynamic_mask", "");
  f.coverage = j.value("coverage", "");
  f.boxes = j.value("boxes", "");
  f.pose = pose_from_json(j.at("pose"));
  f.provenance = j.value("provenance", "source");
  f.flags = j.value("flags", std::vector<std::string>{});
  return f;
}

std::vector<const std::string*> file_fields(const FrameRecord& f) {
  return {&f.image, &f.depth, &f.lidar, &f.sky_mask, &f.dynamic_mask, &f.coverage, &f.boxes};
}

}  // namespace

void DatasetManifest::validate(const fs::path& dir) const {
  std::set<std::string> ids;
  for (const auto& f : frames) {
    if (f.id.empty()) throw InputError("manifest: empty frame id");
    if (!ids.insert(f.id).second) throw InputError("manifest: duplicate frame id '" + f.id + "'");
    if (f.image.empty()) throw InputError("manifest: frame '" + f.id + "' has no image");
    for (const std::string* p : file_fields(f))
      if (!p->empty() && !fs::exists(dir / *p))
        throw InputError("manifest: frame '" + f.id + "' references missing file " + *p);
  }
}

DatasetManifest DatasetManifest::load(const fs::path& dir) {
  const fs::path path = dir / "manifest.json";
  if (!fs::exists(path)) throw InputError("no manifest.json in " + dir.string());
  DatasetManifest m;
  try {
    const json j = json::parse(io::read_text(path));
    const json& rig = j.at("rig");
    m.rig.id = rig.value("id", "source");
    m.rig.camera = camera_from_json(rig.at("camera"));
    m.rig.extrinsic = pose_from_json(rig.at("extrinsic"));
    for (const auto& f : j.at("frames")) m.frames.push_back(frame_from_json(f));
  } catch (const json::exception& e) {
    throw InputError("malformed manifest " + path.string() + ": " + e.what());
  }
  m.validate(dir);
  return m;
}

void DatasetManifest::save(const fs::path& dir) const {
  fs::create_directories(dir);
  json frames_json = json::array();
  for (const auto& f : frames) frames_json.push_back(frame_to_json(f));
  const json j = {{"format", "sheetwarp-manifest"},
                  {"version", 1},
                  {"rig", {{"id", rig.id}, {"camera", camera_to_json(rig.camera)}, {"extrinsic", pose_to_json(rig.extrinsic)}}},
                  {"frames", frames_json}};
  io::write_text(dir / "manifest.json", j.dump(2) + "\n");
}

std::map<std::string, std::size_t> DatasetManifest::provenance_counts() const {
  std::map<std::string, std::size_t> c;
  for (const auto& f : frames) ++c[f.provenance];
  return c;
}

Frame load_frame(const fs::path& dir, const FrameRecord& rec, const CameraModel& camera) {
  Frame f;
  f.id = rec.id;
  f.pose = rec.pose;
  f.camera = camera;
  f.image = io::read_image(dir / rec.image);
  if (f.image.width() != image_width(camera) || f.image.height() != image_height(camera))
    throw InputError("frame '" + rec.id + "': image size does not match the rig camera");
  if (!rec.depth.empty()) f.depth = io::read_depth(dir / rec.depth);
  if (!rec.lidar.empty()) f.lidar = io::read_points(dir / rec.lidar);
  if (!rec.sky_mask.empty()) f.sky = io::read_mask_png(dir / rec.sky_mask);
  if (!rec.dynamic_mask.empty()) f.dynamic = io::read_mask_png(dir / rec.dynamic_mask);
  if (!rec.coverage.empty()) f.coverage = io::read_mask_png(dir / rec.coverage);
  if (!rec.boxes.empty()) {
    try {
      f.boxes = boxes_from_json(json::parse(io::read_text(dir / rec.boxes)));
    } catch (const json::exception& e) {
      throw InputError("frame '" + rec.id + "': " + e.what());
    }
  }
  return f;
}

FrameRecord save_frame(const fs::path& dir, const Frame& frame, const std::string& provenance) {
  FrameRecord rec;
  rec.id = frame.id;
  rec.pose = frame.pose;
  rec.provenance = provenance;
  auto ensure = [&](const char* sub) { fs::create_directories(dir / sub); };
  ensure("images");
  rec.image = "images/" + frame.id + ".png";
  io::write_png(dir / rec.image, frame.image);
  if (!frame.depth.empty()) {
    ensure("depth");
    rec.depth = "depth/" + frame.id + ".pfm";
    io::write_pfm(dir / rec.depth, frame.depth);
  }
  if (!frame.lidar.empty()) {
    ensure("lidar");
    rec.lidar = "lidar/" + frame.id + ".bin";
    io::write_points(dir / rec.lidar, frame.lidar);
  }
  if (!frame.sky.empty()) {
    ensure("masks");
    rec.sky_mask = "masks/" + frame.id + "_sky.png";
    io::write_mask_png(dir / rec.sky_mask, frame.sky);
  }
  if (!frame.dynamic.empty()) {
    ensure("masks");
    rec.dynamic_mask = "masks/" + frame.id + "_dynamic.png";
    io::write_mask_png(dir / rec.dynamic_mask, frame.dynamic);
  }
  if (!frame.coverage.empty()) {
    ensure("masks");
    rec.coverage = "masks/" + frame.id + "_coverage.png";
    io::write_mask_png(dir / rec.coverage, frame.coverage);
  }
  if (!frame.boxes.empty()) {
    ensure("boxes");
    rec.boxes = "boxes/" + frame.id + ".json";
    io::write_text(dir / rec.boxes, boxes_to_json(frame.boxes).dump(2) + "\n");
  }
  return rec;
}

void copy_frame_files(const fs::path& src_dir, const fs::path& dst_dir, const FrameRecord& rec) {
  if (fs::weakly_canonical(src_dir) == fs::weakly_canonical(dst_dir)) return;
  for (const std::string* p : file_fields(rec)) {
    if (p->empty()) continue;
    const fs::path to = dst_dir / *p;
    fs::create_directories(to.parent_path());
    fs::copy_file(src_dir / *p, to, fs::copy_options::overwrite_existing);
  }
}

}  // namespace sheetwarp
