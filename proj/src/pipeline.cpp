#include "sheetwarp/pipeline.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "sheetwarp/parallel.hpp"
#include "sheetwarp/random.hpp"
#include "sheetwarp/sheet.hpp"

namespace sheetwarp {

void TransformConfig::validate() const {
  if (grid_w < 2 || grid_h < 2) throw InputError("transform: grid must be at least 2x2");
  if (!(coverage_floor >= 0 && coverage_floor <= 1)) throw InputError("transform: coverage floor must lie in [0,1]");
  if (!(stretch_ratio > 1)) throw InputError("transform: stretch ratio must exceed 1");
  if (!(rectified_hfov_deg > 0 && rectified_hfov_deg < 180)) throw InputError("transform: bad rectified HFOV");
  if (threads < 0) throw InputError("transform: threads must be >= 0");
  if (refine) refine_cfg.validate();
}

void MixPlan::validate() const {
  if (!(ratio >= 0 && ratio <= 1)) throw InputError("mix ratio must lie in [0,1]");
}

PinholeIntrinsics output_intrinsics(const CameraModel& camera, double hfov_deg) {
  if (const auto* p = std::get_if<PinholeIntrinsics>(&camera)) return *p;
  return PinholeIntrinsics::from_hfov(image_width(camera), image_height(camera), hfov_deg);
}

DepthMap frame_depth_source(const Frame& f) {
  DepthMap d;
  if (!f.depth.empty()) {
    d = f.depth;
  } else if (!f.lidar.empty()) {
    d = render_sparse_depth(f.lidar, f.pose, f.camera);
  } else {
    throw InputError("frame '" + f.id + "': missing depth source (no depth map and no lidar)");
  }
  if (d.width() != f.image.width() || d.height() != f.image.height())
    throw InputError("frame '" + f.id + "': depth size does not match the image");
  const PixelMask none(d.width(), d.height());
  d = apply_depth_masks(d, f.sky.empty() ? none : f.sky, f.dynamic.empty() ? none : f.dynamic);
  if (!f.coverage.empty()) {
    require_same_shape(d, f.coverage, "frame coverage");
    for (std::size_t i = 0; i < d.pixel_count(); ++i)
      if (!f.coverage.data()[i]) d.data()[i] = 0.0;
  }
  return d;
}

TransformResult transform_frame(const Frame& frame, const RigPerturbation& target, const TransformConfig& cfg) {
  cfg.validate();
  const DepthMap depth = frame_depth_source(frame);
  WorldSheet sheet = build_sheet(depth, frame.camera, cfg.grid_w, cfg.grid_h);
  if (cfg.refine) {
    if (frame.lidar.empty()) throw InputError("frame '" + frame.id + "': refinement needs lidar");
    DepthMap lidar = render_sparse_depth(frame.lidar, frame.pose, frame.camera);
    if (!frame.dynamic.empty())
      for (std::size_t i = 0; i < lidar.pixel_count(); ++i)
        if (frame.dynamic.data()[i]) lidar.data()[i] = 0.0;
    sheet = refine_sheet(sheet, lidar, frame.camera, cfg.refine_cfg).sheet;
  }
  const TexturedSheet ts = splat_texture(frame.image, sheet);
  const RigPose target_pose = perturb_rig(frame.pose, target);
  const PinholeIntrinsics dst = output_intrinsics(frame.camera, cfg.rectified_hfov_deg);

  RenderOptions opt;
  opt.drop_stretch_faces = cfg.drop_stretch_faces;
  opt.stretch_ratio = cfg.stretch_ratio;
  opt.stretch_growth = cfg.stretch_growth;
  opt.threads = cfg.threads;
  opt.texture_valid = frame.coverage.empty() ? nullptr : &frame.coverage;
  RenderOutput r = render(ts, frame.camera, dst, relative_pose(frame.pose, target_pose), opt);

  TransformResult res;
  res.stats = r.stats;
  Frame& out = res.frame;
  out.id = frame.id;
  out.sky = PixelMask(dst.width, dst.height);
  for (std::size_t i = 0; i < r.depth.pixel_count(); ++i)
    if (r.depth.data()[i] >= 0.5 * kSkyDepth) {
      out.sky.data()[i] = 1;
      r.depth.data()[i] = 0.0;
    }
  out.image = std::move(r.image);
  out.depth = std::move(r.depth);
  out.coverage = std::move(r.coverage);
  out.lidar = frame.lidar;
  out.boxes = frame.boxes;
  out.pose = target_pose;
  out.camera = dst;
  res.coverage = static_cast<double>(count_set(out.coverage)) / static_cast<double>(out.coverage.pixel_count());
  res.flagged = res.coverage < cfg.coverage_floor;
  return res;
}

Frame rectify_frame(const Frame& frame, const PinholeIntrinsics& target) {
  if (const auto* p = std::get_if<PinholeIntrinsics>(&frame.camera); p && *p == target) return frame;
  Frame out = frame;
  RectifiedImage ri = rectify(frame.image, frame.camera, target);
  out.image = std::move(ri.image);
  out.coverage = std::move(ri.valid);
  if (!frame.coverage.empty()) {
    const PixelMask c = rectify_mask(frame.coverage, frame.camera, target);
    for (std::size_t i = 0; i < c.pixel_count(); ++i) out.coverage.data()[i] &= c.data()[i] ? 1 : 0;
  }
  if (!frame.depth.empty()) out.depth = rectify_depth(frame.depth, frame.camera, target);
  if (!frame.sky.empty()) out.sky = rectify_mask(frame.sky, frame.camera, target);
  if (!frame.dynamic.empty()) out.dynamic = rectify_mask(frame.dynamic, frame.camera, target);
  out.camera = target;
  return out;
}

std::size_t transformed_count(double ratio, std::size_t n) {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 0.5));
}

std::vector<std::size_t> select_transformed(std::size_t n, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0 && ratio <= 1)) throw InputError("mix ratio must lie in [0,1]");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  order.resize(std::min(n, transformed_count(ratio, n)));
  std::sort(order.begin(), order.end());
  return order;
}

std::string perturbation_id(const RigPerturbation& p) {
  auto num = [](double v) {
    std::ostringstream os;
    os << std::setprecision(12) << (v == 0.0 ? 0.0 : v);
    return os.str();
  };
  return "pitch" + num(p.d_pitch) + "_yaw" + num(p.d_yaw) + "_height" + num(p.d_height) + "_depth" + num(p.d_depth);
}

namespace {

void require_distinct(const fs::path& a, const fs::path& b) {
  if (fs::exists(a) && fs::exists(b) && fs::equivalent(a, b))
    throw InputError("output directory must differ from the input dataset");
}

std::vector<char> selection_mask(std::size_t n, const MixPlan& plan) {
  std::vector<char> sel(n, 0);
  for (std::size_t i : select_transformed(n, plan.ratio, plan.seed)) sel[i] = 1;
  return sel;
}

/// Copies an untouched frame into out_dir, rectifying it for f-theta rigs.
FrameRecord carry_over(const fs::path& src_dir, const DatasetManifest& src, std::size_t i, const fs::path& out_dir,
                       const PinholeIntrinsics& outcam) {
  const FrameRecord& rec = src.frames[i];
  if (is_pinhole(src.rig.camera)) {
    copy_frame_files(src_dir, out_dir, rec);
    return rec;
  }
  const Frame f = rectify_frame(load_frame(src_dir, rec, src.rig.camera), outcam);
  FrameRecord r = save_frame(out_dir, f, rec.provenance);
  r.flags = rec.flags;
  return r;
}

DatasetManifest output_manifest(const DatasetManifest& src, const PinholeIntrinsics& outcam) {
  DatasetManifest out;
  out.rig = src.rig;
  out.rig.camera = outcam;
  out.frames.resize(src.frames.size());
  return out;
}

}  // namespace

DatasetManifest build_mixed_dataset(const fs::path& src_dir, const DatasetManifest& src, const MixPlan& plan,
                                    const TransformConfig& cfg, const fs::path& out_dir) {
  plan.validate();
  cfg.validate();
  fs::create_directories(out_dir);
  require_distinct(src_dir, out_dir);
  const PinholeIntrinsics outcam = output_intrinsics(src.rig.camera, cfg.rectified_hfov_deg);
  const std::vector<char> sel = selection_mask(src.frames.size(), plan);
  const std::string tag = "transformed:" + perturbation_id(plan.target);
  DatasetManifest out = output_manifest(src, outcam);

  TransformConfig inner = cfg;
  inner.threads = 1;
  parallel_for(
      static_cast<int>(src.frames.size()),
      [&](int i) {
        const FrameRecord& rec = src.frames[i];
        if (!sel[i]) {
          out.frames[i] = carry_over(src_dir, src, i, out_dir, outcam);
          return;
        }
        const Frame f = load_frame(src_dir, rec, src.rig.camera);
        const TransformResult tr = transform_frame(f, plan.target, src.frames.size() > 1 ? inner : cfg);
        FrameRecord r = save_frame(out_dir, tr.frame, tag);
        r.flags = rec.flags;
        if (tr.flagged) r.flags.push_back("low_coverage");
        out.frames[i] = r;
      },
      cfg.threads);
  out.save(out_dir);
  return out;
}

DatasetManifest assemble_mix(const fs::path& src_dir, const DatasetManifest& src, const fs::path& transformed_dir,
                             const DatasetManifest& transformed, const MixPlan& plan, const fs::path& out_dir) {
  plan.validate();
  fs::create_directories(out_dir);
  require_distinct(src_dir, out_dir);
  require_distinct(transformed_dir, out_dir);
  const PinholeIntrinsics outcam = output_intrinsics(src.rig.camera);
  std::map<std::string, const FrameRecord*> by_id;
  for (const auto& r : transformed.frames) by_id[r.id] = &r;
  const std::vector<char> sel = selection_mask(src.frames.size(), plan);
  DatasetManifest out = output_manifest(src, outcam);
  for (std::size_t i = 0; i < src.frames.size(); ++i) {
    if (!sel[i]) {
      out.frames[i] = carry_over(src_dir, src, i, out_dir, outcam);
      continue;
    }
    const auto it = by_id.find(src.frames[i].id);
    if (it == by_id.end())
      throw InputError("mix: transformed dataset lacks frame '" + src.frames[i].id + "'");
    FrameRecord r = *it->second;
    copy_frame_files(transformed_dir, out_dir, r);
    if (r.provenance.rfind("transformed", 0) != 0) r.provenance = "transformed:" + transformed.rig.id;
    out.frames[i] = r;
  }
  out.save(out_dir);
  return out;
}

DatasetManifest rectify_dataset(const fs::path& src_dir, const DatasetManifest& src, double hfov_deg,
                                const fs::path& out_dir) {
  fs::create_directories(out_dir);
  require_distinct(src_dir, out_dir);
  const PinholeIntrinsics outcam = output_intrinsics(src.rig.camera, hfov_deg);
  DatasetManifest out = output_manifest(src, outcam);
  parallel_for(static_cast<int>(src.frames.size()), [&](int i) {
    const FrameRecord& rec = src.frames[i];
    const Frame f = rectify_frame(load_frame(src_dir, rec, src.rig.camera), outcam);
    FrameRecord r = save_frame(out_dir, f, rec.provenance);
    r.flags = rec.flags;
    out.frames[i] = r;
  });
  out.save(out_dir);
  return out;
}

PerturbationBounds parse_bounds(const std::string& text) {
  PerturbationBounds b;
  std::stringstream ss(text);
  std::string item;
  bool any = false;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::stringstream is(item);
    std::string name, lo_s, hi_s;
    std::getline(is, name, ':');
    std::getline(is, lo_s, ':');
    std::getline(is, hi_s, ':');
    double lo, hi;
    try {
      std::size_t used_lo = 0, used_hi = 0;
      lo = std::stod(lo_s, &used_lo);
      hi = std::stod(hi_s, &used_hi);
      if (used_lo != lo_s.size() || used_hi != hi_s.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw InputError("bad bounds entry '" + item + "' (expected name:lo:hi)");
    }
    if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) throw InputError("bad bounds entry '" + item + "'");
    double RigPerturbation::*field = nullptr;
    if (name == "pitch") field = &RigPerturbation::d_pitch;
    else if (name == "yaw") field = &RigPerturbation::d_yaw;
    else if (name == "height") field = &RigPerturbation::d_height;
    else if (name == "depth") field = &RigPerturbation::d_depth;
    else throw InputError("unknown bounds axis '" + name + "'");
    b.lo.*field = lo;
    b.hi.*field = hi;
    any = true;
  }
  if (!any) throw InputError("empty bounds");
  return b;
}

AugmentResult extrinsic_augment(const RigPose& rig, const std::vector<OrientedBox3D>& boxes,
                                const PerturbationBounds& bounds, std::uint64_t seed) {
  Rng rng(seed);
  AugmentResult res;
  res.sampled.d_pitch = rng.uniform(bounds.lo.d_pitch, bounds.hi.d_pitch);
  res.sampled.d_yaw = rng.uniform(bounds.lo.d_yaw, bounds.hi.d_yaw);
  res.rig = perturb_rig(rig, res.sampled);
  if (res.sampled.d_pitch != 0.0 || res.sampled.d_yaw != 0.0)
    res.delta = res.rig.rotation * rig.rotation.transpose();
  const Vec3& c = rig.translation;
  res.boxes.reserve(boxes.size());
  for (const auto& b : boxes) {
    OrientedBox3D o = b;
    if (res.sampled.d_pitch != 0.0 || res.sampled.d_yaw != 0.0) {
      o.center = c + res.delta * (b.center - c);
      o.rotation = res.delta * b.rotation;
    }
    res.boxes.push_back(o);
  }
  return res;
}

DatasetManifest source_star_swap(const DatasetManifest& manifest, const RigPose& train_rig) {
  DatasetManifest out = manifest;
  out.rig.extrinsic = train_rig;
  for (auto& f : out.frames) {
    f.pose = train_rig;
    f.provenance = "source-star";
  }
  return out;
}

}  // namespace sheetwarp
