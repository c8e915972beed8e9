#include "sheetwarp/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sheetwarp/bev.hpp"
#include "sheetwarp/io.hpp"
#include "sheetwarp/loss.hpp"
#include "sheetwarp/manifest.hpp"
#include "sheetwarp/parallel.hpp"
#include "sheetwarp/pipeline.hpp"
#include "sheetwarp/random.hpp"
#include "sheetwarp/refine.hpp"
#include "sheetwarp/simworld.hpp"

namespace sheetwarp {

namespace {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

struct RunConfig {
  std::uint64_t seed = 0;
  int threads = -1;  // -1: not given on the command line
  std::string output;
  std::string log_level = "warn";
};

class Log {
 public:
  Log(std::ostream& err, const std::string& level) : err_(err) {
    if (level == "error") level_ = Level::Error;
    else if (level == "warn") level_ = Level::Warn;
    else if (level == "info") level_ = Level::Info;
    else if (level == "debug") level_ = Level::Debug;
    else throw InputError("unknown log level '" + level + "'");
  }
  void operator()(Level l, const std::string& msg) const {
    static const char* names[] = {"error", "warn", "info", "debug"};
    if (l <= level_) err_ << "[" << names[static_cast<int>(l)] << "] " << msg << "\n";
  }

 private:
  std::ostream& err_;
  Level level_ = Level::Warn;
};

/// "65x65" or "65"
std::pair<int, int> parse_grid(const std::string& s) {
  int w = 0, h = 0;
  char x = 0;
  std::istringstream is(s);
  if (!(is >> w)) throw InputError("bad grid '" + s + "'");
  if (is >> x) {
    if ((x != 'x' && x != 'X') || !(is >> h)) throw InputError("bad grid '" + s + "' (expected WxH)");
  } else {
    h = w;
  }
  if (w < 2 || h < 2) throw InputError("grid must be at least 2x2");
  return {w, h};
}

int resolve_threads(int flag) {
  if (flag >= 0) return flag;
  if (const char* env = std::getenv("SHEETWARP_THREADS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 0) throw InputError("SHEETWARP_THREADS must be a non-negative integer");
    return static_cast<int>(v);
  }
  return 0;
}

fs::path require_output(const RunConfig& rc, const char* what) {
  if (rc.output.empty()) throw InputError(std::string(what) + " needs --output");
  return rc.output;
}

/// Writes text to --output if given, else to `out`.
void emit(const RunConfig& rc, std::ostream& out, const std::string& text) {
  if (rc.output.empty()) {
    out << text;
    return;
  }
  const fs::path p(rc.output);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  io::write_text(p, text);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << v;
  return os.str();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Viewpoint transformation and evaluation toolkit for camera-rig datasets", "sheetwarp"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  RunConfig rc;
  app.add_option("--seed", rc.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--threads", rc.threads, "Worker threads (0 = auto; default from SHEETWARP_THREADS)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("-o,--output", rc.output, "Output directory (datasets) or file (CSV)");
  app.add_option("--log-level", rc.log_level, "error|warn|info|debug")->capture_default_str();

  // simgen
  auto* simgen = app.add_subcommand("simgen", "Generate a procedural dataset");
  int sg_frames = 8, sg_boxes = 7, sg_width = 640, sg_height = 384, sg_rays = 20000;
  double sg_extent = 42.0, sg_hfov = -1.0, sg_rig_height = 1.5;
  std::string sg_camera = "pinhole";
  simgen->add_option("--frames", sg_frames, "Frame count")->capture_default_str()->check(CLI::PositiveNumber);
  simgen->add_option("--boxes", sg_boxes, "Boxes per scene")->capture_default_str()->check(CLI::NonNegativeNumber);
  simgen->add_option("--extent", sg_extent, "Scene depth extent, m")->capture_default_str();
  simgen->add_option("--width", sg_width)->capture_default_str()->check(CLI::PositiveNumber);
  simgen->add_option("--height", sg_height)->capture_default_str()->check(CLI::PositiveNumber);
  simgen->add_option("--camera", sg_camera, "pinhole|ftheta")->capture_default_str();
  simgen->add_option("--hfov", sg_hfov, "Horizontal FOV, deg (default 50 pinhole, 120 f-theta)");
  simgen->add_option("--rig-height", sg_rig_height, "Camera height, m")->capture_default_str();
  simgen->add_option("--lidar-rays", sg_rays, "Lidar rays per frame")->capture_default_str();

  // rectify
  auto* rect = app.add_subcommand("rectify", "Rectify an f-theta dataset to a pinhole model");
  std::string rect_in;
  double rect_hfov = 50.0;
  rect->add_option("--input", rect_in, "Dataset directory")->required();
  rect->add_option("--hfov", rect_hfov, "Target horizontal FOV, deg")->capture_default_str();

  // transform
  auto* tr = app.add_subcommand("transform", "Transform (a fraction of) a dataset to a perturbed rig");
  std::string tr_in, tr_grid = "65x65";
  RigPerturbation tr_p;
  double tr_ratio = 1.0, tr_floor = 0.4;
  bool tr_refine = false, tr_keep_stretch = false;
  tr->add_option("--input", tr_in, "Dataset directory")->required();
  tr->add_option("--pitch", tr_p.d_pitch, "deg")->capture_default_str();
  tr->add_option("--yaw", tr_p.d_yaw, "deg")->capture_default_str();
  tr->add_option("--height", tr_p.d_height, "m")->capture_default_str();
  tr->add_option("--depth", tr_p.d_depth, "m")->capture_default_str();
  tr->add_option("--ratio", tr_ratio, "Fraction of frames to transform")->capture_default_str();
  tr->add_option("--grid", tr_grid, "Sheet lattice WxH")->capture_default_str();
  tr->add_option("--coverage-floor", tr_floor)->capture_default_str();
  tr->add_flag("--refine", tr_refine, "Refine sheets against lidar first");
  tr->add_flag("--keep-stretch-faces", tr_keep_stretch, "Do not drop faces across depth discontinuities");

  // mix
  auto* mix = app.add_subcommand("mix", "Mix a source dataset with its transformed version");
  std::string mix_src, mix_tr;
  double mix_ratio = 0.5;
  mix->add_option("--source", mix_src, "Source dataset")->required();
  mix->add_option("--transformed", mix_tr, "Transformed dataset (same frame ids)")->required();
  mix->add_option("--ratio", mix_ratio)->capture_default_str();

  // augment-extrinsics
  auto* aug = app.add_subcommand("augment-extrinsics", "Rotate extrinsics and 3D boxes together");
  std::string aug_in, aug_bounds;
  aug->add_option("--input", aug_in, "Dataset directory")->required();
  aug->add_option("--bounds", aug_bounds, "pitch:lo:hi,yaw:lo:hi (deg)")->required();

  // swap-extrinsics
  auto* swap = app.add_subcommand("swap-extrinsics", "Report the train rig for every frame");
  std::string swap_in, swap_train;
  swap->add_option("--input", swap_in, "Dataset directory")->required();
  swap->add_option("--train-manifest", swap_train, "Dataset whose rig extrinsic is the train rig (default: input rig)");

  // refine
  auto* ref = app.add_subcommand("refine", "Refine sheets against lidar");
  std::string ref_in, ref_grid = "65x65", ref_frame;
  RefineConfig ref_cfg;
  ref->add_option("--input", ref_in, "Dataset directory")->required();
  ref->add_option("--frame", ref_frame, "Frame id (default: all frames)");
  ref->add_option("--grid", ref_grid)->capture_default_str();
  ref->add_option("--iters", ref_cfg.max_iters)->capture_default_str();
  ref->add_option("--lambda-smooth", ref_cfg.lambda_smooth)->capture_default_str();
  ref->add_option("--step", ref_cfg.step)->capture_default_str();
  ref->add_flag("--offsets", ref_cfg.optimize_offsets, "Also optimize lattice offsets");

  // metrics
  auto* met = app.add_subcommand("metrics", "Image/depth metrics of predicted vs ground-truth frames");
  std::string met_pred, met_gt;
  met->add_option("--pred", met_pred, "Predicted dataset")->required();
  met->add_option("--gt", met_gt, "Ground-truth dataset")->required();

  // sweep
  auto* sw = app.add_subcommand("sweep", "BEV IoU across rig perturbations");
  std::string sw_axis = "pitch";
  double sw_from = 0, sw_to = 0, sw_step = 0;
  int sw_scenes = 20, sw_boxes = 7;
  bool sw_reference = false;
  sw->add_option("--axis", sw_axis, "pitch|yaw|height|depth|pitch-height")->capture_default_str();
  auto* o_from = sw->add_option("--from", sw_from);
  auto* o_to = sw->add_option("--to", sw_to);
  auto* o_step = sw->add_option("--step", sw_step);
  sw->add_option("--scenes", sw_scenes)->capture_default_str()->check(CLI::PositiveNumber);
  sw->add_option("--boxes", sw_boxes)->capture_default_str();
  sw->add_flag("--reference-rigs", sw_reference, "Evaluate the reference rig set instead of an axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    err << app.help();
    return 1;
  }

  try {
    const Log log(err, rc.log_level);
    set_default_threads(resolve_threads(rc.threads));
    log(Level::Debug, "threads = " + std::to_string(default_threads()));

    if (*simgen) {
      const fs::path dir = require_output(rc, "simgen");
      CameraModel cam;
      if (sg_camera == "pinhole") cam = PinholeIntrinsics::from_hfov(sg_width, sg_height, sg_hfov > 0 ? sg_hfov : 50.0);
      else if (sg_camera == "ftheta") cam = FThetaIntrinsics::equidistant(sg_width, sg_height, sg_hfov > 0 ? sg_hfov : 120.0);
      else throw InputError("unknown camera '" + sg_camera + "'");
      if (sg_rays < 1) throw InputError("--lidar-rays must be >= 1");
      DatasetManifest m;
      m.rig.id = "source";
      m.rig.camera = cam;
      m.rig.extrinsic = forward_camera_pose(sg_rig_height);
      m.frames.resize(sg_frames);
      fs::create_directories(dir);
      SceneRenderOptions ropt;
      ropt.threads = 1;
      parallel_for(sg_frames, [&](int k) {
        const Scene scene = make_scene(hash_combine(rc.seed, static_cast<std::uint64_t>(k)), sg_boxes, sg_extent);
        std::ostringstream id;
        id << "frame_" << std::setw(4) << std::setfill('0') << k;
        Frame f = render_frame(scene, m.rig.extrinsic, cam, id.str(), ropt);
        f.lidar = sample_lidar(scene, f.pose, cam, sg_rays, hash_combine(rc.seed ^ 0x11da5, static_cast<std::uint64_t>(k)));
        m.frames[k] = save_frame(dir, f, "source");
      });
      m.save(dir);
      const nlohmann::json rig = {{"id", m.rig.id}, {"camera", camera_to_json(cam)}, {"extrinsic", pose_to_json(m.rig.extrinsic)}};
      io::write_text(dir / "rig.json", rig.dump(2) + "\n");
      log(Level::Info, "wrote " + std::to_string(sg_frames) + " frames to " + dir.string());
      return 0;
    }

    if (*rect) {
      const fs::path dir = require_output(rc, "rectify");
      const auto m = DatasetManifest::load(rect_in);
      rectify_dataset(rect_in, m, rect_hfov, dir);
      return 0;
    }

    if (*tr) {
      const fs::path dir = require_output(rc, "transform");
      const auto m = DatasetManifest::load(tr_in);
      TransformConfig cfg;
      std::tie(cfg.grid_w, cfg.grid_h) = parse_grid(tr_grid);
      cfg.coverage_floor = tr_floor;
      cfg.refine = tr_refine;
      cfg.drop_stretch_faces = !tr_keep_stretch;
      MixPlan plan{tr_ratio, rc.seed, tr_p};
      const auto outm = build_mixed_dataset(tr_in, m, plan, cfg, dir);
      for (const auto& f : outm.frames)
        for (const auto& flag : f.flags)
          if (flag == "low_coverage") log(Level::Warn, "frame " + f.id + " below coverage floor");
      for (const auto& [tag, n] : outm.provenance_counts()) log(Level::Info, tag + ": " + std::to_string(n));
      return 0;
    }

    if (*mix) {
      const fs::path dir = require_output(rc, "mix");
      const auto src = DatasetManifest::load(mix_src);
      const auto trm = DatasetManifest::load(mix_tr);
      MixPlan plan;
      plan.ratio = mix_ratio;
      plan.seed = rc.seed;
      const auto outm = assemble_mix(mix_src, src, mix_tr, trm, plan, dir);
      for (const auto& [tag, n] : outm.provenance_counts()) out << tag << "," << n << "\n";
      return 0;
    }

    if (*aug) {
      const fs::path dir = require_output(rc, "augment-extrinsics");
      const auto m = DatasetManifest::load(aug_in);
      const PerturbationBounds bounds = parse_bounds(aug_bounds);
      if (fs::exists(dir) && fs::equivalent(dir, aug_in)) throw InputError("output must differ from input");
      DatasetManifest outm = m;
      for (std::size_t i = 0; i < m.frames.size(); ++i) {
        FrameRecord rec = m.frames[i];
        std::vector<OrientedBox3D> boxes;
        if (!rec.boxes.empty()) boxes = boxes_from_json(nlohmann::json::parse(io::read_text(fs::path(aug_in) / rec.boxes)));
        copy_frame_files(aug_in, dir, rec);
        const AugmentResult a = extrinsic_augment(rec.pose, boxes, bounds, hash_combine(rc.seed, i));
        rec.pose = a.rig;
        if (!rec.boxes.empty()) io::write_text(dir / rec.boxes, boxes_to_json(a.boxes).dump(2) + "\n");
        rec.flags.push_back("extrinsic-augmented");
        outm.frames[i] = rec;
      }
      outm.save(dir);
      return 0;
    }

    if (*swap) {
      const fs::path dir = require_output(rc, "swap-extrinsics");
      const auto m = DatasetManifest::load(swap_in);
      if (fs::exists(dir) && fs::equivalent(dir, swap_in)) throw InputError("output must differ from input");
      const RigPose train = swap_train.empty() ? m.rig.extrinsic : DatasetManifest::load(swap_train).rig.extrinsic;
      const auto outm = source_star_swap(m, train);
      for (const auto& f : outm.frames) copy_frame_files(swap_in, dir, f);
      outm.save(dir);
      return 0;
    }

    if (*ref) {
      const fs::path dir = require_output(rc, "refine");
      const auto m = DatasetManifest::load(ref_in);
      const auto [gw, gh] = parse_grid(ref_grid);
      fs::create_directories(dir);
      bool any = false;
      for (const auto& rec : m.frames) {
        if (!ref_frame.empty() && rec.id != ref_frame) continue;
        any = true;
        const Frame f = load_frame(ref_in, rec, m.rig.camera);
        if (f.lidar.empty()) throw InputError("frame '" + rec.id + "' has no lidar");
        DepthMap lidar = render_sparse_depth(f.lidar, f.pose, f.camera);
        const WorldSheet init = build_sheet(lidar, f.camera, gw, gh);
        const RefineResult r = refine_sheet(init, lidar, f.camera, ref_cfg);
        save_sheet(dir / (rec.id + ".sheet"), r.sheet);
        std::ostringstream csv;
        csv << "iter,loss\n";
        for (std::size_t k = 0; k < r.trace.size(); ++k) csv << k << "," << std::setprecision(17) << r.trace[k] << "\n";
        io::write_text(dir / (rec.id + "_trace.csv"), csv.str());
        if (r.status == RefineStatus::StepUnderflow) log(Level::Warn, rec.id + ": step underflow");
        log(Level::Info, rec.id + ": " + to_string(r.status) + " after " + std::to_string(r.iterations) + " iterations");
      }
      if (!any) throw InputError("no frame matches '" + ref_frame + "'");
      return 0;
    }

    if (*met) {
      const auto pm = DatasetManifest::load(met_pred);
      const auto gm = DatasetManifest::load(met_gt);
      std::map<std::string, const FrameRecord*> gt_by_id;
      for (const auto& r : gm.frames) gt_by_id[r.id] = &r;
      std::ostringstream csv;
      csv << "frame,im_l1,psnr_db,ssim,depth_l1\n";
      for (const auto& rec : pm.frames) {
        const auto it = gt_by_id.find(rec.id);
        if (it == gt_by_id.end()) throw InputError("metrics: ground truth lacks frame '" + rec.id + "'");
        const Frame p = load_frame(met_pred, rec, pm.rig.camera);
        Frame g = load_frame(met_gt, *it->second, gm.rig.camera);
        const PinholeIntrinsics pcam = output_intrinsics(pm.rig.camera);
        g = rectify_frame(g, pcam);
        RenderOutput pred{p.image, p.depth.empty() ? DepthMap(p.image.width(), p.image.height()) : p.depth,
                          p.coverage.empty() ? PixelMask(p.image.width(), p.image.height(), 1) : p.coverage, {}};
        DepthMap gdepth = g.depth.empty() ? (g.lidar.empty() ? DepthMap(g.image.width(), g.image.height())
                                                             : render_sparse_depth(g.lidar, g.pose, g.camera))
                                          : g.depth;
        if (!g.coverage.empty())
          for (std::size_t i = 0; i < pred.coverage.pixel_count(); ++i) pred.coverage.data()[i] &= g.coverage.data()[i];
        const MetricReport r = metric_report(pred, g.image, gdepth);
        csv << rec.id << "," << fmt(r.im_l1) << "," << fmt(r.psnr) << "," << fmt(r.ssim) << "," << fmt(r.depth_l1) << "\n";
      }
      emit(rc, out, csv.str());
      return 0;
    }

    if (*sw) {
      std::vector<SweepPoint> pts;
      if (sw_reference) {
        pts = reference_rig_set();
      } else {
        double from = -20, to = 20, step = 4;
        if (sw_axis == "height") from = 0, to = 30 * kInchToMeter, step = 3 * kInchToMeter;
        else if (sw_axis == "depth") from = 0, to = 1.5, step = 0.5;
        else if (sw_axis == "pitch-height") from = 0, to = -20, step = -4;
        if (o_from->count()) from = sw_from;
        if (o_to->count()) to = sw_to;
        if (o_step->count()) step = sw_step;
        pts = axis_sweep(sw_axis, from, to, step);
      }
      const auto scenes = sweep_scenes(sw_scenes, rc.seed, sw_boxes);
      const SweepResult res = run_sweep(scenes, pts);
      for (const auto& r : res.rows)
        if (r.failed_frames > 0)
          log(Level::Warn, r.point.axis + " " + std::to_string(r.point.delta) + ": " + std::to_string(r.failed_frames) +
                               " frame(s) failed correction");
      emit(rc, out, res.to_csv());
      return 0;
    }
    return 1;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const GeometryError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "runtime failure: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace sheetwarp
