#include "sheetwarp/bev.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "sheetwarp/parallel.hpp"
#include "sheetwarp/random.hpp"
#include "sheetwarp/reduce.hpp"

namespace sheetwarp {

namespace {

int integral_cells(double extent, double res, const char* what) {
  const double n = extent / res;
  const double r = std::round(n);
  if (!(r >= 1) || std::abs(n - r) > 1e-9 * std::max(1.0, r))
    throw InputError(std::string("BEV ") + what + " must be an integral multiple of the resolution");
  return static_cast<int>(r);
}

}  // namespace

int BevSpec::cells_x() const { return integral_cells(length, resolution, "length"); }
int BevSpec::cells_y() const { return integral_cells(width, resolution, "width"); }

void BevSpec::validate() const {
  if (!(resolution > 0)) throw InputError("BEV resolution must be > 0");
  cells_x();
  cells_y();
}

BevGrid::BevGrid(const BevSpec& s) : spec(s) {
  spec.validate();
  nx = spec.cells_x();
  ny = spec.cells_y();
  cells.assign(static_cast<std::size_t>(nx) * ny, 0);
}

Vec2 BevGrid::cell_center(int ix, int iy) const {
  return {(ix + 0.5) * spec.resolution, -0.5 * spec.width + (iy + 0.5) * spec.resolution};
}

void BevGrid::mark(double x, double y) {
  const double fx = std::floor(x / spec.resolution), fy = std::floor((y + 0.5 * spec.width) / spec.resolution);
  if (!(fx >= 0 && fy >= 0 && fx < nx && fy < ny)) return;
  at(static_cast<int>(fx), static_cast<int>(fy)) = 1;
}

std::size_t BevGrid::count() const {
  std::size_t n = 0;
  for (auto c : cells) n += c ? 1 : 0;
  return n;
}

double iou(const BevGrid& a, const BevGrid& b) {
  if (!(a.spec == b.spec)) throw InputError("iou: BEV grid specs differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    const bool x = a.cells[i] != 0, y = b.cells[i] != 0;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

Raster<int, 1> classify_vehicles(const Image& image, const PixelMask* coverage, double threshold) {
  if (coverage) require_same_shape(image, *coverage, "classify_vehicles");
  const auto& pal = vehicle_palette();
  Raster<int, 1> label(image.width(), image.height(), -1);
  const double t2 = threshold * threshold;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      if (coverage && !coverage->at(x, y)) {
        label.at(x, y) = -2;
        continue;
      }
      double best = t2;
      for (std::size_t k = 0; k < pal.size(); ++k) {
        double d2 = 0;
        for (int c = 0; c < 3; ++c) {
          const double d = image.at(x, y, c) - pal[k][c];
          d2 += d * d;
        }
        if (d2 <= best) {
          best = d2;
          label.at(x, y) = static_cast<int>(k);
        }
      }
    }
  return label;
}

namespace {

struct Contact {
  int x = 0;
  int label = 0;
  Vec2 g;  ///< ground position under the assumed rig
};

/// Marks cells whose centers lie in {p + s a + t b : s, t in [0, 1]}.
void fill_parallelogram(BevGrid& grid, const Vec2& p, const Vec2& a, const Vec2& b) {
  Eigen::Matrix2d m;
  m << a, b;
  if (std::abs(m.determinant()) < 1e-12) return;
  const Eigen::Matrix2d inv = m.inverse();
  const double res = grid.spec.resolution, half_w = 0.5 * grid.spec.width;
  double x0 = p.x(), x1 = p.x(), y0 = p.y(), y1 = p.y();
  for (const Vec2& q : {Vec2(p + a), Vec2(p + b), Vec2(p + a + b)}) {
    x0 = std::min(x0, q.x()), x1 = std::max(x1, q.x());
    y0 = std::min(y0, q.y()), y1 = std::max(y1, q.y());
  }
  const int ix0 = std::max(0, static_cast<int>(std::floor(x0 / res - 0.5))),
            ix1 = std::min(grid.nx - 1, static_cast<int>(std::ceil(x1 / res)));
  const int iy0 = std::max(0, static_cast<int>(std::floor((y0 + half_w) / res - 0.5))),
            iy1 = std::min(grid.ny - 1, static_cast<int>(std::ceil((y1 + half_w) / res)));
  for (int ix = ix0; ix <= ix1; ++ix)
    for (int iy = iy0; iy <= iy1; ++iy) {
      const Vec2 st = inv * (grid.cell_center(ix, iy) - p);
      if (st.x() >= 0 && st.x() <= 1 && st.y() >= 0 && st.y() <= 1) grid.at(ix, iy) = 1;
    }
}

void complete_footprint(BevGrid& grid, const std::vector<Contact>& run, const Vec2& eye, const IpmConfig& cfg) {
  std::size_t m = 0;
  for (std::size_t i = 1; i < run.size(); ++i)
    if ((run[i].g - eye).norm() < (run[m].g - eye).norm()) m = i;
  const Vec2 corner = run[m].g;
  const Vec2 el = run.front().g - corner, er = run.back().g - corner;
  const double ll = el.norm(), lr = er.norm();
  // two edges meeting at a corner
  if (ll > 0.3 && lr > 0.3 && std::abs(el.x() * er.y() - el.y() * er.x()) > 0.5 * ll * lr) {
    fill_parallelogram(grid, corner, el, er);
    return;
  }
  // one edge: push it away from the camera
  const Vec2 a = run.front().g, b = run.back().g;
  Vec2 u = b - a;
  const double l = u.norm();
  const Vec2 mid = 0.5 * (a + b);
  Vec2 n;
  if (l > 1e-6) {
    u /= l;
    n = Vec2(-u.y(), u.x());
  } else {
    n = (mid - eye).normalized();
  }
  if (n.dot(mid - eye) < 0) n = -n;
  const double hidden = l <= cfg.max_front_edge ? cfg.nominal_length : cfg.nominal_width;
  fill_parallelogram(grid, a, b - a, hidden * n);
}

}  // namespace

BevGrid ipm_segment(const Frame& frame, const RigPose& assumed_rig, const CameraModel& camera, const IpmConfig& cfg) {
  if (!(assumed_rig.translation.z() > 0)) throw GeometryError("ipm_segment: assumed rig must be above the ground");
  if (frame.image.width() != image_width(camera) || frame.image.height() != image_height(camera))
    throw InputError("ipm_segment: image does not match the camera");
  BevGrid grid(cfg.spec);
  const Image& img = frame.image;
  const Raster<int, 1> label = classify_vehicles(img, frame.coverage.empty() ? nullptr : &frame.coverage,
                                                 cfg.color_threshold);
  const auto& pal = vehicle_palette();
  const Vec3& o = assumed_rig.translation;
  const int w = img.width(), h = img.height();

  // contacts in column order, top to bottom within a column
  std::vector<Contact> contacts;
  for (int x = 0; x < w; ++x)
    for (int y = 0; y + 1 < h; ++y) {
      const int k = label.at(x, y);
      if (k < 0 || label.at(x, y + 1) != -1) continue;
      // slanted side edges flip labels mid-face; keep horizontally interior contacts
      auto beside = [&](int xn) {
        if (xn < 0 || xn >= w) return false;
        for (int r = std::max(0, y - 2); r <= y; ++r)
          if (label.at(xn, r) == k) return true;
        return false;
      };
      if (!beside(x - 1) || !beside(x + 1)) continue;
      // The edge sits where the summed vehicle-color fraction of the rows
      // around it says: robust to the blur resampling leaves behind.
      const int ref = std::min(y + 3, h - 1);
      double edge = y + 0.5;
      if (ref > y + 1 && label.at(x, ref) == -1) {
        edge = y - 0.5;
        for (int r = y; r < ref; ++r) {
          double num = 0, den = 0;
          for (int c = 0; c < 3; ++c) {
            const double g = img.at(x, ref, c);
            num += (img.at(x, r, c) - g) * (pal[k][c] - g);
            den += (pal[k][c] - g) * (pal[k][c] - g);
          }
          edge += den > 1e-12 ? std::clamp(num / den, 0.0, 1.0) : (r == y ? 1.0 : 0.0);
        }
      }
      const Vec3 d = assumed_rig.rotation * pixel_ray(camera, Vec2(x, edge));
      if (!(d.z() < -1e-9)) continue;
      const double t = -o.z() / d.z();
      if (t * std::hypot(d.x(), d.y()) > 2.0 * (cfg.spec.length + cfg.spec.width)) continue;
      contacts.push_back({x, k, Vec2(o.x() + t * d.x(), o.y() + t * d.y())});
    }

  // chain contacts of adjacent columns into per-object runs
  std::vector<std::vector<Contact>> runs;
  std::vector<std::size_t> open;
  for (const Contact& c : contacts) {
    std::size_t best = runs.size();
    double best_d = cfg.run_gap;
    for (std::size_t r : open) {
      const Contact& last = runs[r].back();
      if (last.x != c.x - 1 || last.label != c.label) continue;
      const double dist = (last.g - c.g).norm();
      if (dist <= best_d) best_d = dist, best = r;
    }
    if (best == runs.size()) {
      runs.push_back({c});
      open.push_back(best);
    } else {
      runs[best].push_back(c);
    }
    // drop runs that can no longer grow
    open.erase(std::remove_if(open.begin(), open.end(), [&](std::size_t r) { return runs[r].back().x < c.x - 1; }),
               open.end());
  }
  const Vec2 eye(o.x(), o.y());
  for (const auto& run : runs) complete_footprint(grid, run, eye, cfg);
  return grid;
}

std::vector<SweepPoint> axis_sweep(const std::string& axis, double from, double to, double step) {
  if (!(step != 0) || !std::isfinite(step) || !std::isfinite(from) || !std::isfinite(to))
    throw InputError("sweep: step must be nonzero and bounds finite");
  if ((to - from) / step < -1e-9) throw InputError("sweep: step does not lead from 'from' to 'to'");
  const int n = static_cast<int>(std::floor((to - from) / step + 1e-9)) + 1;
  std::vector<SweepPoint> pts;
  for (int k = 0; k < n; ++k) {
    SweepPoint p;
    p.axis = axis;
    p.delta = from + k * step;
    if (std::abs(p.delta) < 1e-12 * std::max(1.0, std::abs(step))) p.delta = 0.0;
    if (axis == "pitch") p.perturbation.d_pitch = p.delta;
    else if (axis == "yaw") p.perturbation.d_yaw = p.delta;
    else if (axis == "height") p.perturbation.d_height = p.delta;
    else if (axis == "depth") p.perturbation.d_depth = p.delta;
    else if (axis == "pitch-height") {
      p.perturbation.d_pitch = p.delta;
      p.perturbation.d_height = p.delta == 0.0 ? 0.0 : -p.delta * (6.0 * kInchToMeter / 4.0);
    } else {
      throw InputError("unknown sweep axis '" + axis + "'");
    }
    pts.push_back(p);
  }
  return pts;
}

std::vector<SweepPoint> reference_rig_set() {
  std::vector<SweepPoint> pts;
  for (double p : {-10.0, -5.0, 5.0}) pts.push_back(axis_sweep("pitch", p, p, 1.0)[0]);
  pts.push_back(axis_sweep("depth", 1.5, 1.5, 1.0)[0]);
  for (double hgt : {0.2, 0.8}) pts.push_back(axis_sweep("height", hgt, hgt, 1.0)[0]);
  return pts;
}

std::string SweepResult::to_csv() const {
  std::ostringstream os;
  os << "axis,delta,iou_source,iou_corrected,iou_oracle\n";
  for (const auto& r : rows) {
    os << r.point.axis << ',' << std::setprecision(6) << r.point.delta << ',' << std::fixed << std::setprecision(6)
       << r.iou_source << ',' << r.iou_corrected << ',' << r.iou_oracle << '\n';
    os.unsetf(std::ios::fixed);
  }
  return os.str();
}

std::vector<Scene> sweep_scenes(int n, std::uint64_t seed, int boxes, double extent) {
  if (n < 1) throw InputError("sweep: need at least one scene");
  std::vector<Scene> scenes;
  for (int k = 0; k < n; ++k) scenes.push_back(make_scene(hash_combine(seed, static_cast<std::uint64_t>(k)), boxes, extent));
  return scenes;
}

SweepResult run_sweep(const std::vector<Scene>& scenes, const std::vector<SweepPoint>& points, const SweepConfig& cfg) {
  if (scenes.empty()) throw InputError("sweep: need at least one scene");
  const int ns = static_cast<int>(scenes.size()), np = static_cast<int>(points.size());
  struct Cell {
    double src = 0, cor = 0, ora = 0;
    bool failed = false;
  };
  std::vector<Cell> cells(static_cast<std::size_t>(ns) * np);
  const int outer = cfg.threads > 0 ? cfg.threads : default_threads();
  TransformConfig tcfg = cfg.transform;
  SceneRenderOptions ropt = cfg.render;
  if (outer > 1) {
    tcfg.threads = 1;
    ropt.threads = 1;
  }

  parallel_for(
      ns,
      [&](int s) {
        const Scene& scene = scenes[s];
        const BevGrid gt = bev_groundtruth(scene, cfg.ipm.spec);
        for (int k = 0; k < np; ++k) {
          const RigPerturbation& p = points[k].perturbation;
          const RigPose target_rig = perturb_rig(cfg.source_rig, p);
          const Frame target = render_frame(scene, target_rig, cfg.camera, "", ropt);
          Cell& c = cells[static_cast<std::size_t>(s) * np + k];
          c.src = iou(ipm_segment(target, cfg.source_rig, cfg.camera, cfg.ipm), gt);
          c.ora = iou(ipm_segment(target, target_rig, cfg.camera, cfg.ipm), gt);
          try {
            const TransformResult back = transform_frame(target, -p, tcfg);
            c.cor = iou(ipm_segment(back.frame, cfg.source_rig, cfg.camera, cfg.ipm), gt);
          } catch (const std::exception&) {
            c.failed = true;
            c.cor = 0.0;
          }
        }
      },
      outer);

  SweepResult res;
  for (int k = 0; k < np; ++k) {
    std::vector<double> a(ns), b(ns), c(ns);
    SweepRow row;
    row.point = points[k];
    for (int s = 0; s < ns; ++s) {
      const Cell& cell = cells[static_cast<std::size_t>(s) * np + k];
      a[s] = cell.src;
      b[s] = cell.cor;
      c[s] = cell.ora;
      row.failed_frames += cell.failed ? 1 : 0;
    }
    row.iou_source = pairwise_sum(a) / ns;
    row.iou_corrected = pairwise_sum(b) / ns;
    row.iou_oracle = pairwise_sum(c) / ns;
    res.rows.push_back(row);
  }
  return res;
}

}  // namespace sheetwarp
