#include "sheetwarp/sheet.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <string>

#include <json.hpp>

#include "sheetwarp/io.hpp"
#include "sheetwarp/parallel.hpp"
#include "sheetwarp/render.hpp"

namespace sheetwarp {

Vec2 WorldSheet::anchor(int i, int j) const {
  const SheetVertex& v = vertices[vertex_index(i, j)];
  return {std::clamp((i + v.du) / (grid_w - 1), 0.0, 1.0), std::clamp((j + v.dv) / (grid_h - 1), 0.0, 1.0)};
}

Vec2 WorldSheet::anchor_pixel(int i, int j) const {
  const Vec2 a = anchor(i, j);
  return {a.x() * (image_width - 1), a.y() * (image_height - 1)};
}

void WorldSheet::update_uv() {
  uv.resize(vertices.size());
  for (int j = 0; j < grid_h; ++j)
    for (int i = 0; i < grid_w; ++i) uv[vertex_index(i, j)] = anchor(i, j);
}

void WorldSheet::validate() const {
  if (grid_w < 2 || grid_h < 2) throw InputError("sheet: grid must be at least 2x2");
  const std::size_t n = static_cast<std::size_t>(grid_w) * grid_h;
  if (vertices.size() != n || uv.size() != n) throw InputError("sheet: vertex arrays have wrong size");
  if (faces.size() != 2u * (grid_w - 1) * (grid_h - 1)) throw InputError("sheet: wrong face count");
  for (const SheetVertex& v : vertices) {
    if (!(v.z > 0) || !std::isfinite(v.z)) throw InputError("sheet: vertex depth must be positive");
    if (std::abs(v.du) > offset_bound + 1e-12 || std::abs(v.dv) > offset_bound + 1e-12)
      throw InputError("sheet: vertex offset exceeds bound");
  }
  for (const auto& f : faces)
    for (int idx : f)
      if (idx < 0 || static_cast<std::size_t>(idx) >= n) throw InputError("sheet: face index out of range");
}

std::vector<std::array<int, 3>> lattice_faces(int gw, int gh) {
  std::vector<std::array<int, 3>> faces;
  faces.reserve(2u * (gw - 1) * (gh - 1));
  for (int j = 0; j + 1 < gh; ++j)
    for (int i = 0; i + 1 < gw; ++i) {
      const int v00 = j * gw + i, v10 = v00 + 1, v01 = v00 + gw, v11 = v01 + 1;
      faces.push_back({v00, v10, v11});
      faces.push_back({v00, v11, v01});
    }
  return faces;
}

namespace {

/// Median of valid samples in the window |x - cx| <= hx, |y - cy| <= hy.
/// Returns 0 when the window holds no valid sample.
double window_median(const DepthMap& d, double cx, double cy, double hx, double hy, std::vector<double>& scratch) {
  const int x0 = std::max(0, static_cast<int>(std::ceil(cx - hx - 1e-9)));
  const int x1 = std::min(d.width() - 1, static_cast<int>(std::floor(cx + hx + 1e-9)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(cy - hy - 1e-9)));
  const int y1 = std::min(d.height() - 1, static_cast<int>(std::floor(cy + hy + 1e-9)));
  scratch.clear();
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double v = d.at(x, y);
      if (v > 0 && std::isfinite(v)) scratch.push_back(v);
    }
  if (scratch.empty()) return 0.0;
  const std::size_t mid = scratch.size() / 2;
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(mid), scratch.end());
  const double upper = scratch[mid];
  if (scratch.size() % 2 == 1) return upper;
  const double lower = *std::max_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace

WorldSheet build_sheet(const DepthMap& depth, const CameraModel& camera, int grid_w, int grid_h) {
  if (grid_w < 2 || grid_h < 2) throw InputError("build_sheet: grid must be at least 2x2");
  if (depth.width() != image_width(camera) || depth.height() != image_height(camera))
    throw InputError("build_sheet: depth map does not match camera size");

  WorldSheet s;
  s.grid_w = grid_w;
  s.grid_h = grid_h;
  s.image_width = depth.width();
  s.image_height = depth.height();
  s.vertices.assign(static_cast<std::size_t>(grid_w) * grid_h, SheetVertex{});
  s.vertex_source.assign(s.vertices.size(), VertexSource::Cell);
  s.faces = lattice_faces(grid_w, grid_h);

  const double hx = 0.5 * (depth.width() - 1) / (grid_w - 1);
  const double hy = 0.5 * (depth.height() - 1) / (grid_h - 1);
  std::vector<double> z(s.vertices.size(), 0.0);

  parallel_bands(grid_h, [&](int j0, int j1) {
    std::vector<double> scratch;
    for (int j = j0; j < j1; ++j)
      for (int i = 0; i < grid_w; ++i) {
        const int v = s.vertex_index(i, j);
        const Vec2 a = s.anchor_pixel(i, j);
        double m = window_median(depth, a.x(), a.y(), hx, hy, scratch);
        if (m == 0.0) {
          m = window_median(depth, a.x(), a.y(), 3 * hx, 3 * hy, scratch);
          s.vertex_source[v] = VertexSource::Neighborhood;
        }
        z[v] = m;
      }
  });

  // Breadth-first fill of empty vertices from the nearest valid ones; the
  // queue is seeded in index order so ties resolve deterministically.
  std::deque<int> queue;
  for (int v = 0; v < static_cast<int>(z.size()); ++v)
    if (z[v] > 0) queue.push_back(v);
  if (queue.empty()) throw InputError("no depth: depth map has no valid samples");
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    const int i = v % grid_w, j = v / grid_w;
    const int nbrs[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
    for (const auto& nb : nbrs) {
      if (nb[0] < 0 || nb[1] < 0 || nb[0] >= grid_w || nb[1] >= grid_h) continue;
      const int u = s.vertex_index(nb[0], nb[1]);
      if (z[u] > 0) continue;
      z[u] = z[v];
      s.vertex_source[u] = VertexSource::Propagated;
      queue.push_back(u);
    }
  }
  for (std::size_t v = 0; v < z.size(); ++v) s.vertices[v].z = z[v];
  s.update_uv();
  return s;
}

TexturedSheet splat_texture(const Image& image, const WorldSheet& sheet) {
  if (image.width() != sheet.image_width || image.height() != sheet.image_height)
    throw InputError("splat_texture: image does not match the sheet's source image size");
  TexturedSheet ts{sheet, image};
  ts.sheet.update_uv();
  return ts;
}

Vec3 vertex_position(const WorldSheet& sheet, const CameraModel& camera, int v) {
  return unproject(camera, sheet.anchor_pixel(v), sheet.vertices[v].z);
}

bool is_stretch_face(const WorldSheet& sheet, const std::array<int, 3>& f, double ratio) {
  const double a = sheet.vertices[f[0]].z, b = sheet.vertices[f[1]].z, c = sheet.vertices[f[2]].z;
  return std::max({a, b, c}) > ratio * std::min({a, b, c});
}

DepthMap sheet_depth(const WorldSheet& sheet, const PinholeIntrinsics& intr) {
  TexturedSheet ts{sheet, Image(sheet.image_width, sheet.image_height)};
  RenderOptions opt;
  opt.shade = false;
  return render(ts, intr, intr, RigPose::identity(), opt).depth;
}

// ---------------------------------------------------------------------------

void save_sheet(const std::filesystem::path& path, const WorldSheet& sheet) {
  nlohmann::json header = {{"format", "sheetwarp-sheet"},  {"version", 1},
                           {"grid_w", sheet.grid_w},        {"grid_h", sheet.grid_h},
                           {"image_width", sheet.image_width}, {"image_height", sheet.image_height},
                           {"offset_bound", sheet.offset_bound}, {"arrays", {"z", "du", "dv"}}};
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << header.dump() << "\n";
  std::vector<float> z, du, dv;
  for (const SheetVertex& v : sheet.vertices) {
    z.push_back(static_cast<float>(v.z));
    du.push_back(static_cast<float>(v.du));
    dv.push_back(static_cast<float>(v.dv));
  }
  io::write_f32_le(os, z);
  io::write_f32_le(os, du);
  io::write_f32_le(os, dv);
}

WorldSheet load_sheet(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  const auto header = nlohmann::json::parse(line);
  if (header.value("format", "") != "sheetwarp-sheet") throw InputError("not a sheet dump: " + path.string());
  WorldSheet s;
  s.grid_w = header.at("grid_w");
  s.grid_h = header.at("grid_h");
  s.image_width = header.at("image_width");
  s.image_height = header.at("image_height");
  s.offset_bound = header.at("offset_bound");
  const std::size_t n = static_cast<std::size_t>(s.grid_w) * s.grid_h;
  const auto z = io::read_f32_le(is, n), du = io::read_f32_le(is, n), dv = io::read_f32_le(is, n);
  s.vertices.resize(n);
  for (std::size_t v = 0; v < n; ++v) s.vertices[v] = {z[v], du[v], dv[v]};
  s.vertex_source.assign(n, VertexSource::Cell);
  s.faces = lattice_faces(s.grid_w, s.grid_h);
  s.update_uv();
  return s;
}

}  // namespace sheetwarp
