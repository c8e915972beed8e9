#include "sheetwarp/refine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "sheetwarp/reduce.hpp"

namespace sheetwarp {

void RefineConfig::validate() const {
  if (max_iters < 1) throw InputError("refine: max_iters must be >= 1");
  if (!(step > 0)) throw InputError("refine: step must be > 0");
  if (!(lambda_smooth >= 0)) throw InputError("refine: lambda_smooth must be >= 0");
  if (!(lambda_direct >= 0)) throw InputError("refine: lambda_direct must be >= 0");
  if (!(huber_delta > 0) || !(far_plane > 0)) throw InputError("refine: huber_delta and far_plane must be > 0");
  if (!(tol >= 0)) throw InputError("refine: tol must be >= 0");
}

std::string to_string(RefineStatus s) {
  switch (s) {
    case RefineStatus::Converged: return "converged";
    case RefineStatus::MaxIters: return "max_iters";
    case RefineStatus::StepUnderflow: return "step_underflow";
  }
  return "?";
}

double weighted_objective(double l_im, double l_direct, double l_rendered, const RefineConfig& cfg) {
  return cfg.lambda_img * l_im + cfg.lambda_direct * l_direct + cfg.lambda_rendered * l_rendered;
}

namespace {

struct LidarPoint {
  double x, y, depth;
};

std::vector<LidarPoint> gather_lidar(const DepthMap& lidar) {
  std::vector<LidarPoint> pts;
  for (int y = 0; y < lidar.height(); ++y)
    for (int x = 0; x < lidar.width(); ++x)
      if (lidar.at(x, y) > 0 && std::isfinite(lidar.at(x, y))) pts.push_back({double(x), double(y), lidar.at(x, y)});
  return pts;
}

double edge(const Vec2& a, const Vec2& b, double px, double py) {
  return (b.x() - a.x()) * (py - a.y()) - (b.y() - a.y()) * (px - a.x());
}

struct Hit {
  int face = -1;
  double b[3] = {0, 0, 0};
  double area = 0;
};

/// First face (in index order) among the 3x3 cells around the nominal cell
/// that contains (x, y).
Hit locate(const WorldSheet& s, const std::vector<Vec2>& pix, double x, double y) {
  const int gw = s.grid_w, gh = s.grid_h;
  const int ci = std::clamp(static_cast<int>(std::floor(x / (s.image_width - 1) * (gw - 1))), 0, gw - 2);
  const int cj = std::clamp(static_cast<int>(std::floor(y / (s.image_height - 1) * (gh - 1))), 0, gh - 2);
  for (int j = std::max(0, cj - 1); j <= std::min(gh - 2, cj + 1); ++j)
    for (int i = std::max(0, ci - 1); i <= std::min(gw - 2, ci + 1); ++i)
      for (int k = 0; k < 2; ++k) {
        const int f = 2 * (j * (gw - 1) + i) + k;
        const auto& face = s.faces[f];
        const Vec2 &p0 = pix[face[0]], &p1 = pix[face[1]], &p2 = pix[face[2]];
        const double area = edge(p0, p1, p2.x(), p2.y());
        if (!(area > 1e-12)) continue;
        const double w0 = edge(p1, p2, x, y), w1 = edge(p2, p0, x, y), w2 = edge(p0, p1, x, y);
        if (w0 < 0 || w1 < 0 || w2 < 0) continue;
        Hit h;
        h.face = f;
        h.b[0] = w0 / area;
        h.b[1] = w1 / area;
        h.b[2] = w2 / area;
        h.area = area;
        return h;
      }
  return {};
}

/// Graph Laplacian over the 4-neighbourhood: L_v = sum_u (s_u - s_v).
Eigen::SparseMatrix<double> lattice_laplacian(int gw, int gh) {
  std::vector<Eigen::Triplet<double>> t;
  for (int j = 0; j < gh; ++j)
    for (int i = 0; i < gw; ++i) {
      const int v = j * gw + i;
      int deg = 0;
      const int nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
      for (const auto& n : nb) {
        if (n[0] < 0 || n[1] < 0 || n[0] >= gw || n[1] >= gh) continue;
        t.emplace_back(v, n[1] * gw + n[0], 1.0);
        ++deg;
      }
      t.emplace_back(v, v, -static_cast<double>(deg));
    }
  Eigen::SparseMatrix<double> m(gw * gh, gw * gh);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

/// Optimizer state: log depths followed (optionally) by du and dv.
class Problem {
 public:
  Problem(const WorldSheet& sheet, const DepthMap& lidar, const RefineConfig& cfg)
      : base_(sheet), cfg_(cfg), pts_(gather_lidar(lidar)), lap_(lattice_laplacian(sheet.grid_w, sheet.grid_h)),
        n_(static_cast<int>(sheet.vertices.size())) {}

  int vertex_count() const { return n_; }
  int param_count() const { return cfg_.optimize_offsets ? 3 * n_ : n_; }

  Eigen::VectorXd params_of(const WorldSheet& s) const {
    Eigen::VectorXd p(param_count());
    for (int v = 0; v < n_; ++v) {
      p[v] = std::log(s.vertices[v].z);
      if (cfg_.optimize_offsets) {
        p[n_ + v] = s.vertices[v].du;
        p[2 * n_ + v] = s.vertices[v].dv;
      }
    }
    return p;
  }

  WorldSheet sheet_of(const Eigen::VectorXd& p) const {
    WorldSheet s = base_;
    for (int v = 0; v < n_; ++v) {
      s.vertices[v].z = std::exp(p[v]);
      if (cfg_.optimize_offsets) {
        s.vertices[v].du = std::clamp(p[n_ + v], -s.offset_bound, s.offset_bound);
        s.vertices[v].dv = std::clamp(p[2 * n_ + v], -s.offset_bound, s.offset_bound);
      }
    }
    s.update_uv();
    return s;
  }

  /// Objective; when `grad` is non-null also the gradient w.r.t. params,
  /// and when `hess` is non-null the Gauss-Newton approximation.
  double evaluate(const Eigen::VectorXd& p, double* data_out, double* smooth_out, Eigen::VectorXd* grad,
                  Eigen::SparseMatrix<double>* hess) const {
    const WorldSheet s = sheet_of(p);
    const int gw = s.grid_w;
    std::vector<Vec2> pix(n_);
    for (int v = 0; v < n_; ++v) pix[v] = s.anchor_pixel(v);
    // Anchor derivative per cell of offset; zero while clamped.
    const double sx = double(s.image_width - 1) / (gw - 1), sy = double(s.image_height - 1) / (s.grid_h - 1);

    if (grad) grad->setZero(param_count());
    std::vector<Eigen::Triplet<double>> trip;

    double data = 0.0;
    if (cfg_.lambda_direct > 0 && !pts_.empty()) {
      std::vector<double> terms(pts_.size(), 0.0);
      const double w_mean = cfg_.lambda_direct / static_cast<double>(pts_.size());
      const double inv_far = 1.0 / cfg_.far_plane;
      for (std::size_t k = 0; k < pts_.size(); ++k) {
        const LidarPoint& lp = pts_[k];
        const Hit h = locate(s, pix, lp.x, lp.y);
        if (h.face < 0) continue;
        const auto& f = s.faces[h.face];
        double q[3], inv = 0.0;
        for (int m = 0; m < 3; ++m) {
          q[m] = 1.0 / s.vertices[f[m]].z;
          inv += h.b[m] * q[m];
        }
        const double d = 1.0 / inv;
        const double r = (d - lp.depth) * inv_far;
        const double ar = std::abs(r), delta = cfg_.huber_delta;
        terms[k] = ar <= delta ? 0.5 * r * r : delta * (ar - 0.5 * delta);
        if (!grad) continue;
        const double dh = ar <= delta ? r : (r > 0 ? delta : -delta);
        const double irls = ar <= delta ? 1.0 : delta / ar;

        // Jacobian of r w.r.t. the (up to 9) parameters this sample touches.
        int idx[9];
        double jac[9];
        int nj = 0;
        for (int m = 0; m < 3; ++m) {
          idx[nj] = f[m];
          jac[nj++] = d * d * h.b[m] * q[m] * inv_far;
        }
        if (cfg_.optimize_offsets) {
          // grad of the interpolated inverse depth in screen space
          const Vec2 &p0 = pix[f[0]], &p1 = pix[f[1]], &p2 = pix[f[2]];
          const Vec2 gb0(-(p2.y() - p1.y()) / h.area, (p2.x() - p1.x()) / h.area);
          const Vec2 gb1(-(p0.y() - p2.y()) / h.area, (p0.x() - p2.x()) / h.area);
          const Vec2 gb2(-(p1.y() - p0.y()) / h.area, (p1.x() - p0.x()) / h.area);
          const Vec2 gi = q[0] * gb0 + q[1] * gb1 + q[2] * gb2;
          for (int m = 0; m < 3; ++m) {
            const int v = f[m];
            const int i = v % gw, j = v / gw;
            const double ax = (i + s.vertices[v].du) / (gw - 1), ay = (j + s.vertices[v].dv) / (s.grid_h - 1);
            const double dpx = (ax > 0 && ax < 1) ? sx : 0.0;
            const double dpy = (ay > 0 && ay < 1) ? sy : 0.0;
            const Vec2 dd = d * d * h.b[m] * gi * inv_far;  // dr / dP_m
            idx[nj] = n_ + v;
            jac[nj++] = dd.x() * dpx;
            idx[nj] = 2 * n_ + v;
            jac[nj++] = dd.y() * dpy;
          }
        }
        for (int a = 0; a < nj; ++a) {
          (*grad)[idx[a]] += w_mean * dh * jac[a];
          if (!hess) continue;
          for (int b = 0; b < nj; ++b) trip.emplace_back(idx[a], idx[b], w_mean * irls * jac[a] * jac[b]);
        }
      }
      data = pairwise_sum(terms);
      data *= w_mean;
    }

    double smooth = 0.0;
    if (cfg_.lambda_smooth > 0) {
      const Eigen::VectorXd l = lap_ * p.head(n_);
      std::vector<double> sq(n_);
      for (int v = 0; v < n_; ++v) sq[v] = l[v] * l[v];
      const double w = cfg_.lambda_smooth / n_;
      smooth = w * pairwise_sum(sq);
      if (grad) grad->head(n_) += 2.0 * w * (lap_.transpose() * l);
      if (hess) {
        const Eigen::SparseMatrix<double> ltl = Eigen::SparseMatrix<double>(lap_.transpose()) * lap_;
        for (int k = 0; k < ltl.outerSize(); ++k)
          for (Eigen::SparseMatrix<double>::InnerIterator it(ltl, k); it; ++it)
            trip.emplace_back(it.row(), it.col(), 2.0 * w * it.value());
      }
    }

    if (hess) {
      hess->resize(param_count(), param_count());
      hess->setFromTriplets(trip.begin(), trip.end());
    }
    if (data_out) *data_out = data;
    if (smooth_out) *smooth_out = smooth;
    return data + smooth;
  }

  std::size_t point_count() const { return pts_.size(); }

 private:
  WorldSheet base_;
  RefineConfig cfg_;
  std::vector<LidarPoint> pts_;
  Eigen::SparseMatrix<double> lap_;
  int n_;
};

void check_inputs(const WorldSheet& sheet, const DepthMap& lidar, const CameraModel& camera, const RefineConfig& cfg) {
  cfg.validate();
  sheet.validate();
  if (lidar.width() != sheet.image_width || lidar.height() != sheet.image_height)
    throw InputError("refine: lidar map does not match the sheet's image size");
  if (image_width(camera) != sheet.image_width || image_height(camera) != sheet.image_height)
    throw InputError("refine: camera does not match the sheet's image size");
}

void require_density(const WorldSheet& sheet, std::size_t points, const RefineConfig& cfg) {
  if (cfg.lambda_direct <= 0) return;
  const double needed = (sheet.grid_w - 1) * (sheet.grid_h - 1) / 16.0;
  if (points == 0 || static_cast<double>(points) < needed) throw InputError("sparse depth too sparse");
}

}  // namespace

ObjectiveValue refine_objective(const WorldSheet& sheet, const DepthMap& lidar, const RefineConfig& cfg) {
  cfg.validate();
  Problem prob(sheet, lidar, cfg);
  Eigen::VectorXd g;
  ObjectiveValue out;
  out.total = prob.evaluate(prob.params_of(sheet), &out.data, &out.smooth, &g, nullptr);
  const int n = prob.vertex_count();
  out.grad_z.resize(n);
  for (int v = 0; v < n; ++v) out.grad_z[v] = g[v] / sheet.vertices[v].z;
  if (cfg.optimize_offsets) {
    out.grad_du.assign(g.data() + n, g.data() + 2 * n);
    out.grad_dv.assign(g.data() + 2 * n, g.data() + 3 * n);
  }
  return out;
}

RefineResult refine_sheet(const WorldSheet& sheet, const DepthMap& lidar, const CameraModel& camera,
                          const RefineConfig& cfg) {
  check_inputs(sheet, lidar, camera, cfg);
  Problem prob(sheet, lidar, cfg);
  require_density(sheet, prob.point_count(), cfg);

  RefineResult res;
  Eigen::VectorXd p = prob.params_of(sheet);
  double f = prob.evaluate(p, nullptr, nullptr, nullptr, nullptr);
  res.trace.push_back(f);
  res.status = RefineStatus::MaxIters;
  const int n = prob.vertex_count();

  for (int it = 0; it < cfg.max_iters; ++it) {
    if (f <= 1e-30) {
      res.status = RefineStatus::Converged;
      break;
    }
    Eigen::VectorXd g;
    Eigen::SparseMatrix<double> h;
    prob.evaluate(p, nullptr, nullptr, &g, &h);
    if (g.lpNorm<Eigen::Infinity>() == 0.0) {
      res.status = RefineStatus::Converged;
      break;
    }

    // Damped Gauss-Newton direction.
    double max_diag = 0.0;
    for (int k = 0; k < h.rows(); ++k) max_diag = std::max(max_diag, h.coeff(k, k));
    Eigen::SparseMatrix<double> a = h;
    for (int k = 0; k < a.rows(); ++k) a.coeffRef(k, k) += 1e-4 * h.coeff(k, k) + 1e-9 * max_diag + 1e-300;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(a);
    Eigen::VectorXd d;
    if (ldlt.info() == Eigen::Success) d = -ldlt.solve(g);
    if (d.size() != g.size() || !d.allFinite() || d.dot(g) >= 0) {
      d.resize(g.size());
      for (int k = 0; k < g.size(); ++k) d[k] = -g[k] / a.coeff(k, k);
    }

    const double max_move = d.lpNorm<Eigen::Infinity>();
    double t = max_move > cfg.step ? cfg.step / max_move : 1.0;
    bool accepted = false;
    double f_new = f;
    Eigen::VectorXd p_new;
    for (int halvings = 0; halvings < 50; ++halvings, t *= 0.5) {
      p_new = p + t * d;
      if (cfg.optimize_offsets) {
        const double b = sheet.offset_bound;
        for (int k = n; k < p_new.size(); ++k) p_new[k] = std::clamp(p_new[k], -b, b);
      }
      f_new = prob.evaluate(p_new, nullptr, nullptr, nullptr, nullptr);
      if (f_new < f) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.status = RefineStatus::StepUnderflow;
      break;
    }
    const double improvement = (f - f_new) / std::max(f, std::numeric_limits<double>::min());
    p = p_new;
    f = f_new;
    res.trace.push_back(f);
    res.iterations = it + 1;
    if (improvement < cfg.tol) {
      res.status = RefineStatus::Converged;
      break;
    }
  }
  res.sheet = prob.sheet_of(p);
  return res;
}

double gradient_check(const WorldSheet& sheet, const DepthMap& lidar, const CameraModel& camera,
                      const RefineConfig& cfg) {
  check_inputs(sheet, lidar, camera, cfg);
  const ObjectiveValue an = refine_objective(sheet, lidar, cfg);
  auto value = [&](const WorldSheet& s) { return refine_objective(s, lidar, cfg).total; };

  std::vector<double> a, num;
  const int n = static_cast<int>(sheet.vertices.size());
  for (int v = 0; v < n; ++v) {
    const double h = 1e-4 * sheet.vertices[v].z;
    WorldSheet plus = sheet, minus = sheet;
    plus.vertices[v].z += h;
    minus.vertices[v].z -= h;
    a.push_back(an.grad_z[v]);
    num.push_back((value(plus) - value(minus)) / (2 * h));
  }
  if (cfg.optimize_offsets) {
    const double h = 1e-4;
    for (int comp = 0; comp < 2; ++comp)
      for (int v = 0; v < n; ++v) {
        WorldSheet plus = sheet, minus = sheet;
        double& up = comp == 0 ? plus.vertices[v].du : plus.vertices[v].dv;
        double& dn = comp == 0 ? minus.vertices[v].du : minus.vertices[v].dv;
        up += h;
        dn -= h;
        plus.update_uv();
        minus.update_uv();
        a.push_back(comp == 0 ? an.grad_du[v] : an.grad_dv[v]);
        num.push_back((value(plus) - value(minus)) / (2 * h));
      }
  }
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    diff = std::max(diff, std::abs(a[k] - num[k]));
    na = std::max(na, std::abs(a[k]));
    nn = std::max(nn, std::abs(num[k]));
  }
  const double scale = std::max(na, nn);
  return scale < 1e-15 ? diff : diff / scale;
}

}  // namespace sheetwarp
