#include "sheetwarp/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sheetwarp/reduce.hpp"

namespace sheetwarp {

namespace {

double masked_mean_or_nan(const ScalarField& values, const PixelMask& valid) {
  std::vector<double> picked;
  picked.reserve(values.pixel_count());
  for (std::size_t i = 0; i < values.pixel_count(); ++i)
    if (valid.data()[i]) picked.push_back(values.data()[i]);
  if (picked.empty()) return std::numeric_limits<double>::quiet_NaN();
  return pairwise_sum(picked) / static_cast<double>(picked.size());
}

int reflect(int i, int n) {
  if (n == 1) return 0;
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

/// 3x3 box mean with reflect padding of a single channel given as a lambda.
template <typename F>
ScalarField box3(int w, int h, F&& value) {
  ScalarField out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) s += value(reflect(x + dx, w), reflect(y + dy, h));
      out.at(x, y) = s / 9.0;
    }
  return out;
}

}  // namespace

PixelMask full_mask(int width, int height) { return PixelMask(width, height, 1); }

double masked_mean(const LossMap& m) {
  const double v = masked_mean_or_nan(m.values, m.valid);
  if (std::isnan(v)) throw InputError("empty valid set");
  return v;
}

ScalarLoss photometric_l1(const Image& pred, const Image& gt, const PixelMask& valid) {
  require_same_shape(pred, gt, "photometric_l1");
  require_same_shape(pred, valid, "photometric_l1(valid)");
  ScalarLoss out{{ScalarField(pred.width(), pred.height()), valid}, 0.0};
  for (int y = 0; y < pred.height(); ++y)
    for (int x = 0; x < pred.width(); ++x) {
      double s = 0.0;
      for (int c = 0; c < 3; ++c) s += std::abs(pred.at(x, y, c) - gt.at(x, y, c));
      out.map.values.at(x, y) = s / 3.0;
    }
  out.mean = masked_mean(out.map);
  return out;
}

SsimResult ssim(const Image& pred, const Image& gt) {
  require_same_shape(pred, gt, "ssim");
  const int w = pred.width(), h = pred.height();
  SsimResult out{{ScalarField(w, h), full_mask(w, h)}, ScalarField(w, h), 0.0};
  for (int c = 0; c < 3; ++c) {
    const auto mu_x = box3(w, h, [&](int x, int y) { return pred.at(x, y, c); });
    const auto mu_y = box3(w, h, [&](int x, int y) { return gt.at(x, y, c); });
    const auto e_xx = box3(w, h, [&](int x, int y) { return pred.at(x, y, c) * pred.at(x, y, c); });
    const auto e_yy = box3(w, h, [&](int x, int y) { return gt.at(x, y, c) * gt.at(x, y, c); });
    const auto e_xy = box3(w, h, [&](int x, int y) { return pred.at(x, y, c) * gt.at(x, y, c); });
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double mx = mu_x.at(x, y), my = mu_y.at(x, y);
        const double sx = e_xx.at(x, y) - mx * mx;
        const double sy = e_yy.at(x, y) - my * my;
        const double sxy = e_xy.at(x, y) - mx * my;
        // Numerator and denominator are written so that x == y gives
        // bit-identical factors and the ratio is exactly 1.
        const double num = (2.0 * (mx * my) + kSsimC1) * (2.0 * sxy + kSsimC2);
        const double den = ((mx * mx) + (my * my) + kSsimC1) * (sx + sy + kSsimC2);
        const double s = std::clamp(num / den, -1.0, 1.0);
        out.ssim.at(x, y) += s / 3.0;
        out.map.values.at(x, y) += std::clamp((1.0 - s) / 2.0, 0.0, 1.0) / 3.0;
      }
  }
  if (w > 0 && h > 0) {
    // Rounding of the three-way channel mean can push 1.0 one ulp away.
    for (std::size_t i = 0; i < out.ssim.pixel_count(); ++i) {
      double& s = out.ssim.data()[i];
      s = std::clamp(s, -1.0, 1.0);
    }
    out.mean_ssim = masked_mean_or_nan(out.ssim, out.map.valid);
  }
  return out;
}

LossMap mixed_photometric(const Image& pred, const Image& gt, const PixelMask& valid, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("mixed_photometric: alpha must lie in [0,1]");
  require_same_shape(pred, gt, "mixed_photometric");
  require_same_shape(pred, valid, "mixed_photometric(valid)");
  LossMap out{ScalarField(pred.width(), pred.height()), valid};
  const auto s = ssim(pred, gt);
  for (int y = 0; y < pred.height(); ++y)
    for (int x = 0; x < pred.width(); ++x) {
      double l1 = 0.0;
      for (int c = 0; c < 3; ++c) l1 += std::abs(pred.at(x, y, c) - gt.at(x, y, c));
      l1 /= 3.0;
      const double d = s.map.values.at(x, y);
      out.values.at(x, y) = alpha == 0.0 ? l1 : alpha == 1.0 ? d : alpha * d + (1.0 - alpha) * l1;
    }
  return out;
}

LossMap min_combine(const LossMap& a, const LossMap& b) {
  require_same_shape(a.values, b.values, "min_combine");
  LossMap out{ScalarField(a.values.width(), a.values.height()), PixelMask(a.values.width(), a.values.height())};
  for (std::size_t i = 0; i < out.values.pixel_count(); ++i) {
    const bool va = a.valid.data()[i] != 0, vb = b.valid.data()[i] != 0;
    if (va && vb) out.values.data()[i] = std::min(a.values.data()[i], b.values.data()[i]);
    else if (va) out.values.data()[i] = a.values.data()[i];
    else if (vb) out.values.data()[i] = b.values.data()[i];
    else continue;
    out.valid.data()[i] = 1;
  }
  return out;
}

PixelMask automask(const Image& frame, const Image& prev, const Image& next, const RenderOutput& render_prev,
                   const RenderOutput& render_next, double alpha) {
  require_same_shape(frame, prev, "automask(prev)");
  require_same_shape(frame, next, "automask(next)");
  require_same_shape(frame, render_prev.image, "automask(render_prev)");
  require_same_shape(frame, render_next.image, "automask(render_next)");
  const PixelMask all = full_mask(frame.width(), frame.height());
  const LossMap warped = min_combine(mixed_photometric(render_prev.image, frame, render_prev.coverage, alpha),
                                     mixed_photometric(render_next.image, frame, render_next.coverage, alpha));
  const LossMap raw = min_combine(mixed_photometric(prev, frame, all, alpha), mixed_photometric(next, frame, all, alpha));
  PixelMask keep(frame.width(), frame.height());
  for (std::size_t i = 0; i < keep.pixel_count(); ++i)
    keep.data()[i] = warped.valid.data()[i] && warped.values.data()[i] < raw.values.data()[i];
  return keep;
}

double image_min_loss(const Image& frame, const RenderOutput& render_next, const RenderOutput& render_prev,
                      double alpha, const PixelMask* keep) {
  LossMap m = min_combine(mixed_photometric(render_next.image, frame, render_next.coverage, alpha),
                          mixed_photometric(render_prev.image, frame, render_prev.coverage, alpha));
  if (keep) {
    require_same_shape(m.valid, *keep, "image_min_loss(keep)");
    for (std::size_t i = 0; i < m.valid.pixel_count(); ++i) m.valid.data()[i] &= keep->data()[i] ? 1 : 0;
  }
  return masked_mean(m);
}

double direct_depth_loss(const DepthMap& pred, const DepthMap& lidar, double far_plane) {
  require_same_shape(pred, lidar, "direct_depth_loss");
  LossMap m{ScalarField(pred.width(), pred.height()), PixelMask(pred.width(), pred.height())};
  for (std::size_t i = 0; i < pred.pixel_count(); ++i) {
    if (!(lidar.data()[i] > 0)) continue;
    m.values.data()[i] = std::abs(pred.data()[i] / far_plane - lidar.data()[i] / far_plane);
    m.valid.data()[i] = 1;
  }
  return masked_mean(m);
}

double rendered_depth_loss(const DepthMap& d_n, const DepthMap& dhat_next, const DepthMap& dhat_prev,
                           double far_plane) {
  require_same_shape(d_n, dhat_next, "rendered_depth_loss(next)");
  require_same_shape(d_n, dhat_prev, "rendered_depth_loss(prev)");
  auto diff_map = [&](const DepthMap& r) {
    LossMap m{ScalarField(d_n.width(), d_n.height()), PixelMask(d_n.width(), d_n.height())};
    for (std::size_t i = 0; i < d_n.pixel_count(); ++i) {
      if (!(d_n.data()[i] > 0 && r.data()[i] > 0)) continue;
      m.values.data()[i] = std::abs(d_n.data()[i] / far_plane - r.data()[i] / far_plane);
      m.valid.data()[i] = 1;
    }
    return m;
  };
  return masked_mean(min_combine(diff_map(dhat_next), diff_map(dhat_prev)));
}

double psnr_from_mse(double mse) {
  if (!(mse > 0)) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double psnr(const Image& pred, const Image& gt, const PixelMask& valid) {
  require_same_shape(pred, gt, "psnr");
  require_same_shape(pred, valid, "psnr(valid)");
  ScalarField se(pred.width(), pred.height());
  for (int y = 0; y < pred.height(); ++y)
    for (int x = 0; x < pred.width(); ++x) {
      double s = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double d = pred.at(x, y, c) - gt.at(x, y, c);
        s += d * d;
      }
      se.at(x, y) = s / 3.0;
    }
  return psnr_from_mse(masked_mean(LossMap{se, valid}));
}

double psnr(const Image& pred, const Image& gt) { return psnr(pred, gt, full_mask(pred.width(), pred.height())); }

MetricReport metric_report(const RenderOutput& pred, const Image& gt_image, const DepthMap& gt_depth,
                           double far_plane) {
  require_same_shape(pred.image, gt_image, "metric_report(image)");
  require_same_shape(pred.depth, gt_depth, "metric_report(depth)");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  MetricReport r{nan, nan, nan, nan};
  if (count_set(pred.coverage) > 0) {
    r.im_l1 = photometric_l1(pred.image, gt_image, pred.coverage).mean;
    r.psnr = psnr(pred.image, gt_image, pred.coverage);
    r.ssim = masked_mean_or_nan(ssim(pred.image, gt_image).ssim, pred.coverage);
  }
  PixelMask depth_valid = pred.coverage;
  for (std::size_t i = 0; i < depth_valid.pixel_count(); ++i)
    depth_valid.data()[i] = depth_valid.data()[i] && gt_depth.data()[i] > 0;
  if (count_set(depth_valid) > 0) {
    DepthMap lidar(gt_depth.width(), gt_depth.height());
    for (std::size_t i = 0; i < lidar.pixel_count(); ++i)
      if (depth_valid.data()[i]) lidar.data()[i] = gt_depth.data()[i];
    r.depth_l1 = direct_depth_loss(pred.depth, lidar, far_plane);
  }
  return r;
}

}  // namespace sheetwarp
