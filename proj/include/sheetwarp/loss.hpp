#pragma once

// Photometric and depth losses for depth-mesh view synthesis, plus the
// evaluation metrics (image L1, PSNR, SSIM, depth L1).
//
// Scalar reductions gather valid values in row-major order and use
// pairwise_sum, so results do not depend on how maps were computed.

#include "sheetwarp/image.hpp"
#include "sheetwarp/render.hpp"

namespace sheetwarp {

using ScalarField = Raster<double, 1>;

struct LossMap {
  ScalarField values;
  PixelMask valid;
};

struct ScalarLoss {
  LossMap map;
  double mean = 0.0;  ///< over valid pixels
};

struct SsimResult {
  LossMap map;            ///< clamp((1 - SSIM) / 2, 0, 1), channel mean
  ScalarField ssim;       ///< per-pixel SSIM, channel mean
  double mean_ssim = 0.0; ///< over all pixels
};

struct MetricReport {
  double im_l1 = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  double depth_l1 = 0.0;  ///< normalized by the far plane
};

inline constexpr double kFarPlane = 1000.0;
inline constexpr double kPsnrCap = 99.0;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Mean over valid pixels; throws InputError("empty valid set") when none.
double masked_mean(const LossMap& m);

PixelMask full_mask(int width, int height);

/// Per-pixel channel-mean |pred - gt|.
ScalarLoss photometric_l1(const Image& pred, const Image& gt, const PixelMask& valid);

/// 3x3 box-window SSIM with reflect padding.
SsimResult ssim(const Image& pred, const Image& gt);

/// alpha * (1 - SSIM) / 2 + (1 - alpha) * L1, per pixel.
LossMap mixed_photometric(const Image& pred, const Image& gt, const PixelMask& valid, double alpha = 0.85);

/// Pointwise minimum over jointly valid pixels; a pixel valid in only one
/// map takes that value; valid in neither stays invalid.
LossMap min_combine(const LossMap& a, const LossMap& b);

/// Keep-mask: set where the best warped loss beats the best unwarped loss
/// (raw neighbour frames compared to I_n).
PixelMask automask(const Image& frame, const Image& prev, const Image& next, const RenderOutput& render_prev,
                   const RenderOutput& render_next, double alpha = 0.85);

/// Min-over-neighbours image loss: mean of min(loss(I_n, I^{n+1}), loss(I_n, I^{n-1}))
/// on covered (and optionally automasked) pixels.
double image_min_loss(const Image& frame, const RenderOutput& render_next, const RenderOutput& render_prev,
                      double alpha = 0.85, const PixelMask* keep = nullptr);

/// Mean |pred - lidar| / far over pixels with lidar > 0.
double direct_depth_loss(const DepthMap& pred, const DepthMap& lidar, double far_plane = kFarPlane);

/// Mean over pixels with d_n > 0 of the min normalized difference to the
/// two rendered depths (a render counts only where it is > 0).
double rendered_depth_loss(const DepthMap& d_n, const DepthMap& dhat_next, const DepthMap& dhat_prev,
                           double far_plane = kFarPlane);

double psnr_from_mse(double mse);
double psnr(const Image& pred, const Image& gt);
double psnr(const Image& pred, const Image& gt, const PixelMask& valid);

/// Metrics on the prediction's coverage; depth only where gt_depth > 0 as well.
MetricReport metric_report(const RenderOutput& pred, const Image& gt_image, const DepthMap& gt_depth,
                           double far_plane = kFarPlane);

}  // namespace sheetwarp
