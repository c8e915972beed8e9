#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sheetwarp/loss.hpp"
#include "sheetwarp/random.hpp"
#include "sheetwarp/reduce.hpp"
#include "sheetwarp/sheet.hpp"
#include "sheetwarp/simworld.hpp"

using namespace sheetwarp;

namespace {

Image random_image(int w, int h, Rng& rng) {
  Image img(w, h);
  for (auto& v : img.data()) v = rng.uniform();
  return img;
}

PixelMask random_mask(int w, int h, Rng& rng, double p) {
  PixelMask m(w, h);
  for (auto& v : m.data()) v = rng.uniform() < p ? 1 : 0;
  return m;
}

LossMap random_loss(int w, int h, Rng& rng) {
  LossMap m{ScalarField(w, h), random_mask(w, h, rng, 0.7)};
  for (auto& v : m.values.data()) v = rng.uniform();
  return m;
}

RenderOutput as_render(const Image& img, const PixelMask& cov) {
  RenderOutput r;
  r.image = img;
  r.coverage = cov;
  r.depth = DepthMap(img.width(), img.height());
  for (std::size_t i = 0; i < cov.pixel_count(); ++i) r.depth.data()[i] = cov.data()[i] ? 1.0 : 0.0;
  return r;
}

}  // namespace

TEST_CASE("photometric_l1 examples and naive oracle") {
  Rng rng(1);
  const Image a = random_image(37, 23, rng);
  const PixelMask all = full_mask(37, 23);
  CHECK(photometric_l1(a, a, all).mean == 0.0);
  CHECK(photometric_l1(Image(37, 23, 0.5), Image(37, 23, 0.0), all).mean == 0.5);

  const Image b = random_image(37, 23, rng);
  const PixelMask m = random_mask(37, 23, rng, 0.4);
  const ScalarLoss l = photometric_l1(a, b, m);
  CHECK(std::abs(l.mean - oracle::naive_l1(a, b, m)) <= 1e-12);
  CHECK(l.mean > 0);
  for (int y = 0; y < 23; ++y)
    for (int x = 0; x < 37; ++x) {
      double d = 0;
      for (int c = 0; c < 3; ++c) d += std::abs(a.at(x, y, c) - b.at(x, y, c));
      CHECK(l.map.values.at(x, y) == doctest::Approx(d / 3).epsilon(1e-15));
    }
  CHECK_THROWS_WITH_AS(photometric_l1(a, b, PixelMask(37, 23)), "empty valid set", InputError);
  CHECK_THROWS_AS(photometric_l1(a, Image(5, 5), all), InputError);
}

TEST_CASE("ssim examples and properties") {
  Rng rng(2);
  const Image a = random_image(41, 29, rng), b = random_image(41, 29, rng);
  const SsimResult self = ssim(a, a);
  for (double v : self.ssim.data()) CHECK(v == 1.0);
  CHECK(self.mean_ssim == 1.0);
  const SsimResult ab = ssim(a, b), ba = ssim(b, a);
  double worst_sym = 0, worst_ref = 0;
  const auto ref = oracle::naive_ssim(a, b);
  for (std::size_t i = 0; i < ab.ssim.pixel_count(); ++i) {
    worst_sym = std::max(worst_sym, std::abs(ab.ssim.data()[i] - ba.ssim.data()[i]));
    worst_ref = std::max(worst_ref, std::abs(ab.ssim.data()[i] - ref.data()[i]));
    CHECK(ab.ssim.data()[i] >= -1.0);
    CHECK(ab.ssim.data()[i] <= 1.0);
    CHECK(ab.map.values.data()[i] == doctest::Approx(std::clamp((1 - ab.ssim.data()[i]) / 2, 0.0, 1.0)));
  }
  CHECK(worst_sym <= 1e-12);
  CHECK(worst_ref <= 1e-6);
}

TEST_CASE("mixed_photometric blends the two maps") {
  Rng rng(3);
  const Image a = random_image(30, 20, rng), b = random_image(30, 20, rng);
  const PixelMask all = full_mask(30, 20);
  const LossMap l1 = photometric_l1(a, b, all).map;
  const SsimResult s = ssim(a, b);
  const LossMap m0 = mixed_photometric(a, b, all, 0.0), m1 = mixed_photometric(a, b, all, 1.0);
  const LossMap mh = mixed_photometric(a, b, all);
  for (std::size_t i = 0; i < l1.values.pixel_count(); ++i) {
    CHECK(m0.values.data()[i] == doctest::Approx(l1.values.data()[i]).epsilon(1e-15));
    CHECK(m1.values.data()[i] == doctest::Approx(s.map.values.data()[i]).epsilon(1e-15));
    CHECK(mh.values.data()[i] ==
          doctest::Approx(0.85 * s.map.values.data()[i] + 0.15 * l1.values.data()[i]).epsilon(1e-14));
  }
  const LossMap same = mixed_photometric(a, a, all);
  for (double v : same.values.data()) CHECK(v == 0.0);
}

TEST_CASE("mixed_photometric is monotone in its constituents") {
  // raising |pred - gt| at one pixel without touching others can only raise that pixel's L1 term
  Rng rng(4);
  const Image gt = random_image(20, 20, rng);
  Image p1 = gt, p2 = gt;
  for (int c = 0; c < 3; ++c) {
    p1.at(10, 10, c) = std::clamp(gt.at(10, 10, c) + 0.1, 0.0, 1.0);
    p2.at(10, 10, c) = std::clamp(gt.at(10, 10, c) + 0.3, 0.0, 1.0);
  }
  const PixelMask all = full_mask(20, 20);
  CHECK(mixed_photometric(p1, gt, all, 0.0).values.at(10, 10) <= mixed_photometric(p2, gt, all, 0.0).values.at(10, 10));
  CHECK(mixed_photometric(gt, gt, all).values.at(10, 10) <= mixed_photometric(p1, gt, all).values.at(10, 10));
}

TEST_CASE("min_combine") {
  Rng rng(5);
  const LossMap a = random_loss(33, 17, rng), b = random_loss(33, 17, rng);
  const LossMap aa = min_combine(a, a);
  CHECK(aa.valid == a.valid);
  for (std::size_t i = 0; i < a.values.pixel_count(); ++i)
    if (a.valid.data()[i]) CHECK(aa.values.data()[i] == a.values.data()[i]);

  LossMap zero{ScalarField(33, 17), full_mask(33, 17)};
  const LossMap z = min_combine(zero, b);
  for (double v : z.values.data()) CHECK(v == 0.0);

  const LossMap m = min_combine(a, b);
  for (std::size_t i = 0; i < a.values.pixel_count(); ++i) {
    const bool va = a.valid.data()[i], vb = b.valid.data()[i];
    CHECK((m.valid.data()[i] != 0) == (va || vb));
    if (va && vb) {
      const double want = a.values.data()[i] < b.values.data()[i] ? a.values.data()[i] : b.values.data()[i];
      CHECK(m.values.data()[i] == want);
      CHECK(m.values.data()[i] <= a.values.data()[i]);
      CHECK(m.values.data()[i] <= b.values.data()[i]);
    } else if (va) {
      CHECK(m.values.data()[i] == a.values.data()[i]);
    } else if (vb) {
      CHECK(m.values.data()[i] == b.values.data()[i]);
    }
  }
}

TEST_CASE("masked_mean and pairwise_sum against naive loops") {
  Rng rng(6);
  const LossMap a = random_loss(101, 77, rng);
  CHECK(std::abs(masked_mean(a) - oracle::naive_mean(a.values, a.valid)) <= 1e-12);
  std::vector<double> v(100003);
  for (auto& x : v) x = rng.uniform(-1, 1);
  CHECK(std::abs(pairwise_sum(v) - oracle::naive_sum(v)) <= 1e-12);
  CHECK_THROWS_AS(masked_mean(LossMap{ScalarField(3, 3), PixelMask(3, 3)}), InputError);
}

TEST_CASE("direct_depth_loss") {
  Rng rng(7);
  DepthMap lidar(50, 40), pred(50, 40);
  for (std::size_t i = 0; i < lidar.pixel_count(); ++i) {
    pred.data()[i] = rng.uniform(1, 80);
    if (rng.uniform() < 0.05) lidar.data()[i] = rng.uniform(1, 80);
  }
  DepthMap same = pred;
  for (std::size_t i = 0; i < lidar.pixel_count(); ++i)
    if (lidar.data()[i] > 0) same.data()[i] = lidar.data()[i];
  CHECK(direct_depth_loss(same, lidar) == 0.0);
  DepthMap plus10 = same;
  for (auto& x : plus10.data()) x += 10;
  CHECK(direct_depth_loss(plus10, lidar) == doctest::Approx(0.01).epsilon(1e-12));

  long double s = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < lidar.pixel_count(); ++i)
    if (lidar.data()[i] > 0) {
      s += std::fabs(pred.data()[i] / 1000.0 - lidar.data()[i] / 1000.0);
      ++n;
    }
  CHECK(std::abs(direct_depth_loss(pred, lidar) - static_cast<double>(s / n)) <= 1e-12);
  CHECK_THROWS_AS(direct_depth_loss(pred, DepthMap(50, 40)), InputError);
}

TEST_CASE("rendered_depth_loss") {
  Rng rng(8);
  DepthMap dn(40, 30), next(40, 30), prev(40, 30);
  for (std::size_t i = 0; i < dn.pixel_count(); ++i) {
    if (rng.uniform() < 0.5) dn.data()[i] = rng.uniform(1, 50);
    next.data()[i] = rng.uniform() < 0.8 ? rng.uniform(1, 50) : 0.0;
    prev.data()[i] = rng.uniform() < 0.8 ? rng.uniform(1, 50) : 0.0;
  }
  CHECK(rendered_depth_loss(dn, dn, dn) == 0.0);
  CHECK(rendered_depth_loss(dn, dn, prev) == 0.0);

  long double s = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < dn.pixel_count(); ++i) {
    if (!(dn.data()[i] > 0)) continue;
    double best = -1;
    for (const DepthMap* r : {&next, &prev}) {
      if (!(r->data()[i] > 0)) continue;
      const double e = std::fabs(dn.data()[i] / 1000.0 - r->data()[i] / 1000.0);
      best = best < 0 ? e : std::min(best, e);
    }
    if (best < 0) continue;
    s += best;
    ++n;
  }
  CHECK(std::abs(rendered_depth_loss(dn, next, prev) - static_cast<double>(s / n)) <= 1e-12);
}

TEST_CASE("psnr") {
  CHECK(psnr_from_mse(0.01) == 20.0);
  CHECK(psnr_from_mse(1.0) == 0.0);
  CHECK(psnr_from_mse(0.0) == kPsnrCap);
  Rng rng(9);
  const Image a = random_image(20, 20, rng);
  CHECK(psnr(a, a) == kPsnrCap);
  Image b = a;
  for (auto& v : b.data()) v += 0.1;
  CHECK(psnr(b, a) == doctest::Approx(20.0).epsilon(1e-9));
}

TEST_CASE("metric_report") {
  Rng rng(10);
  const Image gt = random_image(30, 20, rng);
  DepthMap gd(30, 20);
  for (auto& v : gd.data()) v = rng.uniform(1, 50);
  RenderOutput perfect = as_render(gt, full_mask(30, 20));
  perfect.depth = gd;
  const MetricReport p = metric_report(perfect, gt, gd);
  CHECK(p.im_l1 == 0.0);
  CHECK(p.psnr == kPsnrCap);
  CHECK(p.ssim == 1.0);
  CHECK(p.depth_l1 == 0.0);

  RenderOutput noisy = perfect;
  for (auto& v : noisy.image.data()) v = std::clamp(v + rng.uniform(-0.1, 0.1), 0.0, 1.0);
  for (auto& v : noisy.depth.data()) v += rng.uniform(-1, 1);
  const MetricReport r = metric_report(noisy, gt, gd);
  const PixelMask all = full_mask(30, 20);
  CHECK(r.im_l1 == photometric_l1(noisy.image, gt, all).mean);
  CHECK(r.psnr == psnr(noisy.image, gt, all));
  CHECK(r.ssim == ssim(noisy.image, gt).mean_ssim);
  CHECK(r.depth_l1 == direct_depth_loss(noisy.depth, gd));
}

TEST_CASE("automask rule") {
  Image frame(4, 1, 0.5), prev(4, 1, 0.5), next(4, 1, 0.5);
  // pixel 0: static, identical raw neighbours, imperfect warp -> masked out
  // pixel 2: perfect warp, raw neighbours differ -> kept
  for (int c = 0; c < 3; ++c) {
    prev.at(2, 0, c) = 0.1;
    next.at(2, 0, c) = 0.9;
  }
  Image warped(4, 1, 0.5);
  for (int c = 0; c < 3; ++c) warped.at(0, 0, c) = 0.8;
  const RenderOutput w = as_render(warped, full_mask(4, 1));
  const PixelMask keep = automask(frame, prev, next, w, w);
  CHECK(keep.at(0, 0) == 0);
  CHECK(keep.at(2, 0) == 1);
}

TEST_CASE("automask removes a camera-static overlay") {
  const auto k = PinholeIntrinsics::from_hfov(200, 120, 50);
  const Scene scene = make_scene(21);
  const RigPose pn = forward_camera_pose(1.5);
  RigPose pp = pn, px = pn;
  pp.translation.x() -= 1.0;
  px.translation.x() += 1.0;
  SceneRender rn = render_scene(scene, pn, k), rp = render_scene(scene, pp, k), rx = render_scene(scene, px, k);
  // paint the same patch into all three frames, as if stuck to the lens
  PixelMask overlay(200, 120);
  for (int y = 90; y < 115; ++y)
    for (int x = 70; x < 130; ++x) {
      overlay.at(x, y) = 1;
      for (SceneRender* r : {&rn, &rp, &rx})
        for (int c = 0; c < 3; ++c) r->image.at(x, y, c) = c == 0 ? 0.95 : 0.05;
    }
  auto warp_to_n = [&](const SceneRender& src, const RigPose& src_pose) {
    DepthMap d = src.depth;
    for (std::size_t i = 0; i < d.pixel_count(); ++i)
      if (src.sky.data()[i]) d.data()[i] = kSkyDepth;
    const TexturedSheet ts = splat_texture(src.image, build_sheet(d, k, 65, 65));
    RenderOptions opt;
    opt.drop_stretch_faces = true;
    opt.stretch_growth = 1.5;
    return render(ts, k, k, relative_pose(src_pose, pn), opt);
  };
  const RenderOutput wp = warp_to_n(rp, pp), wx = warp_to_n(rx, px);
  const PixelMask keep = automask(rn.image, rp.image, rx.image, wp, wx);
  std::size_t n = 0, masked = 0;
  for (std::size_t i = 0; i < overlay.pixel_count(); ++i) {
    if (!overlay.data()[i]) continue;
    ++n;
    masked += keep.data()[i] ? 0 : 1;
  }
  CHECK(static_cast<double>(masked) / n >= 0.95);
}

TEST_CASE("image_min_loss picks the better neighbour per pixel") {
  Rng rng(11);
  const Image frame = random_image(30, 20, rng);
  Image good = frame, bad = random_image(30, 20, rng);
  const RenderOutput rg = as_render(good, full_mask(30, 20)), rb = as_render(bad, full_mask(30, 20));
  CHECK(image_min_loss(frame, rg, rb) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(image_min_loss(frame, rb, rg) == doctest::Approx(0.0).epsilon(1e-15));
  const LossMap lb = mixed_photometric(bad, frame, full_mask(30, 20));
  CHECK(image_min_loss(frame, rb, rb) == doctest::Approx(masked_mean(lb)).epsilon(1e-12));
}
