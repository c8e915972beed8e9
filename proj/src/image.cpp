#include "sheetwarp/image.hpp"

#include <algorithm>
#include <cmath>

namespace sheetwarp {

namespace {

struct Taps {
  int x0, x1, y0, y1;
  double fx, fy;
};

Taps bilinear_taps(int w, int h, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  Taps t{};
  t.x0 = static_cast<int>(std::floor(x));
  t.y0 = static_cast<int>(std::floor(y));
  t.x1 = std::min(t.x0 + 1, w - 1);
  t.y1 = std::min(t.y0 + 1, h - 1);
  t.fx = x - t.x0;
  t.fy = y - t.y0;
  return t;
}

}  // namespace

Rgb sample_bilinear(const Image& img, double x, double y) {
  const Taps t = bilinear_taps(img.width(), img.height(), x, y);
  Rgb out{};
  for (int c = 0; c < 3; ++c) {
    // Skip zero-weight taps so integer coordinates return the stored value exactly.
    double top = img.at(t.x0, t.y0, c);
    if (t.fx != 0.0) top = (1.0 - t.fx) * top + t.fx * img.at(t.x1, t.y0, c);
    if (t.fy == 0.0) {
      out[c] = top;
      continue;
    }
    double bottom = img.at(t.x0, t.y1, c);
    if (t.fx != 0.0) bottom = (1.0 - t.fx) * bottom + t.fx * img.at(t.x1, t.y1, c);
    out[c] = (1.0 - t.fy) * top + t.fy * bottom;
  }
  return out;
}

double sample_bilinear(const DepthMap& img, double x, double y) {
  const Taps t = bilinear_taps(img.width(), img.height(), x, y);
  double top = img.at(t.x0, t.y0);
  if (t.fx != 0.0) top = (1.0 - t.fx) * top + t.fx * img.at(t.x1, t.y0);
  if (t.fy == 0.0) return top;
  double bottom = img.at(t.x0, t.y1);
  if (t.fx != 0.0) bottom = (1.0 - t.fx) * bottom + t.fx * img.at(t.x1, t.y1);
  return (1.0 - t.fy) * top + t.fy * bottom;
}

std::size_t count_set(const PixelMask& m) {
  return static_cast<std::size_t>(std::count_if(m.data().begin(), m.data().end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

}  // namespace sheetwarp
