#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sheetwarp {

/// Thrown when caller-supplied data violates a documented precondition
/// (dimension mismatch, empty valid set, malformed manifest, ...).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Row-major raster with interleaved channels. Pixel (x, y) has its
/// center at integer coordinates; x runs right, y runs down.
template <typename T, int Channels>
class Raster {
 public:
  using value_type = T;
  static constexpr int kChannels = Channels;

  Raster() = default;
  Raster(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * height * Channels, fill) {
    if (width < 0 || height < 0) throw InputError("negative raster size");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const { return data_.empty(); }

  T& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  template <typename U, int C>
  bool same_shape(const Raster<U, C>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Raster& a, const Raster& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
  }

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * Channels + c;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// RGB image, values nominally in [0, 1].
using Image = Raster<double, 3>;
/// Depth along the optical axis in meters; 0 marks an invalid / no-return pixel.
using DepthMap = Raster<double, 1>;
/// Binary per-pixel mask; nonzero means set.
using PixelMask = Raster<std::uint8_t, 1>;

using Rgb = std::array<double, 3>;

/// Bilinear lookup with border clamping. Coordinates are in pixels.
Rgb sample_bilinear(const Image& img, double x, double y);
double sample_bilinear(const DepthMap& img, double x, double y);

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* what) {
  if (!a.same_shape(b)) {
    throw InputError(std::string(what) + ": dimension mismatch (" + std::to_string(a.width()) + "x" +
                     std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                     std::to_string(b.height()) + ")");
  }
}

std::size_t count_set(const PixelMask& m);

}  // namespace sheetwarp
