#include "sheetwarp/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

namespace sheetwarp::io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return f;
}

struct RawPng {
  int width = 0, height = 0, channels = 0, bit_depth = 0;
  std::vector<std::uint8_t> bytes;  // row-major, big-endian samples for 16-bit
};

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw std::runtime_error(std::string("png: ") + msg); }
void png_warn(png_structp, png_const_charp) {}

void write_raw_png(const fs::path& path, const RawPng& raw) {
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  if (!png) throw std::runtime_error("png: out of memory");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  png_init_io(png, f.get());
  const int color = raw.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  png_set_IHDR(png, info, raw.width, raw.height, raw.bit_depth, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(raw.width) * raw.channels * (raw.bit_depth / 8);
  for (int y = 0; y < raw.height; ++y)
    png_write_row(png, const_cast<png_bytep>(raw.bytes.data() + stride * y));
  png_write_end(png, nullptr);
}

RawPng read_raw_png(const fs::path& path) {
  FilePtr f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  if (!png) throw std::runtime_error("png: out of memory");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};
  png_init_io(png, f.get());
  png_read_info(png, info);
  RawPng raw;
  raw.width = static_cast<int>(png_get_image_width(png, info));
  raw.height = static_cast<int>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  raw.bit_depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && raw.bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  raw.bit_depth = png_get_bit_depth(png, info);
  raw.channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  raw.bytes.resize(stride * raw.height);
  for (int y = 0; y < raw.height; ++y) png_read_row(png, raw.bytes.data() + stride * y, nullptr);
  png_read_end(png, nullptr);
  return raw;
}

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

void write_png(const fs::path& path, const Image& img) {
  RawPng raw{img.width(), img.height(), 3, 8, {}};
  raw.bytes.resize(img.data().size());
  std::transform(img.data().begin(), img.data().end(), raw.bytes.begin(), to_u8);
  write_raw_png(path, raw);
}

Image read_png(const fs::path& path) {
  const RawPng raw = read_raw_png(path);
  Image img(raw.width, raw.height);
  const bool wide = raw.bit_depth == 16;
  const double scale = wide ? 65535.0 : 255.0;
  for (int y = 0; y < raw.height; ++y)
    for (int x = 0; x < raw.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const int src_c = raw.channels >= 3 ? c : 0;
        const std::size_t i = (static_cast<std::size_t>(y) * raw.width + x) * raw.channels + src_c;
        const double v = wide ? (raw.bytes[2 * i] << 8 | raw.bytes[2 * i + 1]) : raw.bytes[i];
        img.at(x, y, c) = v / scale;
      }
  return img;
}

void write_mask_png(const fs::path& path, const PixelMask& mask) {
  RawPng raw{mask.width(), mask.height(), 1, 8, {}};
  raw.bytes.resize(mask.data().size());
  std::transform(mask.data().begin(), mask.data().end(), raw.bytes.begin(),
                 [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 255 : 0); });
  write_raw_png(path, raw);
}

PixelMask read_mask_png(const fs::path& path) {
  const RawPng raw = read_raw_png(path);
  if (raw.bit_depth != 8) throw InputError("mask png must be 8-bit: " + path.string());
  PixelMask m(raw.width, raw.height);
  for (std::size_t i = 0; i < m.pixel_count(); ++i) m.data()[i] = raw.bytes[i * raw.channels] >= 128 ? 1 : 0;
  return m;
}

void write_depth_png(const fs::path& path, const DepthMap& depth) {
  RawPng raw{depth.width(), depth.height(), 1, 16, {}};
  raw.bytes.resize(depth.pixel_count() * 2);
  for (std::size_t i = 0; i < depth.pixel_count(); ++i) {
    const double mm = std::clamp(std::round(depth.data()[i] * 1000.0), 0.0, 65535.0);
    const auto v = static_cast<std::uint16_t>(mm);
    raw.bytes[2 * i] = static_cast<std::uint8_t>(v >> 8);
    raw.bytes[2 * i + 1] = static_cast<std::uint8_t>(v & 0xff);
  }
  write_raw_png(path, raw);
}

DepthMap read_depth_png(const fs::path& path) {
  const RawPng raw = read_raw_png(path);
  if (raw.bit_depth != 16 || raw.channels != 1) throw InputError("depth png must be 16-bit gray: " + path.string());
  DepthMap d(raw.width, raw.height);
  for (std::size_t i = 0; i < d.pixel_count(); ++i)
    d.data()[i] = (raw.bytes[2 * i] << 8 | raw.bytes[2 * i + 1]) / 1000.0;
  return d;
}

// ---------------------------------------------------------------------------
// PFM. Rows are stored bottom-to-top; a negative scale marks little-endian.

namespace {

std::uint32_t to_le_bits(float f) {
  std::uint32_t u = std::bit_cast<std::uint32_t>(f);
  if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
  return u;
}

float from_le_bits(std::uint32_t u) {
  if constexpr (std::endian::native == std::endian::big) u = __builtin_bswap32(u);
  return std::bit_cast<float>(u);
}

void write_pfm_raw(const fs::path& path, int w, int h, int channels, const std::vector<double>& data) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << (channels == 3 ? "PF" : "Pf") << "\n" << w << " " << h << "\n-1.0\n";
  std::vector<float> row(static_cast<std::size_t>(w) * channels);
  for (int y = h - 1; y >= 0; --y) {
    for (std::size_t i = 0; i < row.size(); ++i)
      row[i] = static_cast<float>(data[static_cast<std::size_t>(y) * row.size() + i]);
    write_f32_le(os, row);
  }
}

std::vector<double> read_pfm_raw(const fs::path& path, int& w, int& h, int expected_channels) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::string magic;
  double scale = 0;
  is >> magic >> w >> h >> scale;
  is.get();
  const int channels = magic == "PF" ? 3 : magic == "Pf" ? 1 : 0;
  if (channels != expected_channels) throw InputError("unexpected PFM channel count: " + path.string());
  if (scale >= 0) throw InputError("big-endian PFM not supported: " + path.string());
  const std::size_t row_len = static_cast<std::size_t>(w) * channels;
  std::vector<double> data(row_len * h);
  for (int y = h - 1; y >= 0; --y) {
    const auto row = read_f32_le(is, row_len);
    std::copy(row.begin(), row.end(), data.begin() + static_cast<std::ptrdiff_t>(y * row_len));
  }
  return data;
}

bool has_ext(const fs::path& p, const char* ext) { return p.extension() == ext; }

}  // namespace

void write_f32_le(std::ostream& os, std::span<const float> values) {
  std::vector<char> buf(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint32_t u = to_le_bits(values[i]);
    std::memcpy(buf.data() + 4 * i, &u, 4);
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw std::runtime_error("write failed");
}

std::vector<float> read_f32_le(std::istream& is, std::size_t count) {
  std::vector<char> buf(count * 4);
  is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(is.gcount()) != buf.size()) throw InputError("truncated float32 array");
  std::vector<float> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t u;
    std::memcpy(&u, buf.data() + 4 * i, 4);
    out[i] = from_le_bits(u);
  }
  return out;
}

void write_pfm(const fs::path& path, const DepthMap& depth) {
  write_pfm_raw(path, depth.width(), depth.height(), 1, depth.data());
}

void write_pfm(const fs::path& path, const Image& img) { write_pfm_raw(path, img.width(), img.height(), 3, img.data()); }

DepthMap read_pfm_depth(const fs::path& path) {
  int w = 0, h = 0;
  auto data = read_pfm_raw(path, w, h, 1);
  DepthMap d(w, h);
  d.data() = std::move(data);
  return d;
}

Image read_pfm_image(const fs::path& path) {
  int w = 0, h = 0;
  auto data = read_pfm_raw(path, w, h, 3);
  Image img(w, h);
  img.data() = std::move(data);
  return img;
}

DepthMap read_depth(const fs::path& path) {
  if (has_ext(path, ".pfm")) return read_pfm_depth(path);
  if (has_ext(path, ".png")) return read_depth_png(path);
  throw InputError("unsupported depth format: " + path.string());
}

void write_depth(const fs::path& path, const DepthMap& depth) {
  if (has_ext(path, ".pfm")) return write_pfm(path, depth);
  if (has_ext(path, ".png")) return write_depth_png(path, depth);
  throw InputError("unsupported depth format: " + path.string());
}

Image read_image(const fs::path& path) {
  if (has_ext(path, ".pfm")) return read_pfm_image(path);
  if (has_ext(path, ".png")) return read_png(path);
  throw InputError("unsupported image format: " + path.string());
}

void write_image(const fs::path& path, const Image& img) {
  if (has_ext(path, ".pfm")) return write_pfm(path, img);
  if (has_ext(path, ".png")) return write_png(path, img);
  throw InputError("unsupported image format: " + path.string());
}

void write_points(const fs::path& path, std::span<const Vec3> points) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  std::vector<float> flat;
  flat.reserve(points.size() * 3);
  for (const Vec3& p : points)
    for (int k = 0; k < 3; ++k) flat.push_back(static_cast<float>(p[k]));
  write_f32_le(os, flat);
}

std::vector<Vec3> read_points(const fs::path& path) {
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  const auto bytes = static_cast<std::size_t>(is.tellg());
  if (bytes % 12 != 0) throw InputError("lidar file size is not a multiple of 12: " + path.string());
  is.seekg(0);
  const auto flat = read_f32_le(is, bytes / 4);
  std::vector<Vec3> pts(bytes / 12);
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = Vec3(flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]);
  return pts;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  os << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace sheetwarp::io
