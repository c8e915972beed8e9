#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "sheetwarp/geometry.hpp"
#include "sheetwarp/image.hpp"

namespace sheetwarp::io {

namespace fs = std::filesystem;

/// 8-bit sRGB PNG; values are quantized with round-to-nearest after clamping to [0,1].
void write_png(const fs::path& path, const Image& img);
Image read_png(const fs::path& path);

/// 8-bit PNG mask, 0 / 255.
void write_mask_png(const fs::path& path, const PixelMask& mask);
PixelMask read_mask_png(const fs::path& path);

/// 16-bit PNG depth in millimeters (0 = invalid). Values above 65.535 m saturate.
void write_depth_png(const fs::path& path, const DepthMap& depth);
DepthMap read_depth_png(const fs::path& path);

/// Portable float map (little-endian), meters or linear color.
void write_pfm(const fs::path& path, const DepthMap& depth);
void write_pfm(const fs::path& path, const Image& img);
DepthMap read_pfm_depth(const fs::path& path);
Image read_pfm_image(const fs::path& path);

/// Dispatches on extension: .png (16-bit mm) or .pfm.
DepthMap read_depth(const fs::path& path);
void write_depth(const fs::path& path, const DepthMap& depth);
/// Dispatches on extension: .png (8-bit) or .pfm.
Image read_image(const fs::path& path);
void write_image(const fs::path& path, const Image& img);

/// Lidar points: packed little-endian float32 xyz triples.
void write_points(const fs::path& path, std::span<const Vec3> points);
std::vector<Vec3> read_points(const fs::path& path);

void write_f32_le(std::ostream& os, std::span<const float> values);
std::vector<float> read_f32_le(std::istream& is, std::size_t count);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

}  // namespace sheetwarp::io
