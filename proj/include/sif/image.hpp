#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "sif/geometry.hpp"

namespace sif {

struct ImageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

inline constexpr Rgb kOverlayRed{255, 0, 0};

/// 8-bit RGB raster, row-major, origin top-left.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // 3 * width * height

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h, Rgb fill = {});

  void set(std::size_t x, std::size_t y, Rgb c);
  Rgb get(std::size_t x, std::size_t y) const;
};

/// Binary PPM ("P6", maxval 255).
RgbImage parse_ppm(std::span<const std::uint8_t> bytes);
RgbImage read_ppm(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_ppm(const RgbImage& img);
void write_ppm(const RgbImage& img, const std::filesystem::path& path);

/// Axis-aligned outline of a normalized box scaled to pixels and clamped to
/// the image. Outlines narrower than `thickness` are widened to it.
void draw_box_outline(RgbImage& img, const BBox& box, Rgb color = kOverlayRed, std::size_t thickness = 3);

}  // namespace sif
