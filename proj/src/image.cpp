#include "sif/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

namespace sif {
namespace {

bool is_pnm_space(std::uint8_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::size_t read_header_number(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (is_pnm_space(bytes[pos])) {
      ++pos;
    } else if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  std::size_t v = 0;
  while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9' && pos - start < 9) {
    v = v * 10 + (bytes[pos] - '0');
    ++pos;
  }
  if (pos == start) throw ImageError("malformed PPM header");
  return v;
}

// Pixel span [lo, hi) of a normalized interval, at least `min_extent` wide.
std::pair<std::size_t, std::size_t> pixel_span(double a, double b, std::size_t n, std::size_t min_extent) {
  const auto to_px = [n](double v) {
    return static_cast<std::size_t>(std::clamp(std::lround(v * static_cast<double>(n)), 0L, static_cast<long>(n)));
  };
  std::size_t lo = to_px(a), hi = to_px(b);
  min_extent = std::min(min_extent, n);
  if (hi < lo + min_extent) {
    hi = std::min(n, lo + min_extent);
    lo = hi - min_extent;
  }
  return {lo, hi};
}

}  // namespace

RgbImage::RgbImage(std::size_t w, std::size_t h, Rgb fill) : width(w), height(h), pixels(3 * w * h) {
  for (std::size_t i = 0; i < w * h; ++i) {
    pixels[3 * i] = fill.r;
    pixels[3 * i + 1] = fill.g;
    pixels[3 * i + 2] = fill.b;
  }
}

void RgbImage::set(std::size_t x, std::size_t y, Rgb c) {
  auto* p = &pixels[3 * (y * width + x)];
  p[0] = c.r;
  p[1] = c.g;
  p[2] = c.b;
}

Rgb RgbImage::get(std::size_t x, std::size_t y) const {
  const auto* p = &pixels[3 * (y * width + x)];
  return {p[0], p[1], p[2]};
}

RgbImage parse_ppm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw ImageError("not a binary PPM (expected P6)");
  std::size_t pos = 2;
  const auto w = read_header_number(bytes, pos);
  const auto h = read_header_number(bytes, pos);
  const auto maxval = read_header_number(bytes, pos);
  if (w == 0 || h == 0) throw ImageError("PPM has zero size");
  if (maxval != 255) throw ImageError("unsupported PPM maxval " + std::to_string(maxval));
  if (pos >= bytes.size() || !is_pnm_space(bytes[pos])) throw ImageError("malformed PPM header");
  ++pos;
  if (bytes.size() - pos < 3 * w * h) throw ImageError("truncated PPM payload");
  RgbImage img;
  img.width = w;
  img.height = h;
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + 3 * w * h));
  return img;
}

RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open image " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_ppm(bytes);
}

std::vector<std::uint8_t> encode_ppm(const RgbImage& img) {
  const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

void write_ppm(const RgbImage& img, const std::filesystem::path& path) {
  const auto bytes = encode_ppm(img);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageError("cannot write image " + path.string());
}

void draw_box_outline(RgbImage& img, const BBox& box, Rgb color, std::size_t thickness) {
  if (img.width == 0 || img.height == 0) return;
  const auto [x0, x1] = pixel_span(box.x1, box.x2, img.width, thickness);
  const auto [y0, y1] = pixel_span(box.y1, box.y2, img.height, thickness);
  const std::size_t tx = std::min(thickness, x1 - x0), ty = std::min(thickness, y1 - y0);
  for (std::size_t y = y0; y < y1; ++y) {
    for (std::size_t x = x0; x < x1; ++x) {
      const bool edge = x < x0 + tx || x >= x1 - tx || y < y0 + ty || y >= y1 - ty;
      if (edge) img.set(x, y, color);
    }
  }
}

}  // namespace sif
