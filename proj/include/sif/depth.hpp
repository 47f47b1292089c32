#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sif/geometry.hpp"
#include "sif/trace.hpp"

namespace sif {

enum class DepthIoErrorKind { MissingFile, MalformedHeader, TruncatedPayload, UnsupportedMaxval };

struct DepthIoError : std::runtime_error {
  DepthIoError(DepthIoErrorKind k, const std::string& what) : std::runtime_error(what), kind(k) {}
  DepthIoErrorKind kind;
};

/// Dense normalized depth grid, row-major, origin top-left.
class DepthMap {
 public:
  DepthMap(std::size_t width, std::size_t height, std::vector<double> values,
           std::string convention_note = {});

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::span<const double> values() const noexcept { return values_; }
  double at(std::size_t row, std::size_t col) const { return values_[row * width_ + col]; }
  const std::string& convention_note() const noexcept { return convention_note_; }

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<double> values_;
  std::string convention_note_;
};

/// Decodes binary PGM ("P5", maxval 65535, big-endian samples).
DepthMap parse_depth_pgm(std::span<const std::uint8_t> bytes);
DepthMap load_depth_map(const std::filesystem::path& path);

/// Encodes values as 16-bit PGM, quantizing each value to round(v * 65535).
std::vector<std::uint8_t> encode_depth_pgm(const DepthMap& map);
void save_depth_map(const DepthMap& map, const std::filesystem::path& path);

enum class RegionStatistic { Mean, Median };

/// Depth over the pixels whose centers lie inside `box` (closed bounds).
/// When no center is covered, the pixel containing the box center is used.
double region_depth(const DepthMap& map, const BBox& box,
                    RegionStatistic stat = RegionStatistic::Mean);

struct DepthTolerance {
  double threshold = 0.1;
  double gt_floor = 1e-3;
  RegionStatistic statistic = RegionStatistic::Mean;
};

void validate(const DepthTolerance& tol);

struct RegionDepthCheck {
  std::size_t step = 0;
  std::size_t region = 0;
  double predicted = 0.0;
  double reference = 0.0;
  double relative_error = 0.0;
  bool pass = false;
};

/// Per-region relative errors |d - d_gt| / max(d_gt, gt_floor).
std::vector<RegionDepthCheck> check_depths(const ReasoningTrace& trace, const DepthMap& map,
                                           const DepthTolerance& tol = {});

/// 1.0 iff every region of every step is within tolerance.
double depth_reward(const ReasoningTrace& trace, const DepthMap& map,
                    const DepthTolerance& tol = {});

}  // namespace sif
