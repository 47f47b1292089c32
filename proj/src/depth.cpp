#include "sif/depth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

namespace sif {
namespace {

constexpr double kMaxval = 65535.0;

// Tolerates the rounding of decimal boundaries such as |0.55 - 0.5| / 0.5.
constexpr double kComparisonSlack = 1e-12;

bool is_pnm_space(std::uint8_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (is_pnm_space(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  unsigned long number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    unsigned long v = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 0xFFFFFFFFul) throw DepthIoError(DepthIoErrorKind::MalformedHeader, std::string(what) + " too large");
      ++pos_;
    }
    if (pos_ == start) {
      throw DepthIoError(DepthIoErrorKind::MalformedHeader, std::string("PGM header: missing ") + what);
    }
    return v;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

double median_of(std::vector<double> v) {
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  if (v.size() % 2 == 1) return v[mid];
  const double upper = v[mid];
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

}  // namespace

DepthMap::DepthMap(std::size_t width, std::size_t height, std::vector<double> values,
                   std::string convention_note)
    : width_(width), height_(height), values_(std::move(values)),
      convention_note_(std::move(convention_note)) {
  if (width_ == 0 || height_ == 0) throw std::invalid_argument("depth map must be at least 1x1");
  if (values_.size() != width_ * height_) {
    throw std::invalid_argument("depth map value count does not match its dimensions");
  }
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) throw std::invalid_argument("depth value outside [0,1]");
  }
}

DepthMap parse_depth_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw DepthIoError(DepthIoErrorKind::MalformedHeader, "not a binary PGM (expected magic P5)");
  }
  HeaderReader reader(bytes);
  reader.advance(2);
  const auto width = reader.number("width");
  const auto height = reader.number("height");
  const auto maxval = reader.number("maxval");
  if (width == 0 || height == 0) throw DepthIoError(DepthIoErrorKind::MalformedHeader, "PGM has zero size");
  if (maxval != 65535) {
    throw DepthIoError(DepthIoErrorKind::UnsupportedMaxval,
                       "unsupported PGM maxval " + std::to_string(maxval) + " (need 65535)");
  }
  if (reader.pos() >= bytes.size() || !is_pnm_space(bytes[reader.pos()])) {
    throw DepthIoError(DepthIoErrorKind::MalformedHeader, "PGM header not terminated by whitespace");
  }
  reader.advance(1);

  const std::size_t count = static_cast<std::size_t>(width) * height;
  const std::size_t available = bytes.size() - reader.pos();
  if (available < 2 * count) {
    throw DepthIoError(DepthIoErrorKind::TruncatedPayload,
                       "PGM payload truncated: " + std::to_string(available / 2) + " of " +
                           std::to_string(count) + " samples");
  }
  std::vector<double> values(count);
  const auto* p = bytes.data() + reader.pos();
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned raw = (static_cast<unsigned>(p[2 * i]) << 8) | p[2 * i + 1];
    values[i] = raw / kMaxval;
  }
  return DepthMap(width, height, std::move(values));
}

DepthMap load_depth_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DepthIoError(DepthIoErrorKind::MissingFile, "cannot open depth map " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_depth_pgm(bytes);
}

std::vector<std::uint8_t> encode_depth_pgm(const DepthMap& map) {
  const std::string header =
      "P5\n" + std::to_string(map.width()) + " " + std::to_string(map.height()) + "\n65535\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + 2 * map.values().size());
  for (double v : map.values()) {
    const auto raw = static_cast<unsigned>(std::lround(v * kMaxval));
    out.push_back(static_cast<std::uint8_t>(raw >> 8));
    out.push_back(static_cast<std::uint8_t>(raw & 0xFF));
  }
  return out;
}

void save_depth_map(const DepthMap& map, const std::filesystem::path& path) {
  const auto bytes = encode_depth_pgm(map);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

double region_depth(const DepthMap& map, const BBox& box, RegionStatistic stat) {
  const auto w = static_cast<double>(map.width());
  const auto h = static_cast<double>(map.height());
  // Covered pixel centers form a contiguous column range and row range.
  const auto covered = [](std::size_t n, double extent, double lo, double hi) {
    std::pair<std::size_t, std::size_t> range{n, 0};  // [first, last + 1)
    for (std::size_t i = 0; i < n; ++i) {
      const double center = (static_cast<double>(i) + 0.5) / extent;
      if (center < lo || center > hi) continue;
      range.first = std::min(range.first, i);
      range.second = i + 1;
    }
    return range;
  };
  const auto [c0, c1] = covered(map.width(), w, box.x1, box.x2);
  const auto [r0, r1] = covered(map.height(), h, box.y1, box.y2);

  if (c0 >= c1 || r0 >= r1) {
    const double cx = 0.5 * (box.x1 + box.x2), cy = 0.5 * (box.y1 + box.y2);
    const auto col = std::min(map.width() - 1, static_cast<std::size_t>(cx * w));
    const auto row = std::min(map.height() - 1, static_cast<std::size_t>(cy * h));
    return map.at(row, col);
  }

  if (stat == RegionStatistic::Median) {
    std::vector<double> v;
    v.reserve((c1 - c0) * (r1 - r0));
    for (auto r = r0; r < r1; ++r)
      for (auto c = c0; c < c1; ++c) v.push_back(map.at(r, c));
    return median_of(std::move(v));
  }
  // Running mean: exact on constant regions, unlike sum / count.
  double mean = 0.0;
  double seen = 0.0;
  for (auto r = r0; r < r1; ++r)
    for (auto c = c0; c < c1; ++c) mean += (map.at(r, c) - mean) / ++seen;
  return mean;
}

void validate(const DepthTolerance& tol) {
  if (!(tol.threshold > 0.0 && tol.threshold < 1.0)) throw std::invalid_argument("depth threshold must lie in (0,1)");
  if (!(tol.gt_floor > 0.0)) throw std::invalid_argument("depth gt_floor must be positive");
}

std::vector<RegionDepthCheck> check_depths(const ReasoningTrace& trace, const DepthMap& map,
                                           const DepthTolerance& tol) {
  std::vector<RegionDepthCheck> out;
  for (std::size_t s = 0; s < trace.steps.size(); ++s) {
    const auto& regions = trace.steps[s].regions;
    for (std::size_t r = 0; r < regions.size(); ++r) {
      RegionDepthCheck c;
      c.step = s;
      c.region = r;
      c.predicted = regions[r].depth;
      c.reference = region_depth(map, regions[r].box, tol.statistic);
      c.relative_error = std::abs(c.predicted - c.reference) / std::max(c.reference, tol.gt_floor);
      c.pass = c.relative_error <= tol.threshold + kComparisonSlack;
      out.push_back(c);
    }
  }
  return out;
}

double depth_reward(const ReasoningTrace& trace, const DepthMap& map, const DepthTolerance& tol) {
  const auto checks = check_depths(trace, map, tol);
  const bool all = std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
  return all ? 1.0 : 0.0;
}

}  // namespace sif
