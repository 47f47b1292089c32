#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sif {

/// Raised when a box violates 0 <= x1 < x2 <= 1, 0 <= y1 < y2 <= 1.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Raised when an operation's precondition on set cardinality is not met.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Axis-aligned rectangle in normalized image coordinates.
/// Origin top-left, x grows rightward, y grows downward.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const noexcept { return x2 - x1; }
  double height() const noexcept { return y2 - y1; }
  double area() const noexcept { return width() * height(); }

  bool operator==(const BBox&) const = default;
};

inline constexpr BBox kFullImage{0.0, 0.0, 1.0, 1.0};

/// Ordered collection of boxes. Order is kept for reporting; every metric
/// below is invariant under permutation.
using BoxSet = std::vector<BBox>;

bool is_valid(const BBox& b) noexcept;
/// Throws ValidationError naming the violated bound.
void validate(const BBox& b);
void validate(std::span<const BBox> s);
std::string to_string(const BBox& b);

/// True when the set is exactly {(0,0,1,1)}.
bool is_full_image(std::span<const BBox> s) noexcept;

double intersection_area(const BBox& a, const BBox& b) noexcept;
double iou(const BBox& a, const BBox& b);

/// Exact area of the union region via coordinate compression.
double union_area(std::span<const BBox> s);

/// Global IoU between the union regions of two sets.
/// Empty pred yields 0.
double giou(std::span<const BBox> pred, std::span<const BBox> gt);

struct MatchPair {
  std::size_t pred = 0;
  std::size_t gt = 0;
  double iou = 0.0;
};

struct MatchResult {
  std::vector<MatchPair> pairs;  // sorted by pred index
  double total = 0.0;
};

/// One-to-one assignment of predictions to ground truth maximizing total IoU
/// (Kuhn-Munkres on 1 - IoU). |pairs| = min(|pred|, |gt|).
MatchResult match_boxes(std::span<const BBox> pred, std::span<const BBox> gt);

/// Same as match_boxes, from a precomputed row-major IoU matrix of shape
/// rows x cols. Exposed so matching can be checked on arbitrary matrices.
MatchResult match_iou_matrix(std::span<const double> iou_matrix, std::size_t rows, std::size_t cols);

/// Mean IoU over the optimal matching; the denominator is min(|pred|, |gt|).
double piou(std::span<const BBox> pred, std::span<const BBox> gt);

struct HiouParts {
  double giou = 0.0;
  double piou = 0.0;
  double hiou = 0.0;
};

/// Hierarchical IoU: (giou + piou) / 2. Empty pred scores 0 on every part.
HiouParts hiou_parts(std::span<const BBox> pred, std::span<const BBox> gt);
double hiou(std::span<const BBox> pred, std::span<const BBox> gt);

}  // namespace sif
