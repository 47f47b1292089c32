#include "sif/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "sif/assignment.hpp"

namespace sif {
namespace {

bool in_unit(double v) noexcept { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

std::vector<double> sorted_edges(std::span<const BBox> a, std::span<const BBox> b, bool xs) {
  std::vector<double> edges;
  edges.reserve(2 * (a.size() + b.size()));
  for (auto s : {a, b}) {
    for (const auto& box : s) {
      edges.push_back(xs ? box.x1 : box.y1);
      edges.push_back(xs ? box.x2 : box.y2);
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::size_t edge_index(const std::vector<double>& edges, double v) {
  return static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), v) - edges.begin());
}

// Marks the compressed cells covered by `s` in a (nx-1) x (ny-1) grid.
void mark_cells(std::span<const BBox> s, const std::vector<double>& xs,
                const std::vector<double>& ys, std::vector<char>& cells) {
  const std::size_t cols = xs.size() - 1;
  for (const auto& b : s) {
    const auto i0 = edge_index(xs, b.x1), i1 = edge_index(xs, b.x2);
    const auto j0 = edge_index(ys, b.y1), j1 = edge_index(ys, b.y2);
    for (auto j = j0; j < j1; ++j) {
      for (auto i = i0; i < i1; ++i) cells[j * cols + i] = 1;
    }
  }
}

struct RegionAreas {
  double intersection = 0.0;  // area((U a) ∩ (U b))
  double united = 0.0;        // area((U a) ∪ (U b))
};

// Both unions share one compressed grid, so the cell sums are symmetric in
// the roles of a and b.
RegionAreas region_areas(std::span<const BBox> a, std::span<const BBox> b) {
  const auto xs = sorted_edges(a, b, true);
  const auto ys = sorted_edges(a, b, false);
  RegionAreas out;
  if (xs.size() < 2 || ys.size() < 2) return out;
  const std::size_t cols = xs.size() - 1, rows = ys.size() - 1;
  std::vector<char> in_a(cols * rows, 0), in_b(cols * rows, 0);
  mark_cells(a, xs, ys, in_a);
  mark_cells(b, xs, ys, in_b);
  for (std::size_t j = 0; j < rows; ++j) {
    const double h = ys[j + 1] - ys[j];
    for (std::size_t i = 0; i < cols; ++i) {
      const std::size_t k = j * cols + i;
      if (!in_a[k] && !in_b[k]) continue;
      const double cell = (xs[i + 1] - xs[i]) * h;
      out.united += cell;
      if (in_a[k] && in_b[k]) out.intersection += cell;
    }
  }
  return out;
}

}  // namespace

bool is_valid(const BBox& b) noexcept {
  return in_unit(b.x1) && in_unit(b.y1) && in_unit(b.x2) && in_unit(b.y2) && b.x1 < b.x2 &&
         b.y1 < b.y2;
}

void validate(const BBox& b) {
  if (!in_unit(b.x1) || !in_unit(b.y1) || !in_unit(b.x2) || !in_unit(b.y2)) {
    throw ValidationError("box " + to_string(b) + " has a coordinate outside [0,1]");
  }
  if (!(b.x1 < b.x2)) throw ValidationError("box " + to_string(b) + " has x2 <= x1");
  if (!(b.y1 < b.y2)) throw ValidationError("box " + to_string(b) + " has y2 <= y1");
}

void validate(std::span<const BBox> s) {
  for (const auto& b : s) validate(b);
}

std::string to_string(const BBox& b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "(%g,%g,%g,%g)", b.x1, b.y1, b.x2, b.y2);
  return buf;
}

bool is_full_image(std::span<const BBox> s) noexcept {
  return s.size() == 1 && s.front() == kFullImage;
}

double intersection_area(const BBox& a, const BBox& b) noexcept {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double iou(const BBox& a, const BBox& b) {
  validate(a);
  validate(b);
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

double union_area(std::span<const BBox> s) {
  if (s.empty()) throw DomainError("union_area of an empty box set");
  validate(s);
  return region_areas(s, {}).united;
}

double giou(std::span<const BBox> pred, std::span<const BBox> gt) {
  if (gt.empty()) throw DomainError("giou requires a nonempty ground-truth set");
  validate(gt);
  validate(pred);
  if (pred.empty()) return 0.0;
  const auto r = region_areas(pred, gt);
  return r.united > 0.0 ? r.intersection / r.united : 0.0;
}

MatchResult match_iou_matrix(std::span<const double> iou_matrix, std::size_t rows,
                             std::size_t cols) {
  if (rows == 0 || cols == 0) throw DomainError("matching requires two nonempty sets");
  if (iou_matrix.size() != rows * cols) throw DomainError("IoU matrix size does not match shape");
  std::vector<double> cost(iou_matrix.size());
  std::transform(iou_matrix.begin(), iou_matrix.end(), cost.begin(),
                 [](double v) { return 1.0 - v; });
  const auto assignment = solve_min_cost_assignment(cost, rows, cols);

  MatchResult out;
  for (std::size_t r = 0; r < rows; ++r) {
    if (assignment[r] < 0) continue;
    const auto c = static_cast<std::size_t>(assignment[r]);
    out.pairs.push_back({r, c, iou_matrix[r * cols + c]});
    out.total += iou_matrix[r * cols + c];
  }
  return out;
}

MatchResult match_boxes(std::span<const BBox> pred, std::span<const BBox> gt) {
  if (pred.empty() || gt.empty()) throw DomainError("match_boxes requires two nonempty sets");
  std::vector<double> m(pred.size() * gt.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t j = 0; j < gt.size(); ++j) m[i * gt.size() + j] = iou(pred[i], gt[j]);
  }
  return match_iou_matrix(m, pred.size(), gt.size());
}

double piou(std::span<const BBox> pred, std::span<const BBox> gt) {
  const auto match = match_boxes(pred, gt);
  return match.total / static_cast<double>(match.pairs.size());
}

HiouParts hiou_parts(std::span<const BBox> pred, std::span<const BBox> gt) {
  if (gt.empty()) throw DomainError("hiou requires a nonempty ground-truth set");
  HiouParts parts;
  if (pred.empty()) {
    validate(gt);
    return parts;
  }
  parts.giou = giou(pred, gt);
  parts.piou = piou(pred, gt);
  parts.hiou = 0.5 * (parts.giou + parts.piou);
  return parts;
}

double hiou(std::span<const BBox> pred, std::span<const BBox> gt) { return hiou_parts(pred, gt).hiou; }

}  // namespace sif
