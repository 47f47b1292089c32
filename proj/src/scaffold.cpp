#include "sif/scaffold.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sif {

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_below(0)");
  return rng() % n;
}

void validate(const ScaffoldConfig& cfg) {
  if (cfg.steps < 1) throw std::invalid_argument("scaffold steps must be >= 1");
  if (!(cfg.area_tolerance > 0.0 && cfg.area_tolerance < 1.0)) {
    throw std::invalid_argument("area tolerance must lie in (0,1)");
  }
  if (cfg.max_distractors < 0 || cfg.max_distractors > 2) {
    throw std::invalid_argument("max_distractors must be 0, 1 or 2");
  }
  if (cfg.distractor_attempts < 1) throw std::invalid_argument("distractor attempt budget must be positive");
}

BoxSet expand_step(const BoxSet& prev, int step_size) {
  if (step_size < 1) throw DomainError("expansion step size must be >= 1");
  validate(prev);
  BoxSet out;
  out.reserve(prev.size());
  if (step_size == 1) {
    // Offsets consume the full margins; pin the result to the exact unit box.
    out.assign(prev.size(), kFullImage);
    return out;
  }
  const double s = step_size;
  for (const auto& b : prev) {
    out.push_back({std::max(0.0, b.x1 - b.x1 / s), std::max(0.0, b.y1 - b.y1 / s),
                   std::min(1.0, b.x2 + (1.0 - b.x2) / s), std::min(1.0, b.y2 + (1.0 - b.y2) / s)});
  }
  return out;
}

BoxSet merge_overlaps(BoxSet s) {
  for (;;) {
    bool merged = false;
    for (std::size_t i = 0; i < s.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < s.size(); ++j) {
        if (intersection_area(s[i], s[j]) <= 0.0) continue;
        s[i] = {std::min(s[i].x1, s[j].x1), std::min(s[i].y1, s[j].y1), std::max(s[i].x2, s[j].x2),
                std::max(s[i].y2, s[j].y2)};
        s.erase(s.begin() + static_cast<std::ptrdiff_t>(j));
        merged = true;
        break;
      }
    }
    if (!merged) return s;
  }
}

FocusTrajectory build_forward_sequence(const BoxSet& gt, const ScaffoldConfig& cfg) {
  validate(cfg);
  if (gt.empty()) throw DomainError("scaffold requires at least one ground-truth box");
  validate(gt);

  FocusTrajectory traj;
  traj.sets.push_back(gt);
  int k = cfg.steps;
  bool early_terminated = false;
  for (int t = 1; t <= k; ++t) {
    const int step_size = k - t + 1;
    traj.step_sizes.push_back(step_size);
    traj.sets.push_back(merge_overlaps(expand_step(traj.sets.back(), step_size)));
    if (traj.sets.back().size() == 1 && !early_terminated) {
      k = t + 2;
      early_terminated = true;
      traj.early_stop_step = t;
    }
  }
  traj.final_steps = k;
  return traj;
}

std::vector<BoxSet> sample_distractors(const FocusTrajectory& forward, const BoxSet& gt,
                                       const ScaffoldConfig& cfg, Rng& rng) {
  (void)forward;  // every expansion ends at the full image; exclusion is against gt
  validate(cfg);
  std::vector<BoxSet> out;
  const auto wanted = uniform_below(rng, static_cast<std::uint64_t>(cfg.max_distractors) + 1);
  if (wanted == 0 || gt.empty()) return out;

  const double mean_area =
      std::accumulate(gt.begin(), gt.end(), 0.0, [](double acc, const BBox& b) { return acc + b.area(); }) /
      static_cast<double>(gt.size());
  const double tol = cfg.area_tolerance;
  const double log_lo = std::log(1.0 / 3.0), log_span = std::log(9.0);

  std::vector<BBox> occupied(gt.begin(), gt.end());
  for (std::uint64_t i = 0; i < wanted; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.distractor_attempts && !placed; ++attempt) {
      const double area = mean_area * (1.0 + tol * (2.0 * uniform01(rng) - 1.0));
      const double aspect = std::exp(log_lo + log_span * uniform01(rng));
      const double w = std::sqrt(area * aspect);
      const double h = area / w;
      const double ux = uniform01(rng), uy = uniform01(rng);
      if (!(w < 1.0 && h < 1.0)) continue;
      const double x1 = ux * (1.0 - w), y1 = uy * (1.0 - h);
      const BBox candidate{x1, y1, std::min(1.0, x1 + w), std::min(1.0, y1 + h)};
      if (!is_valid(candidate)) continue;
      if (std::abs(candidate.area() - mean_area) / mean_area > tol) continue;
      const bool clear = std::none_of(occupied.begin(), occupied.end(), [&](const BBox& o) {
        return intersection_area(o, candidate) > 0.0;
      });
      if (!clear) continue;
      occupied.push_back(candidate);
      out.push_back({candidate});
      placed = true;
    }
    if (!placed) break;  // space exhausted; keep what fits
  }
  return out;
}

FocusTrajectory build_scaffold(const BoxSet& gt, const ScaffoldConfig& cfg, Rng& rng) {
  auto traj = build_forward_sequence(gt, cfg);
  auto distractors = sample_distractors(traj, gt, cfg, rng);
  traj.distractor_count = static_cast<int>(distractors.size());
  for (auto& d : distractors) traj.sets.push_back(std::move(d));
  std::reverse(traj.sets.begin(), traj.sets.end());
  traj.reversed = true;
  return traj;
}

}  // namespace sif
