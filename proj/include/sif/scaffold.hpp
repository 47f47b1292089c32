#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "sif/geometry.hpp"

namespace sif {

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
double uniform01(Rng& rng);
/// Uniform integer in [0, n).
std::uint64_t uniform_below(Rng& rng, std::uint64_t n);

struct ScaffoldConfig {
  int steps = 5;                 // expansion budget K
  double area_tolerance = 0.2;   // relative distractor area tolerance
  int max_distractors = 2;       // distractor count drawn from {0..max}
  int distractor_attempts = 1000;
  std::uint64_t seed = 0;
};

void validate(const ScaffoldConfig& cfg);

/// Box-set sequence produced by reverse expansion.
///
/// Forward order starts at the ground truth and ends at the full image;
/// reversed (scaffold) order is distractors, full image, ..., ground truth.
struct FocusTrajectory {
  std::vector<BoxSet> sets;
  std::optional<int> early_stop_step;  // t at which |B_t| first reached 1
  int final_steps = 0;                 // K after any early-termination rewrite
  std::vector<int> step_sizes;         // S used at t = 1..final_steps
  int distractor_count = 0;
  bool reversed = false;

  bool operator==(const FocusTrajectory&) const = default;
};

/// Grows every box toward the image border by 1/S of each margin.
BoxSet expand_step(const BoxSet& prev, int step_size);

/// Replaces overlapping pairs (IoU > 0, lowest index pair first) by their
/// envelope until the set is pairwise disjoint.
BoxSet merge_overlaps(BoxSet s);

/// Forward expansion B_0 = gt, ..., B_K = {(0,0,1,1)} with one-shot early
/// termination: the first time |B_t| = 1 the budget becomes K = t + 2.
FocusTrajectory build_forward_sequence(const BoxSet& gt, const ScaffoldConfig& cfg);

/// Single-box sets disjoint from the ground truth and from each other, with
/// area within the relative tolerance of the mean ground-truth box area.
std::vector<BoxSet> sample_distractors(const FocusTrajectory& forward, const BoxSet& gt,
                                       const ScaffoldConfig& cfg, Rng& rng);

/// Forward sequence plus distractors, reversed into coarse-to-fine order.
FocusTrajectory build_scaffold(const BoxSet& gt, const ScaffoldConfig& cfg, Rng& rng);

}  // namespace sif
