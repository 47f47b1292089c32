#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sif/geometry.hpp"
#include "sif/rewards.hpp"

// Data-parallel batch kernels. Each OpenMP kernel has a serial twin with the
// same per-item arithmetic; the two must agree bit for bit.
namespace sif::kernels {

struct HiouInstance {
  BoxSet pred;
  BoxSet gt;
};

std::vector<HiouParts> batch_hiou(std::span<const HiouInstance> items);
std::vector<HiouParts> batch_hiou_serial(std::span<const HiouInstance> items);

/// Scores every completion of one rollout group. The first exception thrown
/// by any item (e.g. JudgeError) is rethrown after the loop.
std::vector<RewardBreakdown> score_completions(std::span<const std::string> completions, const GroundTruth& gt,
                                               JudgeClient& judge, std::optional<double> prior_judge_mean,
                                               const RewardSettings& settings);
std::vector<RewardBreakdown> score_completions_serial(std::span<const std::string> completions,
                                                      const GroundTruth& gt, JudgeClient& judge,
                                                      std::optional<double> prior_judge_mean,
                                                      const RewardSettings& settings);

int max_threads();

}  // namespace sif::kernels
