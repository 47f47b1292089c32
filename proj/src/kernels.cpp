#include "sif/kernels.hpp"

#include <exception>

#include <omp.h>

namespace sif::kernels {
namespace {

void rethrow_first(const std::vector<std::exception_ptr>& errors) {
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

int max_threads() { return omp_get_max_threads(); }

std::vector<HiouParts> batch_hiou(std::span<const HiouInstance> items) {
  const auto n = static_cast<long>(items.size());
  std::vector<HiouParts> out(items.size());
  std::vector<std::exception_ptr> errors(items.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (long i = 0; i < n; ++i) {
    try {
      out[i] = hiou_parts(items[i].pred, items[i].gt);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  rethrow_first(errors);
  return out;
}

std::vector<HiouParts> batch_hiou_serial(std::span<const HiouInstance> items) {
  std::vector<HiouParts> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(hiou_parts(item.pred, item.gt));
  return out;
}

std::vector<RewardBreakdown> score_completions(std::span<const std::string> completions, const GroundTruth& gt,
                                               JudgeClient& judge, std::optional<double> prior_judge_mean,
                                               const RewardSettings& settings) {
  const auto n = static_cast<long>(completions.size());
  std::vector<RewardBreakdown> out(completions.size());
  std::vector<std::exception_ptr> errors(completions.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long i = 0; i < n; ++i) {
    try {
      out[i] = composite_reward(completions[i], gt, judge, prior_judge_mean, settings);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  rethrow_first(errors);
  return out;
}

std::vector<RewardBreakdown> score_completions_serial(std::span<const std::string> completions,
                                                      const GroundTruth& gt, JudgeClient& judge,
                                                      std::optional<double> prior_judge_mean,
                                                      const RewardSettings& settings) {
  std::vector<RewardBreakdown> out;
  out.reserve(completions.size());
  for (const auto& c : completions) out.push_back(composite_reward(c, gt, judge, prior_judge_mean, settings));
  return out;
}

}  // namespace sif::kernels
