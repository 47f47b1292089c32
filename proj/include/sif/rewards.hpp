#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sif/depth.hpp"
#include "sif/geometry.hpp"
#include "sif/judge.hpp"
#include "sif/trace.hpp"

namespace sif {

struct RewardWeights {
  double format = 1.0;
  double answer = 1.0;
  double bbox = 1.0;
  double depth = 1.0;
};

void validate(const RewardWeights& w);

struct RewardBreakdown {
  double r_format = 0.0;
  double r_ans = 0.0;
  double r_bbox = 0.0;
  double r_depth = 0.0;
  double total = 0.0;
  // diagnostics
  double s_init = 0.0;
  double s_end = 0.0;
  double judge_score = 0.0;
  std::optional<ParseDiagnostic> parse_error;
};

/// s_now + (s_now - prior_mean); without a prior group the progressive term is 0.
double progressive_answer_reward(double s_now, std::optional<double> prior_mean);

struct GroundingScore {
  double r_bbox = 0.0;
  double s_init = 0.0;
  double s_end = 0.0;
};

/// s_end + (s_end - s_init) where s_init scores the first box set that is
/// not exactly the full image and s_end scores the last box set.
GroundingScore grounding_reward(const ReasoningTrace& trace, const BoxSet& gt);

struct GroundTruth {
  std::string question;
  std::string answer;
  BoxSet boxes;
  std::shared_ptr<const DepthMap> depth;
};

struct RewardSettings {
  RewardWeights weights;
  DepthTolerance depth;
  ParseOptions parse;
};

/// Scores one completion. Parse failures zero the grounding and depth terms;
/// the answer is then judged from a loose <answer> extraction (score 0 when
/// absent). JudgeError propagates.
RewardBreakdown composite_reward(std::string_view raw, const GroundTruth& gt, JudgeClient& judge,
                                 std::optional<double> prior_judge_mean, const RewardSettings& settings = {});

/// (r - mean) / (population std + delta) over the group.
std::vector<double> group_advantages(std::span<const double> rewards, double delta = 1e-8);

struct HistoryConflict : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct HistorySnapshot {
  std::int64_t iteration = 0;
  std::vector<double> scores;

  double mean() const;
};

/// Per-sample judge scores of the most recently scored group. Iterations
/// must strictly increase per sample. With a backing file every update is
/// appended as one JSON line; load() replays the file.
class JudgeHistory {
 public:
  JudgeHistory() = default;
  explicit JudgeHistory(std::filesystem::path file);

  std::optional<HistorySnapshot> read(const std::string& sample_id) const;
  /// Throws HistoryConflict when iteration <= stored iteration.
  void update(const std::string& sample_id, std::int64_t iteration, std::vector<double> scores);
  /// Throws HistoryConflict if `iteration` would be rejected by update().
  void check_iteration(const std::string& sample_id, std::int64_t iteration) const;
  std::size_t size() const;

 private:
  void load();

  std::optional<std::filesystem::path> file_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, HistorySnapshot> entries_;
};

}  // namespace sif
