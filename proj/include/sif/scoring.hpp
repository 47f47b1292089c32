#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sif/rewards.hpp"

namespace sif {

/// Malformed request or batch record (HTTP 400).
struct WireError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// One rollout group: the unit of scoring for both the CLI and the service.
struct GroupRequest {
  std::string sample_id;
  std::int64_t iteration = 0;
  GroundTruth ground_truth;
  std::vector<std::string> completions;
  std::optional<RewardWeights> weights;
};

struct GroupResult {
  std::vector<RewardBreakdown> breakdowns;
  std::vector<double> advantages;
};

struct ScoringConfig {
  RewardSettings settings;
  double delta = 1e-8;
  int group_size = 8;  // required completions per group; 0 accepts any size
  bool parallel = true;
};

void validate(const ScoringConfig& cfg);

/// Scores rollout groups against a shared judge and history. A group either
/// commits its judge scores to the history after every completion scored, or
/// leaves the history untouched. Groups of one sample are serialized; groups
/// of distinct samples run concurrently.
class GroupScorer {
 public:
  GroupScorer(JudgeClient& judge, JudgeHistory& history, ScoringConfig config);

  /// Throws WireError, HistoryConflict, JudgeError.
  GroupResult score(const GroupRequest& request);

  const ScoringConfig& config() const noexcept { return config_; }

 private:
  std::shared_ptr<std::mutex> sample_lock(const std::string& sample_id);

  JudgeClient& judge_;
  JudgeHistory& history_;
  ScoringConfig config_;
  std::mutex locks_mutex_;
  std::map<std::string, std::shared_ptr<std::mutex>> locks_;
};

// Wire schema shared by `sif score` (JSONL) and POST /v1/score.

BoxSet boxes_from_json(const nlohmann::json& j);
nlohmann::json boxes_to_json(const BoxSet& boxes);

/// Relative depth-map paths resolve against `base_dir`. Depth maps may also
/// be inline: {"pgm_hex": "<hex of PGM bytes>"}. Throws WireError or
/// DepthIoError.
GroupRequest parse_group_request(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

nlohmann::json to_json(const RewardBreakdown& b);
nlohmann::json rewards_to_json(const GroupResult& r);
nlohmann::json advantages_to_json(const GroupResult& r);

std::vector<std::uint8_t> hex_decode(std::string_view hex);
std::string hex_encode(std::span<const std::uint8_t> bytes);

}  // namespace sif
