#pragma once

// Small builders for rollout groups and scratch directories.

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "sif/depth.hpp"
#include "sif/scoring.hpp"

namespace fixtures {

struct ScratchDir {
  std::filesystem::path path;
  explicit ScratchDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

// 8x8 map: 0.3 on the left half, 0.7 on the right half.
inline sif::DepthMap split_depth() {
  std::vector<double> v(64);
  for (std::size_t r = 0; r < 8; ++r) {
    for (std::size_t c = 0; c < 8; ++c) v[r * 8 + c] = c < 4 ? 0.3 : 0.7;
  }
  return sif::DepthMap(8, 8, v);
}

inline std::string completion(int variant) {
  switch (variant % 8) {
    case 0:
      return R"(<think><area>[{"bbox":[0,0,1,1],"depth":0.5}]</area><text>whole view</text><area>[{"bbox":[0,0,0.5,0.5],"depth":0.3}]</area><text>left</text></think><answer>red</answer>)";
    case 1:
      return R"(<think><area>[{"bbox":[0.5,0.5,1,1],"depth":0.7}]</area><text>wrong</text><area>[{"bbox":[0,0,0.5,0.5],"depth":0.3}]</area><text>fixed</text></think><answer>red</answer>)";
    case 2:
      return R"(<think><area>[{"bbox":[0,0,0.5,0.5],"depth":0.9}]</area><text>bad depth</text></think><answer>red shirt</answer>)";
    case 3:
      return "no tags at all";
    case 4:
      return R"(<think><area>[{"bbox":[0.1,0.1,0.6,0.6],"depth":0.31}]</area><text>near</text></think><answer>blue</answer>)";
    case 5:
      return R"(<think>broken</think><answer>red</answer>)";
    case 6:
      return R"(<think><area>[{"bbox":[0,0,0.5,0.5],"depth":0.3},{"bbox":[0.6,0.6,0.9,0.9],"depth":0.7}]</area><text>two</text></think><answer>the red one</answer>)";
    default:
      return R"(<think><area>[{"bbox":[0.5,0,1,0.5],"depth":0.7}]</area><text>right</text></think><answer>green</answer>)";
  }
}

inline nlohmann::json group_request(const std::string& sample_id, std::int64_t iteration, const nlohmann::json& depth_map,
                                    int offset = 0, std::size_t n = 8) {
  nlohmann::json completions = nlohmann::json::array();
  for (std::size_t i = 0; i < n; ++i) completions.push_back(completion(static_cast<int>(i) + offset));
  return {{"sample_id", sample_id},
          {"iteration", iteration},
          {"ground_truth",
           {{"question", "What color is the shirt?"},
            {"answer", "red"},
            {"boxes", {{0, 0, 0.5, 0.5}}},
            {"depth_map", depth_map}}},
          {"completions", completions}};
}

}  // namespace fixtures
